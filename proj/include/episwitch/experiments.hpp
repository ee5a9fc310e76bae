#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "episwitch/chain.hpp"
#include "episwitch/lyapunov.hpp"
#include "episwitch/model.hpp"
#include "episwitch/qsd.hpp"

namespace episwitch {

struct ExperimentConfig {
  std::string model_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  std::vector<std::int64_t> k_ladder;
  int mc_reps = 0;                 // optional MC extinction times in scaling runs
  double init_fraction = 0.5;      // x0 for MC extinction runs
  Vec p_grid;
  McParams mc;
  double qsd_tol = 1e-10;
  std::int64_t qsd_max_iter = 2000000;
  double pstar_p_max = 20.0;
  double pstar_tol = 1e-6;
};

// Writes <name> into the output directory and records it in the manifest.
// CSV numbers are printed with %.17g so reruns are byte identical.
class OutputWriter {
 public:
  OutputWriter(std::string out_dir, const ExperimentConfig& config,
               std::string command);
  void write_text(const std::string& name, const std::string& content);
  void finish();  // writes manifest.json

  static std::string format_double(double v);

 private:
  std::string dir_;
  std::string command_;
  std::string config_echo_;
  std::uint64_t seed_;
  std::vector<std::string> files_;
};

struct ScalingRow {
  std::int64_t K = 0;
  std::optional<double> lambda;  // exact route, when M fits the cap
  double residual = 0.0;
  std::int64_t iters = 0;
  std::optional<double> mc_mean_tau;
  std::optional<double> mc_se;
  std::string error;  // per-K failure, run continues
};

struct ScalingStudy {
  std::vector<ScalingRow> rows;
  bool persistent = false;
  double fitted_slope = 0.0;      // exponent of -log lambda vs log K (persistent)
  double slope_half_width = 0.0;  // 95% CI on the fitted slope
  double log_coefficient = 0.0;   // mean tau / log K (non-persistent)
};

ScalingStudy run_scaling_study(const ExperimentConfig& config, const ModelSpec& spec);
std::string scaling_csv(const ScalingStudy& s);

struct GCurveStudy {
  GCurve curve;
  PStarResult pstar;       // root of g(-p) when Lambda > 0
  PStarResult pstar_lower; // root of g(p) when Lambda < 0
};

GCurveStudy run_gcurve(const ExperimentConfig& config, const ModelSpec& spec);
std::string gcurve_csv(const GCurve& curve);
std::string pstar_json(const PStarResult& r);

// CSV dumps named in the module interfaces.
std::string chain_path_csv(const ChainPath& path, const ChainState& init,
                           const std::vector<std::int64_t>& sizes);
std::string chain_summary_csv(std::int64_t K, const ExtinctionSummary& s);
std::string pdmp_path_csv(const PdmpPath& path);
std::string angular_path_csv(const AngularPath& path);
std::string qsd_csv(const QsdResult& result, const StateIndex& index);

std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace episwitch
