#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "episwitch/errors.hpp"
#include "episwitch/linalg.hpp"

namespace episwitch {

// Vector-valued rate callbacks: given (x, env) return all d coordinates.
using RateFamily = std::function<Vec(const Vec& x, int env)>;
using SwitchFamily = std::function<Mat(const Vec& x)>;

// Lajmanovich-Yorke rates: b_i(x,xi) = sum_j C^xi_ij x_j, d_i(x,xi) = D^xi_i.
struct LyRates {
  std::vector<Mat> C;  // one d x d nonnegative matrix per environment
  std::vector<Vec> D;  // one positive length-d vector per environment
};

struct MonotoneFlags {
  std::vector<bool> cooperative;               // per environment
  std::vector<bool> irreducible_interior;      // per environment
  std::vector<bool> strongly_subhomogeneous;   // per environment
  bool all() const;
};

// Analytic for the LY form, grid estimate x 1.1 otherwise (heuristic, not a
// proof constant; downstream uses are step-size bounds and sanity checks).
struct DerivedConstants {
  double lipschitz_bound = 0.0;  // C_F >= max_xi Lip(F^xi) in l1
  double rate_bound = 0.0;       // C_beta >= sup and Lip of all beta_{+-e_i}
};

struct ValidationItem {
  std::string assumption;  // e.g. "A1.2-3 (Db(0) nonnegative irreducible)"
  bool passed = false;
  std::string detail;      // witness point / quantity when failed
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_passed() const;
  std::string to_string() const;
};

// Full parameterization of the epidemic-in-environment system.  Immutable
// after construction; safe to share read-only across workers.
class ModelSpec {
 public:
  // Constant switch-rate matrix.
  static ModelSpec lajmanovich_yorke(std::vector<Mat> C, std::vector<Vec> D, Mat Q,
                                     Vec group_fractions);
  // State-dependent switching; q_bar must dominate all off-diagonal rates.
  static ModelSpec lajmanovich_yorke(std::vector<Mat> C, std::vector<Vec> D,
                                     SwitchFamily Q, double q_bar, Vec group_fractions);
  // Fully general rate families.  Smoothness is declared, not checked; the
  // validation ops probe assumptions on a grid.
  static ModelSpec general(int d, int num_env, RateFamily infection, RateFamily cure,
                           SwitchFamily Q, double q_bar, Vec group_fractions);

  int dim() const { return d_; }
  int environments() const { return num_env_; }
  const Vec& group_fractions() const { return alpha_; }
  bool is_ly() const { return ly_.has_value(); }
  const LyRates& ly() const { return *ly_; }
  bool constant_switching() const { return constant_q_; }

  // Infection pressures b_i(x, env), all coordinates at once.
  void infection(const Vec& x, int env, Vec& out) const;
  // Individual cure rates d_i(x, env).
  void cure(const Vec& x, int env, Vec& out) const;
  double switch_rate(const Vec& x, int from, int to) const;
  Mat switch_matrix(const Vec& x) const;
  const Mat& switch_matrix_at_zero() const { return q_zero_; }
  double switch_bound() const { return q_bar_; }

  const DerivedConstants& constants() const { return constants_; }

 private:
  ModelSpec() = default;
  void finalize();  // shared post-construction setup (q_zero_, constants_)

  int d_ = 0;
  int num_env_ = 0;
  Vec alpha_;
  std::optional<LyRates> ly_;
  RateFamily infection_;
  RateFamily cure_;
  SwitchFamily switching_;
  std::optional<Mat> q_const_;
  bool constant_q_ = false;
  double q_bar_ = 0.0;
  Mat q_zero_;
  DerivedConstants constants_;
};

// --- model_core operations ---------------------------------------------

// Probes Assumptions 1.1-1.3 on a grid with grid_resolution points per axis
// (full lattice capped at 1e5 samples, thereafter deterministic subsampling).
ValidationReport validate_model(const ModelSpec& spec, int grid_resolution = 21);

// F^xi(x), with F_i = (1-x_i) b_i(x,xi) - x_i d_i(x,xi).
Vec vector_field(const ModelSpec& spec, const Vec& x, int env);

// A^xi = DF^xi(0); exact (C - Diag D) for the LY form, one-sided finite
// differences with h = 1e-6 otherwise.  Must come out Metzler.
Mat linearization_at_zero(const ModelSpec& spec, int env);

enum class EventKind { Infect, Cure, Switch };

struct TransitionRate {
  EventKind kind;
  int index;    // group i for Infect/Cure, target environment for Switch
  double rate;  // > 0; zero-rate events are omitted
};

std::vector<TransitionRate> transition_rates(const ModelSpec& spec, std::int64_t K,
                                             const std::vector<std::int64_t>& sizes,
                                             const std::vector<std::int64_t>& counts,
                                             int env);

// Monotonicity/subhomogeneity flags: true by construction for the LY form
// with constant D, otherwise verified on a sample grid.
MonotoneFlags monotone_flags(const ModelSpec& spec, int grid_resolution = 9);

// Group sizes from the fractions by largest remainder; sums to K exactly.
std::vector<std::int64_t> default_sizes(const ModelSpec& spec, std::int64_t K);

// JSON model file (see README for the schema); unknown keys are rejected.
ModelSpec model_from_json_file(const std::string& path);
ModelSpec model_from_json(const std::string& text);

}  // namespace episwitch
