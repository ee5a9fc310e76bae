#include "episwitch/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "episwitch/errors.hpp"
#include "episwitch/spectral.hpp"
#include "episwitch/version.hpp"
#include "json.hpp"

namespace episwitch {

namespace {

std::string fmt(double v) { return OutputWriter::format_double(v); }

}  // namespace

std::string OutputWriter::format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

OutputWriter::OutputWriter(std::string out_dir, const ExperimentConfig& config,
                           std::string command)
    : dir_(std::move(out_dir)), command_(std::move(command)), seed_(config.seed) {
  std::filesystem::create_directories(dir_);
  if (!config.model_path.empty()) {
    std::ifstream in(config.model_path);
    std::stringstream ss;
    ss << in.rdbuf();
    config_echo_ = ss.str();
  }
}

void OutputWriter::write_text(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::path(dir_) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path.string());
  out << content;
  files_.push_back(name);
}

void OutputWriter::finish() {
  nlohmann::json m;
  m["version"] = kVersion;
  m["command"] = command_;
  m["seed"] = seed_;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(RngStream::fnv1a64(config_echo_)));
  m["config_hash"] = hash;
  m["config"] = config_echo_;
  m["files"] = files_;
  const auto path = std::filesystem::path(dir_) / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  out << m.dump(2) << "\n";
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return RngStream::fnv1a64(ss.str());
}

ScalingStudy run_scaling_study(const ExperimentConfig& config, const ModelSpec& spec) {
  if (config.k_ladder.empty()) throw DomainError("scaling study needs a K ladder");
  ScalingStudy study;

  // persistence from the exact 1d route when available, else one long path
  if (spec.dim() == 1 && spec.constant_switching()) {
    const Vec pi = stationary_env(spec.switch_matrix_at_zero());
    double lam = 0.0;
    for (int e = 0; e < spec.environments(); ++e)
      lam += pi[e] * linearization_at_zero(spec, e)(0, 0);
    study.persistent = lam > 0.0;
  } else {
    LambdaEstimate lam =
        estimate_lambda(spec, config.mc.lambda_T, config.mc.lambda_burn_in,
                        config.mc.lambda_batches, RngStream(config.seed, 0).substream("lambda"));
    study.persistent = lam.value > 0.0;
  }

  for (std::int64_t K : config.k_ladder) {
    ScalingRow row;
    row.K = K;
    try {
      const auto sizes = default_sizes(spec, K);
      const StateIndex index = enumerate_states(spec, K, sizes);
      const KilledGenerator gen = build_killed_generator(spec, K, sizes, index);
      QsdResult q = compute_qsd(gen, config.qsd_tol, config.qsd_max_iter);
      row.lambda = q.lambda;
      row.residual = q.residual;
      row.iters = q.iterations;
      if (!q.converged) row.error = "unconverged";
    } catch (const SizeError& e) {
      row.error = e.what();
    } catch (const NumericalError& e) {
      row.error = e.what();
    }
    if (config.mc_reps > 1) {
      try {
        const auto sizes = default_sizes(spec, K);
        ChainState init;
        init.env = 0;
        init.counts.resize(spec.dim());
        for (int i = 0; i < spec.dim(); ++i)
          init.counts[i] = static_cast<std::int64_t>(
              std::floor(config.init_fraction * static_cast<double>(sizes[i])));
        const std::uint64_t mc_seed = RngStream::splitmix64(
            config.seed ^ RngStream::splitmix64(static_cast<std::uint64_t>(K) ^
                                                RngStream::fnv1a64("scaling-mc")));
        ExtinctionSummary s =
            monte_carlo_extinction(spec, K, sizes, init, config.mc_reps, mc_seed);
        row.mc_mean_tau = s.mean;
        row.mc_se = s.se;
      } catch (const NumericalError& e) {
        if (row.error.empty()) row.error = e.what();
      }
    }
    study.rows.push_back(std::move(row));
  }

  // least-squares slope of -log(lambda) against log(K)
  std::vector<double> lx, ly;
  for (const auto& row : study.rows)
    if (row.lambda && *row.lambda > 0.0) {
      lx.push_back(std::log(static_cast<double>(row.K)));
      ly.push_back(-std::log(*row.lambda));
    }
  if (lx.size() >= 2) {
    const auto n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxx += (lx[i] - mx) * (lx[i] - mx);
      sxy += (lx[i] - mx) * (ly[i] - my);
    }
    study.fitted_slope = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double r = ly[i] - my - study.fitted_slope * (lx[i] - mx);
      ss += r * r;
    }
    if (lx.size() > 2) {
      const double se = std::sqrt(ss / (n - 2.0) / sxx);
      study.slope_half_width = 1.96 * se;
    }
  }

  // non-persistent summary: mean tau / log K averaged over the ladder
  if (!study.persistent && config.mc_reps > 1) {
    double acc = 0.0;
    int cnt = 0;
    for (const auto& row : study.rows)
      if (row.mc_mean_tau) {
        acc += *row.mc_mean_tau / std::log(static_cast<double>(row.K));
        ++cnt;
      }
    if (cnt > 0) study.log_coefficient = acc / cnt;
  }
  return study;
}

std::string scaling_csv(const ScalingStudy& s) {
  std::ostringstream os;
  os << "K,lambda,residual,iters,mc_mean_tau,mc_se,error\n";
  for (const auto& row : s.rows) {
    os << row.K << ",";
    os << (row.lambda ? fmt(*row.lambda) : "") << ",";
    os << fmt(row.residual) << "," << row.iters << ",";
    os << (row.mc_mean_tau ? fmt(*row.mc_mean_tau) : "") << ",";
    os << (row.mc_se ? fmt(*row.mc_se) : "") << ",";
    os << row.error << "\n";
  }
  os << "# " << (s.persistent ? "persistent" : "non-persistent")
     << ",slope=" << fmt(s.fitted_slope) << ",slope_ci=" << fmt(s.slope_half_width)
     << ",log_coefficient=" << fmt(s.log_coefficient) << "\n";
  return os.str();
}

GCurveStudy run_gcurve(const ExperimentConfig& config, const ModelSpec& spec) {
  if (config.p_grid.empty()) throw DomainError("gcurve needs a p grid");
  GCurveStudy study;
  RngStream rng(config.seed, 0);
  study.curve = g_curve(spec, config.p_grid, config.mc, rng.substream("gcurve"));
  study.pstar = estimate_pstar(spec, config.pstar_p_max, config.pstar_tol, config.mc,
                               rng.substream("pstar"));
  study.pstar_lower = estimate_pstar_lower(spec, config.pstar_p_max, config.pstar_tol,
                                           config.mc, rng.substream("pstar-lower"));
  return study;
}

std::string gcurve_csv(const GCurve& curve) {
  std::ostringstream os;
  os << "p,g,se,method\n";
  for (const auto& pt : curve.points)
    os << fmt(pt.p) << "," << fmt(pt.g) << "," << fmt(pt.se) << "," << pt.method << "\n";
  return os.str();
}

std::string pstar_json(const PStarResult& r) {
  nlohmann::json j;
  switch (r.status) {
    case PStarStatus::Finite:
      j["status"] = "finite";
      j["value"] = r.value;
      break;
    case PStarStatus::NotFoundBelowPMax:
      j["status"] = "not-found-below-p-max";
      break;
    case PStarStatus::NotApplicable:
      j["status"] = "not-applicable";
      break;
  }
  j["bracket"] = {r.bracket_lo, r.bracket_hi};
  j["method"] = r.method;
  j["confident"] = r.confident;
  if (!r.message.empty()) j["message"] = r.message;
  return j.dump(2) + "\n";
}

std::string chain_path_csv(const ChainPath& path, const ChainState& init,
                           const std::vector<std::int64_t>& sizes) {
  std::ostringstream os;
  const int d = static_cast<int>(sizes.size());
  os << "t,event";
  for (int i = 0; i < d; ++i) os << ",n_" << (i + 1);
  os << ",env\n";
  std::vector<std::int64_t> n = init.counts;
  int env = init.env;
  auto emit = [&](double t, const char* ev) {
    os << fmt(t) << "," << ev;
    for (int i = 0; i < d; ++i) os << "," << n[i];
    os << "," << (env + 1) << "\n";
  };
  emit(init.time, "init");
  for (const auto& e : path.events) {
    switch (e.kind) {
      case EventKind::Infect:
        ++n[e.index];
        emit(e.time, "infect");
        break;
      case EventKind::Cure:
        --n[e.index];
        emit(e.time, "cure");
        break;
      case EventKind::Switch:
        env = e.index;
        emit(e.time, "switch");
        break;
    }
  }
  return os.str();
}

std::string chain_summary_csv(std::int64_t K, const ExtinctionSummary& s) {
  std::ostringstream os;
  os << "K,n_rep,mean_tau,se_tau,q05,q50,q95,truncated\n";
  os << K << "," << s.n_rep << "," << fmt(s.mean) << "," << fmt(s.se) << "," << fmt(s.q05)
     << "," << fmt(s.q50) << "," << fmt(s.q95) << "," << s.truncated << "\n";
  return os.str();
}

std::string pdmp_path_csv(const PdmpPath& path) {
  std::ostringstream os;
  const int d = path.states.empty() ? 0 : static_cast<int>(path.states[0].size());
  os << "t";
  for (int i = 0; i < d; ++i) os << ",x_" << (i + 1);
  os << ",env\n";
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    os << fmt(path.times[k]);
    for (int i = 0; i < d; ++i) os << "," << fmt(path.states[k][i]);
    os << "," << (path.envs[k] + 1) << "\n";
  }
  return os.str();
}

std::string angular_path_csv(const AngularPath& path) {
  std::ostringstream os;
  const int d = path.thetas.empty() ? 0 : static_cast<int>(path.thetas[0].size());
  os << "t";
  for (int i = 0; i < d; ++i) os << ",theta_" << (i + 1);
  os << ",S,env\n";
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    os << fmt(path.times[k]);
    for (int i = 0; i < d; ++i) os << "," << fmt(path.thetas[k][i]);
    os << "," << fmt(path.growth[k]) << "," << (path.envs[k] + 1) << "\n";
  }
  return os.str();
}

std::string qsd_csv(const QsdResult& result, const StateIndex& index) {
  std::ostringstream os;
  for (int i = 0; i < index.d; ++i) os << "n_" << (i + 1) << ",";
  os << "env,weight\n";
  std::vector<std::int64_t> n(index.d);
  int env;
  for (std::int64_t j = 0; j < index.M; ++j) {
    index.decode(j, n, env);
    for (int i = 0; i < index.d; ++i) os << n[i] << ",";
    os << (env + 1) << "," << fmt(result.weights[j]) << "\n";
  }
  return os.str();
}

}  // namespace episwitch
