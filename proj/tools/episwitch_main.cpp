// episwitch command line: simulation and numerical analysis of multitype SIS
// epidemics in randomly switched environments.
//
// Exit codes: 0 success, 1 usage error, 2 model/validation error,
// 3 numerical non-convergence.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "episwitch/chain.hpp"
#include "episwitch/errors.hpp"
#include "episwitch/experiments.hpp"
#include "episwitch/lyapunov.hpp"
#include "episwitch/model.hpp"
#include "episwitch/pdmp.hpp"
#include "episwitch/qsd.hpp"
#include "episwitch/spectral.hpp"
#include "episwitch/version.hpp"
#include "json.hpp"

namespace {

using namespace episwitch;

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "model configuration JSON")->required();
  cmd->add_option("--seed", args.seed, "base seed (64-bit)");
  cmd->add_option("--out", args.out_dir, "output directory");
}

ExperimentConfig base_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  cfg.model_path = args.config;
  cfg.out_dir = args.out_dir;
  cfg.seed = args.seed;
  return cfg;
}

int cmd_validate(const CommonArgs& args, int grid) {
  ModelSpec spec = model_from_json_file(args.config);
  ValidationReport rep = validate_model(spec, grid);
  std::cout << rep.to_string();
  return rep.all_passed() ? 0 : 2;
}

int cmd_chain(const CommonArgs& args, std::int64_t K, int reps, double x0, double horizon,
              const std::string& dump_path) {
  ModelSpec spec = model_from_json_file(args.config);
  const auto sizes = default_sizes(spec, K);
  ChainState init;
  init.env = 0;
  init.counts.resize(spec.dim());
  for (int i = 0; i < spec.dim(); ++i)
    init.counts[i] =
        static_cast<std::int64_t>(std::floor(x0 * static_cast<double>(sizes[i])));

  ExperimentConfig cfg = base_config(args);
  OutputWriter out(cfg.out_dir, cfg, "chain");
  if (!dump_path.empty()) {
    ChainOptions opts;
    if (horizon > 0.0) opts.horizon = horizon;
    ChainPath path = simulate_chain(spec, K, sizes, init, opts, RngStream(args.seed, 0));
    out.write_text(dump_path, chain_path_csv(path, init, sizes));
  }
  ExtinctionSummary s = monte_carlo_extinction(spec, K, sizes, init, reps, args.seed);
  out.write_text("chain_summary.csv", chain_summary_csv(K, s));
  out.finish();
  std::cout << chain_summary_csv(K, s);
  return 0;
}

int cmd_pdmp(const CommonArgs& args, double x0, double T, double dt, bool angular) {
  ModelSpec spec = model_from_json_file(args.config);
  ExperimentConfig cfg = base_config(args);
  OutputWriter out(cfg.out_dir, cfg, angular ? "pdmp --angular" : "pdmp");
  if (angular) {
    Vec th0(spec.dim(), 1.0 / spec.dim());
    AngularPath path = simulate_angular(spec, th0, 0, T, dt, RngStream(args.seed, 0));
    out.write_text("angular_path.csv", angular_path_csv(path));
  } else {
    Vec start(spec.dim(), x0);
    PdmpPath path = simulate_pdmp(spec, start, 0, T, dt, RngStream(args.seed, 0));
    out.write_text("pdmp_path.csv", pdmp_path_csv(path));
  }
  out.finish();
  return 0;
}

int cmd_lambda(const CommonArgs& args, double T, double burn_in, int batches) {
  ModelSpec spec = model_from_json_file(args.config);
  LambdaEstimate est =
      estimate_lambda(spec, T, burn_in, batches, RngStream(args.seed, 0));
  nlohmann::json j;
  j["lambda"] = est.value;
  j["half_width"] = est.half_width;
  j["T"] = est.T;
  j["burn_in"] = est.burn_in;
  j["n_batches"] = est.n_batches;
  std::cout << j.dump(2) << "\n";
  ExperimentConfig cfg = base_config(args);
  OutputWriter out(cfg.out_dir, cfg, "lambda");
  out.write_text("lambda.json", j.dump(2) + "\n");
  out.finish();
  return 0;
}

int cmd_gcurve(const CommonArgs& args, double pmin, double pmax, double pstep, int nrep) {
  ModelSpec spec = model_from_json_file(args.config);
  ExperimentConfig cfg = base_config(args);
  for (double p = pmin; p <= pmax + 1e-12; p += pstep) cfg.p_grid.push_back(p);
  cfg.mc.n_rep = nrep;
  GCurveStudy study = run_gcurve(cfg, spec);
  OutputWriter out(cfg.out_dir, cfg, "gcurve");
  out.write_text("gcurve.csv", gcurve_csv(study.curve));
  out.write_text("pstar.json", pstar_json(study.pstar));
  out.write_text("pstar_lower.json", pstar_json(study.pstar_lower));
  out.finish();
  std::cout << gcurve_csv(study.curve);
  return 0;
}

int cmd_pstar(const CommonArgs& args, double p_max, double tol, int nrep) {
  ModelSpec spec = model_from_json_file(args.config);
  McParams mc;
  mc.n_rep = nrep;
  PStarResult r = estimate_pstar(spec, p_max, tol, mc, RngStream(args.seed, 0));
  const std::string text = pstar_json(r);
  std::cout << text;
  ExperimentConfig cfg = base_config(args);
  OutputWriter out(cfg.out_dir, cfg, "pstar");
  out.write_text("pstar.json", text);
  out.finish();
  return 0;
}

int cmd_qsd(const CommonArgs& args, std::int64_t K, double tol, const std::string& csv_name) {
  ModelSpec spec = model_from_json_file(args.config);
  const auto sizes = default_sizes(spec, K);
  const StateIndex index = enumerate_states(spec, K, sizes);
  const KilledGenerator gen = build_killed_generator(spec, K, sizes, index);
  QsdResult q = compute_qsd(gen, tol);
  nlohmann::json j;
  j["K"] = K;
  j["lambda"] = q.lambda;
  j["residual"] = q.residual;
  j["iterations"] = q.iterations;
  j["converged"] = q.converged;
  std::cout << j.dump(2) << "\n";
  ExperimentConfig cfg = base_config(args);
  OutputWriter out(cfg.out_dir, cfg, "qsd");
  out.write_text(csv_name, qsd_csv(q, index));
  out.write_text("qsd_summary.json", j.dump(2) + "\n");
  out.finish();
  return q.converged ? 0 : 3;
}

int cmd_scaling(const CommonArgs& args, const std::vector<std::int64_t>& ladder,
                int mc_reps, double tol) {
  ModelSpec spec = model_from_json_file(args.config);
  ExperimentConfig cfg = base_config(args);
  cfg.k_ladder = ladder;
  cfg.mc_reps = mc_reps;
  cfg.qsd_tol = tol;
  ScalingStudy study = run_scaling_study(cfg, spec);
  OutputWriter out(cfg.out_dir, cfg, "scaling");
  out.write_text("scaling.csv", scaling_csv(study));
  out.finish();
  std::cout << scaling_csv(study);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multitype SIS epidemics in randomly switched environments"};
  app.set_version_flag("--version", episwitch::kVersion);
  app.require_subcommand(1);

  CommonArgs args;
  int grid = 21;
  std::int64_t K = 100;
  int reps = 100;
  double x0 = 0.5, horizon = 0.0, T = 1000.0, dt = 0.01, burn_in = 100.0;
  int batches = 20;
  double pmin = -2.0, pmax_grid = 2.0, pstep = 0.25;
  int nrep = 1000;
  double p_max = 20.0, tol = 1e-6, qsd_tol = 1e-10;
  std::string dump_path, csv_name = "qsd.csv";
  bool angular = false;
  std::vector<std::int64_t> ladder;

  auto* validate = app.add_subcommand("validate", "check the standing assumptions");
  add_common(validate, args);
  validate->add_option("--grid", grid, "probe points per axis");

  auto* chain = app.add_subcommand("chain", "simulate the finite-population chain");
  add_common(chain, args);
  chain->add_option("--K", K, "population size")->required();
  chain->add_option("--reps", reps, "Monte Carlo replicates");
  chain->add_option("--x0", x0, "initial infected fraction");
  chain->add_option("--horizon", horizon, "time horizon for the path dump (0: none)");
  chain->add_option("--dump-path", dump_path, "write one event path CSV");

  auto* pdmp = app.add_subcommand("pdmp", "simulate the limiting PDMP");
  add_common(pdmp, args);
  pdmp->add_option("--x0", x0, "initial proportion in every group");
  pdmp->add_option("--T", T, "horizon");
  pdmp->add_option("--dt", dt, "output grid step");
  pdmp->add_flag("--angular", angular, "simulate the angular process instead");

  auto* lambda = app.add_subcommand("lambda", "top Lyapunov exponent estimate");
  add_common(lambda, args);
  lambda->add_option("--T", T, "trajectory length");
  lambda->add_option("--burn-in", burn_in, "discarded initial stretch");
  lambda->add_option("--batches", batches, "batch count for the CI");

  auto* gcurve = app.add_subcommand("gcurve", "moment Lyapunov curve g(p)");
  add_common(gcurve, args);
  gcurve->add_option("--pmin", pmin, "grid start");
  gcurve->add_option("--pmax", pmax_grid, "grid end");
  gcurve->add_option("--pstep", pstep, "grid step");
  gcurve->add_option("--nrep", nrep, "Monte Carlo replicates per point");

  auto* pstar = app.add_subcommand("pstar", "threshold exponent p*");
  add_common(pstar, args);
  pstar->add_option("--p-max", p_max, "search bound");
  pstar->add_option("--tol", tol, "bracket width");
  pstar->add_option("--nrep", nrep, "Monte Carlo replicates per sign test");

  auto* qsd = app.add_subcommand("qsd", "quasi-stationary distribution");
  add_common(qsd, args);
  qsd->add_option("--K", K, "population size")->required();
  qsd->add_option("--tol", qsd_tol, "eigen-residual tolerance");
  qsd->add_option("--out-csv", csv_name, "weights CSV filename");

  auto* scaling = app.add_subcommand("scaling", "extinction-rate scaling study");
  add_common(scaling, args);
  scaling->add_option("--K-ladder", ladder, "population sizes")->required();
  scaling->add_option("--mc-reps", reps, "optional MC extinction replicates per K");
  scaling->add_option("--tol", qsd_tol, "eigen-residual tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(args, grid);
    if (chain->parsed()) return cmd_chain(args, K, reps, x0, horizon, dump_path);
    if (pdmp->parsed()) return cmd_pdmp(args, x0, T, dt, angular);
    if (lambda->parsed()) return cmd_lambda(args, T, burn_in, batches);
    if (gcurve->parsed()) return cmd_gcurve(args, pmin, pmax_grid, pstep, nrep);
    if (pstar->parsed()) return cmd_pstar(args, p_max, tol, nrep);
    if (qsd->parsed()) return cmd_qsd(args, K, qsd_tol, csv_name);
    if (scaling->parsed()) return cmd_scaling(args, ladder, reps, qsd_tol);
  } catch (const episwitch::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 2;
  } catch (const episwitch::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const episwitch::SizeError& e) {
    std::cerr << "size error: " << e.what() << "\n";
    return 2;
  } catch (const episwitch::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
