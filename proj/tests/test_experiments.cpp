#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "episwitch/errors.hpp"
#include "episwitch/experiments.hpp"

using namespace episwitch;

namespace {

std::string data_path(const char* name) {
  return std::string(EPISWITCH_TEST_DATA_DIR) + "/" + name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("experiments");

TEST_CASE("gcurve study on the exact route") {
  ExperimentConfig cfg;
  cfg.model_path = data_path("model_b.json");
  cfg.seed = 7;
  for (double p = -2.0; p <= 2.0 + 1e-9; p += 0.5) cfg.p_grid.push_back(p);
  ModelSpec spec = model_from_json_file(cfg.model_path);
  GCurveStudy study = run_gcurve(cfg, spec);

  REQUIRE(study.curve.points.size() == 9);
  for (const auto& pt : study.curve.points) CHECK(pt.method == "exact-1d");
  CHECK(study.curve.points[4].g == 0.0);  // p = 0
  for (std::size_t i = 1; i + 1 < study.curve.points.size(); ++i)
    CHECK(study.curve.points[i + 1].g - 2 * study.curve.points[i].g +
              study.curve.points[i - 1].g >=
          -1e-9);
  REQUIRE(study.pstar.status == PStarStatus::Finite);
  CHECK(std::abs(study.pstar.value - 1.5) < 1e-6);
  CHECK(study.pstar_lower.status == PStarStatus::NotApplicable);

  const std::string csv = gcurve_csv(study.curve);
  CHECK(csv.rfind("p,g,se,method\n", 0) == 0);
  CHECK(csv.find("exact-1d") != std::string::npos);
  const std::string js = pstar_json(study.pstar);
  CHECK(js.find("\"finite\"") != std::string::npos);
}

TEST_CASE("scaling study emits rows and a slope") {
  ExperimentConfig cfg;
  cfg.model_path = data_path("model_b.json");
  cfg.k_ladder = {50, 100, 200};
  cfg.qsd_tol = 1e-10;
  ModelSpec spec = model_from_json_file(cfg.model_path);
  ScalingStudy study = run_scaling_study(cfg, spec);
  REQUIRE(study.rows.size() == 3);
  CHECK(study.persistent);
  for (const auto& row : study.rows) {
    REQUIRE(row.lambda.has_value());
    CHECK(*row.lambda > 0.0);
    CHECK(row.residual < 1e-10);
  }
  CHECK(study.fitted_slope > 0.5);
  const std::string csv = scaling_csv(study);
  CHECK(csv.rfind("K,lambda,residual,iters", 0) == 0);
}

TEST_CASE("scaling study keeps going past per-K failures") {
  ExperimentConfig cfg;
  cfg.model_path = data_path("model_b.json");
  cfg.k_ladder = {50, 5000000, 100};
  ModelSpec spec = model_from_json_file(cfg.model_path);
  ScalingStudy study = run_scaling_study(cfg, spec);
  REQUIRE(study.rows.size() == 3);
  CHECK(study.rows[0].lambda.has_value());
  CHECK_FALSE(study.rows[1].lambda.has_value());
  CHECK_FALSE(study.rows[1].error.empty());
  CHECK(study.rows[2].lambda.has_value());
}

TEST_CASE("empty ladder is a usage error") {
  ExperimentConfig cfg;
  cfg.model_path = data_path("model_b.json");
  ModelSpec spec = model_from_json_file(cfg.model_path);
  CHECK_THROWS_AS(run_scaling_study(cfg, spec), DomainError);
}

TEST_CASE("outputs are byte identical across reruns and carry a manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "episwitch_test_out";
  std::filesystem::remove_all(dir);

  ExperimentConfig cfg;
  cfg.model_path = data_path("model_b.json");
  cfg.out_dir = dir.string();
  cfg.seed = 11;
  for (double p = -1.0; p <= 1.0 + 1e-9; p += 0.5) cfg.p_grid.push_back(p);
  ModelSpec spec = model_from_json_file(cfg.model_path);

  auto run_once = [&]() {
    GCurveStudy study = run_gcurve(cfg, spec);
    OutputWriter out(cfg.out_dir, cfg, "gcurve");
    out.write_text("gcurve.csv", gcurve_csv(study.curve));
    out.finish();
    return slurp(dir / "gcurve.csv");
  };
  const std::string first = run_once();
  const std::string second = run_once();
  CHECK(first == second);

  const std::string manifest = slurp(dir / "manifest.json");
  CHECK(manifest.find("config_hash") != std::string::npos);
  CHECK(manifest.find("\"seed\": 11") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv formats match the documented headers") {
  ExtinctionSummary s;
  s.mean = 1.5;
  s.n_rep = 10;
  const std::string csv = chain_summary_csv(100, s);
  CHECK(csv.rfind("K,n_rep,mean_tau,se_tau,q05,q50,q95,truncated\n", 0) == 0);
  CHECK(csv.find("100,10,1.5") != std::string::npos);
}

TEST_SUITE_END();
