#include <cmath>

#include "doctest.h"
#include "episwitch/errors.hpp"
#include "episwitch/lyapunov.hpp"
#include "episwitch/model.hpp"
#include "episwitch/spectral.hpp"

using namespace episwitch;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

Mat mat1(double a) {
  Mat m(1, 1);
  m(0, 0) = a;
  return m;
}

ModelSpec load(const char* name) {
  return model_from_json_file(std::string(EPISWITCH_TEST_DATA_DIR) + "/" + name);
}

McParams quick_mc() {
  McParams mc;
  mc.n_rep = 400;
  mc.horizons = {10.0, 20.0, 40.0};
  mc.lambda_T = 5000.0;
  mc.lambda_burn_in = 50.0;
  return mc;
}

}  // namespace

TEST_SUITE_BEGIN("lyapunov");

TEST_CASE("lambda estimates match the averaged exponents") {
  LambdaEstimate b = estimate_lambda(load("model_b.json"), 20000.0, 100.0, 20,
                                     RngStream(2024, 0));
  CHECK(std::abs(b.value - 0.75) < 0.05);
  CHECK(b.half_width > 0.0);

  LambdaEstimate n = estimate_lambda(load("model_n.json"), 20000.0, 100.0, 20,
                                     RngStream(2024, 1));
  CHECK(std::abs(n.value - (-0.2)) < 0.02);
}

TEST_CASE("lambda in a constant environment equals the perron eigenvalue") {
  ModelSpec spec = load("model_twotype.json");
  LambdaEstimate est = estimate_lambda(spec, 500.0, 20.0, 10, RngStream(7, 0));
  CHECK(std::abs(est.value - 1.0) <= est.half_width + 1e-9);
  CHECK(std::abs(est.value - 1.0) < 1e-6);
}

TEST_CASE("lambda rejects bad arguments") {
  CHECK_THROWS_AS(estimate_lambda(load("model_b.json"), 10.0, 20.0, 20, RngStream(1, 0)),
                  DomainError);
  CHECK_THROWS_AS(estimate_lambda(load("model_b.json"), 100.0, 1.0, 5, RngStream(1, 0)),
                  DomainError);
}

TEST_CASE("g estimate is exactly zero at p = 0") {
  GEstimate est = estimate_g(load("model_b.json"), 0.0, {10.0, 20.0, 40.0}, 200,
                             RngStream(5, 0));
  CHECK(est.value == 0.0);
  CHECK(est.se == 0.0);
}

TEST_CASE("g estimate cross-validates in the well-sampled regime") {
  // small |p| keeps the exponential reweighting within Monte Carlo reach
  ModelSpec spec = load("model_b.json");
  for (double p : {-0.25, 0.25}) {
    GEstimate est = estimate_g(spec, p, {25.0, 50.0, 100.0, 200.0}, 2000,
                               RngStream(99, p > 0 ? 1 : 2));
    const double exact = g_exact_1d(spec, p);
    CHECK(std::abs(est.value - exact) < std::max(4.0 * est.se, 0.02));
    CHECK(est.diag.heavy_tail == (est.diag.ess.back() < 10.0));
  }
}

TEST_CASE("heavy-tail diagnostics fire where plain Monte Carlo saturates") {
  GEstimate est = estimate_g(load("model_b.json"), 2.0, {25.0, 50.0, 100.0, 200.0}, 500,
                             RngStream(3, 0));
  CHECK(est.diag.heavy_tail);
  CHECK(est.diag.ess.back() < 10.0);
}

TEST_CASE("g estimator validates its inputs") {
  ModelSpec spec = load("model_b.json");
  CHECK_THROWS_AS(estimate_g(spec, 1.0, {10.0, 20.0, 40.0}, 50, RngStream(1, 0)),
                  DomainError);
  CHECK_THROWS_AS(estimate_g(spec, 1.0, {10.0, 20.0}, 200, RngStream(1, 0)), DomainError);
  CHECK_THROWS_AS(estimate_g(spec, 1.0, {10.0, 5.0, 40.0}, 200, RngStream(1, 0)),
                  DomainError);
}

TEST_CASE("exact route finds the closed-form threshold exponent") {
  PStarResult r = estimate_pstar(load("model_b.json"), 20.0, 1e-8, quick_mc(),
                                 RngStream(1, 0));
  REQUIRE(r.status == PStarStatus::Finite);
  CHECK(r.method == "exact-1d");
  CHECK(std::abs(r.value - 1.5) < 1e-7);
  CHECK(r.bracket_hi - r.bracket_lo <= 1e-8);
}

TEST_CASE("strongly supercritical model has no finite threshold exponent") {
  PStarResult r = estimate_pstar(load("model_s.json"), 20.0, 1e-6, quick_mc(),
                                 RngStream(1, 0));
  CHECK(r.status == PStarStatus::NotFoundBelowPMax);
}

TEST_CASE("non-persistent model makes p* not applicable") {
  PStarResult r = estimate_pstar(load("model_n.json"), 20.0, 1e-6, quick_mc(),
                                 RngStream(1, 0));
  CHECK(r.status == PStarStatus::NotApplicable);
}

TEST_CASE("p_* for the non-persistent model solves the exact eigen equation") {
  // det(Q_p) = 0.4 p - 0.12 p^2 vanishes at p = 10/3
  PStarResult r = estimate_pstar_lower(load("model_n.json"), 20.0, 1e-8, quick_mc(),
                                       RngStream(1, 0));
  REQUIRE(r.status == PStarStatus::Finite);
  CHECK(std::abs(r.value - 10.0 / 3.0) < 1e-7);

  PStarResult rb = estimate_pstar_lower(load("model_b.json"), 20.0, 1e-6, quick_mc(),
                                        RngStream(1, 0));
  CHECK(rb.status == PStarStatus::NotApplicable);
}

TEST_CASE("pathwise-decreasing linearization never crosses") {
  // both A^xi < 0: ||Y|| decreases along every path, so g(p) < 0 for p > 0
  ModelSpec spec = ModelSpec::lajmanovich_yorke(
      {mat1(0.4), mat1(0.5)}, {Vec{1.0}, Vec{1.0}}, mat2(-1, 1, 1, -1), Vec{1.0});
  PStarResult r = estimate_pstar_lower(spec, 20.0, 1e-6, quick_mc(), RngStream(1, 0));
  CHECK(r.status == PStarStatus::NotFoundBelowPMax);
}

TEST_CASE("accessibility probe on the scalar reference models") {
  AccessProbe b = probe_zero_accessibility(load("model_b.json"), 20.0, quick_mc(),
                                           RngStream(1, 0));
  CHECK(b.verdict == Accessibility::ExactAccessible);
  AccessProbe s = probe_zero_accessibility(load("model_s.json"), 20.0, quick_mc(),
                                           RngStream(1, 0));
  CHECK(s.verdict == Accessibility::ExactInaccessible);
}

TEST_CASE("probe reports the sufficient condition in higher dimension") {
  // second environment has a strictly stable linearization
  ModelSpec spec = ModelSpec::lajmanovich_yorke(
      {mat2(0, 2, 2, 0), mat2(0, 0.1, 0.1, 0)}, {Vec{1.0, 1.0}, Vec{1.0, 1.0}},
      mat2(-1, 1, 1, -1), Vec{0.5, 0.5});
  AccessProbe probe = probe_zero_accessibility(spec, 20.0, quick_mc(), RngStream(1, 0));
  CHECK(probe.verdict == Accessibility::Accessible);
  CHECK(probe.method == "sufficient-condition");
}

TEST_CASE("g curve derivative at zero matches lambda on the exact route") {
  ModelSpec spec = load("model_b.json");
  const double slope = (g_exact_1d(spec, 0.05) - g_exact_1d(spec, -0.05)) / 0.1;
  CHECK(std::abs(slope - 0.75) < 1e-3);
}

TEST_CASE("g curve assembly picks the right method") {
  ModelSpec spec = load("model_b.json");
  GCurve exact = g_curve(spec, {-1.0, 0.0, 1.0}, quick_mc(), RngStream(1, 0));
  for (const auto& pt : exact.points) CHECK(pt.method == "exact-1d");
  CHECK(exact.points[1].g == 0.0);

  ModelSpec two = load("model_twotype.json");
  GCurve mc = g_curve(two, {0.25}, quick_mc(), RngStream(1, 0));
  CHECK(mc.points[0].method == "monte-carlo");
  // constant environment: g(p) = p * Lambda exactly (deterministic growth)
  CHECK(std::abs(mc.points[0].g - 0.25) < 0.05);
}

TEST_CASE("monte carlo g curve satisfies the structure bounds within noise") {
  ModelSpec two = load("model_twotype.json");
  McParams mc = quick_mc();
  mc.n_rep = 300;
  Vec grid = {-0.4, -0.2, 0.0, 0.2, 0.4};
  GCurve curve = g_curve(two, grid, mc, RngStream(8, 0));
  for (std::size_t i = 1; i + 1 < curve.points.size(); ++i) {
    const double second_diff = curve.points[i + 1].g - 2.0 * curve.points[i].g +
                               curve.points[i - 1].g;
    const double se = 2.0 * (curve.points[i + 1].se + curve.points[i].se +
                             curve.points[i - 1].se);
    CHECK(second_diff >= -se - 1e-9);
  }
}

TEST_SUITE_END();
