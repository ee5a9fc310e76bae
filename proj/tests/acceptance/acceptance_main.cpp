// Acceptance suite: one line per criterion, nonzero exit on any failure.
//
// Three checks (4, and one leg each of 8 and 9) probe regimes that plain
// Monte Carlo at the pinned sample sizes, or desk-scale population ladders,
// cannot reach; they are asserted as stated and report FAIL with the measured
// numbers when the gap shows up.  The printed diagnostics explain which leg
// failed and by how much.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "episwitch/chain.hpp"
#include "episwitch/experiments.hpp"
#include "episwitch/lyapunov.hpp"
#include "episwitch/model.hpp"
#include "episwitch/pdmp.hpp"
#include "episwitch/qsd.hpp"
#include "episwitch/spectral.hpp"
#include "../support/test_helpers.hpp"

using namespace episwitch;

namespace {

int g_failures = 0;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const auto start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

struct Timer {
  double t0 = now_seconds();
  double elapsed() const { return now_seconds() - t0; }
};

void report(int id, const char* name, bool pass, double seconds, const std::string& detail) {
  std::printf("[%2d] %s  %-28s (%6.2f s)  %s\n", id, pass ? "PASS" : "FAIL", name, seconds,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

ModelSpec load(const char* name) {
  return model_from_json_file(std::string(EPISWITCH_TEST_DATA_DIR) + "/" + name);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion_1_pstar_closed_form(const ModelSpec& model_b) {
  Timer timer;
  McParams mc;
  PStarResult r = estimate_pstar(model_b, 20.0, 1e-6, mc, RngStream(1, 0));
  const double t = timer.elapsed();
  const bool pass = r.status == PStarStatus::Finite && std::abs(r.value - 1.5) <= 1e-6 &&
                    r.method == "exact-1d" && t < 1.0;
  report(1, "closed-form p*", pass, t,
         "value=" + fmt(r.value) + " target=1.5 bracket=[" + fmt(r.bracket_lo) + "," +
             fmt(r.bracket_hi) + "]");
}

void criterion_2_exact_g(const ModelSpec& model_b) {
  Timer timer;
  const double g_sing = g_exact_1d(model_b, -1.5);
  const double g_one = g_exact_1d(model_b, 1.0);
  // derived oracle: largest root of x^2 + 0.5 x - 2.5 = 0 (char. poly of Q_1);
  // 1.35078 is that root printed to six digits
  const double root = (-0.5 + std::sqrt(0.25 + 10.0)) / 2.0;
  const double t = timer.elapsed();
  const bool pass = std::abs(g_sing) <= 1e-10 && std::abs(g_one - root) <= 1e-6 && t < 1.0;
  report(2, "exact 1d g(p)", pass, t,
         "g(-1.5)=" + fmt(g_sing) + " g(1)=" + fmt(g_one) + " root=" + fmt(root));
}

void criterion_3_lambda(const ModelSpec& model_b, const ModelSpec& model_n,
                        const ModelSpec& twotype) {
  Timer timer;
  LambdaEstimate lb = estimate_lambda(model_b, 1e5, 100.0, 20, RngStream(3, 1));
  const double tb = timer.elapsed();
  Timer timer_n;
  LambdaEstimate ln = estimate_lambda(model_n, 1e5, 100.0, 20, RngStream(3, 2));
  const double tn = timer_n.elapsed();
  Timer timer_c;
  LambdaEstimate lc = estimate_lambda(twotype, 1e5, 100.0, 20, RngStream(3, 3));
  const double tc = timer_c.elapsed();

  const bool pass_b = std::abs(lb.value - 0.75) <= 0.02 &&
                      std::abs(lb.value - 0.75) <= lb.half_width && tb < 30.0;
  const bool pass_n = std::abs(ln.value + 0.2) <= 0.02 && tn < 30.0;
  const bool pass_c = std::abs(lc.value - 1.0) <= 0.02 && tc < 30.0;
  report(3, "Lambda estimation", pass_b && pass_n && pass_c, tb + tn + tc,
         "B=" + fmt(lb.value) + "+-" + fmt(lb.half_width) + " N=" + fmt(ln.value) +
             " const=" + fmt(lc.value));
}

void criterion_4_mc_g_cross_validation(const ModelSpec& model_b) {
  Timer timer;
  const Vec ladder = {25.0, 50.0, 100.0, 200.0};
  bool pass = true;
  std::string detail;
  for (double p : {-2.0, -1.0, 1.0, 2.0}) {
    GEstimate est = estimate_g(model_b, p, ladder, 2000, RngStream(4, static_cast<std::uint64_t>(p + 8)));
    const double exact = g_exact_1d(model_b, p);
    const double gap = std::abs(est.value - exact);
    const bool ok = gap <= 3.0 * est.se;
    pass = pass && ok;
    detail += "p=" + fmt(p) + ":" + (ok ? "ok" : "off") + " |d|=" + fmt(gap) +
              " 3se=" + fmt(3.0 * est.se) + (est.diag.heavy_tail ? " (heavy-tail ESS<10)" : "") +
              "  ";
  }
  const double t = timer.elapsed();
  pass = pass && t < 120.0;
  report(4, "MC g cross-validation", pass, t, detail);
  if (!pass)
    std::printf(
        "     note: exponential reweighting at |p| >= 1 concentrates on environment\n"
        "     histories of probability ~exp(-0.38 t) and below; 2000 plain replicates\n"
        "     cannot reach them at horizons 25..200, so the estimator is biased toward\n"
        "     the sample extremes regardless of the horizon weighting.  The heavy-tail\n"
        "     diagnostic (ESS < 10) flags exactly this regime.\n");
}

void criterion_5_g_structure(const ModelSpec& model_b) {
  Timer timer;
  Vec g;
  for (int k = -30; k <= 30; ++k) g.push_back(g_exact_1d(model_b, k * 0.1));
  bool convex = true;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    const double dd = g[i + 1] - 2 * g[i] + g[i - 1];
    worst = std::min(worst, dd);
    if (dd < -1e-9) convex = false;
  }
  const double slope = (g_exact_1d(model_b, 0.1) - g_exact_1d(model_b, -0.1)) / 0.2;
  const bool slope_ok = std::abs(slope - 0.75) <= 1e-3;
  const double t = timer.elapsed();
  report(5, "g structure", convex && slope_ok, t,
         "min 2nd diff=" + fmt(worst) + " slope(0)=" + fmt(slope));
}

struct QsdLadder {
  std::vector<std::int64_t> ks;
  std::vector<QsdResult> results;
};

QsdLadder qsd_ladder(const ModelSpec& spec, const std::vector<std::int64_t>& ks, double tol) {
  QsdLadder out;
  out.ks = ks;
  for (std::int64_t K : ks) out.results.push_back(compute_qsd(spec, K, {K}, tol));
  return out;
}

void criterion_6_qsd_exactness(const ModelSpec& model_b, const QsdLadder& ladder_b) {
  Timer timer;
  Mat c1(1, 1);
  c1(0, 0) = 2.0;
  Mat q1(1, 1);
  ModelSpec two_state = ModelSpec::lajmanovich_yorke({c1}, {Vec{1.0}}, q1, Vec{1.0});
  QsdResult q = compute_qsd(two_state, 2, {2}, 1e-12);
  const double s2 = std::sqrt(2.0);
  bool pass = std::abs(q.lambda - (2.0 - s2)) <= 1e-10 &&
              std::abs(q.weights[0] - (2.0 - s2)) <= 1e-10 &&
              std::abs(q.weights[1] - (s2 - 1.0)) <= 1e-10;
  double worst_res = 0.0;
  for (const auto& r : ladder_b.results) {
    worst_res = std::max(worst_res, r.residual);
    pass = pass && r.converged && r.residual < 1e-10 && r.lambda > 0.0;
  }
  const double t = timer.elapsed();
  pass = pass && t < 60.0;
  report(6, "QSD exactness", pass, t,
         "lambda(K=2)=" + fmt(q.lambda) + " target=" + fmt(2.0 - s2) +
             " worst residual(K<=3200)=" + fmt(worst_res));
}

void criterion_7_extinction_rate_scaling(const QsdLadder& ladder_b) {
  Timer timer;
  double mx = 0.0, my = 0.0;
  const auto n = static_cast<double>(ladder_b.ks.size());
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ladder_b.ks.size(); ++i) {
    xs.push_back(std::log(static_cast<double>(ladder_b.ks[i])));
    ys.push_back(-std::log(ladder_b.results[i].lambda));
    mx += xs.back();
    my += ys.back();
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double t = timer.elapsed();
  const bool pass = slope >= 1.3 && slope <= 1.7 && t < 120.0;
  report(7, "extinction-rate scaling", pass, t,
         "slope of -log(lambda) vs log(K) on {200..3200} = " + fmt(slope) +
             ", window [1.3, 1.7]");
}

void criterion_8_qsd_mass_trends(const ModelSpec& model_b, const ModelSpec& model_n) {
  Timer timer;
  const std::vector<std::int64_t> ks = {100, 200, 400, 800, 1600};
  std::string detail;
  bool pass_b = true;
  {
    double prev = 2.0;
    std::string seq, seq_le;
    for (std::int64_t K : ks) {
      const StateIndex idx = enumerate_states(model_b, K, {K});
      QsdResult q = compute_qsd(model_b, K, {K}, 1e-11);
      const double m = qsd_mass_below(q, idx, {K}, 0.1);
      if (!(m < prev)) pass_b = false;
      prev = m;
      seq += fmt(m) + " ";
      // diagnostic: the closed half-line has no lattice boundary drift
      std::vector<std::int64_t> counts(1);
      int env;
      double mle = 0.0;
      for (std::int64_t j = 0; j < idx.M; ++j) {
        idx.decode(j, counts, env);
        if (static_cast<double>(counts[0]) / static_cast<double>(K) <= 0.1) mle += q.weights[j];
      }
      seq_le += fmt(mle) + " ";
    }
    detail = "B mass{<0.1}: " + seq + (pass_b ? "" : "(not strictly decreasing) ");
    if (!pass_b) detail += "[diagnostic mass{<=0.1}: " + seq_le + "] ";
  }
  bool pass_n = true;
  {
    double prev = -1.0, last = 0.0;
    std::string seq;
    for (std::int64_t K : ks) {
      const StateIndex idx = enumerate_states(model_n, K, {K});
      QsdResult q = compute_qsd(model_n, K, {K}, 1e-11);
      last = qsd_mass_below(q, idx, {K}, 0.05);
      if (!(last > prev)) pass_n = false;
      prev = last;
      seq += fmt(last) + " ";
    }
    if (last < 0.9) pass_n = false;
    detail += "N mass{<0.05}: " + seq;
  }
  const double t = timer.elapsed();
  report(8, "QSD persistence/degeneracy", pass_b && pass_n, t, detail);
  if (!pass_b)
    std::printf(
        "     note: with the strict cutoff the largest included state is 0.1 - 1/K,\n"
        "     which grows with K; the first ladder step gains ~6e-4 mass from that\n"
        "     boundary drift alone.  The closed-cutoff diagnostic above decreases\n"
        "     strictly, which is the persistence phenomenon itself.\n");
}

void criterion_9_extinction_time_laws(const ModelSpec& model_b, const ModelSpec& model_n) {
  Timer timer;
  bool pass_n = true;
  std::string detail;
  {
    double lo = 1e300, hi = 0.0;
    std::string seq;
    for (std::int64_t K : {100, 400, 1600}) {
      ChainState init{{K / 2}, 0, 0.0};
      ExtinctionSummary s = monte_carlo_extinction(model_n, K, {K}, init, 500,
                                                   9000 + static_cast<std::uint64_t>(K));
      const double ratio = s.mean / std::log(static_cast<double>(K));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      seq += fmt(ratio) + " ";
    }
    pass_n = hi / lo <= 1.5;
    detail = "N tau/logK: " + seq + "(max/min=" + fmt(hi / lo) + ") ";
  }
  bool pass_b = true;
  {
    std::vector<double> xs, ys;
    std::string seq;
    for (std::int64_t K : {25, 50, 100, 200}) {
      ChainState init{{K / 2}, 0, 0.0};
      ExtinctionSummary s = monte_carlo_extinction(model_b, K, {K}, init, 500,
                                                   9100 + static_cast<std::uint64_t>(K));
      xs.push_back(std::log(static_cast<double>(K)));
      ys.push_back(std::log(s.mean));
      seq += fmt(s.mean) + " ";
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= xs.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    pass_b = slope >= 1.2;
    detail += "B mean tau: " + seq + "fitted exponent=" + fmt(slope) + " (need >= 1.2)";
  }
  const double t = timer.elapsed();
  report(9, "extinction-time laws", pass_b && pass_n, t, detail);
  if (!pass_b)
    std::printf(
        "     note: the exact conditional mean extinction time (sparse solve of the\n"
        "     killed system, no sampling noise) already gives exponent 1.178 on\n"
        "     K in {25,50,100,200}; the ladder is pre-asymptotic for the K^1.5 law\n"
        "     (pairwise slopes 1.105, 1.175, 1.258 rising toward 1.5).\n");
}

void criterion_10_coupling_lln(const ModelSpec& model_b) {
  Timer timer;
  std::string detail;
  double prev = 2.0;
  bool pass = true;
  for (std::int64_t K : {100, 1000, 10000}) {
    int over = 0;
    const int reps = 200;
    for (int j = 0; j < reps; ++j) {
      CoupledResult res = coupled_paths(model_b, K, {K}, {0.5}, 0, 5.0,
                                        RngStream(10, static_cast<std::uint64_t>(j)));
      if (res.sup_distance > 0.1) ++over;
    }
    const double p = over / static_cast<double>(reps);
    if (!(p < prev)) pass = false;
    prev = p;
    detail += "K=" + std::to_string(K) + ":" + fmt(p) + " ";
  }
  const double t = timer.elapsed();
  pass = pass && t < 300.0;
  report(10, "coupling / LLN", pass, t, "P(sup d > 0.1): " + detail);
}

void criterion_11_pathwise_invariants(const ModelSpec& model_b) {
  Timer timer;
  bool pass = true;
  std::string detail;

  // norm envelope along a pdmp path
  {
    const double cf = model_b.constants().lipschitz_bound;
    PdmpPath path = simulate_pdmp(model_b, {0.5}, 0, 10.0, 0.01, RngStream(11, 0), true);
    for (std::size_t k = 0; k < path.times.size(); ++k) {
      const double n = l1_norm(path.states[k]);
      const double t = path.times[k];
      if (!(n >= 0.5 * std::exp(-cf * t) - 1e-12 && n <= 0.5 * std::exp(cf * t) + 1e-12))
        pass = false;
    }
    // radius vs the tracked integral
    double worst = 0.0;
    for (std::size_t k = 0; k < path.times.size(); ++k)
      worst = std::max(worst, std::abs(l1_norm(path.states[k]) -
                                       0.5 * std::exp(path.radial_integral[k])));
    if (worst > 1e-6) pass = false;
    detail += "envelope+radius ok to " + fmt(worst) + "; ";
  }

  // simplex preservation on a genuinely 2d angular path
  {
    Mat ca(2, 2), cb(2, 2), q(2, 2);
    ca(0, 1) = 2.0;
    ca(1, 0) = 2.0;
    cb(0, 1) = 0.3;
    cb(1, 0) = 0.2;
    cb(0, 0) = 0.5;
    cb(1, 1) = 0.8;
    q(0, 0) = -1.0;
    q(0, 1) = 1.0;
    q(1, 0) = 1.0;
    q(1, 1) = -1.0;
    ModelSpec two = ModelSpec::lajmanovich_yorke({ca, cb}, {Vec{1.0, 1.0}, Vec{1.5, 0.7}},
                                                 q, Vec{0.5, 0.5});
    AngularPath ang = simulate_angular(two, {0.02, 0.98}, 0, 100.0, 0.1, RngStream(12, 0));
    for (const auto& th : ang.thetas)
      if (!(th[0] >= 0.0 && th[1] >= 0.0 && std::abs(th[0] + th[1] - 1.0) <= 1e-12))
        pass = false;
    detail += "simplex ok; ";
  }

  // extinction from the QSD is Exp(lambda^K): KS at level 0.001, 1e4 samples
  {
    const std::int64_t K = 50;
    const StateIndex idx = enumerate_states(model_b, K, {K});
    QsdResult q = compute_qsd(model_b, K, {K}, 1e-12);
    RngStream draw(13, 0);
    const int n = 10000;
    std::vector<double> taus(n);
    std::vector<std::int64_t> counts(1);
    for (int j = 0; j < n; ++j) {
      int env;
      idx.decode(sample_qsd_state(q, draw), counts, env);
      ChainPath p = simulate_chain(model_b, K, {K}, {counts, env, 0.0},
                                   {.record_events = false},
                                   RngStream(14, static_cast<std::uint64_t>(j)));
      taus[j] = *p.extinction_time;
    }
    const double lam = q.lambda;
    const double d = testing::ks_statistic(
        taus, [lam](double t) { return 1.0 - std::exp(-lam * t); });
    const double stat = std::sqrt(static_cast<double>(n)) * d;
    if (stat >= testing::kKsCritical001) pass = false;
    detail += "KS sqrt(n)D=" + fmt(stat) + " (crit 1.9495)";
  }

  const double t = timer.elapsed();
  report(11, "pathwise invariants", pass, t, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite, episwitch\n");
  const ModelSpec model_b = load("model_b.json");
  const ModelSpec model_n = load("model_n.json");
  const ModelSpec twotype = load("model_twotype.json");

  criterion_1_pstar_closed_form(model_b);
  criterion_2_exact_g(model_b);
  criterion_3_lambda(model_b, model_n, twotype);
  criterion_4_mc_g_cross_validation(model_b);
  criterion_5_g_structure(model_b);

  Timer ladder_timer;
  const QsdLadder ladder_b = qsd_ladder(model_b, {200, 400, 800, 1600, 3200}, 1e-11);
  std::printf("     (QSD ladder K=200..3200 computed in %.2f s)\n", ladder_timer.elapsed());
  criterion_6_qsd_exactness(model_b, ladder_b);
  criterion_7_extinction_rate_scaling(ladder_b);
  criterion_8_qsd_mass_trends(model_b, model_n);
  criterion_9_extinction_time_laws(model_b, model_n);
  criterion_10_coupling_lln(model_b);
  criterion_11_pathwise_invariants(model_b);

  std::printf("%d of 11 criteria passed\n", 11 - g_failures);
  return g_failures;
}
