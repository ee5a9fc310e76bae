#include "episwitch/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "episwitch/errors.hpp"
#include "episwitch/spectral.hpp"
#include "episwitch/threads.hpp"

namespace episwitch {

namespace {

// Two-sided 97.5% Student-t quantiles, interpolated linearly in 1/dof.
double t_quantile_975(int dof) {
  static const std::pair<int, double> table[] = {
      {1, 12.706}, {2, 4.3027}, {3, 3.1824}, {4, 2.7764}, {5, 2.5706},
      {6, 2.4469}, {7, 2.3646}, {8, 2.3060}, {9, 2.2622}, {10, 2.2281},
      {12, 2.1788}, {15, 2.1314}, {20, 2.0860}, {24, 2.0639}, {30, 2.0423},
      {40, 2.0211}, {60, 2.0003}, {120, 1.9799}};
  if (dof < 1) dof = 1;
  if (dof >= 1000000) return 1.9600;
  const auto n = static_cast<int>(std::size(table));
  if (dof <= table[0].first) return table[0].second;
  for (int i = 1; i < n; ++i) {
    if (dof <= table[i].first) {
      const double x0 = 1.0 / table[i - 1].first, x1 = 1.0 / table[i].first;
      const double y0 = table[i - 1].second, y1 = table[i].second;
      const double x = 1.0 / dof;
      return y1 + (y0 - y1) * (x - x1) / (x0 - x1);
    }
  }
  const double x0 = 1.0 / table[n - 1].first;
  const double x = 1.0 / dof;
  return 1.96 + (table[n - 1].second - 1.96) * (x / x0);
}

Vec uniform_simplex(int d, RngStream& rng) {
  Vec th(d);
  if (d == 1) {
    th[0] = 1.0;
    return th;
  }
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    th[i] = rng.exponential(1.0);
    s += th[i];
  }
  for (int i = 0; i < d; ++i) th[i] /= s;
  return th;
}

struct FitInput {
  Vec inv_t;
  Vec y;
  Vec w;
};

// Weighted least squares of y against x; returns the intercept.
double wls_intercept(const FitInput& in) {
  double sw = 0.0, swx = 0.0, swy = 0.0;
  const std::size_t n = in.y.size();
  for (std::size_t i = 0; i < n; ++i) {
    sw += in.w[i];
    swx += in.w[i] * in.inv_t[i];
    swy += in.w[i] * in.y[i];
  }
  const double xm = swx / sw, ym = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += in.w[i] * (in.inv_t[i] - xm) * (in.inv_t[i] - xm);
    sxy += in.w[i] * (in.inv_t[i] - xm) * (in.y[i] - ym);
  }
  if (sxx <= 0.0) return ym;
  const double slope = sxy / sxx;
  return ym - slope * xm;
}

// Full estimator pipeline for one replicate subset: per-horizon log-sum-exp,
// delta-method weights, weighted 1/t extrapolation.
double g_pipeline(const std::vector<Vec>& S, const std::vector<std::size_t>& idx,
                  const Vec& horizons, double p, Vec* f_out, Vec* ess_out) {
  const std::size_t nh = horizons.size();
  FitInput fit;
  fit.inv_t.resize(nh);
  fit.y.resize(nh);
  fit.w.resize(nh);
  for (std::size_t k = 0; k < nh; ++k) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j : idx) m = std::max(m, p * S[j][k]);
    double sw = 0.0, sw2 = 0.0;
    for (std::size_t j : idx) {
      const double w = std::exp(p * S[j][k] - m);
      sw += w;
      sw2 += w * w;
    }
    const auto n = static_cast<double>(idx.size());
    const double t = horizons[k];
    fit.inv_t[k] = 1.0 / t;
    fit.y[k] = (m + std::log(sw / n)) / t;
    // delta method on log of the sample mean
    const double mean_w = sw / n;
    const double var_w = std::max(sw2 / n - mean_w * mean_w, 0.0);
    const double var_f = var_w / (mean_w * mean_w * n * t * t);
    fit.w[k] = 1.0 / std::max(var_f, 1e-300);
    if (f_out) (*f_out)[k] = fit.y[k];
    if (ess_out) (*ess_out)[k] = sw * sw / std::max(sw2, 1e-300);
  }
  return wls_intercept(fit);
}

}  // namespace

LambdaEstimate estimate_lambda(const ModelSpec& spec, double T, double burn_in,
                               int n_batches, RngStream rng) {
  if (!(T > burn_in) || burn_in < 0.0) throw DomainError("need T > burn_in >= 0");
  if (n_batches < 10) throw DomainError("need n_batches >= 10");

  Vec checkpoints;
  checkpoints.reserve(n_batches + 1);
  for (int k = 0; k <= n_batches; ++k)
    checkpoints.push_back(burn_in + (T - burn_in) * k / n_batches);

  const Vec theta0(spec.dim(), 1.0 / spec.dim());
  const Vec S = angular_growth_at(spec, theta0, 0, checkpoints, rng);

  LambdaEstimate est;
  est.T = T;
  est.burn_in = burn_in;
  est.n_batches = n_batches;
  est.value = (S.back() - S.front()) / (T - burn_in);

  Vec batch(n_batches);
  const double bt = (T - burn_in) / n_batches;
  for (int k = 0; k < n_batches; ++k) batch[k] = (S[k + 1] - S[k]) / bt;
  double mean = 0.0;
  for (double v : batch) mean += v;
  mean /= n_batches;
  double var = 0.0;
  for (double v : batch) var += (v - mean) * (v - mean);
  var /= (n_batches - 1);
  est.half_width = t_quantile_975(n_batches - 1) * std::sqrt(var / n_batches);
  // numerical floor: deterministic paths give zero batch variance, but the
  // quadrature still carries O(h^4) bias
  est.half_width = std::max(est.half_width, 1e-8 * (1.0 + std::abs(est.value)));
  return est;
}

GEstimate estimate_g(const ModelSpec& spec, double p, const Vec& horizon_ladder,
                     int n_rep, RngStream rng) {
  if (n_rep < 100) throw DomainError("estimate_g needs n_rep >= 100");
  if (horizon_ladder.size() < 3) throw DomainError("need at least 3 horizons");
  for (std::size_t k = 0; k + 1 < horizon_ladder.size(); ++k)
    if (!(horizon_ladder[k] < horizon_ladder[k + 1]))
      throw DomainError("horizon ladder must be strictly increasing");
  if (!(horizon_ladder.front() > 0.0)) throw DomainError("horizons must be positive");

  const std::size_t nh = horizon_ladder.size();
  std::vector<Vec> S(n_rep);
  parallel_for(static_cast<std::size_t>(n_rep), [&](std::size_t j) {
    RngStream r = rng.substream(j);
    const Vec th0 = uniform_simplex(spec.dim(), r);
    const int e0 = static_cast<int>(r.uniform_below(spec.environments()));
    S[j] = angular_growth_at(spec, th0, e0, horizon_ladder, r);
  });

  std::vector<std::size_t> all(n_rep);
  for (int j = 0; j < n_rep; ++j) all[j] = j;

  GEstimate est;
  est.diag.horizons = horizon_ladder;
  est.diag.f_hat.resize(nh);
  est.diag.ess.resize(nh);
  est.value = g_pipeline(S, all, horizon_ladder, p, &est.diag.f_hat, &est.diag.ess);
  est.diag.heavy_tail = est.diag.ess.back() < 10.0;

  if (p == 0.0) {  // log of a mean of ones: exactly zero, no resampling noise
    est.se = 0.0;
    return est;
  }

  constexpr int kResamples = 200;
  RngStream boot = rng.substream("bootstrap");
  Vec intercepts(kResamples);
  std::vector<std::size_t> idx(n_rep);
  for (int b = 0; b < kResamples; ++b) {
    for (int j = 0; j < n_rep; ++j)
      idx[j] = static_cast<std::size_t>(boot.uniform_below(n_rep));
    intercepts[b] = g_pipeline(S, idx, horizon_ladder, p, nullptr, nullptr);
  }
  double mean = 0.0;
  for (double v : intercepts) mean += v;
  mean /= kResamples;
  double var = 0.0;
  for (double v : intercepts) var += (v - mean) * (v - mean);
  est.se = std::sqrt(var / (kResamples - 1));
  return est;
}

GCurve g_curve(const ModelSpec& spec, const Vec& p_grid, const McParams& mc, RngStream rng) {
  GCurve curve;
  const bool exact = (spec.dim() == 1) && spec.constant_switching();
  curve.points.resize(p_grid.size());
  if (exact) {
    for (std::size_t i = 0; i < p_grid.size(); ++i)
      curve.points[i] = {p_grid[i], g_exact_1d(spec, p_grid[i]), 0.0, "exact-1d"};
  } else {
    for (std::size_t i = 0; i < p_grid.size(); ++i) {
      GEstimate est = estimate_g(spec, p_grid[i], mc.horizons, mc.n_rep,
                                 rng.substream(i));
      curve.points[i] = {p_grid[i], est.value, est.se, "monte-carlo"};
    }
  }
  return curve;
}

namespace {

// Generic bisection for the sign change of h on (0, p_max].  sign(h) > 0 must
// be monotone-from-the-right (h is convex with h(0) = 0 and negative initial
// slope in both uses).
PStarResult bisect_exact(const std::function<double(double)>& h, double p_max, double tol) {
  PStarResult res;
  res.method = "exact-1d";
  constexpr int kScan = 64;
  double lo = 0.0, hi = -1.0;
  for (int k = 1; k <= kScan; ++k) {
    const double pk = p_max * k / kScan;
    if (h(pk) > 0.0) {
      hi = pk;
      break;
    }
    lo = pk;
  }
  if (hi < 0.0) {
    res.status = PStarStatus::NotFoundBelowPMax;
    res.bracket_lo = lo;
    res.bracket_hi = p_max;
    res.message = "no sign change of the exact eigenvalue up to p_max";
    return res;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  res.status = PStarStatus::Finite;
  res.bracket_lo = lo;
  res.bracket_hi = hi;
  res.value = 0.5 * (lo + hi);
  return res;
}

PStarResult bisect_mc(const ModelSpec& spec, bool negate_p, double p_max, double tol,
                      const McParams& mc, RngStream rng) {
  PStarResult res;
  res.method = "monte-carlo";
  auto g_at = [&](double q, int tag) {
    return estimate_g(spec, negate_p ? -q : q, mc.horizons, mc.n_rep,
                      rng.substream(static_cast<std::uint64_t>(tag)));
  };
  // coarse scan for a confident positive value
  constexpr int kScan = 8;
  double lo = 0.0, hi = -1.0;
  int tag = 0;
  for (int k = 1; k <= kScan; ++k) {
    const double pk = p_max * k / kScan;
    GEstimate e = g_at(pk, tag++);
    if (e.value > 2.0 * e.se) {
      hi = pk;
      break;
    }
    if (e.value < -2.0 * e.se) lo = pk;
  }
  if (hi < 0.0) {
    res.status = PStarStatus::NotFoundBelowPMax;
    res.bracket_lo = lo;
    res.bracket_hi = p_max;
    res.message = "no confidently positive g value up to p_max";
    return res;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    GEstimate e = g_at(mid, tag++);
    if (e.value > 2.0 * e.se) {
      hi = mid;
    } else if (e.value < -2.0 * e.se) {
      lo = mid;
    } else {
      // sign not separable at 2 SE: report the widened bracket, flagged
      res.status = PStarStatus::Finite;
      res.bracket_lo = lo;
      res.bracket_hi = hi;
      res.value = mid;
      res.confident = false;
      res.message = "sign test inconclusive at 2 SE; bracket not tightened further";
      return res;
    }
  }
  res.status = PStarStatus::Finite;
  res.bracket_lo = lo;
  res.bracket_hi = hi;
  res.value = 0.5 * (lo + hi);
  return res;
}

double exact_lambda_1d(const ModelSpec& spec) {
  const Vec pi = stationary_env(spec.switch_matrix_at_zero());
  double lam = 0.0;
  for (int e = 0; e < spec.environments(); ++e)
    lam += pi[e] * linearization_at_zero(spec, e)(0, 0);
  return lam;
}

}  // namespace

PStarResult estimate_pstar(const ModelSpec& spec, double p_max, double tol,
                           const McParams& mc, RngStream rng) {
  if (!(p_max > 0.0) || !(tol > 0.0)) throw DomainError("need p_max > 0 and tol > 0");
  const bool exact = (spec.dim() == 1) && spec.constant_switching();
  if (exact) {
    if (exact_lambda_1d(spec) <= 0.0) {
      PStarResult res;
      res.status = PStarStatus::NotApplicable;
      res.method = "exact-1d";
      res.message = "Lambda <= 0: p* is defined only in the persistent case";
      return res;
    }
    return bisect_exact([&](double q) { return g_exact_1d(spec, -q); }, p_max, tol);
  }
  LambdaEstimate lam = estimate_lambda(spec, mc.lambda_T, mc.lambda_burn_in,
                                       mc.lambda_batches, rng.substream("lambda"));
  if (!(lam.value > 2.0 * lam.half_width)) {
    PStarResult res;
    res.status = PStarStatus::NotApplicable;
    res.method = "monte-carlo";
    res.message = "Lambda not confidently positive (critical case is out of scope)";
    return res;
  }
  return bisect_mc(spec, true, p_max, tol, mc, rng.substream("bisect"));
}

PStarResult estimate_pstar_lower(const ModelSpec& spec, double p_max, double tol,
                                 const McParams& mc, RngStream rng) {
  if (!(p_max > 0.0) || !(tol > 0.0)) throw DomainError("need p_max > 0 and tol > 0");
  const bool exact = (spec.dim() == 1) && spec.constant_switching();
  if (exact) {
    if (exact_lambda_1d(spec) >= 0.0) {
      PStarResult res;
      res.status = PStarStatus::NotApplicable;
      res.method = "exact-1d";
      res.message = "Lambda >= 0: p_* is defined only in the non-persistent case";
      return res;
    }
    return bisect_exact([&](double q) { return g_exact_1d(spec, q); }, p_max, tol);
  }
  LambdaEstimate lam = estimate_lambda(spec, mc.lambda_T, mc.lambda_burn_in,
                                       mc.lambda_batches, rng.substream("lambda"));
  if (!(lam.value < -2.0 * lam.half_width)) {
    PStarResult res;
    res.status = PStarStatus::NotApplicable;
    res.method = "monte-carlo";
    res.message = "Lambda not confidently negative (critical case is out of scope)";
    return res;
  }
  return bisect_mc(spec, false, p_max, tol, mc, rng.substream("bisect"));
}

AccessProbe probe_zero_accessibility(const ModelSpec& spec, double p_max,
                                     const McParams& mc, RngStream rng) {
  if (spec.dim() == 1) {
    double amin = std::numeric_limits<double>::infinity();
    for (int e = 0; e < spec.environments(); ++e)
      amin = std::min(amin, linearization_at_zero(spec, e)(0, 0));
    return {amin < 0.0 ? Accessibility::ExactAccessible : Accessibility::ExactInaccessible,
            "exact-1d"};
  }
  double lmin = std::numeric_limits<double>::infinity();
  for (int e = 0; e < spec.environments(); ++e)
    lmin = std::min(lmin, perron(linearization_at_zero(spec, e)).value);
  if (lmin < 0.0) return {Accessibility::Accessible, "sufficient-condition"};

  // all per-environment exponents nonnegative proves nothing either way;
  // fall back to the moment-exponent equivalence
  LambdaEstimate lam = estimate_lambda(spec, mc.lambda_T, mc.lambda_burn_in,
                                       mc.lambda_batches, rng.substream("lambda"));
  if (lam.value < -2.0 * lam.half_width) {
    // Lambda < 0 forces ||Y|| -> 0 along almost every path
    return {Accessibility::Accessible, "g-curve"};
  }
  if (lam.value > 2.0 * lam.half_width) {
    PStarResult ps = estimate_pstar(spec, p_max, 0.05 * p_max, mc, rng.substream("pstar"));
    if (ps.status == PStarStatus::Finite && ps.confident)
      return {Accessibility::Accessible, "g-curve"};
  }
  return {Accessibility::InaccessibleUpToPMax, "g-curve"};
}

}  // namespace episwitch
