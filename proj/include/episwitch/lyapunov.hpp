#pragma once

#include <string>
#include <vector>

#include "episwitch/model.hpp"
#include "episwitch/pdmp.hpp"
#include "episwitch/rng.hpp"

namespace episwitch {

struct LambdaEstimate {
  double value = 0.0;
  double half_width = 0.0;  // 95% batch-means confidence half-width
  double T = 0.0;
  double burn_in = 0.0;
  int n_batches = 0;
};

// Ergodic average of G0 along one long angular path; CI from batch means.
LambdaEstimate estimate_lambda(const ModelSpec& spec, double T, double burn_in,
                               int n_batches, RngStream rng);

struct GDiagnostics {
  Vec horizons;
  Vec f_hat;            // per-horizon estimate of log E[exp(p S(t))]/t
  Vec ess;              // per-horizon effective sample size of exp(p S)
  bool heavy_tail = false;  // ESS < 10 at the largest horizon
};

struct GEstimate {
  double value = 0.0;  // intercept of the weighted fit of f_hat against 1/t
  double se = 0.0;     // replicate bootstrap, 200 resamples
  GDiagnostics diag;
};

// Monte Carlo moment-Lyapunov estimate over independent angular replicates
// started uniformly on the simplex with a uniform environment.
GEstimate estimate_g(const ModelSpec& spec, double p, const Vec& horizon_ladder,
                     int n_rep, RngStream rng);

struct GCurvePoint {
  double p = 0.0;
  double g = 0.0;
  double se = 0.0;
  std::string method;  // "exact-1d" or "monte-carlo"
};

struct GCurve {
  std::vector<GCurvePoint> points;
};

struct McParams {
  int n_rep = 1000;
  Vec horizons = {25.0, 50.0, 100.0, 200.0};
  double lambda_T = 20000.0;
  double lambda_burn_in = 100.0;
  int lambda_batches = 20;
};

GCurve g_curve(const ModelSpec& spec, const Vec& p_grid, const McParams& mc, RngStream rng);

enum class PStarStatus { Finite, NotFoundBelowPMax, NotApplicable };

struct PStarResult {
  PStarStatus status = PStarStatus::NotApplicable;
  double value = 0.0;       // midpoint of the final bracket when finite
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  std::string method;       // "exact-1d" or "monte-carlo"
  bool confident = true;    // false when an MC sign test could not separate
  std::string message;
};

// p* = inf{p > 0 : g(-p) > 0}; requires Lambda > 0 (else NotApplicable).
PStarResult estimate_pstar(const ModelSpec& spec, double p_max, double tol,
                           const McParams& mc, RngStream rng);

// p_* = inf{p > 0 : g(p) > 0}; requires Lambda < 0 (else NotApplicable).
PStarResult estimate_pstar_lower(const ModelSpec& spec, double p_max, double tol,
                                 const McParams& mc, RngStream rng);

enum class Accessibility {
  Accessible,
  InaccessibleUpToPMax,  // never a certificate
  ExactAccessible,       // d = 1 closed form
  ExactInaccessible,
};

struct AccessProbe {
  Accessibility verdict = Accessibility::InaccessibleUpToPMax;
  std::string method;  // "exact-1d", "sufficient-condition", or "g-curve"
};

AccessProbe probe_zero_accessibility(const ModelSpec& spec, double p_max,
                                     const McParams& mc, RngStream rng);

}  // namespace episwitch
