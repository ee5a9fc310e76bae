#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "episwitch/model.hpp"
#include "episwitch/rng.hpp"

namespace episwitch {

struct StepControl {
  // Effective step is min(h_max, 0.1 / C_F) for the flow and
  // min(h_max, 0.1 / max_xi |||A^xi|||_1) for the angular process.
  double h_max = 0.05;
};

struct PdmpPath {
  Vec times;                                // uniform grid (last point = T)
  std::vector<Vec> states;                  // x at grid times
  std::vector<int> envs;                    // environment at grid times (cadlag)
  std::vector<std::pair<double, int>> jumps;  // exact jump times, new env
  Vec radial_integral;   // int_0^t <1,F(X_s)>/||X_s|| ds at grid times, if tracked
  bool polar_tracked = false;
};

struct AngularPath {
  Vec times;
  std::vector<Vec> thetas;  // on the simplex
  std::vector<int> envs;
  Vec growth;               // S(t) = int_0^t G0(Theta_s, Xi_s) ds at grid times
  std::vector<std::pair<double, int>> jumps;
};

struct LinearPath {
  Vec times;
  std::vector<Vec> thetas;
  Vec lognorm;              // lognorm(t) = lognorm(0) + S(t), exactly
  std::vector<int> envs;
};

struct PolarPath {
  Vec times;
  Vec log_radius;
  std::vector<Vec> thetas;
  std::vector<int> envs;
  std::vector<std::pair<double, int>> jumps;
};

// psi_t^xi(x0): RK4 with fixed step; componentwise clamp for overshoot up to
// 1e-9, larger overshoot or NaN raises NumericalError.
Vec integrate_flow(const ModelSpec& spec, int env, const Vec& x0, double t,
                   const StepControl& step = {});

PdmpPath simulate_pdmp(const ModelSpec& spec, const Vec& x0, int env0, double T,
                       double output_dt, RngStream rng, bool track_polar = false,
                       const StepControl& step = {});

// Low-level driver: invokes visitor(t0, x_before, t1, x_after, env) on every
// integration substep.  Used for occupation-measure accumulation.
void simulate_pdmp_visit(
    const ModelSpec& spec, const Vec& x0, int env0, double T, RngStream rng,
    const StepControl& step,
    const std::function<void(double, const Vec&, double, const Vec&, int)>& visitor);

// Angular process on the simplex driven by the environment chain Q(0);
// S accumulated by Simpson on the RK4 half-step grid (exact for d = 1).
AngularPath simulate_angular(const ModelSpec& spec, const Vec& theta0, int env0,
                             double T, double output_dt, RngStream rng,
                             const StepControl& step = {});

// S(t) at the given increasing checkpoint times, without storing a path.
Vec angular_growth_at(const ModelSpec& spec, const Vec& theta0, int env0,
                      const Vec& checkpoints, RngStream rng,
                      const StepControl& step = {});

LinearPath simulate_linear(const ModelSpec& spec, const Vec& theta0, double logr0,
                           int env0, double T, double output_dt, RngStream rng,
                           const StepControl& step = {});

// Polar representation (log R, Theta); the recommended form for long
// subcritical runs (components floored at 1e-300 when forming F(rho theta)/rho).
PolarPath simulate_polar(const ModelSpec& spec, double rho0, const Vec& theta0,
                         int env0, double T, double output_dt, RngStream rng,
                         const StepControl& step = {});

}  // namespace episwitch
