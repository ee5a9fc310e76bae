#include "episwitch/pdmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "episwitch/errors.hpp"
#include "episwitch/spectral.hpp"

namespace episwitch {

namespace {

constexpr double kOvershoot = 1e-9;
constexpr double kSimplexNeg = -1e-12;
constexpr double kSimplexNorm = 1e-10;
constexpr double kRhoFloor = 1e-300;

double flow_step_size(const ModelSpec& spec, const StepControl& step) {
  const double cf = std::max(spec.constants().lipschitz_bound, 1e-9);
  return std::min(step.h_max, 0.1 / cf);
}

// F^env without the public-API domain checks; x is kept inside the cube by
// the caller.
struct FlowField {
  const ModelSpec& spec;
  int env;
  mutable Vec b, c;

  explicit FlowField(const ModelSpec& s) : spec(s), env(0), b(s.dim()), c(s.dim()) {}

  void operator()(const Vec& x, Vec& out) const {
    spec.infection(x, env, b);
    spec.cure(x, env, c);
    for (int i = 0; i < spec.dim(); ++i) out[i] = (1.0 - x[i]) * b[i] - x[i] * c[i];
  }
};

template <typename Field>
struct Rk4 {
  Vec k1, k2, k3, k4, tmp;

  explicit Rk4(std::size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}

  void step(const Field& f, Vec& x, double h) {
    const std::size_t n = x.size();
    f(x, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    f(tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
};

void clamp_to_cube(Vec& x) {
  for (double& v : x) {
    if (std::isnan(v)) throw NumericalError("flow integration produced NaN");
    if (v < 0.0) {
      if (v < -kOvershoot) throw NumericalError("flow overshoot below 0 beyond 1e-9");
      v = 0.0;
    } else if (v > 1.0) {
      if (v > 1.0 + kOvershoot) throw NumericalError("flow overshoot above 1 beyond 1e-9");
      v = 1.0;
    }
  }
}

double radial_rate(const ModelSpec& spec, const FlowField& f, const Vec& x, Vec& scratch) {
  double nx = 0.0;
  for (double v : x) nx += v;
  if (nx <= 0.0) return 0.0;
  f(x, scratch);
  double s = 0.0;
  for (double v : scratch) s += v;
  return s / nx;
}

// Environment jump sampling:
//  - constant Q: exact exponential clock per environment;
//  - state-dependent Q: thinning at rate q_bar (|E|-1), target uniform among
//    the non-current environments, acceptance u q_bar < q(x, from, target).
struct EnvSampler {
  const ModelSpec& spec;
  RngStream rng;
  bool exact;
  double thin_rate;

  EnvSampler(const ModelSpec& s, RngStream r)
      : spec(s), rng(r), exact(s.constant_switching()),
        thin_rate(s.switch_bound() * (s.environments() - 1)) {}

  double next_time(double t, int env) {
    if (spec.environments() == 1) return std::numeric_limits<double>::infinity();
    if (exact) {
      const double rate = -spec.switch_matrix_at_zero()(env, env);
      if (rate <= 0.0) return std::numeric_limits<double>::infinity();
      return t + rng.exponential(rate);
    }
    if (thin_rate <= 0.0) return std::numeric_limits<double>::infinity();
    return t + rng.exponential(thin_rate);
  }

  // Returns the new environment, or -1 when a thinning candidate is rejected.
  int resolve(const Vec& x, int env) {
    const int ne = spec.environments();
    if (exact) {
      const Mat& q = spec.switch_matrix_at_zero();
      double total = -q(env, env);
      double u = rng.uniform01() * total;
      for (int e = 0; e < ne; ++e) {
        if (e == env) continue;
        u -= q(env, e);
        if (u < 0.0) return e;
      }
      for (int e = ne - 1; e >= 0; --e)
        if (e != env && q(env, e) > 0.0) return e;
      return -1;
    }
    const auto k = static_cast<int>(rng.uniform_below(ne - 1));
    const int target = (k < env) ? k : k + 1;
    const double u = rng.uniform01();
    return (u * spec.switch_bound() < spec.switch_rate(x, env, target)) ? target : -1;
  }
};

}  // namespace

Vec integrate_flow(const ModelSpec& spec, int env, const Vec& x0, double t,
                   const StepControl& step) {
  if (env < 0 || env >= spec.environments()) throw DomainError("invalid environment");
  if (t < 0.0) throw DomainError("integration time must be nonnegative");
  if (static_cast<int>(x0.size()) != spec.dim()) throw DomainError("x0 has wrong dimension");
  Vec x = x0;
  for (double v : x)
    if (!(v >= -kOvershoot && v <= 1.0 + kOvershoot))
      throw DomainError("x0 outside [0,1]^d");
  clamp_to_cube(x);
  if (t == 0.0) return x;

  const double h = flow_step_size(spec, step);
  const auto n_steps = static_cast<std::size_t>(std::ceil(t / h));
  const double hs = t / static_cast<double>(n_steps);
  FlowField f(spec);
  f.env = env;
  Rk4<FlowField> rk(x.size());
  for (std::size_t k = 0; k < n_steps; ++k) {
    rk.step(f, x, hs);
    clamp_to_cube(x);
  }
  return x;
}

void simulate_pdmp_visit(
    const ModelSpec& spec, const Vec& x0, int env0, double T, RngStream rng,
    const StepControl& step,
    const std::function<void(double, const Vec&, double, const Vec&, int)>& visitor) {
  if (env0 < 0 || env0 >= spec.environments()) throw DomainError("invalid environment");
  if (static_cast<int>(x0.size()) != spec.dim()) throw DomainError("x0 has wrong dimension");
  Vec x = x0;
  clamp_to_cube(x);
  int env = env0;
  double t = 0.0;
  const double h = flow_step_size(spec, step);
  FlowField f(spec);
  f.env = env;
  Rk4<FlowField> rk(x.size());
  EnvSampler sampler(spec, rng);
  double t_env = sampler.next_time(0.0, env);
  Vec x_prev(x.size());

  while (t < T) {
    const double t_stop = std::min(t_env, T);
    while (t < t_stop) {
      const double dt = std::min(h, t_stop - t);
      x_prev = x;
      rk.step(f, x, dt);
      clamp_to_cube(x);
      visitor(t, x_prev, t + dt, x, env);
      t += dt;
    }
    if (t_env <= T && t >= t_env) {
      const int target = sampler.resolve(x, env);
      if (target >= 0) {
        env = target;
        f.env = env;
      }
      t_env = sampler.next_time(t, env);
    }
  }
}

PdmpPath simulate_pdmp(const ModelSpec& spec, const Vec& x0, int env0, double T,
                       double output_dt, RngStream rng, bool track_polar,
                       const StepControl& step) {
  if (env0 < 0 || env0 >= spec.environments()) throw DomainError("invalid environment");
  if (!(T >= 0.0) || !(output_dt > 0.0)) throw DomainError("need T >= 0 and output_dt > 0");
  if (static_cast<int>(x0.size()) != spec.dim()) throw DomainError("x0 has wrong dimension");
  Vec x = x0;
  clamp_to_cube(x);
  int env = env0;
  double t = 0.0;

  PdmpPath path;
  path.polar_tracked = track_polar;
  auto record = [&](double tt, const Vec& xx, int ee, double integral) {
    path.times.push_back(tt);
    path.states.push_back(xx);
    path.envs.push_back(ee);
    if (track_polar) path.radial_integral.push_back(integral);
  };

  const double h = flow_step_size(spec, step);
  FlowField f(spec);
  f.env = env;
  Rk4<FlowField> rk(x.size());
  EnvSampler sampler(spec, rng);
  double t_env = sampler.next_time(0.0, env);
  double next_out = output_dt;
  double integral = 0.0;
  Vec mid(x.size()), scratch(x.size());

  record(0.0, x, env, 0.0);
  while (t < T) {
    const double t_stop = std::min({t_env, T, next_out});
    while (t < t_stop) {
      const double dt = std::min(h, t_stop - t);
      if (track_polar) {
        // Simpson on two RK4 half-steps, consistent with the integrator order.
        const double g0 = radial_rate(spec, f, x, scratch);
        mid = x;
        rk.step(f, mid, 0.5 * dt);
        clamp_to_cube(mid);
        const double gm = radial_rate(spec, f, mid, scratch);
        x = mid;
        rk.step(f, x, 0.5 * dt);
        clamp_to_cube(x);
        const double g1 = radial_rate(spec, f, x, scratch);
        integral += dt / 6.0 * (g0 + 4.0 * gm + g1);
      } else {
        rk.step(f, x, dt);
        clamp_to_cube(x);
      }
      t += dt;
    }
    if (t_env <= std::min(T, next_out) && t >= t_env) {
      const int target = sampler.resolve(x, env);
      if (target >= 0) {
        env = target;
        f.env = env;
        path.jumps.emplace_back(t, env);
      }
      t_env = sampler.next_time(t, env);
    }
    if (t >= next_out - 1e-15 && next_out <= T) {
      record(next_out, x, env, integral);
      next_out += output_dt;
    }
  }
  if (path.times.back() < T) record(T, x, env, integral);
  return path;
}

namespace {

// Angular dynamics theta' = H0(theta, env) driven by the chain Q(0).
struct AngularField {
  const std::vector<Mat>& A;
  int env = 0;

  void operator()(const Vec& th, Vec& out) const {
    const Mat& a = A[env];
    const std::size_t d = th.size();
    double g = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += a(i, j) * th[j];
      out[i] = s;
      g += s;
    }
    for (std::size_t i = 0; i < d; ++i) out[i] -= g * th[i];
  }

  double growth(const Vec& th) const {
    const Mat& a = A[env];
    double g = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) g += a(i, j) * th[j];
    return g;
  }
};

void renormalize_simplex(Vec& th) {
  double s = 0.0;
  for (double& v : th) {
    if (std::isnan(v)) throw NumericalError("angular integration produced NaN");
    if (v < 0.0) {
      if (v < kSimplexNeg) throw NumericalError("simplex overshoot beyond -1e-12");
      v = 0.0;
    }
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexNorm)
    throw NumericalError("simplex norm drifted beyond 1e-10 in one step");
  for (double& v : th) v /= s;
}

double angular_step_size(const std::vector<Mat>& A, const StepControl& step) {
  double amax = 0.0;
  for (const Mat& a : A)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) col += std::abs(a(i, j));
      amax = std::max(amax, col);
    }
  return std::min(step.h_max, 0.1 / std::max(amax, 1e-9));
}

// Shared angular driver; sample(t, theta, env, S) is called on each checkpoint.
void run_angular(const ModelSpec& spec, const Vec& theta0, int env0, double T,
                 RngStream rng, const StepControl& step, const Vec& checkpoints,
                 const std::function<void(double, const Vec&, int, double)>& sample,
                 std::vector<std::pair<double, int>>* jumps) {
  const int d = spec.dim();
  if (static_cast<int>(theta0.size()) != d) throw DomainError("theta0 has wrong dimension");
  if (env0 < 0 || env0 >= spec.environments()) throw DomainError("invalid environment");
  double s0 = 0.0;
  for (double v : theta0) {
    if (v < -1e-12) throw DomainError("theta0 must lie on the simplex");
    s0 += v;
  }
  if (std::abs(s0 - 1.0) > 1e-9) throw DomainError("theta0 must have unit l1 norm");

  std::vector<Mat> A;
  A.reserve(spec.environments());
  for (int e = 0; e < spec.environments(); ++e) A.push_back(linearization_at_zero(spec, e));
  const Mat& q0 = spec.switch_matrix_at_zero();

  Vec th = theta0;
  renormalize_simplex(th);
  int env = env0;
  double t = 0.0, S = 0.0;
  std::size_t ck = 0;

  AngularField f{A, env};
  Rk4<AngularField> rk(th.size());
  Vec mid(th.size());

  auto env_holding = [&](int e) {
    const double rate = -q0(e, e);
    return rate > 0.0 ? rng.exponential(rate) : std::numeric_limits<double>::infinity();
  };
  auto env_target = [&](int e) {
    double u = rng.uniform01() * (-q0(e, e));
    for (int k = 0; k < spec.environments(); ++k) {
      if (k == e) continue;
      u -= q0(e, k);
      if (u < 0.0) return k;
    }
    return e;
  };

  const double h = angular_step_size(A, step);
  const bool scalar = (d == 1);  // theta == {1}, H0 == 0, G0 piecewise constant
  double t_env = t + env_holding(env);

  while (ck < checkpoints.size() && checkpoints[ck] <= 0.0) {
    sample(0.0, th, env, S);
    ++ck;
  }
  while (t < T) {
    double t_stop = std::min(t_env, T);
    if (ck < checkpoints.size()) t_stop = std::min(t_stop, checkpoints[ck]);
    if (scalar) {
      S += f.growth(th) * (t_stop - t);
      t = t_stop;
    } else {
      while (t < t_stop) {
        const double dt = std::min(h, t_stop - t);
        const double g0 = f.growth(th);
        mid = th;
        rk.step(f, mid, 0.5 * dt);
        renormalize_simplex(mid);
        const double gm = f.growth(mid);
        th = mid;
        rk.step(f, th, 0.5 * dt);
        renormalize_simplex(th);
        S += dt / 6.0 * (g0 + 4.0 * gm + f.growth(th));
        t += dt;
      }
    }
    if (t >= t_env && t_env <= T) {
      env = env_target(env);
      f.env = env;
      if (jumps) jumps->emplace_back(t, env);
      t_env = t + env_holding(env);
    }
    while (ck < checkpoints.size() && t >= checkpoints[ck] - 1e-15) {
      sample(checkpoints[ck], th, env, S);
      ++ck;
    }
  }
}

}  // namespace

AngularPath simulate_angular(const ModelSpec& spec, const Vec& theta0, int env0,
                             double T, double output_dt, RngStream rng,
                             const StepControl& step) {
  if (!(output_dt > 0.0)) throw DomainError("output_dt must be positive");
  Vec grid;
  for (double tt = 0.0; tt <= T + 1e-12; tt += output_dt) grid.push_back(std::min(tt, T));
  if (grid.back() < T) grid.push_back(T);
  AngularPath path;
  run_angular(spec, theta0, env0, T, rng, step, grid,
              [&](double t, const Vec& th, int env, double S) {
                path.times.push_back(t);
                path.thetas.push_back(th);
                path.envs.push_back(env);
                path.growth.push_back(S);
              },
              &path.jumps);
  return path;
}

Vec angular_growth_at(const ModelSpec& spec, const Vec& theta0, int env0,
                      const Vec& checkpoints, RngStream rng, const StepControl& step) {
  Vec out;
  out.reserve(checkpoints.size());
  const double T = checkpoints.empty() ? 0.0 : checkpoints.back();
  run_angular(spec, theta0, env0, T, rng, step, checkpoints,
              [&](double, const Vec&, int, double S) { out.push_back(S); }, nullptr);
  return out;
}

LinearPath simulate_linear(const ModelSpec& spec, const Vec& theta0, double logr0,
                           int env0, double T, double output_dt, RngStream rng,
                           const StepControl& step) {
  AngularPath ang = simulate_angular(spec, theta0, env0, T, output_dt, rng, step);
  LinearPath lin;
  lin.times = ang.times;
  lin.thetas = std::move(ang.thetas);
  lin.envs = std::move(ang.envs);
  lin.lognorm.resize(ang.growth.size());
  for (std::size_t k = 0; k < ang.growth.size(); ++k) lin.lognorm[k] = logr0 + ang.growth[k];
  return lin;
}

PolarPath simulate_polar(const ModelSpec& spec, double rho0, const Vec& theta0,
                         int env0, double T, double output_dt, RngStream rng,
                         const StepControl& step) {
  if (!(rho0 > 0.0)) throw DomainError("rho0 must be positive");
  if (!(output_dt > 0.0)) throw DomainError("output_dt must be positive");
  const int d = spec.dim();

  // State z = (theta_1..theta_d, log rho); F~ = F(rho theta)/rho extends
  // continuously to rho = 0 as A^xi theta.
  struct PolarField {
    const ModelSpec& spec;
    int env = 0;
    mutable Vec xtmp, b, c, ftil;

    explicit PolarField(const ModelSpec& s)
        : spec(s), xtmp(s.dim()), b(s.dim()), c(s.dim()), ftil(s.dim()) {}

    void operator()(const Vec& z, Vec& out) const {
      const int d = spec.dim();
      const double rho = std::max(std::exp(z[d]), kRhoFloor);
      for (int i = 0; i < d; ++i) xtmp[i] = std::min(1.0, std::max(0.0, rho * z[i]));
      spec.infection(xtmp, env, b);
      spec.cure(xtmp, env, c);
      double g = 0.0;
      for (int i = 0; i < d; ++i) {
        ftil[i] = ((1.0 - xtmp[i]) * b[i] - xtmp[i] * c[i]) / rho;
        g += ftil[i];
      }
      for (int i = 0; i < d; ++i) out[i] = ftil[i] - g * z[i];
      out[d] = g;
    }
  };

  Vec z(d + 1);
  for (int i = 0; i < d; ++i) z[i] = theta0[i];
  z[d] = std::log(rho0);
  int env = env0;
  double t = 0.0;

  PolarPath path;
  auto record = [&](double tt) {
    path.times.push_back(tt);
    path.log_radius.push_back(z[d]);
    path.thetas.push_back(Vec(z.begin(), z.begin() + d));
    path.envs.push_back(env);
  };

  PolarField f(spec);
  f.env = env;
  Rk4<PolarField> rk(z.size());
  EnvSampler sampler(spec, rng);
  // State-dependent switch rates are evaluated at x = rho theta.
  const double h = flow_step_size(spec, step);
  double t_env = sampler.next_time(0.0, env);
  double next_out = output_dt;
  Vec xcur(d);

  auto renorm = [&]() {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      if (std::isnan(z[i]) || std::isnan(z[d]))
        throw NumericalError("polar integration produced NaN");
      if (z[i] < 0.0) {
        if (z[i] < kSimplexNeg * 1e3)  // polar steps tolerate a bit more drift
          throw NumericalError("polar simplex overshoot");
        z[i] = 0.0;
      }
      s += z[i];
    }
    for (int i = 0; i < d; ++i) z[i] /= s;
    z[d] += std::log(s);  // keep rho theta invariant under renormalization
  };

  record(0.0);
  while (t < T) {
    const double t_stop = std::min({t_env, T, next_out});
    while (t < t_stop) {
      const double dt = std::min(h, t_stop - t);
      rk.step(f, z, dt);
      renorm();
      t += dt;
    }
    if (t_env <= std::min(T, next_out) && t >= t_env) {
      const double rho = std::exp(z[d]);
      for (int i = 0; i < d; ++i) xcur[i] = std::min(1.0, std::max(0.0, rho * z[i]));
      const int target = sampler.resolve(xcur, env);
      if (target >= 0) {
        env = target;
        f.env = env;
        path.jumps.emplace_back(t, env);
      }
      t_env = sampler.next_time(t, env);
    }
    if (t >= next_out - 1e-15 && next_out <= T) {
      record(next_out);
      next_out += output_dt;
    }
  }
  if (path.times.back() < T) record(T);
  return path;
}

}  // namespace episwitch
