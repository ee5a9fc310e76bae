#include "episwitch/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "episwitch/errors.hpp"
#include "episwitch/threads.hpp"

namespace episwitch {

namespace {

struct RateTable {
  Vec infect;  // per group
  Vec cure;    // per group
  Vec to_env;  // per target environment (0 for the current one)
  double total = 0.0;
};

void fill_rates(const ModelSpec& spec, const std::vector<std::int64_t>& sizes,
                const std::vector<std::int64_t>& n, int env, const Vec& x, Vec& b, Vec& c,
                RateTable& rt, bool include_switches) {
  const int d = spec.dim();
  spec.infection(x, env, b);
  spec.cure(x, env, c);
  rt.total = 0.0;
  for (int i = 0; i < d; ++i) {
    rt.infect[i] = (n[i] < sizes[i]) ? static_cast<double>(sizes[i]) * (1.0 - x[i]) * b[i] : 0.0;
    rt.cure[i] = (n[i] > 0) ? static_cast<double>(sizes[i]) * x[i] * c[i] : 0.0;
    rt.total += rt.infect[i] + rt.cure[i];
  }
  if (include_switches) {
    for (int e = 0; e < spec.environments(); ++e) {
      rt.to_env[e] = (e == env) ? 0.0 : spec.switch_rate(x, env, e);
      rt.total += rt.to_env[e];
    }
  } else {
    std::fill(rt.to_env.begin(), rt.to_env.end(), 0.0);
  }
}

void check_init(const ModelSpec& spec, std::int64_t K, const std::vector<std::int64_t>& sizes,
                const ChainState& init) {
  const int d = spec.dim();
  if (static_cast<int>(sizes.size()) != d) throw DomainError("sizes must have length d");
  if (std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}) != K)
    throw DomainError("group sizes must sum to K");
  if (static_cast<int>(init.counts.size()) != d) throw DomainError("init counts must have length d");
  for (int i = 0; i < d; ++i)
    if (init.counts[i] < 0 || init.counts[i] > sizes[i])
      throw DomainError("initial counts out of range");
  if (init.env < 0 || init.env >= spec.environments()) throw DomainError("invalid environment");
}

}  // namespace

ChainPath simulate_chain(const ModelSpec& spec, std::int64_t K,
                         const std::vector<std::int64_t>& sizes, const ChainState& init,
                         const ChainOptions& opts, RngStream rng) {
  check_init(spec, K, sizes, init);
  const int d = spec.dim();
  const int ne = spec.environments();

  std::vector<std::int64_t> n = init.counts;
  int env = init.env;
  double t = init.time;

  ChainPath path;
  path.events_recorded = opts.record_events;
  for (double rho : opts.thresholds) path.entrances.push_back({rho, {}, {}});

  Vec x(d);
  double norm = 0.0;
  std::int64_t total_count = 0;
  for (int i = 0; i < d; ++i) {
    x[i] = static_cast<double>(n[i]) / static_cast<double>(sizes[i]);
    norm += x[i];
    total_count += n[i];
  }
  auto update_entrances = [&](double tt) {
    for (auto& e : path.entrances) {
      if (!e.down && norm <= e.rho) e.down = tt;
      if (!e.up && norm >= e.rho) e.up = tt;
    }
  };
  update_entrances(t);
  if (total_count == 0) path.extinction_time = t;

  Vec b(d), c(d);
  RateTable rt{Vec(d), Vec(d), Vec(ne), 0.0};

  while (true) {
    if (path.extinction_time && !opts.horizon) {
      path.cause = TerminalCause::Absorbed;
      break;
    }
    fill_rates(spec, sizes, n, env, x, b, c, rt, ne > 1);
    if (rt.total <= 0.0) {
      // nothing can fire any more (single environment, all counts at 0)
      if (opts.horizon) {
        t = *opts.horizon;
        path.cause = path.extinction_time ? TerminalCause::Absorbed : TerminalCause::Horizon;
      } else {
        path.cause = TerminalCause::Absorbed;
      }
      break;
    }
    const double dt = rng.exponential(rt.total);
    if (opts.horizon && t + dt > *opts.horizon) {
      t = *opts.horizon;
      path.cause = path.extinction_time ? TerminalCause::Absorbed : TerminalCause::Horizon;
      break;
    }
    t += dt;

    double u = rng.uniform01() * rt.total;
    EventKind kind = EventKind::Switch;
    int index = -1;
    for (int i = 0; i < d; ++i) {
      u -= rt.infect[i];
      if (u < 0.0) {
        kind = EventKind::Infect;
        index = i;
        break;
      }
    }
    if (index < 0) {
      for (int i = 0; i < d; ++i) {
        u -= rt.cure[i];
        if (u < 0.0) {
          kind = EventKind::Cure;
          index = i;
          break;
        }
      }
    }
    if (index < 0) {
      for (int e = 0; e < ne; ++e) {
        u -= rt.to_env[e];
        if (u < 0.0) {
          kind = EventKind::Switch;
          index = e;
          break;
        }
      }
      if (index < 0) {  // guard against rounding at the upper edge
        for (int e = ne - 1; e >= 0; --e)
          if (rt.to_env[e] > 0.0) {
            index = e;
            break;
          }
      }
    }

    switch (kind) {
      case EventKind::Infect:
        ++n[index];
        ++total_count;
        x[index] = static_cast<double>(n[index]) / static_cast<double>(sizes[index]);
        norm += 1.0 / static_cast<double>(sizes[index]);
        break;
      case EventKind::Cure:
        --n[index];
        --total_count;
        x[index] = static_cast<double>(n[index]) / static_cast<double>(sizes[index]);
        norm -= 1.0 / static_cast<double>(sizes[index]);
        break;
      case EventKind::Switch:
        env = index;
        break;
    }
    ++path.event_count;
    if (opts.record_events) path.events.push_back({t, kind, index});
    if (total_count == 0 && !path.extinction_time) {
      norm = 0.0;  // kill accumulated rounding in the running norm
      std::fill(x.begin(), x.end(), 0.0);
      path.extinction_time = t;
    }
    update_entrances(t);
    if (path.event_count >= opts.event_cap) {
      path.cause = TerminalCause::Truncated;
      break;
    }
  }

  path.final_state = {std::move(n), env, t};
  return path;
}

ExtinctionSummary monte_carlo_extinction(const ModelSpec& spec, std::int64_t K,
                                         const std::vector<std::int64_t>& sizes,
                                         const ChainState& init, int n_rep,
                                         std::uint64_t base_seed, const ChainOptions& opts) {
  if (n_rep < 2) throw DomainError("monte_carlo_extinction needs n_rep >= 2");
  check_init(spec, K, sizes, init);

  ChainOptions rep_opts = opts;
  rep_opts.horizon.reset();
  rep_opts.record_events = false;
  rep_opts.thresholds.clear();

  std::vector<double> taus(n_rep, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> truncated(n_rep, 0);
  parallel_for(static_cast<std::size_t>(n_rep), [&](std::size_t j) {
    ChainPath p = simulate_chain(spec, K, sizes, init, rep_opts,
                                 RngStream(base_seed, static_cast<std::uint64_t>(j)));
    if (p.cause == TerminalCause::Truncated) {
      truncated[j] = 1;
    } else {
      taus[j] = *p.extinction_time - init.time;
    }
  });

  ExtinctionSummary s;
  s.n_rep = n_rep;
  std::vector<double> done;
  done.reserve(n_rep);
  for (int j = 0; j < n_rep; ++j) {
    if (truncated[j]) {
      ++s.truncated;
    } else {
      done.push_back(taus[j]);
    }
  }
  if (done.empty())
    throw NumericalError(
        "all replicates hit the event cap; raise the cap or use the exact QSD route");

  const auto m = static_cast<double>(done.size());
  double mean = 0.0;
  for (double v : done) mean += v;
  mean /= m;
  double var = 0.0;
  for (double v : done) var += (v - mean) * (v - mean);
  var = (done.size() > 1) ? var / (m - 1.0) : 0.0;
  s.mean = mean;
  s.se = std::sqrt(var / m);

  std::sort(done.begin(), done.end());
  auto quantile = [&](double q) {
    const double h = (m - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, done.size() - 1);
    return done[lo] + (h - std::floor(h)) * (done[hi] - done[lo]);
  };
  s.q05 = quantile(0.05);
  s.q50 = quantile(0.50);
  s.q95 = quantile(0.95);
  return s;
}

CoupledResult coupled_paths(const ModelSpec& spec, std::int64_t K,
                            const std::vector<std::int64_t>& sizes, const Vec& init_x,
                            int init_env, double T, RngStream rng, double output_dt,
                            const StepControl& step) {
  const int d = spec.dim();
  const int ne = spec.environments();
  if (static_cast<int>(init_x.size()) != d) throw DomainError("init_x has wrong dimension");
  if (init_env < 0 || init_env >= ne) throw DomainError("invalid environment");
  for (double v : init_x)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("init_x outside [0,1]^d");
  if (static_cast<int>(sizes.size()) != d ||
      std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}) != K)
    throw DomainError("group sizes must sum to K");

  RngStream env_rng = rng.substream("env");
  RngStream jump_rng = rng.substream("chain-jumps");

  // floor initialization: n_i = floor(K_i x_i), per the coupled construction
  std::vector<std::int64_t> n(d);
  Vec xk(d);
  for (int i = 0; i < d; ++i) {
    n[i] = static_cast<std::int64_t>(std::floor(static_cast<double>(sizes[i]) * init_x[i]));
    n[i] = std::min(n[i], sizes[i]);
    xk[i] = static_cast<double>(n[i]) / static_cast<double>(sizes[i]);
  }
  int env_chain = init_env;
  int env_pdmp = init_env;

  Vec x = init_x;  // PDMP state
  double t = 0.0;

  ChainPath chain;
  chain.events_recorded = true;
  PdmpPath pdmp;
  double sup_dist = 0.0;
  auto dist_now = [&]() {
    double s = (env_chain != env_pdmp) ? 1.0 : 0.0;
    for (int i = 0; i < d; ++i) s += std::abs(x[i] - xk[i]);
    return s;
  };
  sup_dist = dist_now();

  std::int64_t total_count = std::accumulate(n.begin(), n.end(), std::int64_t{0});
  if (total_count == 0) chain.extinction_time = 0.0;

  // chain epidemic clock (exponential, re-drawn whenever rates change)
  Vec b(d), c(d);
  RateTable rt{Vec(d), Vec(d), Vec(ne), 0.0};
  auto redraw_epid = [&]() -> double {
    fill_rates(spec, sizes, n, env_chain, xk, b, c, rt, false);
    if (rt.total <= 0.0) return std::numeric_limits<double>::infinity();
    return t + jump_rng.exponential(rt.total);
  };
  double t_epid = redraw_epid();

  // environment randomness, consumed identically by both processes
  const bool exact_env = spec.constant_switching();
  const double thin_rate = spec.switch_bound() * (ne - 1);
  double t_env;
  if (ne == 1 || (exact_env && -spec.switch_matrix_at_zero()(env_chain, env_chain) <= 0.0)) {
    t_env = std::numeric_limits<double>::infinity();
  } else if (exact_env) {
    t_env = env_rng.exponential(-spec.switch_matrix_at_zero()(env_chain, env_chain));
  } else {
    t_env = (thin_rate > 0.0) ? env_rng.exponential(thin_rate)
                              : std::numeric_limits<double>::infinity();
  }

  // PDMP integration machinery
  const double h = std::min(step.h_max, 0.1 / std::max(spec.constants().lipschitz_bound, 1e-9));
  struct Field {
    const ModelSpec& spec;
    int env;
    mutable Vec fb, fc;
    void operator()(const Vec& xx, Vec& out) const {
      spec.infection(xx, env, fb);
      spec.cure(xx, env, fc);
      for (std::size_t i = 0; i < xx.size(); ++i)
        out[i] = (1.0 - xx[i]) * fb[i] - xx[i] * fc[i];
    }
  };
  Field field{spec, env_pdmp, Vec(d), Vec(d)};
  Vec k1(d), k2(d), k3(d), k4(d), tmp(d);
  auto rk4_step = [&](double hh) {
    field(x, k1);
    for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * hh * k1[i];
    field(tmp, k2);
    for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * hh * k2[i];
    field(tmp, k3);
    for (int i = 0; i < d; ++i) tmp[i] = x[i] + hh * k3[i];
    field(tmp, k4);
    for (int i = 0; i < d; ++i) {
      x[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (std::isnan(x[i])) throw NumericalError("coupled flow produced NaN");
      x[i] = std::min(1.0, std::max(0.0, x[i]));
    }
  };

  double next_out = 0.0;
  auto record_pdmp = [&](double tt) {
    pdmp.times.push_back(tt);
    pdmp.states.push_back(x);
    pdmp.envs.push_back(env_pdmp);
  };

  while (true) {
    if (next_out <= T && next_out <= std::min(t_epid, t_env)) {
      // integrate the flow up to the output time, checking distance en route
      while (t < next_out) {
        const double dt = std::min(h, next_out - t);
        rk4_step(dt);
        t += dt;
        sup_dist = std::max(sup_dist, dist_now());
      }
      record_pdmp(next_out);
      next_out += output_dt;
      continue;
    }
    const double t_next = std::min({t_epid, t_env, T});
    if (t_next >= T) {
      while (t < T) {
        const double dt = std::min(h, T - t);
        rk4_step(dt);
        t += dt;
        sup_dist = std::max(sup_dist, dist_now());
      }
      break;
    }
    while (t < t_next) {
      const double dt = std::min(h, t_next - t);
      rk4_step(dt);
      t += dt;
      sup_dist = std::max(sup_dist, dist_now());
    }
    if (t_next == t_env) {
      if (exact_env) {
        // both processes share the same jump chain while their environments
        // agree; the clock uses the chain's rate (the environments cannot
        // diverge when Q is constant)
        double u = env_rng.uniform01();
        auto pick = [&](int from) {
          const Mat& q = spec.switch_matrix_at_zero();
          double uu = u * (-q(from, from));
          for (int e = 0; e < ne; ++e) {
            if (e == from) continue;
            uu -= q(from, e);
            if (uu < 0.0) return e;
          }
          return from;
        };
        const int new_chain = pick(env_chain);
        const int new_pdmp = pick(env_pdmp);
        env_chain = new_chain;
        env_pdmp = new_pdmp;
        chain.events.push_back({t, EventKind::Switch, env_chain});
        ++chain.event_count;
        pdmp.jumps.emplace_back(t, env_pdmp);
        field.env = env_pdmp;
        t_epid = redraw_epid();
        const double rate = -spec.switch_matrix_at_zero()(env_chain, env_chain);
        t_env = (rate > 0.0) ? t + env_rng.exponential(rate)
                             : std::numeric_limits<double>::infinity();
      } else {
        const auto sel = env_rng.uniform_below(static_cast<std::uint64_t>(ne - 1));
        const double u = env_rng.uniform01();
        const int tgt_chain = (static_cast<int>(sel) < env_chain) ? static_cast<int>(sel)
                                                                  : static_cast<int>(sel) + 1;
        const int tgt_pdmp = (static_cast<int>(sel) < env_pdmp) ? static_cast<int>(sel)
                                                                : static_cast<int>(sel) + 1;
        if (u * spec.switch_bound() < spec.switch_rate(xk, env_chain, tgt_chain)) {
          env_chain = tgt_chain;
          chain.events.push_back({t, EventKind::Switch, env_chain});
          ++chain.event_count;
          t_epid = redraw_epid();
        }
        if (u * spec.switch_bound() < spec.switch_rate(x, env_pdmp, tgt_pdmp)) {
          env_pdmp = tgt_pdmp;
          field.env = env_pdmp;
          pdmp.jumps.emplace_back(t, env_pdmp);
        }
        t_env = t + env_rng.exponential(thin_rate);
      }
      sup_dist = std::max(sup_dist, dist_now());
    } else {
      // chain epidemic event
      fill_rates(spec, sizes, n, env_chain, xk, b, c, rt, false);
      double u = jump_rng.uniform01() * rt.total;
      int idx = -1;
      EventKind kind = EventKind::Infect;
      for (int i = 0; i < d; ++i) {
        u -= rt.infect[i];
        if (u < 0.0) {
          idx = i;
          kind = EventKind::Infect;
          break;
        }
      }
      if (idx < 0) {
        for (int i = 0; i < d; ++i) {
          u -= rt.cure[i];
          if (u < 0.0) {
            idx = i;
            kind = EventKind::Cure;
            break;
          }
        }
      }
      if (idx < 0) {
        for (int i = d - 1; i >= 0; --i)
          if (rt.cure[i] > 0.0 || rt.infect[i] > 0.0) {
            idx = i;
            kind = (rt.cure[i] > 0.0) ? EventKind::Cure : EventKind::Infect;
            break;
          }
      }
      if (kind == EventKind::Infect) {
        ++n[idx];
        ++total_count;
      } else {
        --n[idx];
        --total_count;
      }
      xk[idx] = static_cast<double>(n[idx]) / static_cast<double>(sizes[idx]);
      chain.events.push_back({t, kind, idx});
      ++chain.event_count;
      if (total_count == 0 && !chain.extinction_time) chain.extinction_time = t;
      sup_dist = std::max(sup_dist, dist_now());
      t_epid = redraw_epid();
    }
  }
  if (pdmp.times.empty() || pdmp.times.back() < T) record_pdmp(T);
  chain.cause = chain.extinction_time ? TerminalCause::Absorbed : TerminalCause::Horizon;
  chain.final_state = {std::move(n), env_chain, T};

  return {std::move(chain), std::move(pdmp), sup_dist};
}

}  // namespace episwitch
