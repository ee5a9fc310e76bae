#include "episwitch/qsd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "episwitch/errors.hpp"
#include "episwitch/threads.hpp"

namespace episwitch {

std::int64_t StateIndex::encode(const std::vector<std::int64_t>& counts, int env) const {
  std::int64_t flat = 0;
  for (int i = 0; i < d; ++i) flat += counts[i] * strides[i];
  return (flat - 1) * num_env + env;  // flat = 0 is the extinct configuration
}

void StateIndex::decode(std::int64_t index, std::vector<std::int64_t>& counts, int& env) const {
  env = static_cast<int>(index % num_env);
  std::int64_t flat = index / num_env + 1;
  counts.resize(d);
  for (int i = 0; i < d; ++i) {
    counts[i] = flat / strides[i];
    flat %= strides[i];
  }
}

StateIndex enumerate_states(const ModelSpec& spec, std::int64_t K,
                            const std::vector<std::int64_t>& sizes, std::int64_t cap) {
  const int d = spec.dim();
  if (static_cast<int>(sizes.size()) != d) throw DomainError("sizes must have length d");
  if (std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}) != K)
    throw DomainError("group sizes must sum to K");
  StateIndex idx;
  idx.d = d;
  idx.num_env = spec.environments();
  idx.sizes = sizes;
  idx.strides.assign(d, 1);
  double m_check = 1.0;
  for (int i = d - 2; i >= 0; --i) idx.strides[i] = idx.strides[i + 1] * (sizes[i + 1] + 1);
  std::int64_t full = 1;
  for (int i = 0; i < d; ++i) {
    full *= sizes[i] + 1;
    m_check *= static_cast<double>(sizes[i] + 1);
  }
  if (m_check * idx.num_env > 2e18) throw SizeError("state space exceeds 64-bit indexing");
  idx.M = (full - 1) * idx.num_env;
  if (idx.M > cap)
    throw SizeError("state space M = " + std::to_string(idx.M) +
                    " exceeds the cap " + std::to_string(cap));
  return idx;
}

namespace {

// All incoming transitions of one target state plus its diagonal, written to
// cols/vals; returns the number of entries.
struct RowBuilder {
  const ModelSpec& spec;
  const StateIndex& index;
  std::vector<std::int64_t> n, src;
  Vec x, xs, b, c;

  RowBuilder(const ModelSpec& s, const StateIndex& ix)
      : spec(s), index(ix), n(ix.d), src(ix.d), x(ix.d), xs(ix.d), b(ix.d), c(ix.d) {}

  double outflow_and_flux(const std::vector<std::int64_t>& counts, int env, double* flux) {
    const int d = index.d;
    for (int i = 0; i < d; ++i)
      x[i] = static_cast<double>(counts[i]) / static_cast<double>(index.sizes[i]);
    spec.infection(x, env, b);
    spec.cure(x, env, c);
    std::int64_t total = 0;
    for (int i = 0; i < d; ++i) total += counts[i];
    double out = 0.0;
    if (flux) *flux = 0.0;
    for (int i = 0; i < d; ++i) {
      if (counts[i] < index.sizes[i])
        out += static_cast<double>(index.sizes[i]) * (1.0 - x[i]) * b[i];
      if (counts[i] > 0) {
        const double r = static_cast<double>(index.sizes[i]) * x[i] * c[i];
        out += r;
        if (flux && total == counts[i] && counts[i] == 1) *flux += r;
      }
    }
    for (int e = 0; e < index.num_env; ++e)
      if (e != env) out += spec.switch_rate(x, env, e);
    return out;
  }

  template <typename Emit>
  void incoming(std::int64_t target, const Emit& emit) {
    int env;
    index.decode(target, n, env);
    const int d = index.d;
    // infections from n - e_i (source must not be the extinct state)
    std::int64_t total = 0;
    for (int i = 0; i < d; ++i) total += n[i];
    for (int i = 0; i < d; ++i) {
      if (n[i] == 0 || total == 1) continue;  // source would be the extinct state
      src = n;
      src[i] -= 1;
      for (int k = 0; k < d; ++k)
        xs[k] = static_cast<double>(src[k]) / static_cast<double>(index.sizes[k]);
      spec.infection(xs, env, b);
      const double r = static_cast<double>(index.sizes[i]) * (1.0 - xs[i]) * b[i];
      if (r > 0.0) emit(index.encode(src, env), r);
    }
    // cures from n + e_i
    for (int i = 0; i < d; ++i) {
      if (n[i] + 1 > index.sizes[i]) continue;
      src = n;
      src[i] += 1;
      for (int k = 0; k < d; ++k)
        xs[k] = static_cast<double>(src[k]) / static_cast<double>(index.sizes[k]);
      spec.cure(xs, env, c);
      const double r = static_cast<double>(index.sizes[i]) * xs[i] * c[i];
      if (r > 0.0) emit(index.encode(src, env), r);
    }
    // switches from (n, env')
    for (int k = 0; k < d; ++k)
      xs[k] = static_cast<double>(n[k]) / static_cast<double>(index.sizes[k]);
    for (int e = 0; e < index.num_env; ++e) {
      if (e == env) continue;
      const double r = spec.switch_rate(xs, e, env);
      if (r > 0.0) emit(index.encode(n, e), r);
    }
    // diagonal
    emit(target, -outflow_and_flux(n, env, nullptr));
  }
};

}  // namespace

KilledGenerator build_killed_generator(const ModelSpec& spec, std::int64_t K,
                                       const std::vector<std::int64_t>& sizes,
                                       const StateIndex& index) {
  (void)K;
  KilledGenerator gen;
  gen.index = index;
  const std::int64_t M = index.M;
  gen.row_ptr.assign(M + 1, 0);
  gen.flux.assign(M, 0.0);

  std::vector<std::int64_t> counts_per_row(M, 0);
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t j) {
    RowBuilder local(spec, index);
    std::int64_t cnt = 0;
    local.incoming(static_cast<std::int64_t>(j),
                   [&](std::int64_t, double) { ++cnt; });
    counts_per_row[j] = cnt;
  });
  for (std::int64_t j = 0; j < M; ++j) gen.row_ptr[j + 1] = gen.row_ptr[j] + counts_per_row[j];
  const std::int64_t nnz = gen.row_ptr[M];
  gen.col.resize(nnz);
  gen.val.resize(nnz);

  double gamma = 0.0;
  std::vector<double> diag(M, 0.0);
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t j) {
    RowBuilder local(spec, index);
    std::int64_t pos = gen.row_ptr[j];
    local.incoming(static_cast<std::int64_t>(j), [&](std::int64_t src, double v) {
      gen.col[pos] = src;
      gen.val[pos] = v;
      ++pos;
    });
    double fx = 0.0;
    std::vector<std::int64_t> n(index.d);
    int env;
    gen.index.decode(static_cast<std::int64_t>(j), n, env);
    local.outflow_and_flux(n, env, &fx);
    gen.flux[j] = fx;
    for (std::int64_t p = gen.row_ptr[j]; p < gen.row_ptr[j + 1]; ++p)
      if (gen.col[p] == static_cast<std::int64_t>(j)) diag[j] = gen.val[p];
  });
  for (std::int64_t j = 0; j < M; ++j) gamma = std::max(gamma, -diag[j]);
  gen.gamma = gamma;

  // conservation: row sums of L~ plus flux must vanish
  Vec row_sum(M, 0.0);
  for (std::int64_t j = 0; j < M; ++j)
    for (std::int64_t p = gen.row_ptr[j]; p < gen.row_ptr[j + 1]; ++p)
      row_sum[gen.col[p]] += gen.val[p];
  const double tol = 1e-12 * std::max(1.0, gamma);
  for (std::int64_t i = 0; i < M; ++i)
    if (std::abs(row_sum[i] + gen.flux[i]) > tol)
      throw NumericalError("killed generator violates rate conservation");
  bool any_flux = false;
  for (double f : gen.flux)
    if (f > 0.0) any_flux = true;
  if (!any_flux) throw NumericalError("extinction set is not accessible (zero flux)");
  return gen;
}

QsdResult compute_qsd(const KilledGenerator& gen, double tol, std::int64_t max_iter) {
  const std::int64_t M = gen.index.M;
  QsdResult res;
  res.weights.assign(M, 1.0 / static_cast<double>(M));
  Vec scratch(M, 0.0);
  const double gamma = gen.gamma;
  if (!(gamma > 0.0)) throw NumericalError("compute_qsd: degenerate generator");

  auto matvec = [&](const Vec& mu, Vec& out) {
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t j) {
      double s = 0.0;
      for (std::int64_t p = gen.row_ptr[j]; p < gen.row_ptr[j + 1]; ++p)
        s += gen.val[p] * mu[gen.col[p]];
      out[j] = s;
    });
  };

  double lambda = 0.0;
  std::int64_t it = 0;
  const std::int64_t check_every = 100;
  while (it < max_iter) {
    matvec(res.weights, scratch);
    double total = 0.0;
    for (std::int64_t j = 0; j < M; ++j) {
      scratch[j] = res.weights[j] + scratch[j] / gamma;
      total += scratch[j];
    }
    for (std::int64_t j = 0; j < M; ++j) res.weights[j] = scratch[j] / total;
    lambda = gamma * (1.0 - total);
    ++it;
    if (it % check_every == 0 || it == max_iter) {
      matvec(res.weights, scratch);
      double r = 0.0;
      for (std::int64_t j = 0; j < M; ++j) r += std::abs(scratch[j] + lambda * res.weights[j]);
      if (r < tol) {
        res.lambda = lambda;
        res.residual = r;
        res.iterations = it;
        res.converged = true;
        return res;
      }
    }
  }
  matvec(res.weights, scratch);
  double r = 0.0;
  for (std::int64_t j = 0; j < M; ++j) r += std::abs(scratch[j] + lambda * res.weights[j]);
  res.lambda = lambda;
  res.residual = r;
  res.iterations = it;
  res.converged = false;
  return res;
}

QsdResult compute_qsd(const ModelSpec& spec, std::int64_t K,
                      const std::vector<std::int64_t>& sizes, double tol,
                      std::int64_t max_iter) {
  const StateIndex index = enumerate_states(spec, K, sizes);
  const KilledGenerator gen = build_killed_generator(spec, K, sizes, index);
  return compute_qsd(gen, tol, max_iter);
}

double qsd_moment(const QsdResult& result, const StateIndex& index,
                  const std::vector<std::int64_t>& sizes, double p) {
  std::vector<std::int64_t> n(index.d);
  int env;
  double s = 0.0;
  for (std::int64_t j = 0; j < index.M; ++j) {
    index.decode(j, n, env);
    double norm = 0.0;
    for (int i = 0; i < index.d; ++i)
      norm += static_cast<double>(n[i]) / static_cast<double>(sizes[i]);
    s += result.weights[j] * std::pow(norm, -p);
  }
  return s;
}

double qsd_mass_below(const QsdResult& result, const StateIndex& index,
                      const std::vector<std::int64_t>& sizes, double eps) {
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  std::vector<std::int64_t> n(index.d);
  int env;
  double s = 0.0;
  for (std::int64_t j = 0; j < index.M; ++j) {
    index.decode(j, n, env);
    double norm = 0.0;
    for (int i = 0; i < index.d; ++i)
      norm += static_cast<double>(n[i]) / static_cast<double>(sizes[i]);
    if (norm < eps) s += result.weights[j];
  }
  return s;
}

std::int64_t sample_qsd_state(const QsdResult& result, RngStream& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t j = 0; j < result.weights.size(); ++j) {
    acc += result.weights[j];
    if (u < acc) return static_cast<std::int64_t>(j);
  }
  return static_cast<std::int64_t>(result.weights.size()) - 1;
}

std::int64_t Histogram::cell(const Vec& x, int env) const {
  std::int64_t c = 0;
  for (int i = 0; i < d; ++i) {
    auto b = static_cast<std::int64_t>(std::floor(x[i] * bins));
    b = std::min<std::int64_t>(std::max<std::int64_t>(b, 0), bins - 1);
    c = c * bins + b;
  }
  return c * num_env + env;
}

Histogram pdmp_stationary_estimate(const ModelSpec& spec, double T, double burn_in,
                                   double output_dt, RngStream rng, int bins,
                                   const Vec& x0, int env0) {
  if (!(T > burn_in) || burn_in < 0.0) throw DomainError("need T > burn_in >= 0");
  if (bins < 1) throw DomainError("bins must be >= 1");
  Histogram h;
  h.d = spec.dim();
  h.bins = bins;
  h.num_env = spec.environments();
  const double cells = std::pow(static_cast<double>(bins), h.d) * h.num_env;
  if (cells > 1e7) throw SizeError("histogram would need more than 1e7 cells");
  h.mass.assign(static_cast<std::size_t>(cells), 0.0);

  Vec start = x0.empty() ? Vec(spec.dim(), 0.5) : x0;
  StepControl step;
  step.h_max = std::min(step.h_max, output_dt);
  double total = 0.0;
  simulate_pdmp_visit(spec, start, env0, T, rng, step,
                      [&](double t0, const Vec&, double t1, const Vec& x_after, int env) {
                        if (t1 <= burn_in) return;
                        const double w = t1 - std::max(t0, burn_in);
                        h.mass[h.cell(x_after, env)] += w;
                        total += w;
                      });
  if (total > 0.0)
    for (double& v : h.mass) v /= total;
  return h;
}

Histogram bin_qsd(const QsdResult& result, const StateIndex& index,
                  const std::vector<std::int64_t>& sizes, int bins) {
  Histogram h;
  h.d = index.d;
  h.bins = bins;
  h.num_env = index.num_env;
  const double cells = std::pow(static_cast<double>(bins), h.d) * h.num_env;
  if (cells > 1e7) throw SizeError("histogram would need more than 1e7 cells");
  h.mass.assign(static_cast<std::size_t>(cells), 0.0);
  std::vector<std::int64_t> n(index.d);
  Vec x(index.d);
  int env;
  for (std::int64_t j = 0; j < index.M; ++j) {
    index.decode(j, n, env);
    for (int i = 0; i < index.d; ++i)
      x[i] = static_cast<double>(n[i]) / static_cast<double>(sizes[i]);
    h.mass[h.cell(x, env)] += result.weights[j];
  }
  return h;
}

double histogram_l1_distance(const Histogram& a, const Histogram& b) {
  if (a.mass.size() != b.mass.size() || a.bins != b.bins || a.num_env != b.num_env)
    throw DomainError("histograms are not comparable");
  double s = 0.0;
  for (std::size_t i = 0; i < a.mass.size(); ++i) s += std::abs(a.mass[i] - b.mass[i]);
  return s;
}

}  // namespace episwitch
