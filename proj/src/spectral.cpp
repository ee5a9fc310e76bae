#include "episwitch/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "episwitch/errors.hpp"

namespace episwitch {

namespace {

// Strong connectivity of the directed support graph (off-diagonal entries).
bool strongly_connected(const Mat& a, bool reversed) {
  const std::size_t n = a.rows();
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u || seen[v]) continue;
      const double w = reversed ? a(v, u) : a(u, v);
      if (w != 0.0) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

}  // namespace

bool is_metzler(const Mat& a, double tol) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j && a(i, j) < -tol) return false;
  return true;
}

bool is_irreducible(const Mat& a) {
  if (a.rows() != a.cols()) return false;
  if (a.rows() == 1) return a(0, 0) != 0.0;
  return strongly_connected(a, false) && strongly_connected(a, true);
}

PerronPair perron(const Mat& a, double tol) {
  const std::size_t n = a.rows();
  if (n == 0 || a.cols() != n) throw DomainError("perron: matrix must be square");
  if (!is_metzler(a)) throw DomainError("perron: matrix is not Metzler");
  if (!is_irreducible(a)) throw DomainError("perron: matrix is reducible");

  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) shift = std::max(shift, std::abs(a(i, i)));
  shift += 1.0;  // diagonal of A + sI is >= 1, so the shifted matrix is primitive

  Vec v(n, 1.0 / n), w(n);
  double value = 0.0;
  const int max_iter = 100000;
  for (int it = 1; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = shift * v[i];
      for (std::size_t j = 0; j < n; ++j) s += a(i, j) * v[j];
      w[i] = s;
    }
    const double nw = l1_norm(w);
    if (!(nw > 0.0) || !std::isfinite(nw))
      throw NumericalError("perron: iteration degenerated");
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    value = nw - shift;

    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = -value * v[i];
      for (std::size_t j = 0; j < n; ++j) s += a(i, j) * v[j];
      res += std::abs(s);
    }
    if (res < tol) {
      for (double x : v)
        if (!(x > 0.0)) throw NumericalError("perron: eigenvector not strictly positive");
      return {value, v, res, it};
    }
  }
  throw NumericalError("perron: no convergence within 100000 iterations");
}

Vec stationary_env(const Mat& q, double tol) {
  const std::size_t n = q.rows();
  if (n == 0 || q.cols() != n) throw DomainError("stationary_env: matrix must be square");
  if (n == 1) return {1.0};
  if (!is_irreducible(q)) throw DomainError("stationary_env: rate matrix is reducible");

  // Solve pi Q = 0 with sum(pi) = 1: transpose system, replace last row.
  Mat m(n, n);
  Vec rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = q(j, i);
  for (std::size_t j = 0; j < n; ++j) m(n - 1, j) = 1.0;
  rhs[n - 1] = 1.0;

  // Gaussian elimination with partial pivoting.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    if (std::abs(m(piv, col)) < 1e-300)
      throw NumericalError("stationary_env: singular system");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
      std::swap(rhs[piv], rhs[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m(r, col) / m(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) m(r, j) -= f * m(col, j);
      rhs[r] -= f * rhs[col];
    }
  }
  Vec pi(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= m(i, j) * pi[j];
    pi[i] = s / m(i, i);
  }

  double res = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pi[i] * q(i, j);
    res += std::abs(s);
  }
  double total = sum(pi);
  if (!(std::abs(total - 1.0) < 1e-9) || res > std::max(tol, 1e-10))
    throw NumericalError("stationary_env: residual too large");
  for (double& v : pi) v /= total;
  return pi;
}

double g_exact_1d(const ModelSpec& spec, double p) {
  if (spec.dim() != 1)
    throw DomainError("g_exact_1d: closed form exists only for d = 1");
  if (!spec.constant_switching())
    throw DomainError("g_exact_1d: requires a constant switch-rate matrix");
  if (p == 0.0) return 0.0;  // rate matrices have principal eigenvalue 0
  const int ne = spec.environments();
  Mat qp = spec.switch_matrix_at_zero();
  for (int e = 0; e < ne; ++e) {
    const Mat a = linearization_at_zero(spec, e);
    qp(e, e) += p * a(0, 0);
  }
  return perron(qp).value;
}

double hilbert_distance(const Vec& x, const Vec& y) {
  if (x.size() != y.size() || x.empty())
    throw DomainError("hilbert_distance: size mismatch");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw DomainError("hilbert_distance: components must be strictly positive");
    const double r = x[i] / y[i];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return std::log(hi / lo);
}

}  // namespace episwitch
