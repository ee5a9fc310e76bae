#include "episwitch/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "episwitch/rng.hpp"
#include "episwitch/spectral.hpp"
#include "json.hpp"

namespace episwitch {

namespace {

constexpr double kFracTol = 1e-12;
constexpr double kCubeTol = 1e-9;
constexpr double kFdStep = 1e-6;       // one-sided step at the corner x = 0
constexpr double kGridSafety = 1.1;    // inflation for grid-estimated constants
constexpr std::size_t kGridCap = 100000;

std::string point_str(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ")";
  return os.str();
}

// Lattice of `res` points per axis over [0,1]^d, capped at kGridCap samples;
// past the cap, deterministic pseudo-random points from a fixed stream.
std::vector<Vec> probe_grid(int d, int res) {
  std::vector<Vec> pts;
  double total = std::pow(static_cast<double>(res), d);
  if (total <= static_cast<double>(kGridCap)) {
    std::vector<int> idx(d, 0);
    const auto n = static_cast<std::size_t>(total);
    pts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = (res == 1) ? 0.0 : idx[i] / double(res - 1);
      pts.push_back(std::move(x));
      for (int i = 0; i < d; ++i) {
        if (++idx[i] < res) break;
        idx[i] = 0;
      }
    }
  } else {
    RngStream rng(0x9d15c0ffee, 0);  // fixed: probing must be reproducible
    pts.reserve(kGridCap);
    for (std::size_t k = 0; k < kGridCap; ++k) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = rng.uniform01();
      pts.push_back(std::move(x));
    }
  }
  return pts;
}

void check_cube(const Vec& x, int d) {
  if (static_cast<int>(x.size()) != d) throw DomainError("point has wrong dimension");
  for (double v : x)
    if (!(v >= -kCubeTol && v <= 1.0 + kCubeTol))
      throw DomainError("point outside [0,1]^d beyond tolerance 1e-9");
}

Vec clamp_cube(Vec x) {
  for (double& v : x) v = std::min(1.0, std::max(0.0, v));
  return x;
}

}  // namespace

bool MonotoneFlags::all() const {
  auto ok = [](const std::vector<bool>& v) {
    return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
  };
  return ok(cooperative) && ok(irreducible_interior) && ok(strongly_subhomogeneous);
}

bool ValidationReport::all_passed() const {
  return std::all_of(items.begin(), items.end(),
                     [](const ValidationItem& it) { return it.passed; });
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& it : items)
    os << (it.passed ? "PASS " : "FAIL ") << it.assumption
       << (it.detail.empty() ? "" : ": " + it.detail) << "\n";
  return os.str();
}

ModelSpec ModelSpec::lajmanovich_yorke(std::vector<Mat> C, std::vector<Vec> D, Mat Q,
                                       Vec group_fractions) {
  if (Q.rows() != Q.cols() || Q.rows() != C.size())
    throw ModelError("Q dimension does not match the number of environments");
  const std::size_t ne = C.size();
  double qb = 0.0;
  for (std::size_t i = 0; i < ne; ++i)
    for (std::size_t j = 0; j < ne; ++j)
      if (i != j) qb = std::max(qb, Q(i, j));
  Mat qc = Q;
  ModelSpec spec = lajmanovich_yorke(
      std::move(C), std::move(D), [qc](const Vec&) { return qc; }, qb,
      std::move(group_fractions));
  spec.q_const_ = std::move(qc);
  spec.constant_q_ = true;
  return spec;
}

ModelSpec ModelSpec::lajmanovich_yorke(std::vector<Mat> C, std::vector<Vec> D,
                                       SwitchFamily Q, double q_bar, Vec group_fractions) {
  if (C.empty() || C.size() != D.size())
    throw ModelError("need one (C, D) pair per environment");
  const int d = static_cast<int>(C[0].rows());
  for (const auto& m : C)
    if (m.rows() != static_cast<std::size_t>(d) || m.cols() != static_cast<std::size_t>(d))
      throw ModelError("all C matrices must be d x d");
  for (const auto& v : D)
    if (v.size() != static_cast<std::size_t>(d)) throw ModelError("all D vectors must have length d");
  if (group_fractions.size() != static_cast<std::size_t>(d))
    throw ModelError("group_fractions must have length d");

  ModelSpec spec;
  spec.d_ = d;
  spec.num_env_ = static_cast<int>(C.size());
  spec.alpha_ = std::move(group_fractions);
  spec.ly_ = LyRates{std::move(C), std::move(D)};
  spec.switching_ = std::move(Q);
  spec.q_bar_ = q_bar;
  spec.finalize();
  return spec;
}

ModelSpec ModelSpec::general(int d, int num_env, RateFamily infection, RateFamily cure,
                             SwitchFamily Q, double q_bar, Vec group_fractions) {
  if (d < 1 || num_env < 1) throw ModelError("need d >= 1 and num_env >= 1");
  if (group_fractions.size() != static_cast<std::size_t>(d))
    throw ModelError("group_fractions must have length d");
  ModelSpec spec;
  spec.d_ = d;
  spec.num_env_ = num_env;
  spec.alpha_ = std::move(group_fractions);
  spec.infection_ = std::move(infection);
  spec.cure_ = std::move(cure);
  spec.switching_ = std::move(Q);
  spec.q_bar_ = q_bar;
  spec.finalize();
  return spec;
}

void ModelSpec::finalize() {
  q_zero_ = switching_ ? switching_(Vec(d_, 0.0)) : Mat();
  if (q_zero_.rows() != static_cast<std::size_t>(num_env_) ||
      q_zero_.cols() != static_cast<std::size_t>(num_env_))
    throw ModelError("switch matrix has wrong dimensions");

  if (ly_) {
    // l1-induced bound: max_j [colsum_j(C) + rowsum_j(C) + D_j], per env.
    double cf = 0.0, cb = 0.0;
    for (int e = 0; e < num_env_; ++e) {
      const Mat& C = ly_->C[e];
      const Vec& D = ly_->D[e];
      for (int j = 0; j < d_; ++j) {
        double col = 0.0, row = 0.0;
        for (int i = 0; i < d_; ++i) {
          col += C(i, j);
          row += C(j, i);
        }
        cf = std::max(cf, col + row + D[j]);
        cb = std::max(cb, 2.0 * row + D[j]);
      }
    }
    constants_.lipschitz_bound = cf;
    constants_.rate_bound = cb;
  } else {
    // Grid estimate inflated by 1.1; heuristic by contract.
    auto pts = probe_grid(d_, std::min(9, 21));
    double cf = 0.0, cb = 0.0;
    Vec fa(d_), fb(d_), ba(d_), bb(d_), ca(d_), cbv(d_);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      const Vec& x = pts[k];
      const Vec& y = pts[k + 1];
      double dxy = 0.0;
      for (int i = 0; i < d_; ++i) dxy += std::abs(x[i] - y[i]);
      if (dxy < 1e-12) continue;
      for (int e = 0; e < num_env_; ++e) {
        fa = vector_field(*this, x, e);
        fb = vector_field(*this, y, e);
        double num = 0.0;
        for (int i = 0; i < d_; ++i) num += std::abs(fa[i] - fb[i]);
        cf = std::max(cf, num / dxy);
        infection(x, e, ba);
        infection(y, e, bb);
        cure(x, e, ca);
        cure(y, e, cbv);
        for (int i = 0; i < d_; ++i) {
          const double be_x = (1 - x[i]) * ba[i], be_y = (1 - y[i]) * bb[i];
          const double bm_x = x[i] * ca[i], bm_y = y[i] * cbv[i];
          cb = std::max(cb, std::abs(be_x - be_y) / dxy);
          cb = std::max(cb, std::abs(bm_x - bm_y) / dxy);
          cb = std::max(cb, std::max(be_x + bm_x, be_y + bm_y));
        }
      }
    }
    constants_.lipschitz_bound = cf * kGridSafety;
    constants_.rate_bound = cb * kGridSafety;
  }
}

void ModelSpec::infection(const Vec& x, int env, Vec& out) const {
  out.assign(d_, 0.0);
  if (ly_) {
    const Mat& C = ly_->C[env];
    for (int i = 0; i < d_; ++i) {
      double s = 0.0;
      for (int j = 0; j < d_; ++j) s += C(i, j) * x[j];
      out[i] = s;
    }
  } else {
    out = infection_(x, env);
  }
}

void ModelSpec::cure(const Vec& x, int env, Vec& out) const {
  if (ly_) {
    out = ly_->D[env];
  } else {
    out = cure_(x, env);
  }
}

double ModelSpec::switch_rate(const Vec& x, int from, int to) const {
  if (constant_q_) return (*q_const_)(from, to);
  return switching_(x)(from, to);
}

Mat ModelSpec::switch_matrix(const Vec& x) const {
  if (constant_q_) return *q_const_;
  return switching_(x);
}

Vec vector_field(const ModelSpec& spec, const Vec& x, int env) {
  check_cube(x, spec.dim());
  if (env < 0 || env >= spec.environments()) throw DomainError("invalid environment");
  Vec xc = clamp_cube(x);
  Vec b(spec.dim()), d(spec.dim()), f(spec.dim());
  spec.infection(xc, env, b);
  spec.cure(xc, env, d);
  for (int i = 0; i < spec.dim(); ++i) f[i] = (1.0 - xc[i]) * b[i] - xc[i] * d[i];
  return f;
}

Mat linearization_at_zero(const ModelSpec& spec, int env) {
  if (env < 0 || env >= spec.environments()) throw DomainError("invalid environment");
  const int d = spec.dim();
  Mat a(d, d);
  if (spec.is_ly()) {
    const Mat& C = spec.ly().C[env];
    const Vec& D = spec.ly().D[env];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = C(i, j) - (i == j ? D[i] : 0.0);
    return a;
  }
  Vec zero(d, 0.0), b0(d), d0(d), bh(d);
  spec.infection(zero, env, b0);
  spec.cure(zero, env, d0);
  for (int j = 0; j < d; ++j) {
    Vec xj(d, 0.0);
    xj[j] = kFdStep;  // 0 is a corner of the cube: one-sided into the domain
    spec.infection(xj, env, bh);
    for (int i = 0; i < d; ++i) a(i, j) = (bh[i] - b0[i]) / kFdStep;
  }
  for (int i = 0; i < d; ++i) a(i, i) -= d0[i];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && a(i, j) < -kFdStep)
        throw NumericalError("finite-difference Jacobian at 0 is not Metzler");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && a(i, j) < 0.0) a(i, j) = 0.0;  // clip FD noise within tolerance
  return a;
}

std::vector<TransitionRate> transition_rates(const ModelSpec& spec, std::int64_t K,
                                             const std::vector<std::int64_t>& sizes,
                                             const std::vector<std::int64_t>& counts,
                                             int env) {
  const int d = spec.dim();
  if (static_cast<int>(sizes.size()) != d || static_cast<int>(counts.size()) != d)
    throw DomainError("sizes/counts must have length d");
  if (std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}) != K)
    throw DomainError("group sizes must sum to K");
  if (env < 0 || env >= spec.environments()) throw DomainError("invalid environment");
  Vec x(d);
  for (int i = 0; i < d; ++i) {
    if (counts[i] < 0 || counts[i] > sizes[i]) throw DomainError("counts out of range");
    x[i] = static_cast<double>(counts[i]) / static_cast<double>(sizes[i]);
  }
  Vec b(d), c(d);
  spec.infection(x, env, b);
  spec.cure(x, env, c);
  std::vector<TransitionRate> out;
  out.reserve(2 * d + spec.environments());
  for (int i = 0; i < d; ++i) {
    const double r = static_cast<double>(sizes[i]) * (1.0 - x[i]) * b[i];
    if (r > 0.0) out.push_back({EventKind::Infect, i, r});
  }
  for (int i = 0; i < d; ++i) {
    const double r = static_cast<double>(sizes[i]) * x[i] * c[i];
    if (r > 0.0) out.push_back({EventKind::Cure, i, r});
  }
  for (int e = 0; e < spec.environments(); ++e) {
    if (e == env) continue;
    const double r = spec.switch_rate(x, env, e);
    if (r > 0.0) out.push_back({EventKind::Switch, e, r});
  }
  return out;
}

ValidationReport validate_model(const ModelSpec& spec, int grid_resolution) {
  ValidationReport rep;
  const int d = spec.dim();
  const int ne = spec.environments();
  auto add = [&rep](std::string name, bool ok, std::string detail = "") {
    rep.items.push_back({std::move(name), ok, std::move(detail)});
  };

  // structural checks
  {
    double s = sum(spec.group_fractions());
    bool pos = std::all_of(spec.group_fractions().begin(), spec.group_fractions().end(),
                           [](double a) { return a > 0.0; });
    add("structure (group fractions positive, sum 1)", pos && std::abs(s - 1.0) <= kFracTol,
        pos ? "sum = " + std::to_string(s) : "nonpositive fraction");
  }

  const auto pts = probe_grid(d, grid_resolution);

  // rates nonnegative and Q(x) a proper rate matrix on the grid
  {
    bool ok = true;
    std::string detail;
    Vec b(d), c(d);
    for (const Vec& x : pts) {
      for (int e = 0; e < ne && ok; ++e) {
        spec.infection(x, e, b);
        for (int i = 0; i < d; ++i)
          if (b[i] < 0.0) {
            ok = false;
            detail = "b_" + std::to_string(i + 1) + " < 0 at x=" + point_str(x);
            break;
          }
      }
      if (!ok) break;
      Mat q = spec.switch_matrix(x);
      for (int e = 0; e < ne && ok; ++e) {
        double row = 0.0;
        for (int f = 0; f < ne; ++f) {
          row += q(e, f);
          if (e != f && q(e, f) < 0.0) {
            ok = false;
            detail = "q(x," + std::to_string(e + 1) + "," + std::to_string(f + 1) +
                     ") < 0 at x=" + point_str(x);
          }
          if (e != f && q(e, f) > spec.switch_bound() + 1e-9) {
            ok = false;
            detail = "switch rate exceeds q_bar at x=" + point_str(x);
          }
        }
        if (ok && std::abs(row) > 1e-9) {
          ok = false;
          detail = "Q row " + std::to_string(e + 1) + " does not sum to 0 at x=" + point_str(x);
        }
      }
      if (!ok) break;
    }
    add("structure (rates nonnegative, Q rows sum to 0, q <= q_bar)", ok, detail);
  }

  // A1.2-1: b(0) = 0
  {
    bool ok = true;
    std::string detail;
    Vec zero(d, 0.0), b(d);
    for (int e = 0; e < ne; ++e) {
      spec.infection(zero, e, b);
      for (int i = 0; i < d; ++i)
        if (std::abs(b[i]) > 1e-12) {
          ok = false;
          detail = "b_" + std::to_string(i + 1) + "(0, env " + std::to_string(e + 1) +
                   ") = " + std::to_string(b[i]);
        }
    }
    add("A1.2-1 (b_i(0) = 0)", ok, detail);
  }

  // A1.2-2: d_i > 0 on the grid
  {
    bool ok = true;
    std::string detail;
    Vec c(d);
    for (const Vec& x : pts) {
      for (int e = 0; e < ne; ++e) {
        spec.cure(x, e, c);
        for (int i = 0; i < d; ++i)
          if (!(c[i] > 0.0)) {
            ok = false;
            detail = "d_" + std::to_string(i + 1) + " = " + std::to_string(c[i]) +
                     " at x=" + point_str(x) + ", env " + std::to_string(e + 1);
            break;
          }
        if (!ok) break;
      }
      if (!ok) break;
    }
    add("A1.2-2 (d_i > 0)", ok, detail);
  }

  // A1.2-3: Db(0) nonnegative and irreducible
  {
    bool ok = true;
    std::string detail;
    for (int e = 0; e < ne; ++e) {
      Mat db(d, d);
      bool built = true;
      try {
        Mat a = linearization_at_zero(spec, e);
        Vec zero(d, 0.0), d0(d);
        spec.cure(zero, e, d0);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) db(i, j) = a(i, j) + (i == j ? d0[i] : 0.0);
      } catch (const NumericalError&) {
        built = false;
      }
      bool nonneg = built;
      if (built)
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j)
            if (db(i, j) < -1e-9) nonneg = false;
      if (!built || !nonneg || !is_irreducible(db)) {
        ok = false;
        detail = "Db(0) for env " + std::to_string(e + 1) +
                 (built ? (nonneg ? " is reducible" : " has negative entries")
                        : " could not be formed");
        break;
      }
    }
    add("A1.2-3 (Db(0) nonnegative irreducible)", ok, detail);
  }

  // A1.2-4: Q(x) irreducible on the grid
  {
    bool ok = true;
    std::string detail;
    if (ne == 1) {
      // single environment: trivially irreducible
    } else if (spec.constant_switching()) {
      ok = is_irreducible(spec.switch_matrix_at_zero());
      if (!ok) detail = "constant Q is reducible";
    } else {
      for (const Vec& x : pts)
        if (!is_irreducible(spec.switch_matrix(x))) {
          ok = false;
          detail = "Q(x) reducible at x=" + point_str(x);
          break;
        }
    }
    add("A1.2-4 (Q(x) irreducible)", ok, detail);
  }

  return rep;
}

MonotoneFlags monotone_flags(const ModelSpec& spec, int grid_resolution) {
  const int d = spec.dim();
  const int ne = spec.environments();
  MonotoneFlags flags;
  flags.cooperative.assign(ne, true);
  flags.irreducible_interior.assign(ne, true);
  flags.strongly_subhomogeneous.assign(ne, true);
  if (spec.is_ly()) return flags;  // all three hold by construction

  const auto pts = probe_grid(d, grid_resolution);
  const double h = 1e-5;
  for (int e = 0; e < ne; ++e) {
    for (const Vec& x : pts) {
      bool interior = true;
      for (double v : x)
        if (v < 0.05 || v > 0.95) interior = false;
      // Jacobian by forward differences, clamped to the cube
      Mat jac(d, d);
      Vec f0 = vector_field(spec, x, e);
      for (int j = 0; j < d; ++j) {
        Vec xh = x;
        xh[j] = std::min(1.0, xh[j] + h);
        const double hh = xh[j] - x[j];
        if (hh <= 0.0) continue;
        Vec fh = vector_field(spec, xh, e);
        for (int i = 0; i < d; ++i) jac(i, j) = (fh[i] - f0[i]) / hh;
      }
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (i != j && jac(i, j) < -1e-7) flags.cooperative[e] = false;
      if (interior && !is_irreducible(jac)) flags.irreducible_interior[e] = false;
      if (interior) {
        for (double lam : {1.1, 1.5}) {
          Vec lx(d);
          bool in = true;
          for (int i = 0; i < d; ++i) {
            lx[i] = lam * x[i];
            if (lx[i] >= 1.0) in = false;
          }
          if (!in) continue;
          Vec flx = vector_field(spec, lx, e);
          for (int i = 0; i < d; ++i)
            if (!(flx[i] < lam * f0[i] + 1e-12)) flags.strongly_subhomogeneous[e] = false;
        }
      }
    }
  }
  return flags;
}

std::vector<std::int64_t> default_sizes(const ModelSpec& spec, std::int64_t K) {
  const int d = spec.dim();
  if (K < d) throw DomainError("K must be at least d");
  std::vector<std::int64_t> sizes(d);
  std::vector<std::pair<double, int>> rem(d);
  std::int64_t used = 0;
  for (int i = 0; i < d; ++i) {
    const double t = spec.group_fractions()[i] * static_cast<double>(K);
    sizes[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(t)));
    used += sizes[i];
    rem[i] = {t - std::floor(t), i};
  }
  std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  int k = 0;
  while (used < K) {
    sizes[rem[k % d].second] += 1;
    ++used;
    ++k;
  }
  while (used > K) {  // possible only via the max(1, floor) adjustment
    auto it = std::max_element(sizes.begin(), sizes.end());
    if (*it <= 1) throw DomainError("cannot split K into positive group sizes");
    --*it;
    --used;
  }
  return sizes;
}

namespace {

Mat mat_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ModelError(what + " must be a 2d array");
  const std::size_t r = j.size();
  const std::size_t c = j[0].size();
  Mat m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (!j[i].is_array() || j[i].size() != c) throw ModelError(what + " rows must have equal length");
    for (std::size_t k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

ModelSpec model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [key, _] : j.items())
    if (key != "d" && key != "group_fractions" && key != "environments" && key != "Q")
      throw ModelError("unknown config key: " + key);
  if (!j.contains("d") || !j.contains("environments") || !j.contains("Q"))
    throw ModelError("config must contain d, environments, Q");

  const int d = j["d"].get<int>();
  if (d < 1) throw ModelError("d must be a positive integer");
  Vec alpha(d, 1.0 / d);
  if (j.contains("group_fractions")) {
    alpha = j["group_fractions"].get<Vec>();
    if (static_cast<int>(alpha.size()) != d) throw ModelError("group_fractions must have length d");
  }

  std::vector<Mat> C;
  std::vector<Vec> D;
  for (const auto& env : j["environments"]) {
    for (const auto& [key, _] : env.items())
      if (key != "C" && key != "D") throw ModelError("unknown environment key: " + key);
    if (!env.contains("C") || !env.contains("D"))
      throw ModelError("each environment needs C and D");
    Mat c = mat_from_json(env["C"], "C");
    if (c.rows() != static_cast<std::size_t>(d) || c.cols() != static_cast<std::size_t>(d))
      throw ModelError("C must be d x d");
    Vec dd = env["D"].get<Vec>();
    if (static_cast<int>(dd.size()) != d) throw ModelError("D must have length d");
    for (double v : dd)
      if (!(v > 0.0)) throw ModelError("D entries must be positive");
    for (std::size_t i = 0; i < c.rows(); ++i)
      for (std::size_t k = 0; k < c.cols(); ++k)
        if (c(i, k) < 0.0) throw ModelError("C entries must be nonnegative");
    C.push_back(std::move(c));
    D.push_back(std::move(dd));
  }
  const int ne = static_cast<int>(C.size());
  if (ne < 1) throw ModelError("need at least one environment");

  const auto& jq = j["Q"];
  if (jq.is_array()) {
    Mat q = mat_from_json(jq, "Q");
    if (q.rows() != static_cast<std::size_t>(ne) || q.cols() != static_cast<std::size_t>(ne))
      throw ModelError("Q must be |E| x |E|");
    return ModelSpec::lajmanovich_yorke(std::move(C), std::move(D), std::move(q),
                                        std::move(alpha));
  }
  if (jq.is_object()) {
    for (const auto& [key, _] : jq.items())
      if (key != "builtin" && key != "Q0" && key != "scale")
        throw ModelError("unknown Q key: " + key);
    const std::string builtin = jq.at("builtin").get<std::string>();
    if (builtin != "norm_scaled")
      throw ModelError("unknown Q builtin: " + builtin + " (state-dependent forms beyond "
                       "norm_scaled require the library API)");
    Mat q0 = mat_from_json(jq.at("Q0"), "Q0");
    const double scale = jq.at("scale").get<double>();
    if (scale < 0.0) throw ModelError("norm_scaled scale must be >= 0");
    if (q0.rows() != static_cast<std::size_t>(ne) || q0.cols() != static_cast<std::size_t>(ne))
      throw ModelError("Q0 must be |E| x |E|");
    double q0max = 0.0;
    for (std::size_t a = 0; a < q0.rows(); ++a)
      for (std::size_t b = 0; b < q0.cols(); ++b)
        if (a != b) q0max = std::max(q0max, q0(a, b));
    const int dd = d;
    SwitchFamily fam = [q0, scale, dd](const Vec& x) {
      double nx = 0.0;
      for (double v : x) nx += std::abs(v);
      const double factor = 1.0 + scale * nx / dd;
      Mat q(q0.rows(), q0.cols());
      for (std::size_t a = 0; a < q0.rows(); ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < q0.cols(); ++b)
          if (a != b) {
            q(a, b) = q0(a, b) * factor;
            row += q(a, b);
          }
        q(a, a) = -row;
      }
      return q;
    };
    return ModelSpec::lajmanovich_yorke(std::move(C), std::move(D), std::move(fam),
                                        q0max * (1.0 + scale), std::move(alpha));
  }
  throw ModelError("Q must be a matrix or a builtin object");
}

ModelSpec model_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace episwitch
