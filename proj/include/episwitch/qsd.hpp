#pragma once

#include <cstdint>
#include <vector>

#include "episwitch/model.hpp"
#include "episwitch/pdmp.hpp"
#include "episwitch/rng.hpp"

namespace episwitch {

// Bijection between surviving states {n != 0} x E and 0..M-1, lexicographic
// in (n, env) with n_1 the most significant digit.
struct StateIndex {
  int d = 0;
  int num_env = 0;
  std::vector<std::int64_t> sizes;
  std::vector<std::int64_t> strides;
  std::int64_t M = 0;

  std::int64_t encode(const std::vector<std::int64_t>& counts, int env) const;
  void decode(std::int64_t index, std::vector<std::int64_t>& counts, int& env) const;
};

StateIndex enumerate_states(const ModelSpec& spec, std::int64_t K,
                            const std::vector<std::int64_t>& sizes,
                            std::int64_t cap = 5000000);

// Killed generator restricted to the survival set, stored as CSR of the
// TRANSPOSE (incoming transitions per state) so the left product mu L~ is a
// row-parallel dot product.  Diagonal entries are part of the CSR rows.
struct KilledGenerator {
  StateIndex index;
  std::vector<std::int64_t> row_ptr;
  std::vector<std::int64_t> col;
  std::vector<double> val;
  Vec flux;      // per-state rate into {0} x E
  double gamma;  // uniformization constant, max |diagonal|
};

KilledGenerator build_killed_generator(const ModelSpec& spec, std::int64_t K,
                                       const std::vector<std::int64_t>& sizes,
                                       const StateIndex& index);

struct QsdResult {
  Vec weights;           // probability vector over StateIndex
  double lambda = 0.0;   // extinction rate, > 0
  double residual = 0.0; // ||mu L~ + lambda mu||_1
  std::int64_t iterations = 0;
  bool converged = true;
};

// Left Perron eigenvector of P = I + L~/gamma by power iteration with l1
// renormalization; lambda = gamma (1 - rho).
QsdResult compute_qsd(const KilledGenerator& gen, double tol = 1e-12,
                      std::int64_t max_iter = 2000000);
QsdResult compute_qsd(const ModelSpec& spec, std::int64_t K,
                      const std::vector<std::int64_t>& sizes, double tol = 1e-12,
                      std::int64_t max_iter = 2000000);

// int ||x||^{-p} dmu^K with x_i = n_i/K_i and the l1 norm; exact sum.
double qsd_moment(const QsdResult& result, const StateIndex& index,
                  const std::vector<std::int64_t>& sizes, double p);

// mu^K{ ||x|| < eps }, exact sum; eps in (0, d].
double qsd_mass_below(const QsdResult& result, const StateIndex& index,
                      const std::vector<std::int64_t>& sizes, double eps);

// Inverse-CDF draw of a surviving state under the QSD weights.
std::int64_t sample_qsd_state(const QsdResult& result, RngStream& rng);

// Occupation histogram over [0,1]^d x E for comparing mu^K with the PDMP law.
struct Histogram {
  int d = 0;
  int bins = 0;
  int num_env = 0;
  Vec mass;  // bins^d * num_env cells, sums to 1

  std::int64_t cell(const Vec& x, int env) const;
};

// Time-weighted occupation of one long PDMP path after burn-in; output_dt
// caps the accumulation substep.
Histogram pdmp_stationary_estimate(const ModelSpec& spec, double T, double burn_in,
                                   double output_dt, RngStream rng, int bins = 50,
                                   const Vec& x0 = {}, int env0 = 0);

Histogram bin_qsd(const QsdResult& result, const StateIndex& index,
                  const std::vector<std::int64_t>& sizes, int bins);

double histogram_l1_distance(const Histogram& a, const Histogram& b);

}  // namespace episwitch
