#pragma once

#include "episwitch/linalg.hpp"
#include "episwitch/model.hpp"

namespace episwitch {

struct PerronPair {
  double value = 0.0;  // principal eigenvalue
  Vec vector;          // simplex-normalized positive right eigenvector
  double residual = 0.0;
  int iterations = 0;
};

bool is_metzler(const Mat& a, double tol = 0.0);
// Strong connectivity of the off-diagonal support graph.
bool is_irreducible(const Mat& a);

// Principal eigenpair of a Metzler irreducible matrix by shifted power
// iteration on A + sI with s = 1 + max|A_ii|.
PerronPair perron(const Mat& a, double tol = 1e-12);

// Stationary law of an irreducible rate matrix: pi Q = 0, sum pi = 1.
Vec stationary_env(const Mat& q, double tol = 1e-12);

// d=1, constant Q: g(p) equals the principal eigenvalue of
// Q + p Diag(A^1,...,A^{|E|}).  p = 0 returns 0 (rate-matrix identity).
double g_exact_1d(const ModelSpec& spec, double p);

// log(max_i x_i/y_i / min_i x_i/y_i); both vectors strictly positive.
double hilbert_distance(const Vec& x, const Vec& y);

}  // namespace episwitch
