#pragma once

// Small helpers shared by the unit and acceptance tests. Oracles here are
// written the slow, obvious way on purpose.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "visern/matrix.hpp"
#include "visern/rng.hpp"

namespace visern::testing {

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

/// Eigenvalues of a general (possibly non-symmetric) matrix, sorted by real
/// part. Imaginary parts are returned so callers can assert they vanish.
inline std::vector<std::complex<double>> general_eigenvalues(const Matrix& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(to_eigen(m), false);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
    out.push_back(solver.eigenvalues()(i));
  std::sort(out.begin(), out.end(),
            [](auto a, auto b) { return a.real() < b.real(); });
  return out;
}

/// Symmetric non-negative adjacency with entries in (lo, hi).
inline Matrix random_positive_adjacency(std::size_t n, Rng& rng, double lo = 0.05,
                                        double hi = 1.0) {
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) r(i, j) = r(j, i) = rng.uniform(lo, hi);
  return r;
}

}  // namespace visern::testing
