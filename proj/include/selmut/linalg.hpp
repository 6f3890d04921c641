// Small dense linear algebra: LU solves and the unsymmetric eigenvalue problem
// (balancing, Householder reduction to Hessenberg form, Francis double-shift
// QR). Sized for the N <= a few hundred Jacobians of the equilibrium solver.
#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace selmut {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Solves A x = b by LU with partial pivoting; nullopt when A is singular to
/// working precision.
std::optional<std::vector<double>> lu_solve(Matrix A, std::vector<double> b);

/// All eigenvalues of a square matrix. Throws Error if QR fails to converge.
std::vector<std::complex<double>> eigenvalues(Matrix A);

/// Largest real part among the eigenvalues.
double spectral_bound(const Matrix& A);

}  // namespace selmut
