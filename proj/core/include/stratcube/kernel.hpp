#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace stratcube {

inline constexpr double kDefaultTolerance = 1e-9;

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  /// Resizes and zero-fills; keeps capacity.
  void reset(std::size_t rows, std::size_t cols);

  /// Maximum absolute row sum.
  double norm_inf() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Returns a unit vector u with B^T u = 0, or nullopt when B^T has full column
/// rank within `tol`. B is r x c; u has r entries.
///
/// Columns of B that are identically zero impose nothing and are skipped, so
/// a 1 x 0 (or all-zero) B yields a basis vector. The sign is normalized so the
/// first non-zero entry is positive.
std::optional<std::vector<double>> kernel_vector(const DenseMatrix& b,
                                                 double tol = kDefaultTolerance);

/// Minimum-norm solution of G x = b for symmetric positive semidefinite G.
/// Eigen-directions with eigenvalue below tol * max eigenvalue are truncated.
std::vector<double> least_squares_pinv(const DenseMatrix& gram,
                                       std::span<const double> rhs,
                                       double tol = kDefaultTolerance);

}  // namespace stratcube
