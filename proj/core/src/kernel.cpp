#include "stratcube/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stratcube {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("DenseMatrix: data length does not match shape");
  }
}

void DenseMatrix::reset(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, 0.0);
}

double DenseMatrix::norm_inf() const {
  double best = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    double sum = 0.0;
    for (double v : row(i)) sum += std::abs(v);
    best = std::max(best, sum);
  }
  return best;
}

std::optional<std::vector<double>> kernel_vector(const DenseMatrix& b, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("kernel_vector: tolerance must be positive");
  const std::size_t r = b.rows();
  const std::size_t c = b.cols();
  if (r == 0) throw std::invalid_argument("kernel_vector: matrix has no rows");

  // Each column of B is one equation of B^T u = 0. Scale every equation to unit
  // max-norm and drop the empty ones.
  std::vector<double> scale(c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    auto row = b.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      const double v = row[j];
      if (!std::isfinite(v)) throw std::invalid_argument("kernel_vector: non-finite entry");
      scale[j] = std::max(scale[j], std::abs(v));
    }
  }
  std::vector<std::size_t> equations;
  equations.reserve(c);
  for (std::size_t j = 0; j < c; ++j) {
    if (scale[j] > 0.0) equations.push_back(j);
  }

  const std::size_t e = equations.size();
  DenseMatrix m(e, r);
  for (std::size_t i = 0; i < r; ++i) {
    auto row = b.row(i);
    for (std::size_t k = 0; k < e; ++k) {
      const std::size_t j = equations[k];
      m(k, i) = row[j] / scale[j];
    }
  }

  // Gauss-Jordan with partial pivoting over the unknowns. pivot_of[col] is the
  // equation that solves for unknown col, or npos for a free unknown.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> pivot_of(r, npos);
  std::vector<std::size_t> nonzero;
  nonzero.reserve(r);
  std::size_t free_col = npos;
  std::size_t rank = 0;

  for (std::size_t col = 0; col < r; ++col) {
    if (rank == e) {
      if (free_col == npos) free_col = col;
      break;
    }
    std::size_t best = npos;
    double best_abs = tol;
    for (std::size_t k = rank; k < e; ++k) {
      const double v = std::abs(m(k, col));
      if (v > best_abs) {
        best_abs = v;
        best = k;
      }
    }
    if (best == npos) {
      if (free_col == npos) free_col = col;
      continue;
    }
    if (best != rank) {
      auto a = m.row(best);
      auto z = m.row(rank);
      std::swap_ranges(a.begin(), a.end(), z.begin());
    }
    auto prow = m.row(rank);
    const double inv = 1.0 / prow[col];
    nonzero.clear();
    for (std::size_t k = 0; k < r; ++k) {
      if (prow[k] != 0.0) {
        prow[k] *= inv;
        nonzero.push_back(k);
      }
    }
    prow[col] = 1.0;
    for (std::size_t k = 0; k < e; ++k) {
      if (k == rank) continue;
      auto row = m.row(k);
      const double f = row[col];
      if (f == 0.0) continue;
      for (std::size_t idx : nonzero) row[idx] -= f * prow[idx];
      row[col] = 0.0;
    }
    pivot_of[col] = rank;
    ++rank;
  }

  if (free_col == npos) return std::nullopt;

  std::vector<double> u(r, 0.0);
  u[free_col] = 1.0;
  for (std::size_t col = 0; col < r; ++col) {
    if (pivot_of[col] != npos) u[col] = -m(pivot_of[col], free_col);
  }

  double norm = 0.0;
  for (double v : u) norm += v * v;
  norm = std::sqrt(norm);
  double sign = 1.0;
  for (double v : u) {
    if (v != 0.0) {
      sign = v > 0.0 ? 1.0 : -1.0;
      break;
    }
  }
  for (double& v : u) v *= sign / norm;
  return u;
}

std::vector<double> least_squares_pinv(const DenseMatrix& gram, std::span<const double> rhs,
                                       double tol) {
  const std::size_t n = gram.rows();
  if (gram.cols() != n || rhs.size() != n) {
    throw std::invalid_argument("least_squares_pinv: shape mismatch");
  }
  for (double v : gram.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("least_squares_pinv: non-finite entry");
  }
  for (double v : rhs) {
    if (!std::isfinite(v)) throw std::invalid_argument("least_squares_pinv: non-finite entry");
  }
  if (n == 0) return {};

  Eigen::MatrixXd g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g(i, j) = 0.5 * (gram(i, j) + gram(j, i));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("least_squares_pinv: eigendecomposition failed");
  }
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();
  const double largest = values.cwiseAbs().maxCoeff();

  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) b(static_cast<Eigen::Index>(i)) = rhs[i];
  Eigen::VectorXd coef = vectors.transpose() * b;
  for (Eigen::Index i = 0; i < coef.size(); ++i) {
    coef(i) = (largest > 0.0 && values(i) > tol * largest) ? coef(i) / values(i) : 0.0;
  }
  const Eigen::VectorXd x = vectors * coef;
  return {x.data(), x.data() + x.size()};
}

}  // namespace stratcube
