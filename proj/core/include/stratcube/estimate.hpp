#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stratcube/model.hpp"

namespace stratcube {

/// Horvitz-Thompson estimate sum_k y_k a_k / pi_k.
/// Throws std::invalid_argument if a selected unit has pi = 0.
double ht_total(std::span<const double> y, std::span<const double> pi,
                std::span<const double> a);

/// Variance approximation of the HT total of interest variable j with
/// c_k = pi_k (1 - pi_k) N / (N - (H + q)) and residuals from the c-weighted
/// regression of y/pi on the rows of (H A).
/// Throws std::domain_error unless N > H + q.
double variance_approx(const PopulationFrame& frame, std::size_t j);

/// Sample-based estimate of the same quantity with
/// c_k = (1 - pi_k) n / (n - (H + q)), n = sum of pi, sums over the sample.
/// Throws std::domain_error unless n > H + q.
double variance_estimate(const PopulationFrame& frame, const SampleResult& sample,
                         std::size_t j);

/// Mean squared deviation of replicate totals from the true total.
/// Throws std::invalid_argument on an empty sequence.
double simulation_variance(std::span<const double> totals, double true_total);

/// Weighted residual sum of squares sum_k c_k (r_k - alpha^T z_k)^2 where z_k is
/// row k of (H A) for the listed units. The strata block is absorbed by
/// weighted within-stratum centering; the aux block is solved with
/// least_squares_pinv. Exposed for testing against a dense solve.
double weighted_residual_ss(std::span<const std::size_t> units,
                            std::span<const std::size_t> strata, std::size_t num_strata,
                            const DenseMatrix& a, std::span<const double> response,
                            std::span<const double> weights);

}  // namespace stratcube
