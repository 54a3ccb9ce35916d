#include "stratcube/estimate.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "stratcube/kernel.hpp"

namespace stratcube {

double ht_total(std::span<const double> y, std::span<const double> pi,
                std::span<const double> a) {
  if (y.size() != pi.size() || a.size() != pi.size()) {
    throw std::invalid_argument("ht_total: length mismatch");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (a[k] == 0.0) continue;
    if (pi[k] <= 0.0) {
      throw std::invalid_argument(fmt::format("ht_total: unit {} selected with pi = 0", k + 1));
    }
    total += y[k] * a[k] / pi[k];
  }
  return total;
}

double weighted_residual_ss(std::span<const std::size_t> units,
                            std::span<const std::size_t> strata, std::size_t num_strata,
                            const DenseMatrix& a, std::span<const double> response,
                            std::span<const double> weights) {
  const std::size_t q = a.cols();

  // Weighted stratum means of the response and of each aux column.
  std::vector<double> wsum(num_strata, 0.0);
  std::vector<double> rmean(num_strata, 0.0);
  DenseMatrix amean(num_strata, q);
  for (std::size_t k : units) {
    const std::size_t h = strata[k];
    const double w = weights[k];
    wsum[h] += w;
    rmean[h] += w * response[k];
    auto arow = a.row(k);
    auto mrow = amean.row(h);
    for (std::size_t j = 0; j < q; ++j) mrow[j] += w * arow[j];
  }
  for (std::size_t h = 0; h < num_strata; ++h) {
    if (wsum[h] <= 0.0) continue;
    rmean[h] /= wsum[h];
    for (double& v : amean.row(h)) v /= wsum[h];
  }

  DenseMatrix gram(q, q);
  std::vector<double> rhs(q, 0.0);
  std::vector<double> centered(q);
  for (std::size_t k : units) {
    const double w = weights[k];
    if (w == 0.0) continue;
    const std::size_t h = strata[k];
    const double rc = response[k] - rmean[h];
    for (std::size_t j = 0; j < q; ++j) centered[j] = a(k, j) - amean(h, j);
    for (std::size_t i = 0; i < q; ++i) {
      rhs[i] += w * centered[i] * rc;
      for (std::size_t j = 0; j < q; ++j) gram(i, j) += w * centered[i] * centered[j];
    }
  }
  const auto beta = least_squares_pinv(gram, rhs);

  double rss = 0.0;
  for (std::size_t k : units) {
    const double w = weights[k];
    if (w == 0.0) continue;
    const std::size_t h = strata[k];
    double e = response[k] - rmean[h];
    for (std::size_t j = 0; j < q; ++j) e -= beta[j] * (a(k, j) - amean(h, j));
    rss += w * e * e;
  }
  return rss;
}

namespace {

struct RegressionInputs {
  DenseMatrix a;
  std::vector<double> response;
};

RegressionInputs expand(const PopulationFrame& frame, std::size_t j) {
  if (j >= frame.num_interest()) {
    throw std::out_of_range(fmt::format("interest variable {} does not exist", j + 1));
  }
  const std::size_t n = frame.size();
  RegressionInputs in{DenseMatrix(n, frame.num_aux()), std::vector<double>(n, 0.0)};
  for (std::size_t k = 0; k < n; ++k) {
    const double p = frame.pi[k];
    if (p <= 0.0) continue;
    in.response[k] = frame.interest(k, j) / p;
    for (std::size_t c = 0; c < frame.num_aux(); ++c) in.a(k, c) = frame.aux(k, c) / p;
  }
  return in;
}

}  // namespace

double variance_approx(const PopulationFrame& frame, std::size_t j) {
  const double n = static_cast<double>(frame.size());
  const double constraints = static_cast<double>(frame.num_strata() + frame.num_aux());
  if (!(n > constraints)) {
    throw std::domain_error(fmt::format(
        "variance_approx needs N > H + q (N = {}, H + q = {})", frame.size(), constraints));
  }
  const double correction = n / (n - constraints);
  auto in = expand(frame, j);
  std::vector<std::size_t> units;
  std::vector<double> weights(frame.size(), 0.0);
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const double p = frame.pi[k];
    if (p <= 0.0) continue;
    units.push_back(k);
    weights[k] = p * (1.0 - p) * correction;
  }
  return weighted_residual_ss(units, frame.strata, frame.num_strata(), in.a, in.response,
                              weights);
}

double variance_estimate(const PopulationFrame& frame, const SampleResult& sample,
                         std::size_t j) {
  if (sample.a.size() != frame.size()) {
    throw std::invalid_argument("variance_estimate: sample length mismatch");
  }
  double n = 0.0;
  for (double p : frame.pi) n += p;
  const double constraints = static_cast<double>(frame.num_strata() + frame.num_aux());
  if (!(n > constraints)) {
    throw std::domain_error(fmt::format(
        "variance_estimate needs n > H + q (n = {}, H + q = {})", n, constraints));
  }
  const double correction = n / (n - constraints);
  auto in = expand(frame, j);
  std::vector<std::size_t> units;
  std::vector<double> weights(frame.size(), 0.0);
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (sample.a[k] != 1.0) continue;
    if (frame.pi[k] <= 0.0) {
      throw std::invalid_argument(
          fmt::format("variance_estimate: unit {} selected with pi = 0", k + 1));
    }
    units.push_back(k);
    weights[k] = (1.0 - frame.pi[k]) * correction;
  }
  return weighted_residual_ss(units, frame.strata, frame.num_strata(), in.a, in.response,
                              weights);
}

double simulation_variance(std::span<const double> totals, double true_total) {
  if (totals.empty()) throw std::invalid_argument("simulation_variance: no replicates");
  double sum = 0.0;
  for (double t : totals) sum += (t - true_total) * (t - true_total);
  return sum / static_cast<double>(totals.size());
}

}  // namespace stratcube
