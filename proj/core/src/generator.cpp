#include "stratcube/generator.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>

#include "stratcube/cube.hpp"

namespace stratcube {

void GeneratorSpec::validate() const {
  if (strata == 0) throw ValidationError("generator: need at least one stratum");
  if (units_per_stratum == 0) throw ValidationError("generator: need at least one unit per stratum");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("generator: rho must lie in [0, 1]");
  if (!(nh > 0.0 && nh <= static_cast<double>(units_per_stratum))) {
    throw ValidationError(fmt::format("generator: n_h = {} must lie in (0, {}]", nh,
                                      units_per_stratum));
  }
  if (!(aux_mean > 0.0) || !(aux_shape > 0.0) || !(stratum_effect >= 0.0)) {
    throw ValidationError("generator: distribution parameters must be positive");
  }
}

PopulationFrame generate_population(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  auto& engine = rng.engine();
  const std::size_t n = spec.population_size();
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> effect(spec.strata);
  const double s = spec.stratum_effect;
  for (double& e : effect) e = std::exp(s * normal(engine) - 0.5 * s * s);

  std::vector<std::string> ids(n);
  std::vector<std::string> labels(n);
  DenseMatrix aux(n, spec.q);
  for (std::size_t h = 0; h < spec.strata; ++h) {
    for (std::size_t i = 0; i < spec.units_per_stratum; ++i) {
      const std::size_t k = h * spec.units_per_stratum + i;
      ids[k] = fmt::format("u{}", k + 1);
      labels[k] = fmt::format("s{}", h + 1);
      for (std::size_t j = 0; j < spec.q; ++j) {
        // Gamma-Poisson mixture: over-dispersed counts.
        const double mean = spec.aux_mean * static_cast<double>(j + 1) * effect[h];
        std::gamma_distribution<double> gamma(spec.aux_shape, mean / spec.aux_shape);
        const double rate = gamma(engine);
        aux(k, j) = rate > 0.0
                        ? static_cast<double>(std::poisson_distribution<long>(rate)(engine))
                        : 0.0;
      }
    }
  }

  DenseMatrix interest(n, spec.p);
  for (std::size_t j = 0; j < spec.p; ++j) {
    // Variable j tracks aux column j (cycling when p > q).
    std::vector<double> base(n, 0.0);
    if (spec.q > 0) {
      for (std::size_t k = 0; k < n; ++k) base[k] = aux(k, j % spec.q);
    }
    double mean = 0.0;
    for (double v : base) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : base) var += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    const double noise_sd = (sd > 0.0 ? sd : 1.0) * std::sqrt(1.0 - spec.rho * spec.rho);
    for (std::size_t k = 0; k < n; ++k) {
      interest(k, j) = mean + spec.rho * (base[k] - mean) + noise_sd * normal(engine);
    }
  }

  std::vector<double> pi(n, spec.nh / static_cast<double>(spec.units_per_stratum));
  return make_frame(std::move(ids), labels, std::move(pi), std::move(aux), std::move(interest));
}

}  // namespace stratcube
