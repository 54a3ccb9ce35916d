#pragma once

#include <cstddef>
#include <cstdint>

#include "stratcube/model.hpp"

namespace stratcube {

/// Shape of a synthetic establishment-like population: H strata of equal size,
/// equal inclusion probabilities n_h / N_h inside each stratum, count-valued
/// auxiliaries and interest variables correlated with them.
struct GeneratorSpec {
  std::size_t strata = 675;
  std::size_t units_per_stratum = 3;
  std::size_t q = 3;
  std::size_t p = 3;
  double nh = 2.0;
  double rho = 0.7;
  /// Mean of the auxiliary counts before the stratum effect.
  double aux_mean = 4.0;
  /// Negative-binomial shape; smaller is more skewed.
  double aux_shape = 0.8;
  /// Log-scale standard deviation of the multiplicative stratum effect.
  double stratum_effect = 0.5;

  std::size_t population_size() const { return strata * units_per_stratum; }
  /// Throws ValidationError if the spec is inconsistent.
  void validate() const;
};

PopulationFrame generate_population(const GeneratorSpec& spec, std::uint64_t seed);

}  // namespace stratcube
