#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stratcube/estimate.hpp"
#include "stratcube/model.hpp"
#include "stratcube/stratified.hpp"

namespace stratcube {

struct VariableReport {
  double true_total = 0.0;
  double v_sim = 0.0;
  double mean_var_hat = 0.0;
  double var_app = 0.0;
  bool var_hat_defined = true;
  bool var_app_defined = true;
};

/// Monte-Carlo summary of one method on one frame.
struct SimulationReport {
  Method method = Method::proposed;
  std::size_t replicates = 0;
  std::vector<VariableReport> variables;
  std::vector<double> inclusion_frequency;  // per unit
  /// Largest |freq - pi| / sqrt(pi (1 - pi) / m) over units with 0 < pi < 1.
  double max_inclusion_z = 0.0;
  std::size_t units_outside_band = 0;  // beyond 3.5 standard errors
  std::size_t landing_drops = 0;       // total over replicates
};

struct SimulationOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  /// 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;
  SamplingOptions sampling;
};

/// Draws `replicates` samples with per-replicate streams Rng::stream(seed, r),
/// so results do not depend on the thread count.
SimulationReport simulate(const PopulationFrame& frame, Method method,
                          const SimulationOptions& options);

/// Wall-clock statistics of repeated sampling calls, in seconds.
struct TimingStats {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t runs = 0;
};

/// Times `runs` calls of the method after one discarded warm-up call.
TimingStats time_method(const BalanceSystem& system, Method method, std::size_t runs,
                        std::uint64_t seed, const SamplingOptions& sampling = {});

}  // namespace stratcube
