#include "stratcube/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace stratcube {

namespace {

struct Replicate {
  std::vector<double> totals;
  std::vector<double> var_hat;
  std::vector<char> var_hat_ok;
};

}  // namespace

SimulationReport simulate(const PopulationFrame& frame, Method method,
                          const SimulationOptions& options) {
  if (options.replicates == 0) throw ValidationError("simulate: need at least one replicate");
  const BalanceSystem system = build_system(frame);
  const std::size_t n = frame.size();
  const std::size_t p = frame.num_interest();
  const std::size_t m = options.replicates;

  SimulationReport report;
  report.method = method;
  report.replicates = m;
  report.variables.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    report.variables[j].true_total = frame.interest_total(j);
    try {
      report.variables[j].var_app = variance_approx(frame, j);
    } catch (const std::domain_error&) {
      report.variables[j].var_app_defined = false;
    }
  }

  std::vector<Replicate> reps(m);
  std::size_t threads = options.threads != 0 ? options.threads
                                             : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, m);
  std::vector<std::vector<std::size_t>> counts(threads, std::vector<std::size_t>(n, 0));
  std::vector<std::size_t> drops(threads, 0);
  std::vector<std::exception_ptr> errors(threads);

  auto worker = [&](std::size_t t) {
    try {
      std::vector<double> y(n);
      for (std::size_t r = t; r < m; r += threads) {
        Rng rng = Rng::stream(options.seed, r);
        const SampleResult result = run_method(method, system, rng, options.sampling);
        drops[t] += result.dropped_constraints.size();
        for (std::size_t k = 0; k < n; ++k) {
          if (result.a[k] == 1.0) ++counts[t][k];
        }
        Replicate& rep = reps[r];
        rep.totals.resize(p);
        rep.var_hat.assign(p, 0.0);
        rep.var_hat_ok.assign(p, 1);
        for (std::size_t j = 0; j < p; ++j) {
          for (std::size_t k = 0; k < n; ++k) y[k] = frame.interest(k, j);
          rep.totals[j] = ht_total(y, frame.pi, result.a);
          try {
            rep.var_hat[j] = variance_estimate(frame, result, j);
          } catch (const std::domain_error&) {
            rep.var_hat_ok[j] = 0;
          }
        }
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> totals(m);
  for (std::size_t j = 0; j < p; ++j) {
    VariableReport& v = report.variables[j];
    double sum = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      totals[r] = reps[r].totals[j];
      v.var_hat_defined = v.var_hat_defined && reps[r].var_hat_ok[j];
      sum += reps[r].var_hat[j];
    }
    v.v_sim = simulation_variance(totals, v.true_total);
    v.mean_var_hat = v.var_hat_defined ? sum / static_cast<double>(m) : 0.0;
  }

  report.inclusion_frequency.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t c = 0;
    for (const auto& tc : counts) c += tc[k];
    const double freq = static_cast<double>(c) / static_cast<double>(m);
    report.inclusion_frequency[k] = freq;
    const double pk = frame.pi[k];
    if (pk > 0.0 && pk < 1.0) {
      const double z = std::abs(freq - pk) / std::sqrt(pk * (1.0 - pk) / static_cast<double>(m));
      report.max_inclusion_z = std::max(report.max_inclusion_z, z);
      if (z > 3.5) ++report.units_outside_band;
    }
  }
  for (std::size_t d : drops) report.landing_drops += d;
  return report;
}

TimingStats time_method(const BalanceSystem& system, Method method, std::size_t runs,
                        std::uint64_t seed, const SamplingOptions& sampling) {
  if (runs == 0) throw ValidationError("bench: need at least one run");
  using clock = std::chrono::steady_clock;
  {
    Rng warmup = Rng::stream(seed, ~std::uint64_t{0});
    (void)run_method(method, system, warmup, sampling);
  }
  std::vector<double> seconds(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng = Rng::stream(seed, r);
    const auto start = clock::now();
    const SampleResult result = run_method(method, system, rng, sampling);
    const auto stop = clock::now();
    (void)result;
    seconds[r] = std::chrono::duration<double>(stop - start).count();
  }
  TimingStats stats;
  stats.runs = runs;
  for (double s : seconds) stats.mean += s;
  stats.mean /= static_cast<double>(runs);
  if (runs > 1) {
    double var = 0.0;
    for (double s : seconds) var += (s - stats.mean) * (s - stats.mean);
    stats.sd = std::sqrt(var / static_cast<double>(runs - 1));
  }
  return stats;
}

}  // namespace stratcube
