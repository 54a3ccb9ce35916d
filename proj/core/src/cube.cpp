#include "stratcube/cube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stratcube {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng Rng::stream(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(seed) ^ splitmix64(~index));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

FlightState FlightState::from(const BalanceSystem& system) {
  FlightState state;
  state.pi = system.pi_t;
  for (std::size_t k : system.active) {
    if (state.pi[k] > 0.0 && state.pi[k] < 1.0) state.active.push_back(k);
  }
  return state;
}

std::vector<double> flight_step(std::span<const double> pi, std::span<const double> u,
                                Rng& rng, double snap) {
  if (pi.size() != u.size()) throw std::invalid_argument("flight_step: length mismatch");
  constexpr double inf = std::numeric_limits<double>::infinity();
  double up = inf;    // largest step along +u
  double down = inf;  // largest step along -u
  std::size_t up_at = 0;
  std::size_t down_at = 0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    if (!(pi[k] > 0.0 && pi[k] < 1.0)) {
      throw std::invalid_argument("flight_step: probability outside (0, 1)");
    }
    const double uk = u[k];
    if (uk == 0.0) continue;
    const double to_up = uk > 0.0 ? (1.0 - pi[k]) / uk : -pi[k] / uk;
    const double to_down = uk > 0.0 ? pi[k] / uk : (pi[k] - 1.0) / uk;
    if (to_up < up) {
      up = to_up;
      up_at = k;
    }
    if (to_down < down) {
      down = to_down;
      down_at = k;
    }
  }
  if (up == inf) throw std::invalid_argument("flight_step: direction is zero");
  if (!(up > 0.0) || !(down > 0.0) || !std::isfinite(up) || !std::isfinite(down)) {
    throw std::logic_error("flight_step: non-positive step length");
  }

  std::vector<double> next(pi.begin(), pi.end());
  const bool go_up = rng.uniform() < down / (up + down);
  const double step = go_up ? up : -down;
  for (std::size_t k = 0; k < next.size(); ++k) next[k] += step * u[k];
  if (go_up) {
    next[up_at] = u[up_at] > 0.0 ? 1.0 : 0.0;
  } else {
    next[down_at] = u[down_at] > 0.0 ? 0.0 : 1.0;
  }
  for (double& v : next) {
    if (v <= snap) {
      v = 0.0;
    } else if (v >= 1.0 - snap) {
      v = 1.0;
    }
  }
  return next;
}

void run_flight(FlightState& state, const BalanceSystem& system,
                std::span<const std::size_t> columns, Rng& rng, const Tolerances& tol,
                const FlightObserver& observer) {
  const std::size_t c = columns.size();
  std::vector<std::size_t> order = std::move(state.active);
  std::size_t head = 0;
  DenseMatrix b;
  std::vector<double> local;
  std::vector<std::size_t> survivors;

  while (head < order.size()) {
    const std::size_t r = std::min(c + 1, order.size() - head);
    b.reset(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t unit = order[head + i];
      auto row = b.row(i);
      for (std::size_t j = 0; j < c; ++j) row[j] = system.constraint(unit, columns[j]);
    }
    const auto u = kernel_vector(b, tol.kernel);
    if (!u) break;

    local.resize(r);
    for (std::size_t i = 0; i < r; ++i) local[i] = state.pi[order[head + i]];
    const auto next = flight_step(local, *u, rng, tol.snap);
    survivors.clear();
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t unit = order[head + i];
      state.pi[unit] = next[i];
      if (next[i] > 0.0 && next[i] < 1.0) survivors.push_back(unit);
    }
    ++state.steps;
    head += r - survivors.size();
    std::copy(survivors.begin(), survivors.end(), order.begin() + static_cast<std::ptrdiff_t>(head));

    if (observer) {
      state.active.assign(order.begin() + static_cast<std::ptrdiff_t>(head), order.end());
      observer(state);
    }
  }
  order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(head));
  state.active = std::move(order);
}

std::vector<std::size_t> aux_columns(const BalanceSystem& system) {
  std::vector<std::size_t> cols(system.num_aux());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = system.num_strata + j;
  return cols;
}

std::vector<std::size_t> default_drop_order(const BalanceSystem& system) {
  std::vector<std::size_t> cols(system.num_constraints());
  for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = c;
  return cols;
}

FlightState flight_phase(const BalanceSystem& system, Rng& rng, const Tolerances& tol,
                         const FlightObserver& observer) {
  FlightState state = FlightState::from(system);
  const auto cols = aux_columns(system);
  run_flight(state, system, cols, rng, tol, observer);
  return state;
}

namespace {

void check_drop_order(const BalanceSystem& system, std::span<const std::size_t> order) {
  std::vector<char> seen(system.num_constraints(), 0);
  for (std::size_t c : order) {
    if (c >= seen.size()) throw ValidationError("drop order: constraint index out of range");
    if (seen[c]) throw ValidationError("drop order: duplicate constraint index");
    seen[c] = 1;
  }
}

// Keeps only constraints with a non-zero entry for some active unit.
void prune_unsupported(const BalanceSystem& system, std::span<const std::size_t> active,
                       std::vector<std::size_t>& constraints) {
  std::vector<char> support(system.num_constraints(), 0);
  const std::size_t hcount = system.num_strata;
  for (std::size_t unit : active) {
    support[system.strata[unit]] = 1;
    auto row = system.a.row(unit);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) support[hcount + j] = 1;
    }
  }
  std::erase_if(constraints, [&](std::size_t c) { return !support[c]; });
}

}  // namespace

SampleResult landing_suppression(FlightState state, const BalanceSystem& system,
                                 std::vector<std::size_t> drop_order, Rng& rng,
                                 const Tolerances& tol) {
  check_drop_order(system, drop_order);
  std::vector<std::size_t> dropped;
  while (!state.active.empty()) {
    prune_unsupported(system, state.active, drop_order);
    run_flight(state, system, drop_order, rng, tol);
    if (state.active.empty()) break;
    prune_unsupported(system, state.active, drop_order);
    if (drop_order.empty()) {
      throw std::logic_error("landing: unconstrained flight left units unresolved");
    }
    dropped.push_back(drop_order.back());
    drop_order.pop_back();
  }
  return make_result(system, std::move(state.pi), std::move(dropped));
}

SampleResult cube_method(const BalanceSystem& system, Rng& rng, const Tolerances& tol) {
  FlightState state = flight_phase(system, rng, tol);
  return landing_suppression(std::move(state), system, aux_columns(system), rng, tol);
}

}  // namespace stratcube
