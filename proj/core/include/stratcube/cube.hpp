#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "stratcube/kernel.hpp"
#include "stratcube/model.hpp"

namespace stratcube {

/// Seedable, splittable random source. Identical seeds give identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent generator for sub-stream `index` of `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  /// Uniform draw in [0, 1).
  double uniform();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct Tolerances {
  double kernel = kDefaultTolerance;
  /// Coordinates this close to 0 or 1 are fixed exactly.
  double snap = 1e-9;
};

/// Evolving probability vector of a flight. `active` lists the unresolved
/// units in processing order; every other entry of `pi` is exactly 0 or 1.
struct FlightState {
  std::vector<double> pi;
  std::vector<std::size_t> active;
  std::size_t steps = 0;

  static FlightState from(const BalanceSystem& system);
  bool resolved() const { return active.empty(); }
};

using FlightObserver = std::function<void(const FlightState&)>;

/// One random move of the flight phase along direction u: goes to pi + l1 u
/// with probability l2 / (l1 + l2), else to pi - l2 u. At least one coordinate
/// lands exactly on 0 or 1. Throws std::invalid_argument if u is zero or pi
/// has an entry outside (0, 1).
std::vector<double> flight_step(std::span<const double> pi, std::span<const double> u,
                                Rng& rng, double snap = 1e-9);

/// Fast flight phase on the given columns of (H A), restricted to
/// `state.active`. Uses the first (c + 1) active units as the submatrix and
/// stops once its kernel is empty; at most c units stay active.
void run_flight(FlightState& state, const BalanceSystem& system,
                std::span<const std::size_t> columns, Rng& rng,
                const Tolerances& tol = {}, const FlightObserver& observer = {});

/// Unstratified cube flight phase: balances on A only.
FlightState flight_phase(const BalanceSystem& system, Rng& rng, const Tolerances& tol = {},
                         const FlightObserver& observer = {});

/// Columns of (H A) in their natural order: strata, then aux. Landing drops
/// from the back, so this order relaxes aux (last first) before strata.
std::vector<std::size_t> default_drop_order(const BalanceSystem& system);

/// Indices of the auxiliary columns of (H A).
std::vector<std::size_t> aux_columns(const BalanceSystem& system);

/// Landing by suppression of variables. `drop_order` holds the constraints
/// still enforced; the last one is relaxed and the flight re-run until every
/// unit is resolved. Constraints with no support among the remaining units
/// are discarded silently and never reported as dropped.
SampleResult landing_suppression(FlightState state, const BalanceSystem& system,
                                 std::vector<std::size_t> drop_order, Rng& rng,
                                 const Tolerances& tol = {});

/// Full unstratified cube method on A (flight + landing).
SampleResult cube_method(const BalanceSystem& system, Rng& rng, const Tolerances& tol = {});

}  // namespace stratcube
