#include "stratcube/stratified.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace stratcube {

std::optional<SubmatrixExtent> find_submatrix_extent(std::span<const std::size_t> strata_seq,
                                                     std::size_t q) {
  std::unordered_set<std::size_t> seen;
  std::size_t scanned = 0;
  std::size_t rows = q;
  while (true) {
    if (rows > strata_seq.size()) return std::nullopt;
    for (; scanned < rows; ++scanned) seen.insert(strata_seq[scanned]);
    const std::size_t next = q + seen.size() + 1;
    if (next <= rows) return SubmatrixExtent{rows, seen.size()};
    rows = next;
  }
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::proposed: return "proposed";
    case Method::chauvet: return "chauvet";
    case Method::hasler: return "hasler";
    case Method::cube: return "cube";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "proposed") return Method::proposed;
  if (name == "chauvet") return Method::chauvet;
  if (name == "hasler") return Method::hasler;
  if (name == "cube") return Method::cube;
  throw ValidationError("unknown method '" + std::string(name) +
                        "' (expected proposed, chauvet, hasler or cube)");
}

namespace {

// Flight inside every stratum on (1 A_h). Returns the units left unresolved,
// grouped by stratum in stratum order and file order within a stratum.
std::vector<std::vector<std::size_t>> flight_per_stratum(FlightState& state,
                                                         const BalanceSystem& system,
                                                         Rng& rng, const Tolerances& tol) {
  std::vector<std::vector<std::size_t>> by_stratum(system.num_strata);
  for (std::size_t unit : state.active) by_stratum[system.strata[unit]].push_back(unit);

  std::vector<std::size_t> columns(system.num_aux() + 1);
  for (std::size_t j = 0; j < system.num_aux(); ++j) columns[j + 1] = system.num_strata + j;
  for (std::size_t h = 0; h < system.num_strata; ++h) {
    if (by_stratum[h].empty()) continue;
    columns[0] = h;
    state.active = std::move(by_stratum[h]);
    run_flight(state, system, columns, rng, tol);
    by_stratum[h] = std::move(state.active);
  }
  state.active.clear();
  return by_stratum;
}

std::vector<std::size_t> concat(const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<std::size_t> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::vector<std::size_t> resolve_drop_order(const BalanceSystem& system,
                                            const SamplingOptions& options) {
  return options.drop_order.empty() ? default_drop_order(system) : options.drop_order;
}

// Flight on (H A) over a moving leading block sized by the submatrix-extent
// search, followed by landing. Units that are the last unresolved member of a
// constrained stratum cannot move (their stratum column forces u_k = 0), so
// they are parked outside the scan; keep_pinned disables that.
class StratifiedFlight {
 public:
  StratifiedFlight(const BalanceSystem& system, FlightState& state, Rng& rng,
                   const SamplingOptions& options)
      : system_(system),
        state_(state),
        rng_(rng),
        options_(options),
        stratum_on_(system.num_strata, 1),
        stratum_count_(system.num_strata, 0),
        stamp_(system.num_strata, 0),
        local_col_(system.num_strata, 0),
        rank_(system.size(), 0) {
    aux_on_ = aux_columns(system);
    for (std::size_t unit : state_.active) ++stratum_count_[system.strata[unit]];
    for (std::size_t i = 0; i < state_.active.size(); ++i) rank_[state_.active[i]] = i;
    order_ = std::move(state_.active);
  }

  void flight() {
    while (true) {
      std::size_t rows = 0;
      std::optional<std::vector<double>> u;
      if (!scan_window(0)) break;
      rows = window_.size();
      u = kernel_vector(build_submatrix(), options_.tol.kernel);
      if (!u) {
        // Rank-deficient block: try once with one more unit.
        if (!scan_window(rows + 1)) break;
        u = kernel_vector(build_submatrix(), options_.tol.kernel);
        if (!u) break;
      }
      apply_step(*u);
    }
  }

  SampleResult land(std::vector<std::size_t> drop_order) {
    std::vector<std::size_t> dropped;
    while (true) {
      restart_order();
      if (order_.empty()) break;
      prune(drop_order);
      enable(drop_order);
      flight();
      restart_order();
      if (order_.empty()) break;
      prune(drop_order);
      if (drop_order.empty()) {
        throw std::logic_error("landing: unconstrained flight left units unresolved");
      }
      dropped.push_back(drop_order.back());
      drop_order.pop_back();
    }
    state_.active.clear();
    return make_result(system_, std::move(state_.pi), std::move(dropped));
  }

 private:
  bool pinned(std::size_t unit) const {
    const std::size_t h = system_.strata[unit];
    return !options_.keep_pinned && stratum_on_[h] && stratum_count_[h] == 1;
  }

  // Collects the leading block of movable units. With min_rows == 0 the block
  // size comes from the extent search; otherwise exactly min_rows units are
  // taken. Returns false if not enough units remain.
  bool scan_window(std::size_t min_rows) {
    if (min_rows == 0) {
      window_.clear();
      window_strata_.clear();
      ++epoch_;
      pos_ = head_;
    }
    std::size_t target = min_rows == 0 ? aux_on_.size() : min_rows;
    while (true) {
      while (window_.size() < target) {
        if (!take_next()) return false;
      }
      if (min_rows != 0) return true;
      const std::size_t next = aux_on_.size() + window_strata_.size() + 1;
      if (next <= target) return true;
      target = next;
    }
  }

  bool take_next() {
    while (pos_ < order_.size()) {
      const std::size_t unit = order_[pos_++];
      const double p = state_.pi[unit];
      if (!(p > 0.0 && p < 1.0)) continue;
      if (pinned(unit)) {
        parked_.push_back(unit);
        continue;
      }
      window_.push_back(unit);
      const std::size_t h = system_.strata[unit];
      if (stratum_on_[h] && stamp_[h] != epoch_) {
        stamp_[h] = epoch_;
        local_col_[h] = window_strata_.size();
        window_strata_.push_back(h);
      }
      return true;
    }
    return false;
  }

  const DenseMatrix& build_submatrix() {
    const std::size_t hs = window_strata_.size();
    b_.reset(window_.size(), hs + aux_on_.size());
    for (std::size_t i = 0; i < window_.size(); ++i) {
      const std::size_t unit = window_[i];
      auto row = b_.row(i);
      const std::size_t h = system_.strata[unit];
      if (stratum_on_[h]) row[local_col_[h]] = 1.0;
      for (std::size_t j = 0; j < aux_on_.size(); ++j) {
        row[hs + j] = system_.a(unit, aux_on_[j] - system_.num_strata);
      }
    }
    return b_;
  }

  void apply_step(const std::vector<double>& u) {
    const std::size_t r = window_.size();
    local_.resize(r);
    for (std::size_t i = 0; i < r; ++i) local_[i] = state_.pi[window_[i]];
    const auto next = flight_step(local_, u, rng_, options_.tol.snap);
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t unit = window_[i];
      state_.pi[unit] = next[i];
      if (!(next[i] > 0.0 && next[i] < 1.0)) --stratum_count_[system_.strata[unit]];
    }
    ++state_.steps;
    survivors_.clear();
    for (std::size_t unit : window_) {
      const double p = state_.pi[unit];
      if (!(p > 0.0 && p < 1.0)) continue;
      if (pinned(unit)) {
        parked_.push_back(unit);
      } else {
        survivors_.push_back(unit);
      }
    }
    head_ = pos_ - survivors_.size();
    std::copy(survivors_.begin(), survivors_.end(),
              order_.begin() + static_cast<std::ptrdiff_t>(head_));
  }

  // Merges parked and queued units back into canonical order.
  void restart_order() {
    std::vector<std::size_t> all;
    all.reserve(order_.size() - head_ + parked_.size());
    for (std::size_t i = head_; i < order_.size(); ++i) {
      const double p = state_.pi[order_[i]];
      if (p > 0.0 && p < 1.0) all.push_back(order_[i]);
    }
    all.insert(all.end(), parked_.begin(), parked_.end());
    std::sort(all.begin(), all.end(),
              [&](std::size_t x, std::size_t y) { return rank_[x] < rank_[y]; });
    all.erase(std::unique(all.begin(), all.end()), all.end());
    parked_.clear();
    order_ = std::move(all);
    head_ = 0;
    pos_ = 0;
  }

  void prune(std::vector<std::size_t>& constraints) const {
    std::vector<char> support(system_.num_constraints(), 0);
    const std::size_t hcount = system_.num_strata;
    for (std::size_t unit : order_) {
      support[system_.strata[unit]] = 1;
      auto row = system_.a.row(unit);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] != 0.0) support[hcount + j] = 1;
      }
    }
    std::erase_if(constraints, [&](std::size_t c) { return !support[c]; });
  }

  void enable(std::span<const std::size_t> constraints) {
    std::fill(stratum_on_.begin(), stratum_on_.end(), 0);
    aux_on_.clear();
    for (std::size_t c : constraints) {
      if (system_.is_stratum_column(c)) {
        stratum_on_[c] = 1;
      } else {
        aux_on_.push_back(c);
      }
    }
    std::sort(aux_on_.begin(), aux_on_.end());
  }

  const BalanceSystem& system_;
  FlightState& state_;
  Rng& rng_;
  const SamplingOptions& options_;

  std::vector<char> stratum_on_;
  std::vector<std::size_t> aux_on_;
  std::vector<std::size_t> stratum_count_;
  std::vector<std::size_t> stamp_;
  std::vector<std::size_t> local_col_;
  std::vector<std::size_t> rank_;
  std::size_t epoch_ = 0;

  std::vector<std::size_t> order_;
  std::size_t head_ = 0;
  std::size_t pos_ = 0;
  std::vector<std::size_t> parked_;

  std::vector<std::size_t> window_;
  std::vector<std::size_t> window_strata_;
  std::vector<std::size_t> survivors_;
  std::vector<double> local_;
  DenseMatrix b_;
};

void check_drop_order(const BalanceSystem& system, std::span<const std::size_t> order) {
  std::vector<char> seen(system.num_constraints(), 0);
  for (std::size_t c : order) {
    if (c >= seen.size()) throw ValidationError("drop order: constraint index out of range");
    if (seen[c]) throw ValidationError("drop order: duplicate constraint index");
    seen[c] = 1;
  }
}

}  // namespace

SampleResult proposed_method(const BalanceSystem& system, Rng& rng,
                             const SamplingOptions& options) {
  auto drop_order = resolve_drop_order(system, options);
  check_drop_order(system, drop_order);
  FlightState state = FlightState::from(system);
  state.active = concat(flight_per_stratum(state, system, rng, options.tol));
  StratifiedFlight engine(system, state, rng, options);
  engine.flight();
  return engine.land(std::move(drop_order));
}

SampleResult chauvet_method(const BalanceSystem& system, Rng& rng,
                            const SamplingOptions& options) {
  auto drop_order = resolve_drop_order(system, options);
  check_drop_order(system, drop_order);
  FlightState state = FlightState::from(system);
  state.active = concat(flight_per_stratum(state, system, rng, options.tol));
  const auto all_columns = default_drop_order(system);
  run_flight(state, system, all_columns, rng, options.tol);
  return landing_suppression(std::move(state), system, std::move(drop_order), rng, options.tol);
}

SampleResult hasler_tille_method(const BalanceSystem& system, Rng& rng,
                                 const SamplingOptions& options) {
  auto drop_order = resolve_drop_order(system, options);
  check_drop_order(system, drop_order);
  FlightState state = FlightState::from(system);
  auto by_stratum = flight_per_stratum(state, system, rng, options.tol);

  std::vector<std::size_t> working;
  std::vector<std::size_t> columns;
  std::vector<char> present(system.num_strata, 0);
  bool started = false;
  for (std::size_t h = 0; h < system.num_strata; ++h) {
    if (by_stratum[h].empty()) continue;
    working.insert(working.end(), by_stratum[h].begin(), by_stratum[h].end());
    if (!started) {
      // A single stratum was already flown on the same constraints.
      started = true;
      continue;
    }
    columns.clear();
    std::fill(present.begin(), present.end(), 0);
    for (std::size_t unit : working) present[system.strata[unit]] = 1;
    for (std::size_t s = 0; s < system.num_strata; ++s) {
      if (present[s]) columns.push_back(s);
    }
    for (std::size_t j = 0; j < system.num_aux(); ++j) columns.push_back(system.num_strata + j);
    state.active = std::move(working);
    run_flight(state, system, columns, rng, options.tol);
    working = std::move(state.active);
  }
  state.active = std::move(working);
  return landing_suppression(std::move(state), system, std::move(drop_order), rng, options.tol);
}

SampleResult proposed_method(const PopulationFrame& frame, Rng& rng,
                             const SamplingOptions& options) {
  return proposed_method(build_system(frame), rng, options);
}

SampleResult chauvet_method(const PopulationFrame& frame, Rng& rng,
                            const SamplingOptions& options) {
  return chauvet_method(build_system(frame), rng, options);
}

SampleResult hasler_tille_method(const PopulationFrame& frame, Rng& rng,
                                 const SamplingOptions& options) {
  return hasler_tille_method(build_system(frame), rng, options);
}

SampleResult run_method(Method method, const BalanceSystem& system, Rng& rng,
                        const SamplingOptions& options) {
  switch (method) {
    case Method::proposed: return proposed_method(system, rng, options);
    case Method::chauvet: return chauvet_method(system, rng, options);
    case Method::hasler: return hasler_tille_method(system, rng, options);
    case Method::cube: {
      FlightState state = flight_phase(system, rng, options.tol);
      std::vector<std::size_t> order;
      for (std::size_t c : resolve_drop_order(system, options)) {
        if (!system.is_stratum_column(c)) order.push_back(c);
      }
      return landing_suppression(std::move(state), system, std::move(order), rng, options.tol);
    }
  }
  throw std::logic_error("run_method: unknown method");
}

}  // namespace stratcube
