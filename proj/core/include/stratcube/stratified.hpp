#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "stratcube/cube.hpp"
#include "stratcube/model.hpp"

namespace stratcube {

/// Size of the leading submatrix of (H A): `rows` units covering `strata`
/// distinct strata, with rows == q + strata + 1 unless capped.
struct SubmatrixExtent {
  std::size_t rows = 0;
  std::size_t strata = 0;
  friend bool operator==(const SubmatrixExtent&, const SubmatrixExtent&) = default;
};

/// Fixed-point search for the smallest leading block of `strata_seq` that has
/// exactly one more row than columns (q aux columns plus one per distinct
/// stratum). Returns nullopt when the block would need more units than the
/// sequence holds.
std::optional<SubmatrixExtent> find_submatrix_extent(std::span<const std::size_t> strata_seq,
                                                     std::size_t q);

enum class Method { proposed, chauvet, hasler, cube };

std::string_view to_string(Method method);
/// Parses "proposed", "chauvet", "hasler" or "cube"; throws ValidationError.
Method parse_method(std::string_view name);

struct SamplingOptions {
  Tolerances tol;
  /// Constraint order for landing; empty means default_drop_order().
  std::vector<std::size_t> drop_order;
  /// Proposed method only: keep units pinned by a single-unit stratum in the
  /// submatrix scan instead of parking them. Same distribution, slower.
  bool keep_pinned = false;
};

/// Stratified balanced sampling with the moving stratified submatrix:
/// per-stratum flights, a flight on (H A) driven by find_submatrix_extent,
/// then landing by suppression.
SampleResult proposed_method(const PopulationFrame& frame, Rng& rng,
                             const SamplingOptions& options = {});
SampleResult proposed_method(const BalanceSystem& system, Rng& rng,
                             const SamplingOptions& options = {});

/// Per-stratum flights, then one flight on the full (H A) over all units.
SampleResult chauvet_method(const PopulationFrame& frame, Rng& rng,
                            const SamplingOptions& options = {});
SampleResult chauvet_method(const BalanceSystem& system, Rng& rng,
                            const SamplingOptions& options = {});

/// Per-stratum flights, then flights on a growing union of strata; strata
/// whose units are all resolved leave the constraint set.
SampleResult hasler_tille_method(const PopulationFrame& frame, Rng& rng,
                                 const SamplingOptions& options = {});
SampleResult hasler_tille_method(const BalanceSystem& system, Rng& rng,
                                 const SamplingOptions& options = {});

/// Dispatches on `method`; `Method::cube` balances on A only.
SampleResult run_method(Method method, const BalanceSystem& system, Rng& rng,
                        const SamplingOptions& options = {});

}  // namespace stratcube
