#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stratcube/kernel.hpp"

namespace stratcube {

/// Raised for malformed or out-of-range input (bad CSV, invalid frame, bad flags).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finite population: one row per unit.
///
/// Strata are stored as a dense 0-based index; `stratum_labels[h]` holds the
/// original label of stratum h, in order of first appearance.
struct PopulationFrame {
  std::vector<std::string> unit_ids;
  std::vector<std::size_t> strata;
  std::vector<std::string> stratum_labels;
  std::vector<double> pi;
  DenseMatrix aux;       // N x q
  DenseMatrix interest;  // N x p

  std::size_t size() const { return pi.size(); }
  std::size_t num_strata() const { return stratum_labels.size(); }
  std::size_t num_aux() const { return aux.cols(); }
  std::size_t num_interest() const { return interest.cols(); }

  /// Unit counts per stratum (N_h).
  std::vector<std::size_t> stratum_sizes() const;
  /// Sum of inclusion probabilities per stratum (n_h).
  std::vector<double> stratum_pi_sums() const;
  /// True total of interest variable j.
  double interest_total(std::size_t j) const;
};

/// Builds a frame from raw columns, re-indexing string stratum labels to
/// 0..H-1 in first-appearance order. Throws ValidationError on any violated
/// invariant.
PopulationFrame make_frame(std::vector<std::string> unit_ids,
                           std::span<const std::string> stratum_labels,
                           std::vector<double> pi, DenseMatrix aux,
                           DenseMatrix interest);

/// Checks the frame invariants; throws ValidationError.
void validate(const PopulationFrame& frame);

/// Column names used when reading a population CSV. Empty aux/interest lists
/// mean "detect x1..xq / y1..yp from the header".
struct CsvSchema {
  std::string id = "id";
  std::string stratum = "stratum";
  std::string pi = "pi";
  std::vector<std::string> aux;
  std::vector<std::string> interest;
};

PopulationFrame load_population(const std::filesystem::path& path,
                                const CsvSchema& schema = {});
PopulationFrame read_population(std::istream& in, const CsvSchema& schema = {});

/// Quotes a CSV cell when it contains a separator, quote or newline.
std::string csv_cell(std::string_view s);

/// Writes `id,stratum,pi,x1..xq,y1..yp` with round-trip precision.
void write_population(std::ostream& out, const PopulationFrame& frame);

/// The constraint pair (H A) of a frame.
///
/// Column c of (H A) is the indicator of stratum c for c < H, and the auxiliary
/// column c - H of A otherwise. Rows of A are x_k / pi_k; rows of units with
/// pi_k = 0 are zero and never enter a flight.
struct BalanceSystem {
  DenseMatrix a;                      // N x q
  std::vector<std::size_t> strata;    // disjunctive matrix as stratum index per row
  std::size_t num_strata = 0;
  std::vector<std::size_t> active;    // units with 0 < pi < 1, file order
  std::vector<double> pi;             // original pi
  std::vector<double> pi_t;           // current pi

  std::size_t size() const { return pi.size(); }
  std::size_t num_aux() const { return a.cols(); }
  std::size_t num_constraints() const { return num_strata + a.cols(); }

  /// Entry (k, c) of (H A).
  double constraint(std::size_t unit, std::size_t column) const {
    if (column < num_strata) return strata[unit] == column ? 1.0 : 0.0;
    return a(unit, column - num_strata);
  }
  bool is_stratum_column(std::size_t column) const { return column < num_strata; }

  /// Materialized N x H disjunctive matrix.
  DenseMatrix disjunctive() const;
};

BalanceSystem build_system(const PopulationFrame& frame);

/// (H A)^T a - (H A)^T pi using the original pi; strata first, then aux.
std::vector<double> balance_residual(const BalanceSystem& system,
                                     std::span<const double> indicator);

/// (H A)^T pi: the population totals the balance equations target.
std::vector<double> constraint_totals(const BalanceSystem& system);

struct SampleResult {
  std::vector<double> a;                          // 0/1 per unit
  std::vector<double> balance_residual;           // H + q, strata first
  std::vector<std::size_t> strata_counts;
  std::vector<std::size_t> dropped_constraints;   // (H A) column indices, drop order

  std::size_t sample_size() const;
};

/// Completes a result from a resolved indicator vector.
SampleResult make_result(const BalanceSystem& system, std::vector<double> a,
                         std::vector<std::size_t> dropped);

}  // namespace stratcube
