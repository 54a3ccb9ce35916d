#include "stratcube/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>
#include <unordered_map>

namespace stratcube {

std::vector<std::size_t> PopulationFrame::stratum_sizes() const {
  std::vector<std::size_t> sizes(num_strata(), 0);
  for (std::size_t h : strata) ++sizes[h];
  return sizes;
}

std::vector<double> PopulationFrame::stratum_pi_sums() const {
  std::vector<double> sums(num_strata(), 0.0);
  for (std::size_t k = 0; k < size(); ++k) sums[strata[k]] += pi[k];
  return sums;
}

double PopulationFrame::interest_total(std::size_t j) const {
  double total = 0.0;
  for (std::size_t k = 0; k < size(); ++k) total += interest(k, j);
  return total;
}

void validate(const PopulationFrame& frame) {
  const std::size_t n = frame.size();
  if (frame.unit_ids.size() != n || frame.strata.size() != n || frame.aux.rows() != n ||
      frame.interest.rows() != n) {
    throw ValidationError("population frame: columns have inconsistent lengths");
  }
  std::vector<std::size_t> sizes(frame.num_strata(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = frame.pi[k];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError(fmt::format("unit {}: pi = {} outside [0, 1]", k + 1, p));
    }
    if (frame.strata[k] >= frame.num_strata()) {
      throw ValidationError(fmt::format("unit {}: stratum index out of range", k + 1));
    }
    ++sizes[frame.strata[k]];
  }
  for (std::size_t h = 0; h < sizes.size(); ++h) {
    if (sizes[h] == 0) {
      throw ValidationError(fmt::format("stratum '{}' has no units", frame.stratum_labels[h]));
    }
  }
  for (double v : frame.aux.data()) {
    if (!std::isfinite(v)) throw ValidationError("population frame: non-finite auxiliary value");
  }
  for (double v : frame.interest.data()) {
    if (!std::isfinite(v)) throw ValidationError("population frame: non-finite interest value");
  }
}

PopulationFrame make_frame(std::vector<std::string> unit_ids,
                           std::span<const std::string> stratum_labels,
                           std::vector<double> pi, DenseMatrix aux, DenseMatrix interest) {
  PopulationFrame frame;
  frame.unit_ids = std::move(unit_ids);
  frame.pi = std::move(pi);
  frame.aux = std::move(aux);
  frame.interest = std::move(interest);
  if (stratum_labels.size() != frame.pi.size()) {
    throw ValidationError("population frame: columns have inconsistent lengths");
  }
  std::unordered_map<std::string, std::size_t> index;
  frame.strata.reserve(stratum_labels.size());
  for (const auto& label : stratum_labels) {
    auto [it, inserted] = index.try_emplace(label, frame.stratum_labels.size());
    if (inserted) frame.stratum_labels.push_back(label);
    frame.strata.push_back(it->second);
  }
  validate(frame);
  return frame;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.emplace_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  cells.emplace_back(trim(cell));
  return cells;
}

double parse_number(std::string_view text, std::size_t line, std::string_view column) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() ||
      !std::isfinite(value)) {
    throw ValidationError(
        fmt::format("row {}: column '{}' is not a number: '{}'", line, column, text));
  }
  return value;
}

// Columns named prefix1, prefix2, ... consecutively from 1.
std::vector<std::string> detect_numbered(const std::map<std::string, std::size_t>& header,
                                         char prefix) {
  std::vector<std::string> names;
  for (std::size_t i = 1;; ++i) {
    std::string name = fmt::format("{}{}", prefix, i);
    if (!header.contains(name)) break;
    names.push_back(std::move(name));
  }
  return names;
}

}  // namespace

PopulationFrame read_population(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw ValidationError("population file is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header_cells = split_csv(line);
  std::map<std::string, std::size_t> header;
  for (std::size_t i = 0; i < header_cells.size(); ++i) header.emplace(header_cells[i], i);

  auto require = [&](const std::string& name) {
    auto it = header.find(name);
    if (it == header.end()) {
      throw ValidationError(fmt::format("row {}: missing column '{}'", line_no, name));
    }
    return it->second;
  };
  const std::size_t stratum_col = require(schema.stratum);
  const std::size_t pi_col = require(schema.pi);
  const auto id_it = header.find(schema.id);
  const std::vector<std::string> aux_names =
      schema.aux.empty() ? detect_numbered(header, 'x') : schema.aux;
  const std::vector<std::string> interest_names =
      schema.interest.empty() ? detect_numbered(header, 'y') : schema.interest;
  std::vector<std::size_t> aux_cols;
  std::vector<std::size_t> interest_cols;
  for (const auto& name : aux_names) aux_cols.push_back(require(name));
  for (const auto& name : interest_names) interest_cols.push_back(require(name));

  std::vector<std::string> ids;
  std::vector<std::string> labels;
  std::vector<double> pi;
  std::vector<double> aux;
  std::vector<double> interest;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header_cells.size()) {
      throw ValidationError(fmt::format("row {}: expected {} fields, found {}", line_no,
                                        header_cells.size(), cells.size()));
    }
    const double p = parse_number(cells[pi_col], line_no, schema.pi);
    if (p < 0.0 || p > 1.0) {
      throw ValidationError(fmt::format("row {}: pi = {} outside [0, 1]", line_no, p));
    }
    if (cells[stratum_col].empty()) {
      throw ValidationError(fmt::format("row {}: empty stratum label", line_no));
    }
    ids.push_back(id_it != header.end() ? cells[id_it->second]
                                        : std::to_string(ids.size() + 1));
    labels.push_back(cells[stratum_col]);
    pi.push_back(p);
    for (std::size_t j = 0; j < aux_cols.size(); ++j) {
      aux.push_back(parse_number(cells[aux_cols[j]], line_no, aux_names[j]));
    }
    for (std::size_t j = 0; j < interest_cols.size(); ++j) {
      interest.push_back(parse_number(cells[interest_cols[j]], line_no, interest_names[j]));
    }
  }
  if (pi.empty()) throw ValidationError("population file has no data rows");

  const std::size_t n = pi.size();
  return make_frame(std::move(ids), labels, std::move(pi),
                    DenseMatrix(n, aux_cols.size(), std::move(aux)),
                    DenseMatrix(n, interest_cols.size(), std::move(interest)));
}

PopulationFrame load_population(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open population file '{}'", path.string()));
  return read_population(in, schema);
}

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_population(std::ostream& out, const PopulationFrame& frame) {
  std::string line = "id,stratum,pi";
  for (std::size_t j = 0; j < frame.num_aux(); ++j) line += fmt::format(",x{}", j + 1);
  for (std::size_t j = 0; j < frame.num_interest(); ++j) line += fmt::format(",y{}", j + 1);
  out << line << '\n';
  for (std::size_t k = 0; k < frame.size(); ++k) {
    line = fmt::format("{},{},{}", csv_cell(frame.unit_ids[k]),
                       csv_cell(frame.stratum_labels[frame.strata[k]]), frame.pi[k]);
    for (double v : frame.aux.row(k)) line += fmt::format(",{}", v);
    for (double v : frame.interest.row(k)) line += fmt::format(",{}", v);
    out << line << '\n';
  }
}

DenseMatrix BalanceSystem::disjunctive() const {
  DenseMatrix h(size(), num_strata);
  for (std::size_t k = 0; k < size(); ++k) h(k, strata[k]) = 1.0;
  return h;
}

BalanceSystem build_system(const PopulationFrame& frame) {
  validate(frame);
  BalanceSystem system;
  const std::size_t n = frame.size();
  const std::size_t q = frame.num_aux();
  system.a = DenseMatrix(n, q);
  system.strata = frame.strata;
  system.num_strata = frame.num_strata();
  system.pi = frame.pi;
  system.pi_t = frame.pi;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = frame.pi[k];
    if (p > 0.0) {
      for (std::size_t j = 0; j < q; ++j) system.a(k, j) = frame.aux(k, j) / p;
    }
    if (p > 0.0 && p < 1.0) system.active.push_back(k);
  }
  return system;
}

namespace {

std::vector<double> constraint_product(const BalanceSystem& system, std::span<const double> v) {
  const std::size_t hcount = system.num_strata;
  std::vector<double> out(system.num_constraints(), 0.0);
  for (std::size_t k = 0; k < system.size(); ++k) {
    if (v[k] == 0.0) continue;
    out[system.strata[k]] += v[k];
    auto row = system.a.row(k);
    for (std::size_t j = 0; j < row.size(); ++j) out[hcount + j] += row[j] * v[k];
  }
  return out;
}

}  // namespace

std::vector<double> constraint_totals(const BalanceSystem& system) {
  return constraint_product(system, system.pi);
}

std::vector<double> balance_residual(const BalanceSystem& system,
                                     std::span<const double> indicator) {
  if (indicator.size() != system.size()) {
    throw std::invalid_argument("balance_residual: indicator length mismatch");
  }
  auto achieved = constraint_product(system, indicator);
  const auto target = constraint_totals(system);
  for (std::size_t c = 0; c < achieved.size(); ++c) achieved[c] -= target[c];
  return achieved;
}

std::size_t SampleResult::sample_size() const {
  return static_cast<std::size_t>(std::count(a.begin(), a.end(), 1.0));
}

SampleResult make_result(const BalanceSystem& system, std::vector<double> a,
                         std::vector<std::size_t> dropped) {
  SampleResult result;
  result.balance_residual = balance_residual(system, a);
  result.strata_counts.assign(system.num_strata, 0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 1.0) ++result.strata_counts[system.strata[k]];
  }
  result.a = std::move(a);
  result.dropped_constraints = std::move(dropped);
  return result;
}

}  // namespace stratcube
