#include "stratcube/app.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <json.hpp>

#include "stratcube/estimate.hpp"
#include "stratcube/generator.hpp"
#include "stratcube/model.hpp"
#include "stratcube/simulation.hpp"
#include "stratcube/stratified.hpp"

namespace stratcube::app {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct RunConfig {
  std::string method;
  std::uint64_t seed = 1;
  std::optional<std::size_t> reps;
  std::string input;
  std::string output;
  GeneratorSpec generator;
  bool generator_flags = false;
  std::string drop_order = "aux-first";
  std::optional<double> tol;
  std::size_t threads = 0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<Method> parse_methods(const std::string& text) {
  if (text == "all") return {Method::proposed, Method::hasler, Method::chauvet};
  std::vector<Method> methods;
  for (const auto& name : split(text, ',')) {
    const Method m = parse_method(name);
    if (std::find(methods.begin(), methods.end(), m) != methods.end()) {
      throw ValidationError(fmt::format("method '{}' listed twice", name));
    }
    methods.push_back(m);
  }
  if (methods.empty()) throw ValidationError("--method is empty");
  return methods;
}

// Internal drop order keeps the constraint relaxed first at the back.
std::vector<std::size_t> parse_drop_order(const std::string& text, const BalanceSystem& system) {
  const std::size_t h = system.num_strata, total = system.num_constraints();
  std::vector<std::size_t> order;
  if (text == "aux-first") return {};
  if (text == "strata-first") {
    for (std::size_t c = h; c < total; ++c) order.push_back(c);
    for (std::size_t c = 0; c < h; ++c) order.push_back(c);
    return order;
  }
  std::vector<std::size_t> first;
  for (const auto& token : split(text, ',')) {
    std::size_t c = 0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), c);
    if (ec != std::errc() || end != token.data() + token.size()) {
      throw ValidationError(fmt::format(
          "--drop-order: '{}' is not aux-first, strata-first or a constraint index", token));
    }
    if (c >= total) {
      throw ValidationError(
          fmt::format("--drop-order: constraint {} out of range (H + q = {})", c, total));
    }
    if (std::find(first.begin(), first.end(), c) != first.end()) {
      throw ValidationError(fmt::format("--drop-order: constraint {} listed twice", c));
    }
    first.push_back(c);
  }
  if (first.empty()) throw ValidationError("--drop-order is empty");
  const std::set<std::size_t> listed(first.begin(), first.end());
  for (std::size_t c = 0; c < total; ++c) {
    if (!listed.contains(c)) order.push_back(c);
  }
  order.insert(order.end(), first.rbegin(), first.rend());
  return order;
}

SamplingOptions sampling_options(const RunConfig& config, const BalanceSystem& system) {
  SamplingOptions options;
  if (config.tol) {
    if (!(*config.tol > 0.0)) throw ValidationError("--tol must be positive");
    options.tol.kernel = *config.tol;
    options.tol.snap = *config.tol;
  }
  options.drop_order = parse_drop_order(config.drop_order, system);
  return options;
}

PopulationFrame population(const RunConfig& config) {
  if (!config.input.empty()) {
    if (config.generator_flags) {
      throw ValidationError("generator flags cannot be combined with --input");
    }
    return load_population(config.input);
  }
  config.generator.validate();
  return generate_population(config.generator, config.seed);
}

std::string constraint_name(const PopulationFrame& frame, std::size_t c) {
  if (c < frame.num_strata()) return "stratum:" + frame.stratum_labels[c];
  return fmt::format("x{}", c - frame.num_strata() + 1);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << content;
  out.close();
  if (!out) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
}

fs::path sibling(const std::string& output, const char* extension) {
  fs::path path(output);
  fs::path other = fs::path(output).replace_extension(extension);
  if (other == path) {
    throw ValidationError(fmt::format("--output '{}' would be overwritten by its {} companion",
                                      output, extension));
  }
  return other;
}

std::string require_output(const RunConfig& config, const char* command) {
  if (config.output.empty()) {
    throw ValidationError(fmt::format("{} needs --output", command));
  }
  return config.output;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_gen(const RunConfig& config, std::ostream& out) {
  if (!config.input.empty()) throw ValidationError("gen does not read --input");
  const std::string path = require_output(config, "gen");
  config.generator.validate();
  const auto frame = generate_population(config.generator, config.seed);
  std::ostringstream csv;
  write_population(csv, frame);
  write_file(path, csv.str());
  fmt::print(out, "wrote {} units in {} strata to {}\n", frame.size(), frame.num_strata(), path);
  return 0;
}

int cmd_sample(const RunConfig& config, std::ostream& out) {
  const std::string path = require_output(config, "sample");
  const fs::path diagnostics_path = sibling(path, ".json");
  const auto methods = parse_methods(config.method);
  if (methods.size() != 1) throw ValidationError("sample takes a single --method");
  const Method method = methods.front();

  const auto frame = population(config);
  const auto system = build_system(frame);
  const auto options = sampling_options(config, system);

  Rng rng(config.seed);
  const auto start = std::chrono::steady_clock::now();
  const auto result = run_method(method, system, rng, options);
  const double elapsed = seconds_since(start);

  std::string csv = "id,stratum,pi,selected\n";
  for (std::size_t k = 0; k < frame.size(); ++k) {
    csv += fmt::format("{},{},{},{}\n", csv_cell(frame.unit_ids[k]),
                       csv_cell(frame.stratum_labels[frame.strata[k]]), frame.pi[k],
                       result.a[k] == 1.0 ? 1 : 0);
  }

  const auto totals = constraint_totals(system);
  json residuals = json::array();
  double worst_abs = 0.0, worst_rel = 0.0;
  for (std::size_t c = 0; c < totals.size(); ++c) {
    const double r = result.balance_residual[c];
    const double rel = std::abs(r) / std::max(1.0, std::abs(totals[c]));
    worst_abs = std::max(worst_abs, std::abs(r));
    worst_rel = std::max(worst_rel, rel);
    residuals.push_back({{"constraint", constraint_name(frame, c)},
                         {"target", totals[c]},
                         {"residual", r}});
  }
  json counts = json::array();
  const auto pi_sums = frame.stratum_pi_sums();
  for (std::size_t h = 0; h < frame.num_strata(); ++h) {
    counts.push_back({{"stratum", frame.stratum_labels[h]},
                      {"expected", pi_sums[h]},
                      {"selected", result.strata_counts[h]}});
  }
  json dropped = json::array();
  for (std::size_t c : result.dropped_constraints) {
    dropped.push_back({{"index", c}, {"constraint", constraint_name(frame, c)}});
  }
  json diagnostics = {
      {"method", to_string(method)},
      {"seed", config.seed},
      {"population", {{"units", frame.size()}, {"strata", frame.num_strata()},
                      {"aux", frame.num_aux()}}},
      {"sample_size", result.sample_size()},
      {"max_abs_residual", worst_abs},
      {"max_relative_residual", worst_rel},
      {"dropped_constraints", dropped},
      {"stratum_counts", counts},
      {"balance_residuals", residuals},
  };

  write_file(path, csv);
  write_file(diagnostics_path, diagnostics.dump(2) + "\n");
  fmt::print(out, "{}: selected {} of {} units, {} constraint(s) dropped, {:.6f} s\n",
             to_string(method), result.sample_size(), frame.size(),
             result.dropped_constraints.size(), elapsed);
  fmt::print(out, "wrote {} and {}\n", path, diagnostics_path.string());
  return 0;
}

std::string fmt_value(double v, bool defined) { return defined ? fmt::format("{:.6g}", v) : "NA"; }

std::string ratio(double num, double den, bool defined) {
  if (!defined || den == 0.0) return "NA";
  return fmt::format("{:.4f}", num / den);
}

int cmd_simulate(const RunConfig& config, std::ostream& out) {
  const auto methods = parse_methods(config.method);
  const std::size_t reps = config.reps.value_or(1000);
  if (reps == 0) throw ValidationError("--reps must be at least 1");
  const auto frame = population(config);
  const auto system = build_system(frame);

  SimulationOptions options;
  options.replicates = reps;
  options.seed = config.seed;
  options.threads = config.threads;
  options.sampling = sampling_options(config, system);

  std::size_t free_units = 0;
  for (double p : frame.pi) free_units += p > 0.0 && p < 1.0;

  std::string csv =
      "method,variable,true_total,v_sim,mean_var_hat,var_app,var_hat_over_var_app,"
      "v_sim_over_var_app,max_inclusion_z,units_outside_band,landing_drops\n";
  std::string text = fmt::format("N = {}, H = {}, q = {}, p = {}, m = {}, seed = {}\n\n",
                                 frame.size(), frame.num_strata(), frame.num_aux(),
                                 frame.num_interest(), reps, config.seed);
  text += fmt::format("{:<10}{:<10}{:>16}{:>16}{:>16}{:>16}{:>12}{:>12}\n", "method", "variable",
                      "true total", "v_sim", "mean var_hat", "var_app", "hat/app", "sim/app");
  std::string band;
  const auto start = std::chrono::steady_clock::now();
  for (Method method : methods) {
    const auto report = simulate(frame, method, options);
    const std::string name(to_string(method));
    for (std::size_t j = 0; j < report.variables.size(); ++j) {
      const auto& v = report.variables[j];
      const std::string var = fmt::format("y{}", j + 1);
      const std::string hat = fmt_value(v.mean_var_hat, v.var_hat_defined);
      const std::string app = fmt_value(v.var_app, v.var_app_defined);
      const std::string hat_ratio =
          ratio(v.mean_var_hat, v.var_app, v.var_hat_defined && v.var_app_defined);
      const std::string sim_ratio = ratio(v.v_sim, v.var_app, v.var_app_defined);
      csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", name, var, v.true_total, v.v_sim,
                         v.var_hat_defined ? fmt::format("{}", v.mean_var_hat) : "NA",
                         v.var_app_defined ? fmt::format("{}", v.var_app) : "NA", hat_ratio,
                         sim_ratio, report.max_inclusion_z, report.units_outside_band,
                         report.landing_drops);
      text += fmt::format("{:<10}{:<10}{:>16.6g}{:>16.6g}{:>16}{:>16}{:>12}{:>12}\n", name, var,
                          v.true_total, v.v_sim, hat, app, hat_ratio, sim_ratio);
    }
    if (report.variables.empty()) {
      csv += fmt::format("{},,,,,,,,{},{},{}\n", name, report.max_inclusion_z,
                         report.units_outside_band, report.landing_drops);
    }
    band += fmt::format(
        "{:<10}max |freq - pi| / sd = {:.3f}; {} of {} units beyond 3.5 sd; {} landing drops\n",
        name, report.max_inclusion_z, report.units_outside_band, free_units,
        report.landing_drops);
  }
  text += "\nInclusion frequencies against pi (" + std::to_string(reps) + " replicates)\n" + band;
  const double elapsed = seconds_since(start);

  if (!config.output.empty()) {
    const fs::path text_path = sibling(config.output, ".txt");
    write_file(config.output, csv);
    write_file(text_path, text);
    fmt::print(out, "wrote {} and {}\n", config.output, text_path.string());
  }
  out << text;
  fmt::print(out, "elapsed {:.2f} s\n", elapsed);
  return 0;
}

struct BenchCase {
  std::string label;
  std::size_t strata;
  std::size_t units;
  double nh;
};

int cmd_bench(const RunConfig& config, std::ostream& out) {
  if (!config.input.empty()) throw ValidationError("bench generates its own populations");
  const auto methods =
      parse_methods(config.method.empty() ? std::string("proposed,hasler,chauvet") : config.method);
  const std::size_t runs = config.reps.value_or(10);
  if (runs == 0) throw ValidationError("--reps must be at least 1");
  const GeneratorSpec& base = config.generator;
  const std::size_t n = base.population_size();
  if (n % 5 != 0) {
    throw ValidationError(
        fmt::format("bench needs a population size divisible by 5 (N = {})", n));
  }
  if (base.units_per_stratum < 2) {
    throw ValidationError("bench needs at least 2 units per stratum");
  }
  // Five large strata at the sampling fraction 80 / 405, then many small ones.
  const std::size_t small_units = n / 5;
  const double small_nh = std::max(1.0, std::round(small_units * 80.0 / 405.0));
  std::vector<BenchCase> cases = {
      {"few strata", 5, small_units, small_nh},
      {"few strata", 5, small_units, small_nh + 0.4},
      {"many strata", base.strata, base.units_per_stratum, 2.0},
      {"many strata", base.strata, base.units_per_stratum, 1.4},
  };

  std::string csv = "stratification,strata,units_per_stratum,nh,method,mean_seconds,sd_seconds,runs\n";
  std::string text = fmt::format("{:<13}{:>7}{:>7}{:>8}", "", "H", "N_h", "n_h");
  for (Method m : methods) text += fmt::format("{:>24}", to_string(m));
  text += "\n";
  out << text;
  for (const auto& c : cases) {
    GeneratorSpec spec = base;
    spec.strata = c.strata;
    spec.units_per_stratum = c.units;
    spec.nh = c.nh;
    spec.validate();
    const auto system = build_system(generate_population(spec, config.seed));
    const auto options = sampling_options(config, system);
    std::string line = fmt::format("{:<13}{:>7}{:>7}{:>8}", c.label, c.strata, c.units, c.nh);
    for (Method m : methods) {
      const auto stats = time_method(system, m, runs, config.seed, options);
      line += fmt::format("{:>24}", fmt::format("{:.4f} ± {:.4f}", stats.mean, stats.sd));
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", c.label, c.strata, c.units, c.nh,
                         to_string(m), stats.mean, stats.sd, stats.runs);
    }
    out << line << "\n" << std::flush;
    text += line + "\n";
  }
  fmt::print(out, "mean ± sd wall-clock seconds over {} run(s)\n", runs);
  if (!config.output.empty()) {
    write_file(config.output, csv);
    fmt::print(out, "wrote {}\n", config.output);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stratified balanced sampling with the cube method", "stratcube"};
  app.set_config("--config", "", "key=value file using the flag names as keys");
  app.require_subcommand(1);

  RunConfig config;
  std::size_t reps = 0;
  double tol = 0.0;
  app.add_option("--method", config.method,
                 "proposed, chauvet, hasler, cube, all, or a comma list");
  app.add_option("--seed", config.seed, "Random seed");
  auto* reps_opt = app.add_option("--reps", reps, "Replicates (simulate) or runs (bench)");
  app.add_option("--input", config.input, "Population CSV");
  app.add_option("--output", config.output, "Output file");
  auto& g = config.generator;
  std::vector<CLI::Option*> gen_opts = {
      app.add_option("--nh", g.nh, "Expected sample size per stratum"),
      app.add_option("--strata", g.strata, "Number of strata"),
      app.add_option("--units-per-stratum", g.units_per_stratum, "Units in each stratum"),
      app.add_option("--q", g.q, "Auxiliary variables"),
      app.add_option("--p", g.p, "Interest variables"),
      app.add_option("--rho", g.rho, "Correlation between aux and interest variables"),
  };
  app.add_option("--drop-order", config.drop_order,
                 "aux-first, strata-first, or constraint indices relaxed first");
  auto* tol_opt = app.add_option("--tol", tol, "Kernel and rounding tolerance");
  app.add_option("--threads", config.threads, "Worker threads for simulate, 0 = all cores");

  auto* gen = app.add_subcommand("gen", "Write a synthetic population CSV");
  auto* sample = app.add_subcommand("sample", "Draw one sample");
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo variance and inclusion report");
  auto* bench = app.add_subcommand("bench", "Time the methods on four stratifications");
  for (auto* sub : {gen, sample, sim, bench}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (reps_opt->count() > 0) config.reps = reps;
    if (tol_opt->count() > 0) config.tol = tol;
    for (auto* opt : gen_opts) config.generator_flags |= opt->count() > 0;
    if (gen->parsed()) return cmd_gen(config, out);
    if (config.method.empty() && !bench->parsed()) config.method = "proposed";
    if (sample->parsed()) return cmd_sample(config, out);
    if (sim->parsed()) return cmd_simulate(config, out);
    return cmd_bench(config, out);
  } catch (const ValidationError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  }
}

}  // namespace stratcube::app
