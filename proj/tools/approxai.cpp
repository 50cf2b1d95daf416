// approxai: explain, optimize-levels and bench front end.
//
// Exit status: 0 success, 2 usage or validation error, 3 infeasible
// constraints or too many Shapley players, 1 anything unexpected. Every
// input is read and validated before any computation, and output files are
// written only after the whole command has succeeded.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "approxai/approxai.hpp"

namespace {

using namespace approxai;
using nlohmann::json;

constexpr int schema_version = 1;

struct Globals {
  std::optional<std::string> config;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Settings after merging flags over the config file over defaults.
struct Settings {
  std::size_t workers = 1;
  std::uint64_t seed = 7;
  std::string out_dir = ".";
  std::optional<EnergyTable> table;
  json config = json::object();

  [[nodiscard]] EnergyTable energy_table() const { return table ? *table : EnergyTable{}; }
};

/// Files to write once the command has succeeded.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(const std::string& name, std::string text) { files.emplace_back(name, std::move(text)); }
};

template <class T>
T pick(const std::optional<T>& flag, const json& config, const char* key, T fallback) {
  if (flag) return *flag;
  if (config.contains(key)) {
    try {
      return config.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(Errc::parse_error, std::string("config field '") + key + "': " + e.what());
    }
  }
  return fallback;
}

Settings resolve(const Globals& g) {
  Settings s;
  std::optional<std::string> path = g.config;
  if (!path) {
    if (const char* env = std::getenv("APPROXAI_CONFIG"); env && *env) path = env;
  }
  if (path) {
    const std::string text = read_text_file(*path);
    try {
      s.config = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(Errc::parse_error, *path + ": " + e.what());
    }
    if (!s.config.is_object()) throw Error(Errc::parse_error, *path + ": config must be a JSON object");
    if (s.config.contains("energy_table")) {
      std::array<double, ApproxLevel::count> costs{};
      try {
        const auto values = s.config.at("energy_table").get<std::vector<double>>();
        if (values.size() != costs.size()) throw Error(Errc::parse_error, "energy_table needs 12 entries");
        std::copy(values.begin(), values.end(), costs.begin());
      } catch (const json::exception& e) {
        throw Error(Errc::parse_error, *path + ": energy_table: " + e.what());
      }
      s.table = EnergyTable(costs);
    }
  }
  s.workers = pick(g.workers, s.config, "workers", s.workers);
  s.seed = pick(g.seed, s.config, "seed", s.seed);
  s.out_dir = pick(g.out_dir, s.config, "out_dir", s.out_dir);
  if (s.workers < 1) throw Error(Errc::invalid_argument, "--workers must be at least 1");
  return s;
}

ApproxLevel level_from(int v, const char* flag) {
  if (v < 0 || v > ApproxLevel::max) {
    throw Error(Errc::out_of_range, std::string(flag) + " must lie in [0, 11], got " + std::to_string(v));
  }
  return ApproxLevel(v);
}

double parse_budget(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0') throw Error(Errc::invalid_argument, "cannot parse energy budget '" + text + "'");
  return v;
}

LevelSchedule parse_schedule(const std::string& text) {
  std::vector<int> levels;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const long v = std::strtol(cell.c_str(), &end, 10);
    if (cell.empty() || *end != '\0') throw Error(Errc::invalid_argument, "cannot parse schedule entry '" + cell + "'");
    levels.push_back(static_cast<int>(level_from(static_cast<int>(v), "--schedule").value()));
  }
  return LevelSchedule::from_ints(levels);
}

FeatureGroups parse_groups(const std::string& text) {
  FeatureGroups groups;
  std::stringstream ss(text);
  std::string group;
  while (std::getline(ss, group, ';')) {
    std::vector<std::size_t> members;
    std::stringstream gs(group);
    std::string cell;
    while (std::getline(gs, cell, ',')) {
      char* end = nullptr;
      const long v = std::strtol(cell.c_str(), &end, 10);
      if (cell.empty() || *end != '\0' || v < 0) {
        throw Error(Errc::invalid_argument, "cannot parse group member '" + cell + "'");
      }
      members.push_back(static_cast<std::size_t>(v));
    }
    groups.push_back(std::move(members));
  }
  return groups;
}

std::string csv_digest(const Matrix<double>& m) { return hex64(fnv1a64(csv_text(m))); }

json schedule_json(const LevelSchedule& s) { return s.to_ints(); }

json energy_json(const EnergyLedger& ledger) {
  json counts = json::object();
  for (int k = 0; k < ApproxLevel::count; ++k) {
    const auto n = ledger.count(ApproxLevel(k));
    if (n) counts[std::to_string(k)] = n;
  }
  return {{"energy_units", ledger.total()}, {"multiplies", ledger.multiplies()}, {"multiplies_by_level", counts}};
}

json base_report(const std::string& command, const Settings& s) {
  json r;
  r["schema_version"] = schema_version;
  r["command"] = command;
  r["seed"] = s.seed;
  r["workers"] = s.workers;
  r["energy_table"] = s.table ? json(s.table->costs()) : json("default");
  return r;
}

/// The model's input grid when it is two-dimensional, for heatmaps.
std::optional<std::pair<std::size_t, std::size_t>> grid_of(const TinyModel& m) {
  const auto& shape = m.input_shape();
  if (shape.size() == 2) return std::make_pair(shape[0], shape[1]);
  return std::nullopt;
}

struct ExplainInputs {
  TinyModel model;
  std::vector<double> x;
  std::vector<double> baseline;
  json digests;
};

ExplainInputs load_explain_inputs(const std::string& model_path, const std::string& input_path,
                                  const std::string& baseline_arg) {
  ExplainInputs in{load_model(model_path), {}, {}, json::object()};
  const auto x = read_csv(input_path);
  in.x = x.data();
  if (in.x.size() != in.model.input_size()) {
    throw Error(Errc::shape_mismatch, input_path + " has " + std::to_string(in.x.size()) + " values, model expects " +
                                          std::to_string(in.model.input_size()));
  }
  if (baseline_arg == "zeros") {
    in.baseline.assign(in.x.size(), 0.0);
  } else {
    const auto b = read_csv(baseline_arg);
    in.baseline = b.data();
    if (in.baseline.size() != in.x.size()) {
      throw Error(Errc::shape_mismatch, baseline_arg + " has " + std::to_string(in.baseline.size()) +
                                            " values, expected " + std::to_string(in.x.size()));
    }
    in.digests["baseline"] = csv_digest(b);
  }
  in.digests["model"] = model_digest(in.model);
  in.digests["input"] = csv_digest(x);
  return in;
}

void add_vector_outputs(Outputs& out, const std::string& stem, const std::vector<double>& values,
                        const TinyModel& model, const std::string& header) {
  out.add(stem + ".csv", csv_text(Matrix<double>(values.size(), 1, values), header));
  if (const auto grid = grid_of(model); grid && grid->first * grid->second == values.size()) {
    out.add(stem + ".pgm", pgm_text(Matrix<double>(grid->first, grid->second, values)));
  }
}

// explain ig -------------------------------------------------------------

struct IgArgs {
  std::string model, input, baseline = "zeros";
  std::size_t steps = 9, intervals = 8, class_index = 0;
  std::optional<int> level;
};

json run_ig(const IgArgs& a, const Settings& s, Outputs& out) {
  IGConfig cfg;
  cfg.steps = a.steps;
  cfg.intervals = a.intervals;
  cfg.class_index = a.class_index;
  cfg.workers = s.workers;
  cfg.level = level_from(pick(a.level, s.config, "level", 11), "--level");
  cfg.validate();
  const auto in = load_explain_inputs(a.model, a.input, a.baseline);
  if (a.class_index >= in.model.output_dim()) {
    throw Error(Errc::index_out_of_bounds, "--class " + std::to_string(a.class_index) + " but the model has " +
                                               std::to_string(in.model.output_dim()) + " outputs");
  }
  EnergyLedger ledger(s.energy_table());
  const auto attr = attribute(in.model, in.x, in.baseline, cfg, ledger);
  json r = base_report("explain ig", s);
  r["digests"] = in.digests;
  r["config"] = {{"steps", cfg.steps}, {"intervals", cfg.intervals}, {"class_index", cfg.class_index},
                 {"level", cfg.level.value()}};
  r["attributions"] = attr.values;
  r["completeness_gap"] = attr.completeness_gap;
  r["output_delta"] = in.model.forward(in.x)[cfg.class_index] - in.model.forward(in.baseline)[cfg.class_index];
  r["energy"] = energy_json(ledger);
  add_vector_outputs(out, "ig_attributions", attr.values, in.model, "attribution");
  return r;
}

// explain shapley --------------------------------------------------------

struct ShapleyArgs {
  std::string model, input, baseline = "zeros", groups;
  std::size_t class_index = 0;
  std::optional<int> level;
};

json run_shapley(const ShapleyArgs& a, const Settings& s, Outputs& out) {
  ShapleyConfig cfg;
  cfg.class_index = a.class_index;
  cfg.workers = s.workers;
  cfg.level = level_from(pick(a.level, s.config, "level", 11), "--level");
  if (!a.groups.empty()) cfg.groups = parse_groups(a.groups);
  const auto in = load_explain_inputs(a.model, a.input, a.baseline);
  cfg.baseline = in.baseline;
  EnergyLedger ledger(s.energy_table());
  const auto result = shapley(in.model, in.x, cfg, ledger);
  json r = base_report("explain shapley", s);
  r["digests"] = in.digests;
  r["config"] = {{"class_index", cfg.class_index}, {"level", cfg.level.value()}, {"groups", cfg.groups}};
  r["values"] = result.values;
  r["efficiency_gap"] = result.efficiency_gap;
  r["energy"] = energy_json(ledger);
  if (cfg.groups.empty()) {
    add_vector_outputs(out, "shapley_values", result.values, in.model, "phi");
  } else {
    // Spread each group's value over its members for the per-input map.
    std::vector<double> per_input(in.x.size(), 0.0);
    for (std::size_t g = 0; g < cfg.groups.size(); ++g)
      for (std::size_t i : cfg.groups[g]) per_input[i] = result.values[g];
    out.add("shapley_values.csv", csv_text(Matrix<double>(result.values.size(), 1, result.values), "phi"));
    if (const auto grid = grid_of(in.model)) {
      out.add("shapley_values.pgm", pgm_text(Matrix<double>(grid->first, grid->second, per_input)));
    }
  }
  return r;
}

// explain distill --------------------------------------------------------

struct DistillArgs {
  std::string x, y;
  double eps = default_distill_eps;
  bool scores = false;
  std::optional<int> level;
};

json run_distill(const DistillArgs& a, const Settings& s, Outputs& out) {
  const ApproxLevel level = level_from(pick(a.level, s.config, "level", 11), "--level");
  const ResponsePair pair{read_csv(a.x), read_csv(a.y)};
  const auto sched = Schedule2D::uniform(pair.x.rows(), pair.x.cols(), level);
  EnergyLedger ledger(s.energy_table());
  const auto kernel = distill(pair, sched, s.workers, a.eps, ledger);
  json r = base_report("explain distill", s);
  r["digests"] = {{"x", csv_digest(pair.x)}, {"y", csv_digest(pair.y)}};
  r["config"] = {{"level", level.value()}, {"eps", a.eps}, {"eps_used", kernel.eps_used}};
  r["shape"] = {kernel.k.rows(), kernel.k.cols()};
  r["kernel"] = kernel.k.data();
  out.add("distill_kernel.csv", csv_text(kernel.k));
  out.add("distill_kernel.pgm", pgm_text(kernel.k));
  if (a.scores) {
    const auto scores = contribution_scores(pair, kernel, sched, s.workers, ledger);
    r["contribution_scores"] = scores.data();
    out.add("distill_scores.csv", csv_text(scores));
    out.add("distill_scores.pgm", pgm_text(scores));
  }
  r["energy"] = energy_json(ledger);
  return r;
}

// optimize-levels --------------------------------------------------------

struct OptimizeArgs {
  std::size_t size = 0;
  std::optional<double> psnr_db, probability;
  std::optional<std::string> energy_budget;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::string mode = "auto";
};

OptConstraints constraints_from(const std::optional<double>& psnr_db, const std::optional<double>& probability,
                                const std::optional<std::string>& budget, const Settings& s) {
  OptConstraints c;
  c.psnr_db = pick(psnr_db, s.config, "psnr_db", c.psnr_db);
  c.probability = pick(probability, s.config, "probability", c.probability);
  if (budget) {
    c.energy_budget = parse_budget(*budget);
  } else if (s.config.contains("energy_budget")) {
    const auto& v = s.config.at("energy_budget");
    c.energy_budget = v.is_string() ? parse_budget(v.get<std::string>()) : pick<double>({}, s.config, "energy_budget", 0);
  }
  c.validate();
  return c;
}

json constraints_json(const OptConstraints& c) {
  return {{"psnr_db", c.psnr_db},
          {"energy_budget", std::isinf(c.energy_budget) ? json("inf") : json(c.energy_budget)},
          {"probability", c.probability}};
}

json result_json(const OptResult& r, std::size_t n, const EnergyTable& table) {
  const double exact = schedule_energy(n, LevelSchedule::exact(r.schedule.size()), table);
  return {{"schedule", schedule_json(r.schedule)},
          {"objective", r.objective},
          {"feasible_fraction", r.feasible_fraction},
          {"mean_psnr", r.mean_psnr},
          {"mean_energy", r.mean_energy},
          {"energy_ratio", schedule_energy(n, r.schedule, table) / exact},
          {"median_level", median_level(r.schedule).value()}};
}

json run_optimize(const OptimizeArgs& a, const Settings& s, Outputs& out) {
  require_power_of_two(a.size);
  const auto constraints = constraints_from(a.psnr_db, a.probability, a.energy_budget, s);
  const std::size_t count = pick(a.samples, s.config, "samples", std::size_t{100});
  const std::uint64_t seed = a.seed ? *a.seed : s.seed;
  const auto stages = static_cast<std::size_t>(log2_exact(a.size));
  std::string mode = a.mode;
  if (mode == "auto") mode = stages <= 3 ? "exhaustive" : "greedy";
  const auto samples = SampleSet::uniform(a.size, count, seed);
  SearchOptions options;
  options.table = s.energy_table();
  options.workers = s.workers;
  const auto result = mode == "exhaustive" ? optimize_exhaustive(stages, samples, constraints, options)
                                           : optimize_greedy(stages, samples, constraints, options);
  json r = base_report("optimize-levels", s);
  r["seed"] = seed;
  r["size"] = a.size;
  r["samples"] = count;
  r["mode"] = mode;
  r["constraints"] = constraints_json(constraints);
  r["result"] = result_json(result, a.size, options.table);
  if (!result.path.empty()) {
    json path = json::array();
    for (const auto& p : result.path) path.push_back(schedule_json(p));
    r["greedy_path"] = path;
  }
  std::vector<double> levels;
  for (int l : result.schedule.to_ints()) levels.push_back(l);
  out.add("optimize_schedule.csv", csv_text(Matrix<double>(1, stages, levels), "stage levels"));
  return r;
}

// bench ------------------------------------------------------------------

struct BenchArgs {
  std::size_t size = 1024;
  std::optional<std::size_t> samples;
  std::optional<int> level;
  std::string schedule;
  bool optimize = false;
  std::optional<double> psnr_db, probability;
};

json run_bench(const BenchArgs& a, const Settings& s, Outputs& out) {
  require_power_of_two(a.size);
  const auto stages = static_cast<std::size_t>(log2_exact(a.size));
  const std::size_t count = pick(a.samples, s.config, "samples", std::size_t{100});
  if (a.optimize + !a.schedule.empty() + a.level.has_value() > 1) {
    throw Error(Errc::invalid_argument, "choose at most one of --level, --schedule and --optimize");
  }
  const auto samples = SampleSet::uniform(a.size, count, s.seed);
  SearchOptions options;
  options.table = s.energy_table();
  options.workers = s.workers;
  LevelSchedule sched = LevelSchedule::exact(stages);
  json r = base_report("bench", s);
  if (!a.schedule.empty()) {
    sched = parse_schedule(a.schedule);
    detail::check_schedule(a.size, sched);
  } else if (a.level) {
    sched = LevelSchedule::uniform(stages, level_from(*a.level, "--level"));
  } else if (a.optimize) {
    const auto c = constraints_from(a.psnr_db, a.probability, std::nullopt, s);
    sched = optimize_greedy(stages, samples, c, options).schedule;
    r["constraints"] = constraints_json(c);
  }
  const auto median_psnr = [&](const LevelSchedule& l) {
    std::vector<double> v;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      EnergyLedger ledger(options.table);
      v.push_back(psnr(samples.reference(i), ax_fft(samples.signal(i), l, ledger).to_complex()).psnr_db);
    }
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  const auto exact = LevelSchedule::exact(stages);
  const double e_sched = schedule_energy(a.size, sched, options.table);
  const double e_exact = schedule_energy(a.size, exact, options.table);
  r["size"] = a.size;
  r["samples"] = count;
  r["label"] = s.table ? "model-level, configured energy table" : "model-level, default energy table";
  r["schedule"] = schedule_json(sched);
  r["energy_units"] = e_sched;
  r["exact_energy_units"] = e_exact;
  r["energy_ratio"] = e_sched / e_exact;
  r["median_psnr"] = median_psnr(sched);
  r["exact_median_psnr"] = median_psnr(exact);
  out.add("bench.csv", csv_text(Matrix<double>(1, 3, {e_sched, e_exact, e_sched / e_exact}),
                                "energy_units,exact_energy_units,energy_ratio"));
  return r;
}

void write_outputs(const Settings& s, const std::string& report_name, json report, const Outputs& out,
                   double wall_time) {
  report["wall_time_s"] = wall_time;
  const std::filesystem::path dir(s.out_dir);
  std::filesystem::create_directories(dir);
  json files = json::array();
  for (const auto& [name, text] : out.files) {
    write_text((dir / name).string(), text);
    files.push_back(name);
  }
  report["files"] = files;
  const std::string text = report.dump(2) + "\n";
  write_text((dir / report_name).string(), text);
  std::cout << text;
}

int exit_code_for(Errc code) {
  return code == Errc::infeasible || code == Errc::too_many_features ? 3 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate-computing explainers and level optimizer"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON config file (falls back to $APPROXAI_CONFIG)");
  app.add_option("--workers", g.workers, "worker threads");
  app.add_option("--seed", g.seed, "root random seed");
  app.add_option("--out-dir", g.out_dir, "directory for reports and data files");

  auto* explain = app.add_subcommand("explain", "attribute a model output or a response pair");
  explain->require_subcommand(1);

  IgArgs ig;
  auto* ig_cmd = explain->add_subcommand("ig", "integrated gradients");
  ig_cmd->add_option("--model", ig.model, "model JSON")->required()->check(CLI::ExistingFile);
  ig_cmd->add_option("--input", ig.input, "input CSV")->required()->check(CLI::ExistingFile);
  ig_cmd->add_option("--baseline", ig.baseline, "'zeros' or a CSV file");
  ig_cmd->add_option("--steps", ig.steps, "interpolation points (2..12)");
  ig_cmd->add_option("--t", ig.intervals, "trapezoid intervals");
  ig_cmd->add_option("--level", ig.level, "multiplier level 0..11");
  ig_cmd->add_option("--class", ig.class_index, "output index");

  ShapleyArgs sh;
  auto* sh_cmd = explain->add_subcommand("shapley", "exact Shapley values");
  sh_cmd->add_option("--model", sh.model, "model JSON")->required()->check(CLI::ExistingFile);
  sh_cmd->add_option("--input", sh.input, "input CSV")->required()->check(CLI::ExistingFile);
  sh_cmd->add_option("--baseline", sh.baseline, "'zeros' or a CSV file");
  sh_cmd->add_option("--groups", sh.groups, "players as index lists, e.g. '0,1;2,3'");
  sh_cmd->add_option("--level", sh.level, "multiplier level 0..11");
  sh_cmd->add_option("--class", sh.class_index, "output index");

  DistillArgs di;
  auto* di_cmd = explain->add_subcommand("distill", "kernel distillation from an input/response pair");
  di_cmd->add_option("--x", di.x, "input matrix CSV")->required()->check(CLI::ExistingFile);
  di_cmd->add_option("--y", di.y, "response matrix CSV")->required()->check(CLI::ExistingFile);
  di_cmd->add_option("--eps", di.eps, "relative spectral guard");
  di_cmd->add_option("--level", di.level, "uniform FFT level 0..11");
  di_cmd->add_flag("--scores", di.scores, "also compute per-entry contribution scores");

  OptimizeArgs op;
  auto* op_cmd = app.add_subcommand("optimize-levels", "choose per-stage FFT levels");
  op_cmd->add_option("--size", op.size, "transform length (power of two)")->required();
  op_cmd->add_option("--psnr-db", op.psnr_db, "PSNR threshold in dB");
  op_cmd->add_option("--energy-budget", op.energy_budget, "energy units per transform, or 'inf'");
  op_cmd->add_option("--prob", op.probability, "probability threshold in [0, 1]");
  op_cmd->add_option("--samples", op.samples, "sample signal count");
  op_cmd->add_option("--seed", op.seed, "sample seed (defaults to the global seed)");
  op_cmd->add_option("--mode", op.mode, "exhaustive, greedy or auto")
      ->check(CLI::IsMember({"auto", "exhaustive", "greedy"}));

  BenchArgs be;
  auto* be_cmd = app.add_subcommand("bench", "energy ratio and PSNR of a schedule against all-11");
  be_cmd->add_option("--size", be.size, "transform length (power of two)");
  be_cmd->add_option("--samples", be.samples, "sample signal count");
  be_cmd->add_option("--level", be.level, "uniform level 0..11");
  be_cmd->add_option("--schedule", be.schedule, "comma-separated per-stage levels");
  be_cmd->add_flag("--optimize", be.optimize, "use the greedy optimizer's schedule");
  be_cmd->add_option("--psnr-db", be.psnr_db, "PSNR threshold for --optimize");
  be_cmd->add_option("--prob", be.probability, "probability threshold for --optimize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const Settings settings = resolve(g);
    Outputs out;
    json report;
    std::string name;
    if (*ig_cmd) {
      report = run_ig(ig, settings, out);
      name = "ig_report.json";
    } else if (*sh_cmd) {
      report = run_shapley(sh, settings, out);
      name = "shapley_report.json";
    } else if (*di_cmd) {
      report = run_distill(di, settings, out);
      name = "distill_report.json";
    } else if (*op_cmd) {
      report = run_optimize(op, settings, out);
      name = "optimize_report.json";
    } else {
      report = run_bench(be, settings, out);
      name = "bench_report.json";
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_outputs(settings, name, std::move(report), out, seconds);
    return 0;
  } catch (const Error& e) {
    std::cerr << "approxai: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "approxai: " << e.what() << "\n";
    return 1;
  }
}
