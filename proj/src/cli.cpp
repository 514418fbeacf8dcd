#include "platoon/cli.hpp"

#include "platoon/config.hpp"
#include "platoon/errors.hpp"
#include "platoon/harness.hpp"
#include "platoon/validation.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace platoon::cli {

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  bool quiet = false;
  std::string run_dir;      // plot-data
  std::string plot_output;  // plot-data
};

// Thrown for unwritable outputs.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CliConfig load(const Options& o) {
  if (o.config_path.empty()) return CliConfig{};
  CliConfig cfg = load_config(o.config_path);
  // CSV references are resolved relative to the config file.
  auto& ref = cfg.scenario.reference;
  if (ref.kind == ReferenceKind::Csv && fs::path(ref.csv_path).is_relative()) {
    ref.csv_path = (fs::path(o.config_path).parent_path() / ref.csv_path).string();
  }
  return cfg;
}

fs::path output_dir(const Options& o, const CliConfig& cfg) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "out";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::string steps_csv(const RunResult& r) {
  std::ostringstream s;
  write_steps_csv(s, r);
  return s.str();
}

std::string collision_message(const RunResult& r) {
  return to_string(r.config.variant) + ": collision at step " + std::to_string(r.collision_step) + " (vehicle " +
         std::to_string(r.collision_vehicle) + ")";
}

constexpr std::array<ControllerVariant, 3> kVariants = {ControllerVariant::Physics, ControllerVariant::NnOnly,
                                                        ControllerVariant::Perl};

std::vector<ScenarioConfig> variant_configs(const ScenarioConfig& base) {
  std::vector<ScenarioConfig> out;
  for (auto v : kVariants) {
    ScenarioConfig c = base;
    c.variant = v;
    out.push_back(c);
  }
  return out;
}

// Writes the gap table and per-variant metrics; returns the table.
GapTable write_comparison(const fs::path& dir, const std::vector<RunResult>& runs) {
  std::map<ControllerVariant, RunResult> by_variant;
  for (const auto& r : runs) by_variant[r.config.variant] = r;
  GapTable table = compare_runs(by_variant);
  ensure_dir(dir);
  write_file(dir / "gap_table.csv", table.to_csv());
  write_file(dir / "gap_table.txt", table.to_text());
  for (const auto& r : runs) write_file(dir / ("metrics_" + to_string(r.config.variant) + ".json"), metrics_json(r));
  return table;
}

// PERL is "best" when strictly below both baselines in CAE_p and CAE_v.
bool perl_best(const GapTable& t) {
  const auto& m = t.metrics;
  const auto& p = m.at(ControllerVariant::Perl);
  for (auto base : {ControllerVariant::Physics, ControllerVariant::NnOnly}) {
    const auto& b = m.at(base);
    if (!(p.cae_p < b.cae_p) || !(p.cae_v < b.cae_v)) return false;
  }
  return true;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size()) {
      throw ConfigError("--seeds", "'" + tok + "' is not a non-negative integer");
    }
    seeds.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (seeds.empty()) throw ConfigError("--seeds", "at least one seed is required");
  return seeds;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const CliConfig cfg = load(o);
  const fs::path dir = output_dir(o, cfg);
  const RunResult r = run_scenario(cfg.scenario);
  ensure_dir(dir);
  write_file(dir / "steps.csv", steps_csv(r));
  write_file(dir / "metrics.json", metrics_json(r));
  if (r.outcome == RunOutcome::Collision) {
    err << "error: " << collision_message(r) << '\n';
    return kCollision;
  }
  if (!o.quiet) {
    const auto& m = r.metrics.aggregate;
    out << to_string(r.config.variant) << ": CAE_p " << m.cae_p << "  CAE_v " << m.cae_v << "  MAE_p " << m.mae_p
        << "  MAE_v " << m.mae_v << "\nwrote " << (dir / "steps.csv").string() << " and "
        << (dir / "metrics.json").string() << '\n';
  }
  return kOk;
}

int report_collisions(const std::vector<RunResult>& runs, std::ostream& err) {
  int code = kOk;
  for (const auto& r : runs) {
    if (r.outcome == RunOutcome::Collision) {
      err << "error: seed " << r.config.master_seed << ", " << collision_message(r) << '\n';
      code = kCollision;
    }
  }
  return code;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  const CliConfig cfg = load(o);
  const fs::path dir = output_dir(o, cfg);
  const ReferenceTrajectory ref = build_reference(cfg.scenario);
  const auto runs = run_parallel(variant_configs(cfg.scenario), &ref, 1);
  const GapTable table = write_comparison(dir, runs);
  if (!o.quiet) out << table.to_text();
  return report_collisions(runs, err);
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const auto seeds = parse_seeds(o.seeds);
  const CliConfig cfg = load(o);
  const fs::path dir = output_dir(o, cfg);
  const ReferenceTrajectory ref = build_reference(cfg.scenario);

  std::vector<ScenarioConfig> configs;
  for (auto s : seeds) {
    ScenarioConfig base = cfg.scenario;
    base.master_seed = s;
    for (auto& c : variant_configs(base)) configs.push_back(c);
  }
  const auto runs = run_parallel(configs, &ref);

  nlohmann::ordered_json summary;
  summary["seeds"] = seeds;
  summary["per_seed"] = nlohmann::ordered_json::array();
  std::size_t violations = 0;
  std::ostringstream text;
  text << std::left << std::setw(8) << "seed" << std::right;
  for (auto v : kVariants) text << std::setw(14) << ("CAE_p " + to_string(v)) << std::setw(14) << ("CAE_v " + to_string(v));
  text << std::setw(10) << "best" << '\n';
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::vector<RunResult> group(runs.begin() + static_cast<std::ptrdiff_t>(3 * i),
                                       runs.begin() + static_cast<std::ptrdiff_t>(3 * i + 3));
    const GapTable table = write_comparison(dir / ("seed_" + std::to_string(seeds[i])), group);
    const bool best = perl_best(table);
    violations += best ? 0 : 1;
    nlohmann::ordered_json entry;
    entry["seed"] = seeds[i];
    entry["perl_best"] = best;
    text << std::left << std::setw(8) << seeds[i] << std::right << std::fixed << std::setprecision(1);
    for (auto v : kVariants) {
      const auto& m = table.metrics.at(v);
      entry[to_string(v)] = {{"CAE_p", m.cae_p}, {"CAE_v", m.cae_v}};
      text << std::setw(14) << m.cae_p << std::setw(14) << m.cae_v;
    }
    text << std::setw(10) << (best ? "perl" : "-") << '\n';
    summary["per_seed"].push_back(entry);
  }
  summary["ordering_violations"] = violations;
  text << "ordering violations: " << violations << " of " << seeds.size() << '\n';
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "summary.txt", text.str());
  if (!o.quiet) out << text.str();
  return report_collisions(runs, err);
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream&) {
  const auto results = run_validation();
  std::vector<std::string> failed;
  for (const auto& r : results) {
    if (!r.passed) failed.push_back(r.name);
    if (!o.quiet || !r.passed) out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
  }
  if (!failed.empty()) {
    out << "failed:";
    for (const auto& f : failed) out << ' ' << f;
    out << '\n';
    return kValidationFailed;
  }
  if (!o.quiet) out << "all " << results.size() << " properties passed\n";
  return kOk;
}

// Long-format plot data from a steps CSV: series,k,value.
int cmd_plot_data(const Options& o, std::ostream& out, std::ostream&) {
  const fs::path steps = fs::path(o.run_dir) / "steps.csv";
  std::ifstream in(steps);
  if (!in) throw ParseError(0, "no steps.csv in '" + o.run_dir + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty steps.csv");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) header.push_back(c);
  }
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError(1, "steps.csv lacks column '" + name + "'");
  };
  const std::size_t ck = col("k"), cveh = col("vehicle"), cp = col("p"), cpr = col("p_ref"), cv = col("v"),
                    cvr = col("v_ref");

  struct Row {
    long k;
    long vehicle;
    double p, p_ref, v, v_ref;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != header.size()) throw ParseError(lineno, "expected " + std::to_string(header.size()) + " cells");
    auto num = [&](std::size_t i) {
      double v = 0;
      const auto& s = cells[i];
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(lineno, "bad number '" + s + "'");
      return v;
    };
    rows.push_back({static_cast<long>(num(ck)), static_cast<long>(num(cveh)), num(cp), num(cpr), num(cv), num(cvr)});
  }
  if (rows.empty()) throw ParseError(lineno, "steps.csv has no data rows");

  long vehicles = 0;
  for (const auto& r : rows) vehicles = std::max(vehicles, r.vehicle);
  std::ostringstream csv;
  csv << std::setprecision(17) << "series,k,value\n";
  const std::array<const char*, 4> names = {"v_err", "p_err", "v", "v_ref"};
  for (long veh = 1; veh <= vehicles; ++veh) {
    for (std::size_t s = 0; s < names.size(); ++s) {
      for (const auto& r : rows) {
        if (r.vehicle != veh) continue;
        const double value = s == 0 ? r.v - r.v_ref : s == 1 ? r.p - r.p_ref : s == 2 ? r.v : r.v_ref;
        csv << names[s] << "_v" << veh << ',' << r.k << ',' << value << '\n';
      }
    }
  }
  const fs::path target = o.plot_output.empty() ? fs::path(o.run_dir) / "plot_data.csv" : fs::path(o.plot_output);
  write_file(target, csv.str());
  if (!o.quiet) out << "wrote " << target.string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Centralised MPC platoon control with online residual learning"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", o.config_path, "Scenario config (JSON)");
  app.add_option("--out", o.out_dir, std::string("Output directory (default: $") + kOutDirEnv + " or ./out)");
  app.add_option("--seeds", o.seeds, "Comma-separated master seeds for sweep");
  app.add_flag("-q,--quiet", o.quiet, "Only print errors");

  auto* run_cmd = app.add_subcommand("run", "Run one scenario; writes steps.csv and metrics.json");
  auto* compare_cmd = app.add_subcommand("compare", "Run physics, nn-only and perl on one seed; writes the gap table");
  auto* sweep_cmd = app.add_subcommand("sweep", "compare over several seeds plus an ordering summary");
  auto* validate_cmd = app.add_subcommand("validate", "Run the built-in oracle checks");
  auto* plot_cmd = app.add_subcommand("plot-data", "Reshape a run's steps.csv into long-format plot data");
  plot_cmd->add_option("run_dir", o.run_dir, "Directory holding steps.csv")->required();
  plot_cmd->add_option("-o,--output", o.plot_output, "Output CSV (default: <run_dir>/plot_data.csv)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(o, out, err);
    if (*compare_cmd) return cmd_compare(o, out, err);
    if (*sweep_cmd) return cmd_sweep(o, out, err);
    if (*validate_cmd) return cmd_validate(o, out, err);
    if (*plot_cmd) return cmd_plot_data(o, out, err);
  } catch (const ConfigError& e) {
    err << "error: config field '" << e.field() << "': " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const GenerationError& e) {
    err << "error: reference generation failed at step " << e.step() << ": " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace platoon::cli
