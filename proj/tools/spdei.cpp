// Command-line front end: model validation, constants, simulation and the
// experiment harness, all driven by a key-value config file.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spdei/config.hpp"
#include "spdei/experiments.hpp"
#include "spdei/integrator.hpp"
#include "spdei/measures.hpp"
#include "spdei/model.hpp"
#include "spdei/noise.hpp"
#include "spdei/report.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitOutOfTheory = 2;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  unsigned threads = 1;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
  auto* c = cmd->add_option("--config", o.config_path, "key-value config file");
  if (config_required) c->required();
  cmd->add_option("--seed", o.seed_flag,
                  "RNG seed (overrides SPDEI_SEED and the config)");
  cmd->add_option("--threads", o.threads, "worker thread count");
  cmd->add_option("--out-dir", o.out_dir, "directory for CSV/JSON outputs");
}

std::uint64_t resolve_seed(const spdei::Config& cfg,
                           const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SPDEI_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::runtime_error("SPDEI_SEED is not an integer");
    }
  }
  return static_cast<std::uint64_t>(cfg.get_int("experiment.seed", 12345));
}

spdei::ExperimentSetup load_setup(const CommonOpts& o) {
  auto cfg = spdei::Config::parse_file(o.config_path);
  return spdei::ExperimentSetup(cfg, resolve_seed(cfg, o.seed_flag), o.threads,
                                o.out_dir);
}

int exit_code_of(const nlohmann::json& report) {
  const std::string outcome = report.at("outcome");
  if (outcome == "pass") return kExitPass;
  if (outcome == "out-of-theory") return kExitOutOfTheory;
  return kExitFail;
}

int cmd_validate(const CommonOpts& o) {
  const auto setup = load_setup(o);
  const auto samples = static_cast<std::size_t>(
      setup.cfg.get_int("experiment.validation_samples", 2000));
  const double radius = setup.cfg.get_double("experiment.radius", 2.0);
  const auto h3 = spdei::validate_h3(setup.model, samples, radius, setup.seed);
  const auto h4 = spdei::validate_h4(setup.model, samples, radius, setup.seed + 1);

  nlohmann::json report = setup.envelope();
  report["experiment"] = "validate";
  report["h3"] = {{"max_drift_ratio", h3.max_drift_ratio},
                  {"max_sigma1_ratio", h3.max_sigma1_ratio},
                  {"declared_L1", h3.declared_L1},
                  {"declared_L2", h3.declared_L2},
                  {"pass", h3.pass()}};
  report["h4"] = {{"max_quotient", h4.max_quotient},
                  {"declared_gamma", h4.declared_gamma},
                  {"pass", h4.pass()}};
  report["outcome"] = h3.pass() && h4.pass() ? "pass" : "fail";
  std::cout << report.dump(2) << "\n";
  if (!o.out_dir.empty())
    spdei::write_json_file(o.out_dir + "/validate_report.json", report);
  return exit_code_of(report);
}

int cmd_constants(const CommonOpts& o) {
  const auto setup = load_setup(o);
  if (!setup.constants) {
    std::cerr << "error: " << setup.constants_error << "\n";
    return kExitFail;
  }
  const auto& r = *setup.constants;
  const auto doc = spdei::json_of_constants(r);
  for (const auto& [key, value] : doc.items())
    std::cout << key << " = " << spdei::format_double(value.get<double>())
              << "\n";
  nlohmann::json report = setup.envelope();
  report["experiment"] = "constants";
  report["outcome"] = "pass";
  if (!o.out_dir.empty())
    spdei::write_json_file(o.out_dir + "/constants_report.json", report);
  return kExitPass;
}

int cmd_simulate(const CommonOpts& o) {
  const auto setup = load_setup(o);
  const auto& cfg = setup.cfg;
  spdei::SchemeParams params{
      cfg.get_double("experiment.dt"),
      static_cast<std::uint64_t>(cfg.get_int("experiment.steps")),
      static_cast<std::uint64_t>(cfg.get_int("experiment.record_every", 1))};
  const std::size_t n = setup.model.space.dim();
  spdei::SpectralVector x0(n, 0.0);
  if (cfg.has("experiment.x0")) {
    const auto given = cfg.get_double_list("experiment.x0");
    if (given.size() != n)
      throw spdei::ConfigError("experiment.x0", "length must equal space.n");
    x0 = given;
  }
  const auto path_id = cfg.get_int("experiment.path_id", 0);
  const spdei::NoiseStream stream(setup.seed, path_id, params.dt, n);
  const auto traj = spdei::simulate(setup.model, params, x0, stream);

  const std::string path =
      (o.out_dir.empty() ? std::string(".") : o.out_dir) + "/trajectory.csv";
  spdei::CsvWriter csv(path);
  std::vector<std::string> head{"k", "t"};
  for (std::size_t i = 1; i <= n; ++i) head.push_back("coord_" + std::to_string(i));
  csv.header(head);
  for (std::size_t j = 0; j < traj.states.size(); ++j) {
    std::vector<double> row{static_cast<double>(traj.grid_indices[j]),
                            traj.time_at(j)};
    row.insert(row.end(), traj.states[j].begin(), traj.states[j].end());
    csv.row(row);
  }
  std::cout << "wrote " << path << " (" << traj.states.size() << " rows)\n";
  return kExitPass;
}

// Reads a numeric CSV (optional header row) into atoms, one row per sample.
std::vector<spdei::SpectralVector> read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample file: " + path);
  std::vector<spdei::SpectralVector> atoms;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) continue;  // header row
    if (!atoms.empty() && row.size() != atoms.front().size())
      throw std::runtime_error("ragged rows in sample file: " + path);
    atoms.push_back(std::move(row));
  }
  if (atoms.empty())
    throw std::runtime_error("no numeric rows in sample file: " + path);
  return atoms;
}

int cmd_distance(const std::string& file_a, const std::string& file_b,
                 std::size_t directions, std::uint64_t seed) {
  const auto atoms_a = read_sample_csv(file_a);
  const auto atoms_b = read_sample_csv(file_b);
  double d;
  if (atoms_a.front().size() == 1) {
    std::vector<double> a, b;
    for (const auto& v : atoms_a) a.push_back(v[0]);
    for (const auto& v : atoms_b) b.push_back(v[0]);
    d = spdei::dL_distance_1d(a, b);
  } else {
    d = spdei::dL_distance_sliced(
        spdei::EmpiricalMeasure::from_ensemble(atoms_a),
        spdei::EmpiricalMeasure::from_ensemble(atoms_b), directions, seed);
  }
  std::cout << spdei::format_double(d) << "\n";
  return kExitPass;
}

int run_experiment(const CommonOpts& o,
                   nlohmann::json (*fn)(const spdei::ExperimentSetup&)) {
  const auto setup = load_setup(o);
  const auto report = fn(setup);
  std::cout << report.dump(2) << "\n";
  return exit_code_of(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral-Galerkin SPDE exponential-integrator harness"};
  app.require_subcommand(1);

  CommonOpts validate_o, constants_o, simulate_o, p1_o, p2_o, rate_o, weak_o;
  add_common(app.add_subcommand("validate", "sample-check (H3)/(H4) bounds"),
             validate_o);
  add_common(app.add_subcommand("constants", "derived constants and stepsize gate"),
             constants_o);
  add_common(app.add_subcommand("simulate", "write one trajectory as CSV"),
             simulate_o);
  add_common(app.add_subcommand("p1", "uniform second-moment bound experiment"),
             p1_o);
  add_common(app.add_subcommand("p2", "two-point contraction experiment"), p2_o);
  add_common(app.add_subcommand("rate", "strong-error rate fits"), rate_o);
  add_common(app.add_subcommand("weak-limit", "stationary-law refinement ladder"),
             weak_o);

  std::string dist_a, dist_b;
  std::size_t dist_directions = 32;
  std::uint64_t dist_seed = 12345;
  auto* dist = app.add_subcommand("distance",
                                  "bounded-Lipschitz distance of two sample CSVs");
  dist->add_option("file_a", dist_a, "first sample CSV")->required();
  dist->add_option("file_b", dist_b, "second sample CSV")->required();
  dist->add_option("--directions", dist_directions, "slicing directions");
  dist->add_option("--seed", dist_seed, "direction sampler seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("validate")) return cmd_validate(validate_o);
    if (app.got_subcommand("constants")) return cmd_constants(constants_o);
    if (app.got_subcommand("simulate")) return cmd_simulate(simulate_o);
    if (app.got_subcommand("p1")) return run_experiment(p1_o, spdei::run_p1);
    if (app.got_subcommand("p2")) return run_experiment(p2_o, spdei::run_p2);
    if (app.got_subcommand("rate"))
      return run_experiment(rate_o, spdei::run_strong_error);
    if (app.got_subcommand("weak-limit"))
      return run_experiment(weak_o, spdei::run_weak_limit);
    if (app.got_subcommand("distance"))
      return cmd_distance(dist_a, dist_b, dist_directions, dist_seed);
  } catch (const spdei::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitFail;
}
