// Copyright 2026 The qgate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qgate command-line front end.
//
// Exit codes: 0 success, 1 usage or config error, 2 solver failure,
// 3 verification failure.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qgate/config_io.hpp"
#include "qgate/gellmann_basis.hpp"
#include "qgate/synthesis_driver.hpp"
#include "qgate/system_model.hpp"

namespace fs = std::filesystem;
using namespace qgate;

namespace {

enum Exit { kOk = 0, kUsage = 1, kSolver = 2, kVerification = 3 };

struct RunFlags {
  std::string out;
  std::vector<double> epsilon;
  std::optional<double> tol;
  std::optional<int> mesh;
  std::optional<unsigned> seed;
  bool quiet = false;
  bool verbose = false;
};

void apply_overrides(ExperimentConfig& cfg, const RunFlags& f) {
  if (!f.epsilon.empty()) cfg.cost.epsilon_schedule = f.epsilon;
  if (f.tol) cfg.solver.tol = *f.tol;
  if (f.mesh) {
    cfg.solver.mesh = *f.mesh;
    if (cfg.solver.max_nodes != 0 && cfg.solver.max_nodes < *f.mesh) cfg.solver.max_nodes = 0;
  }
  cfg.validate();
}

std::string table_line(const SynthesisRun& run) {
  std::ostringstream s;
  s << std::left << std::setw(8) << run.config.name << std::right;
  for (const auto& st : run.stages)
    s << "  " << epsilon_key(st.epsilon) << " " << std::fixed << std::setprecision(6) << st.terminal_cost;
  if (!run.stages.empty()) s << "  (final mesh " << run.stages.back().solution.nodes() << ")";
  return s.str();
}

/// Runs, exports and reports one experiment; returns the exit code.
int run_experiment(const ExperimentConfig& cfg, const RunFlags& flags, const fs::path& out, std::ostream& report,
                   std::ostream* log) {
  const CompiledExperiment ex = compile_experiment(cfg);
  DriverOptions opts;
  opts.log = log;
  opts.verbose = flags.verbose;
  const SynthesisRun run = continuation_solve(ex, opts);
  export_report(ex, run, out, opts.sample_points);
  if (flags.seed) {
    // Recorded for provenance only; the pipeline draws no random numbers.
    auto summary = run_summary(run);
    summary["seed"] = *flags.seed;
    std::ofstream(out / "summary.json") << std::setprecision(17) << summary.dump(2) << '\n';
  }
  report << table_line(run) << '\n';
  if (run.failed) {
    report << cfg.name << ": solver failure: " << run.message << '\n';
    return kSolver;
  }
  int code = kOk;
  for (const auto& st : run.stages) {
    for (const auto& f : st.failed_checks) {
      report << cfg.name << ": verification failed at " << epsilon_key(st.epsilon) << ": " << f << '\n';
      code = kVerification;
    }
  }
  report << cfg.name << ": report written to " << out.string() << '\n';
  return code;
}

int worst(int a, int b) {
  auto rank = [](int c) { return c == kSolver ? 3 : c == kVerification ? 2 : c == kUsage ? 1 : 0; };
  return rank(a) >= rank(b) ? a : b;
}

int cmd_preset(const std::string& name, bool all, const RunFlags& flags) {
  const fs::path root = flags.out.empty() ? fs::path("qgate-out") : fs::path(flags.out);
  std::ostream* log = flags.quiet ? nullptr : &std::cerr;
  if (!all) {
    if (name.empty()) throw ConfigError("preset name required (or --all)");
    ExperimentConfig cfg = preset_experiment(name);
    apply_overrides(cfg, flags);
    return run_experiment(cfg, flags, flags.out.empty() ? root / cfg.name : root, std::cout, log);
  }

  std::vector<ExperimentConfig> configs;
  for (const auto& n : preset_names()) {
    configs.push_back(preset_experiment(n));
    apply_overrides(configs.back(), flags);
  }
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                           static_cast<unsigned>(configs.size())));
  std::atomic<std::size_t> next{0};
  std::vector<int> codes(configs.size(), kOk);
  std::vector<std::string> reports(configs.size());
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < configs.size();) {
      std::ostringstream rep;
      try {
        codes[i] = run_experiment(configs[i], flags, root / configs[i].name, rep, nullptr);
      } catch (const std::exception& e) {
        rep << configs[i].name << ": " << e.what() << '\n';
        codes[i] = kSolver;
      }
      reports[i] = rep.str();
      if (!flags.quiet) {
        std::lock_guard<std::mutex> lock(io);
        std::cerr << "finished " << configs[i].name << '\n';
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int code = kOk;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::cout << reports[i];
    code = worst(code, codes[i]);
  }
  return code;
}

int cmd_synthesize(const std::string& path, const RunFlags& flags) {
  ExperimentConfig cfg = load_config(path);
  if (cfg.name.empty()) cfg.name = fs::path(path).stem().string();
  apply_overrides(cfg, flags);
  const fs::path out = flags.out.empty() ? fs::path("qgate-out") / cfg.name : fs::path(flags.out);
  return run_experiment(cfg, flags, out, std::cout, flags.quiet ? nullptr : &std::cerr);
}

int cmd_verify(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ParseError("not a directory: " + dir);
  const auto checks = verify_run_directory(dir);
  int code = kOk;
  for (const auto& c : checks) {
    std::cout << c.key << ": oracle cost " << c.report.oracle_terminal_cost << ", trajectory gap "
              << c.report.trajectory_gap << (c.failed_checks.empty() ? ", ok" : ", FAILED") << '\n';
    for (const auto& f : c.failed_checks) std::cout << "  " << f << '\n';
    if (!c.failed_checks.empty()) code = kVerification;
  }
  return code;
}

int cmd_basis(int d, const std::string& out_dir) {
  if (d < 2) throw ConfigError("d must be >= 2", "d");
  if (d != 2 && d != 4 && d != 8) std::cerr << "warning: d = " << d << " is not a qubit-register size\n";
  if (d > 16) std::cerr << "warning: structure constants for d = " << d << " are large\n";
  const fs::path out = out_dir.empty() ? fs::path("basis-d" + std::to_string(d)) : fs::path(out_dir);
  fs::create_directories(out);
  const OperatorBasis basis(d);
  const StructureConstants sc = cached_structure_constants(basis, default_cache_dir());

  std::ofstream ops(out / "operators.csv");
  if (!ops) throw Error("cannot write " + (out / "operators.csv").string());
  ops << std::setprecision(17) << "# ordering " << kOrderingTag << ", d " << d << "\n";
  ops << "index,kind,row,col,re,im\n";
  for (int j = 0; j < basis.size(); ++j)
    for (const auto& e : basis[j].entries)
      ops << j + 1 << "," << to_string(basis[j].label.kind) << "," << e.row << "," << e.col << ","
          << e.value.real() << "," << e.value.imag() << '\n';

  std::ofstream st(out / "structure.csv");
  if (!st) throw Error("cannot write " + (out / "structure.csv").string());
  st << std::setprecision(17) << "# ordering " << kOrderingTag << ", d " << d << ", indices 1-based\n";
  st << "tensor,k,m,l,value\n";
  for (const auto& e : sc.g()) st << "g," << e.k + 1 << "," << e.m + 1 << "," << e.l + 1 << "," << e.value << '\n';
  for (const auto& e : sc.f()) st << "f," << e.k + 1 << "," << e.m + 1 << "," << e.l + 1 << "," << e.value << '\n';

  std::ofstream js(out / "structure.json");
  js << structure_constants_to_json(sc).dump() << '\n';
  std::cout << "d " << d << ": " << basis.size() << " operators, " << sc.g().size() << " g entries, "
            << sc.f().size() << " f entries written to " << out.string() << '\n';
  return kOk;
}

/// Long-format CSVs over all stages of a run directory.
int cmd_plot_data(const std::string& run_dir, const std::string& out_dir) {
  const fs::path dir(run_dir);
  std::ifstream in(dir / "summary.json");
  if (!in) throw ParseError("no summary.json in " + run_dir);
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(std::string("summary.json: ") + e.what());
  }
  if (!summary.contains("stages")) throw ParseError("summary.json: no stages");
  const fs::path out = out_dir.empty() ? dir / "plot-data" : fs::path(out_dir);
  fs::create_directories(out);
  std::ofstream table(out / "terminal_costs.csv"), controls(out / "controls_long.csv"),
      running(out / "terminal_running_long.csv");
  if (!table || !controls || !running) throw Error("cannot write to " + out.string());
  for (auto* s : {&table, &controls, &running}) *s << std::setprecision(17);
  table << "epsilon,terminal_cost,running_cost,nodes\n";
  controls << "epsilon,t,channel,value\n";
  running << "epsilon,t,terminal_cost\n";
  for (const auto& st : summary["stages"]) {
    const double eps = st.at("epsilon").get<double>();
    table << eps << "," << st.at("terminal_cost").get<double>() << "," << st.at("running_cost").get<double>() << ","
          << st.at("nodes").get<int>() << '\n';
    const fs::path sub = dir / st.at("directory").get<std::string>();
    std::ifstream c(sub / "controls.csv");
    if (!c) throw ParseError("missing " + (sub / "controls.csv").string());
    std::string header;
    std::getline(c, header);
    std::vector<std::string> names;
    {
      std::stringstream hs(header);
      std::string cell;
      while (std::getline(hs, cell, ',')) names.push_back(cell);
    }
    const std::size_t channels = (names.size() - 1) / 2;
    for (std::string line; std::getline(c, line);) {
      std::stringstream ls(line);
      std::string cell, t;
      std::getline(ls, t, ',');
      for (std::size_t l = 0; l < channels && std::getline(ls, cell, ','); ++l)
        controls << eps << "," << t << "," << names[l + 1] << "," << cell << '\n';
    }
    std::ifstream r(sub / "terminal_running.csv");
    if (!r) throw ParseError("missing " + (sub / "terminal_running.csv").string());
    std::getline(r, header);
    for (std::string line; std::getline(r, line);) running << eps << "," << line << '\n';
  }
  std::cout << "plot data written to " << out.string() << '\n';
  return kOk;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--out,-o", f.out, "output directory");
  cmd->add_option("--epsilon,-e", f.epsilon, "epsilon schedule override, decreasing (e.g. 5,0.5)")->delimiter(',');
  cmd->add_option("--tol", f.tol, "collocation residual tolerance");
  cmd->add_option("--mesh", f.mesh, "initial mesh nodes");
  cmd->add_option("--seed", f.seed, "recorded in summary.json; the pipeline is deterministic");
  cmd->add_flag("--quiet,-q", f.quiet, "no progress output");
  cmd->add_flag("--verbose,-v", f.verbose, "log Newton iterations and mesh refinement");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qgate: quantum gate synthesis by indirect optimal control"};
  app.require_subcommand(1);

  RunFlags preset_flags, synth_flags;
  std::string preset_name;
  bool preset_all = false;
  auto* preset = app.add_subcommand("preset", "run a built-in experiment (not, h, s, t, cnot, cz, toffoli)");
  preset->add_option("name", preset_name, "preset name");
  preset->add_flag("--all", preset_all, "run every preset in parallel; --out is the parent directory");
  add_run_flags(preset, preset_flags);

  std::string config_path;
  auto* synth = app.add_subcommand("synthesize", "run an experiment config file");
  synth->add_option("config", config_path, "config JSON")->required();
  add_run_flags(synth, synth_flags);

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "re-verify a run directory against the dense propagator");
  verify->add_option("run_dir", verify_dir, "directory written by preset or synthesize")->required();

  int basis_d = 2;
  std::string basis_out;
  auto* basis = app.add_subcommand("basis", "write basis operators and structure constants");
  basis->add_option("d", basis_d, "Hilbert-space dimension")->required();
  basis->add_option("--out,-o", basis_out, "output directory");

  std::string plot_dir, plot_out;
  auto* plot = app.add_subcommand("plot-data", "write long-format CSVs of a run for plotting");
  plot->add_option("run_dir", plot_dir, "run directory")->required();
  plot->add_option("--out,-o", plot_out, "output directory (default <run_dir>/plot-data)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (preset->parsed()) return cmd_preset(preset_name, preset_all, preset_flags);
    if (synth->parsed()) return cmd_synthesize(config_path, synth_flags);
    if (verify->parsed()) return cmd_verify(verify_dir);
    if (basis->parsed()) return cmd_basis(basis_d, basis_out);
    if (plot->parsed()) return cmd_plot_data(plot_dir, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolver;
  }
  return kUsage;
}
