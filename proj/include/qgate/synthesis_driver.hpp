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

// Gate synthesis pipeline: initial guess, epsilon continuation, horizon
// selection, verification against the dense-unitary propagator, and report
// files.

#ifndef QGATE_SYNTHESIS_DRIVER_HPP
#define QGATE_SYNTHESIS_DRIVER_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qgate/bloch_dynamics.hpp"
#include "qgate/bvp_solver.hpp"
#include "qgate/config_io.hpp"
#include "qgate/core.hpp"
#include "qgate/gellmann_basis.hpp"
#include "qgate/pmp_system.hpp"
#include "qgate/system_model.hpp"

namespace qgate {

inline constexpr const char* kRunSchema = "qgate-run-v1";

/// Everything derived from a config before solving.
struct CompiledExperiment {
  ExperimentConfig config;
  OperatorBasis basis;
  StructureConstants sc;
  HamiltonianModel model;
  GateTarget target;

  ExtremalSystem system(double epsilon) const {
    return ExtremalSystem(model, sc, target, epsilon, config.solver.costate);
  }
};

/// Directory for cached structure constants: $QGATE_CACHE_DIR, or none.
inline std::filesystem::path default_cache_dir() {
  const char* env = std::getenv("QGATE_CACHE_DIR");
  return env ? std::filesystem::path(env) : std::filesystem::path{};
}

inline CompiledExperiment compile_experiment(const ExperimentConfig& cfg,
                                             const std::filesystem::path& cache_dir = default_cache_dir()) {
  cfg.validate();
  const int d = cfg.hamiltonian.dim();
  OperatorBasis basis(d);
  StructureConstants sc = cached_structure_constants(basis, cache_dir);
  HamiltonianModel model = compile_hamiltonian(cfg.hamiltonian, basis, cfg.cost.weights);
  const CMatrix u = cfg.gate.unitary();
  if (u.rows() != d) throw ConfigError("gate does not act on " + std::to_string(cfg.hamiltonian.n_qubits) + " qubits",
                                       "gate");
  GateTarget target = compile_gate_target(u, cfg.gate.phase, basis);
  return {cfg, std::move(basis), std::move(sc), std::move(model), std::move(target)};
}

/// "5e-3" style key of an epsilon value.
inline std::string epsilon_key(double eps) {
  int e = static_cast<int>(std::floor(std::log10(eps)));
  double m = eps / std::pow(10.0, e);
  if (m >= 9.9999999999) {
    m /= 10.0;
    ++e;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", m);
  return std::string(buf) + "e" + std::to_string(e);
}

/// Extremal states on `mesh` with zero control: the state runs forward from
/// z(0) = (1, 0), the costate backward from its terminal value. Both
/// boundary conditions hold exactly.
inline RMatrix initial_guess(const ExtremalSystem& sys, const RVector& mesh) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(sys.flow().free_generator());
  const int n = sys.flow().state_size();
  const double horizon = mesh(mesh.size() - 1);
  auto propagate = [&](const CVector& v, double t) {
    const CVector phase = (-kI * t * es.eigenvalues().cast<Complex>()).array().exp();
    return CVector(es.eigenvectors() * (phase.asDiagonal() * (es.eigenvectors().adjoint() * v)));
  };
  CVector z0 = CVector::Zero(n);
  z0(0) = 1.0;
  const CVector q_end = sys.terminal_costate();
  RMatrix y(sys.size(), mesh.size());
  for (Eigen::Index i = 0; i < mesh.size(); ++i) {
    RVector col(sys.size());
    sys.encoding().write(0, propagate(z0, mesh(i) - mesh(0)), col);
    sys.encoding().write(1, propagate(q_end, mesh(i) - horizon), col);
    y.col(i) = col;
  }
  return y;
}

inline BvpProblem extremal_problem(const ExtremalSystem& sys, double horizon) {
  BvpProblem p;
  p.n = sys.size();
  p.a = 0.0;
  p.b = horizon;
  p.rhs = [&sys](double t, const RVector& y, RVector& dy) { sys.rhs(t, y, dy); };
  p.jacobian = [&sys](double t, const RVector& y, RMatrix& jac) { sys.jacobian(t, y, jac); };
  p.bc = [&sys](const RVector& ya, const RVector& yb) { return sys.boundary(ya, yb); };
  p.bc_jacobian = [&sys](const RVector&, const RVector&, RMatrix& ba, RMatrix& bb) { sys.boundary_jacobian(ba, bb); };
  return p;
}

// --- verification -----------------------------------------------------------

struct VerificationReport {
  double norm_deviation = 0.0;       // max | |u0|^2 + |u|^2 - 1 |
  double relation_deviation = 0.0;   // max unitarity-relation residual
  double costate_norm_drift = 0.0;   // max | |q(t)|^2 - |q(T)|^2 |
  double bloch_terminal_cost = 0.0;
  double oracle_terminal_cost = 0.0;
  double oracle_gap = 0.0;           // |oracle - Bloch| terminal cost
  double trajectory_gap = 0.0;       // max componentwise Bloch-state gap on the grid
  double hamiltonian_mean = 0.0;
  double hamiltonian_drift = 0.0;    // max - min of H on the grid
  double stationarity = 0.0;
  double unitarity_defect = 0.0;     // |U^dagger U - I|_2 of the reconstructed U(T)

  double first_integrals() const { return std::max(norm_deviation, relation_deviation); }
};

struct VerificationThresholds {
  double first_integrals = 1e-5;
  double oracle_gap = 1e-3;        // times (1 + cost)
  double trajectory_gap = 1e-4;
  double hamiltonian_drift = 1e-2; // times (1 + |H|)
  double stationarity = 1e-9;
  double costate_norm = 1e-6;
  double unitarity = 1e-6;
};

/// Names of the checks that fail, with values.
inline std::vector<std::string> failed_checks(const VerificationReport& r, const VerificationThresholds& t = {}) {
  std::vector<std::string> out;
  auto check = [&](const char* name, double value, double limit) {
    if (!(value <= limit)) {
      std::ostringstream s;
      s << name << " " << value << " > " << limit;
      out.push_back(s.str());
    }
  };
  check("first-integrals", r.first_integrals(), t.first_integrals);
  check("oracle-gap-cost", r.oracle_gap, t.oracle_gap * (1.0 + r.bloch_terminal_cost));
  check("oracle-gap-trajectory", r.trajectory_gap, t.trajectory_gap);
  check("hamiltonian-drift", r.hamiltonian_drift, t.hamiltonian_drift * (1.0 + std::abs(r.hamiltonian_mean)));
  check("stationarity", r.stationarity, t.stationarity);
  check("costate-norm", r.costate_norm_drift, t.costate_norm);
  check("unitarity", r.unitarity_defect, t.unitarity);
  return out;
}

/// Spectral norm of U^dagger U - I.
inline double unitarity_defect(const CMatrix& u) {
  const CMatrix e = u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols());
  return Eigen::SelfAdjointEigenSolver<CMatrix>(e, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
}

/// Samples of a solved stage on a uniform grid.
struct StageSamples {
  RVector grid;
  RMatrix controls;  // s x N
  RMatrix slopes;    // s x N, exact time derivatives of the controls
  BlochTrajectory bloch;
  RVector terminal_running;
};

inline StageSamples sample_stage(const ExtremalSystem& sys, const BvpSolution& sol, int points) {
  StageSamples out;
  out.grid = RVector::LinSpaced(points, sol.mesh(0), sol.mesh(sol.mesh.size() - 1));
  const int s = sys.flow().n_controls();
  out.controls.resize(s, points);
  out.slopes.resize(s, points);
  out.bloch.mesh = out.grid;
  const auto& enc = sys.encoding();
  for (int i = 0; i < points; ++i) {
    const RVector y = sol.evaluate(out.grid(i));
    const CVector z = enc.read(0, y);
    const CVector q = enc.read(1, y);
    const RVector nu = sys.feedback(z, q);
    const CMatrix m = sys.flow().generator(nu);
    const CVector zd = -kI * (m * z);
    const CVector qd = -kI * (m * q);
    out.controls.col(i) = nu;
    for (int l = 0; l < s; ++l) {
      const CMatrix& ml = sys.flow().channel_generator(l);
      out.slopes(l, i) = -(qd.dot(ml * z) + q.dot(ml * zd)).imag() / (sys.epsilon() * sys.weight(l));
    }
    out.bloch.u0.push_back(z(0));
    out.bloch.u.push_back(z.tail(z.size() - 1));
  }
  out.terminal_running = running_terminal_cost(out.bloch, sys.target());
  return out;
}

inline ControlTrajectory sampled_controls(const StageSamples& s) {
  return {s.grid, s.controls, ControlInterpolation::CubicHermite, s.slopes};
}

/// Bloch states of the oracle propagators.
inline BlochTrajectory oracle_bloch(const std::vector<CMatrix>& us, const RVector& grid, const OperatorBasis& basis) {
  BlochTrajectory out;
  out.mesh = grid;
  for (const auto& u : us) {
    auto dec = decompose(u, basis);
    out.u0.push_back(dec.scalar);
    out.u.push_back(std::move(dec.vec));
  }
  return out;
}

inline double trajectory_gap(const BlochTrajectory& a, const BlochTrajectory& b) {
  require_dimension(a.size() == b.size(), "trajectories differ in length");
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    gap = std::max(gap, std::abs(a.u0[i] - b.u0[i]));
    if (a.u[i].size()) gap = std::max(gap, (a.u[i] - b.u[i]).cwiseAbs().maxCoeff());
  }
  return gap;
}

inline OracleOptions verification_oracle_options() {
  OracleOptions o;
  o.tol = 1e-10;
  return o;
}

/// Recovers nu(t) from the solution on a uniform grid, re-propagates it with
/// the dense-unitary propagator and collects the invariants.
inline VerificationReport verify_solution(const CompiledExperiment& ex, const ExtremalSystem& sys,
                                          const BvpSolution& sol, int points = 1001,
                                          StageSamples* samples_out = nullptr) {
  VerificationReport r;
  StageSamples smp = sample_stage(sys, sol, points);
  const auto fi = first_integrals(smp.bloch, ex.sc);
  r.norm_deviation = fi.norm_deviation;
  r.relation_deviation = fi.relation_deviation;

  const auto& enc = sys.encoding();
  const RVector y_end = sol.y.col(sol.y.cols() - 1);
  const double q_end = enc.read(1, y_end).squaredNorm();
  double h_min = INFINITY, h_max = -INFINITY, h_sum = 0.0;
  for (Eigen::Index i = 0; i < smp.grid.size(); ++i) {
    const RVector y = sol.evaluate(smp.grid(i));
    const CVector z = enc.read(0, y);
    const CVector q = enc.read(1, y);
    const RVector nu = smp.controls.col(i);
    r.costate_norm_drift = std::max(r.costate_norm_drift, std::abs(q.squaredNorm() - q_end));
    r.stationarity = std::max(r.stationarity, sys.stationarity(z, q, nu).cwiseAbs().maxCoeff());
    const double h = sys.hamiltonian_value(z, q, nu);
    h_min = std::min(h_min, h);
    h_max = std::max(h_max, h);
    h_sum += h;
  }
  r.hamiltonian_mean = h_sum / static_cast<double>(smp.grid.size());
  r.hamiltonian_drift = h_max - h_min;

  const CVector z_end = enc.read(0, y_end);
  r.bloch_terminal_cost = terminal_cost(z_end(0), z_end.tail(z_end.size() - 1), ex.target);
  BlochDecomposition dec{z_end(0), z_end.tail(z_end.size() - 1)};
  const CMatrix u_rec = reconstruct(dec, ex.basis);
  r.unitarity_defect = unitarity_defect(u_rec);

  const auto us = propagate_unitary_oracle(ex.config.hamiltonian, sampled_controls(smp), smp.grid,
                                           verification_oracle_options());
  r.oracle_terminal_cost = dense_terminal_cost(us.back(), ex.target);
  r.oracle_gap = std::abs(r.oracle_terminal_cost - r.bloch_terminal_cost);
  r.trajectory_gap = trajectory_gap(oracle_bloch(us, smp.grid, ex.basis), smp.bloch);
  if (samples_out) *samples_out = std::move(smp);
  return r;
}

/// 1/2 eps sum_l w_l int nu_l^2 dt on the solution interpolant.
inline double running_cost(const ExtremalSystem& sys, const BvpSolution& sol) {
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < sol.mesh.size(); ++i) {
    const double a = sol.mesh(i), b = sol.mesh(i + 1);
    for (const auto& [x, w] : detail::gauss_legendre_8()) {
      const RVector nu = sys.feedback(sol.evaluate(0.5 * (a + b) + 0.5 * (b - a) * x));
      double e = 0.0;
      for (int l = 0; l < nu.size(); ++l) e += sys.weight(l) * nu(l) * nu(l);
      total += 0.5 * (b - a) * w * e;
    }
  }
  return 0.5 * sys.epsilon() * total;
}

// --- continuation -----------------------------------------------------------

struct DriverOptions {
  std::ostream* log = nullptr;
  /// Log every Newton iteration and refinement round.
  bool verbose = false;
  /// Uniform grid for verification and exported curves.
  int sample_points = 1001;
  /// Halvings of a failed continuation step (in log epsilon) before the
  /// mesh-doubling retry.
  int max_bisections = 6;
  bool verify = true;
  VerificationThresholds thresholds;
};

struct StageResult {
  double epsilon = 0.0;
  BvpSolution solution;
  double terminal_cost = 0.0;
  double running_cost = 0.0;
  VerificationReport verification;
  std::vector<std::string> failed_checks;
  int newton_iterations = 0;
  /// Continuation solves used to reach this stage from the previous one.
  int substeps = 0;
  bool mesh_doubled = false;
  double seconds = 0.0;
};

struct SynthesisRun {
  ExperimentConfig config;
  std::vector<StageResult> stages;
  bool failed = false;
  std::optional<double> failed_epsilon;
  std::string message;
  double seconds = 0.0;

  bool verified() const {
    for (const auto& s : stages)
      if (!s.failed_checks.empty()) return false;
    return true;
  }
};

namespace detail {

/// Doubles a mesh by inserting every interval midpoint.
inline RVector double_mesh(const RVector& mesh) {
  RVector out(2 * mesh.size() - 1);
  for (Eigen::Index i = 0; i + 1 < mesh.size(); ++i) {
    out(2 * i) = mesh(i);
    out(2 * i + 1) = 0.5 * (mesh(i) + mesh(i + 1));
  }
  out(out.size() - 1) = mesh(mesh.size() - 1);
  return out;
}

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct StepOutcome {
  BvpSolution solution;
  int newton_iterations = 0;
  int solves = 0;
};

/// Walks epsilon from `from` down to `to` starting at `start`, in geometric
/// steps no larger than `max_ratio`; a failed step is halved in log epsilon
/// up to `max_bisections` times.
inline std::optional<StepOutcome> continue_to(const CompiledExperiment& ex, const BvpSolution& start, double from,
                                              double to, const SolverOptions& sopts, const DriverOptions& opts,
                                              std::string& message) {
  StepOutcome out;
  out.solution = start;
  double current = from;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::log(from / to) / std::log(ex.config.solver.max_epsilon_ratio) - 1e-9)));
  double factor = std::pow(to / from, 1.0 / steps);
  int bisections = 0;
  while (current > to) {
    double next = std::max(to, current * factor);
    if (next / to < 1.0 + 1e-12) next = to;
    const ExtremalSystem sys = ex.system(next);
    const BvpProblem prob = extremal_problem(sys, ex.config.cost.horizon);
    BvpSolution sol = solve_bvp(prob, out.solution.mesh, out.solution.y, sopts);
    out.newton_iterations += sol.newton_iterations;
    ++out.solves;
    if (opts.log) {
      *opts.log << "  eps " << next << ": " << sol.message << ", nodes " << sol.nodes() << ", newton "
                << sol.newton_iterations << '\n';
    }
    if (sol.converged()) {
      out.solution = std::move(sol);
      current = next;
      continue;
    }
    message = sol.message;
    if (bisections >= opts.max_bisections) return std::nullopt;
    ++bisections;
    factor = std::sqrt(factor);
  }
  return out;
}

}  // namespace detail

/// Solves the schedule in order: a cold solve at the first epsilon from
/// initial_guess, then warm starts. A stage that fails is retried once from
/// a doubled mesh when that fits in max_nodes; a second failure ends the run
/// with earlier stages kept.
inline SynthesisRun continuation_solve(const CompiledExperiment& ex, const DriverOptions& opts = {}) {
  const ExperimentConfig& cfg = ex.config;
  detail::Clock total;
  SynthesisRun run;
  run.config = cfg;

  SolverOptions sopts;
  sopts.tol = cfg.solver.tol;
  sopts.newton_tol = std::min(cfg.solver.newton_tol, cfg.solver.tol);
  sopts.max_nodes = cfg.solver.effective_max_nodes();
  if (opts.verbose) sopts.log = opts.log;

  const auto& schedule = cfg.cost.epsilon_schedule;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const double eps = schedule[k];
    detail::Clock clock;
    if (opts.log) *opts.log << "stage eps " << epsilon_key(eps) << '\n';
    StageResult stage;
    stage.epsilon = eps;
    std::string message;
    std::optional<detail::StepOutcome> outcome;
    for (int attempt = 0; attempt < 2 && !outcome; ++attempt) {
      const bool doubled = attempt == 1;
      if (doubled) {
        const Eigen::Index base = k == 0 ? cfg.solver.mesh : run.stages.back().solution.mesh.size();
        if (2 * base - 1 > sopts.max_nodes) {
          message += "; a doubled mesh would exceed " + std::to_string(sopts.max_nodes) + " nodes";
          break;
        }
        if (opts.log) *opts.log << "  retrying with a doubled mesh\n";
      }
      if (k == 0) {
        RVector mesh = RVector::LinSpaced(cfg.solver.mesh, 0.0, cfg.cost.horizon);
        if (doubled) mesh = detail::double_mesh(mesh);
        const ExtremalSystem sys = ex.system(eps);
        const BvpProblem prob = extremal_problem(sys, cfg.cost.horizon);
        BvpSolution sol = solve_bvp(prob, mesh, initial_guess(sys, mesh), sopts);
        if (opts.log) *opts.log << "  " << sol.message << ", nodes " << sol.nodes() << '\n';
        if (sol.converged()) {
          outcome = detail::StepOutcome{sol, sol.newton_iterations, 1};
        } else {
          message = sol.message;
        }
      } else {
        const StageResult& prev = run.stages.back();
        BvpSolution start = prev.solution;
        if (doubled) {
          start.mesh = detail::double_mesh(prev.solution.mesh);
          start.y = prev.solution.evaluate(start.mesh);
        }
        outcome = detail::continue_to(ex, start, prev.epsilon, eps, sopts, opts, message);
      }
      stage.mesh_doubled = doubled;
    }
    if (!outcome) {
      run.failed = true;
      run.failed_epsilon = eps;
      run.message = "stage " + epsilon_key(eps) + " failed: " + message;
      if (opts.log) *opts.log << run.message << '\n';
      break;
    }
    stage.solution = std::move(outcome->solution);
    stage.newton_iterations = outcome->newton_iterations;
    stage.substeps = outcome->solves;
    const ExtremalSystem sys = ex.system(eps);
    const RVector y_end = stage.solution.y.col(stage.solution.y.cols() - 1);
    const CVector z_end = sys.encoding().read(0, y_end);
    stage.terminal_cost = terminal_cost(z_end(0), z_end.tail(z_end.size() - 1), ex.target);
    stage.running_cost = running_cost(sys, stage.solution);
    if (opts.verify) {
      stage.verification = verify_solution(ex, sys, stage.solution, opts.sample_points);
      stage.failed_checks = failed_checks(stage.verification, opts.thresholds);
    }
    stage.seconds = clock.seconds();
    if (opts.log) {
      *opts.log << "  terminal cost " << stage.terminal_cost << ", nodes " << stage.solution.nodes() << ", "
                << stage.seconds << " s\n";
      for (const auto& f : stage.failed_checks) *opts.log << "  check failed: " << f << '\n';
    }
    run.stages.push_back(std::move(stage));
  }
  if (!run.failed) run.message = "converged";
  run.seconds = total.seconds();
  return run;
}

inline SynthesisRun continuation_solve(const ExperimentConfig& cfg, const DriverOptions& opts = {}) {
  return continuation_solve(compile_experiment(cfg), opts);
}

// --- horizon selection ------------------------------------------------------

struct HorizonResult {
  double horizon = 0.0;
  int iterations = 0;
  std::vector<double> history;
  std::optional<std::string> warning;
};

/// Index of the smallest value, the first one on ties.
inline Eigen::Index argmin_first(const RVector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) < v(best)) best = i;
  return best;
}

/// Solves on [0, T] with the configured schedule, moves T to the minimizer
/// of the running terminal cost of the last stage and repeats until T moves
/// by less than 1% or after 5 solves. A minimizer at either end of the grid
/// (no interior minimum) returns `max_horizon` with a warning.
inline HorizonResult select_horizon(const ExperimentConfig& cfg, double max_horizon, const DriverOptions& opts = {}) {
  if (!(max_horizon > 0.0)) throw ConfigError("T_max must be positive", "T_max");
  HorizonResult res;
  double horizon = max_horizon;
  DriverOptions quiet = opts;
  quiet.verify = false;
  for (int it = 0; it < 5; ++it) {
    ExperimentConfig c = cfg;
    c.cost.horizon = horizon;
    const CompiledExperiment ex = compile_experiment(c);
    const SynthesisRun run = continuation_solve(ex, quiet);
    ++res.iterations;
    res.history.push_back(horizon);
    if (run.failed || run.stages.empty()) throw Error("horizon selection: " + run.message);
    const auto& last = run.stages.back();
    const auto smp = sample_stage(ex.system(last.epsilon), last.solution, opts.sample_points);
    const Eigen::Index i = argmin_first(smp.terminal_running);
    const Eigen::Index end = smp.grid.size() - 1;
    if (i == 0 || i == end) {
      if (it == 0) {
        res.horizon = max_horizon;
        res.warning = i == 0 ? "running terminal cost is smallest at t = 0; keeping T_max"
                             : "no interior minimum below the value at T_max; keeping T_max";
        return res;
      }
      res.horizon = horizon;
      return res;
    }
    const double t_star = smp.grid(i);
    const bool settled = std::abs(t_star - horizon) < 0.01 * t_star;
    horizon = t_star;
    if (opts.log) *opts.log << "horizon iteration " << it << ": T -> " << horizon << '\n';
    if (settled) break;
  }
  res.horizon = horizon;
  return res;
}

// --- report files -----------------------------------------------------------

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << std::setprecision(17);
  return out;
}

inline nlohmann::json verification_json(const VerificationReport& r) {
  return {{"norm_deviation", r.norm_deviation},
          {"relation_deviation", r.relation_deviation},
          {"costate_norm_drift", r.costate_norm_drift},
          {"bloch_terminal_cost", r.bloch_terminal_cost},
          {"oracle_terminal_cost", r.oracle_terminal_cost},
          {"oracle_gap", r.oracle_gap},
          {"trajectory_gap", r.trajectory_gap},
          {"hamiltonian_mean", r.hamiltonian_mean},
          {"hamiltonian_drift", r.hamiltonian_drift},
          {"stationarity", r.stationarity},
          {"unitarity_defect", r.unitarity_defect}};
}

inline void write_controls_csv(const std::filesystem::path& file, const StageSamples& s,
                               const std::vector<std::string>& labels) {
  auto out = open_output(file);
  out << "t";
  for (const auto& l : labels) out << "," << l;
  for (const auto& l : labels) out << ",d" << l;
  out << '\n';
  for (Eigen::Index i = 0; i < s.grid.size(); ++i) {
    out << s.grid(i);
    for (Eigen::Index l = 0; l < s.controls.rows(); ++l) out << "," << s.controls(l, i);
    for (Eigen::Index l = 0; l < s.slopes.rows(); ++l) out << "," << s.slopes(l, i);
    out << '\n';
  }
}

inline void write_bloch_csv(const std::filesystem::path& file, const BlochTrajectory& b) {
  auto out = open_output(file);
  const Eigen::Index n = b.size() ? b.u[0].size() : 0;
  out << "t,re_u0,im_u0";
  for (Eigen::Index j = 1; j <= n; ++j) out << ",re_u" << j << ",im_u" << j;
  out << '\n';
  for (std::size_t i = 0; i < b.size(); ++i) {
    out << b.mesh(static_cast<Eigen::Index>(i)) << "," << b.u0[i].real() << "," << b.u0[i].imag();
    for (Eigen::Index j = 0; j < n; ++j) out << "," << b.u[i](j).real() << "," << b.u[i](j).imag();
    out << '\n';
  }
}

inline void write_running_csv(const std::filesystem::path& file, const StageSamples& s) {
  auto out = open_output(file);
  out << "t,terminal_cost\n";
  for (Eigen::Index i = 0; i < s.grid.size(); ++i) out << s.grid(i) << "," << s.terminal_running(i) << '\n';
}

}  // namespace detail

inline std::string stage_directory(double eps) { return "stage-" + epsilon_key(eps); }

inline nlohmann::json run_summary(const SynthesisRun& run) {
  nlohmann::json stages = nlohmann::json::array();
  nlohmann::json table = nlohmann::json::object();
  for (const auto& s : run.stages) {
    table[epsilon_key(s.epsilon)] = s.terminal_cost;
    stages.push_back({{"epsilon", s.epsilon},
                      {"key", epsilon_key(s.epsilon)},
                      {"directory", stage_directory(s.epsilon)},
                      {"terminal_cost", s.terminal_cost},
                      {"running_cost", s.running_cost},
                      {"oracle_terminal_cost", s.verification.oracle_terminal_cost},
                      {"nodes", s.solution.nodes()},
                      {"max_residual", s.solution.max_residual},
                      {"newton_iterations", s.newton_iterations},
                      {"substeps", s.substeps},
                      {"mesh_doubled", s.mesh_doubled},
                      {"seconds", s.seconds},
                      {"failed_checks", s.failed_checks}});
  }
  nlohmann::json j{{"schema", kRunSchema},
                   {"name", run.config.name},
                   {"status", run.failed ? "failed" : "converged"},
                   {"message", run.message},
                   {"verified", run.verified()},
                   {"terminal_costs", table},
                   {"stages", stages},
                   {"seconds", run.seconds},
                   {"config", config_to_json(run.config)}};
  j["failed_epsilon"] = run.failed_epsilon ? nlohmann::json(*run.failed_epsilon) : nlohmann::json(nullptr);
  return j;
}

/// Writes <dir>/summary.json and one stage-<eps>/ directory per stage.
inline void export_report(const CompiledExperiment& ex, const SynthesisRun& run, const std::filesystem::path& dir,
                          int sample_points = 1001) {
  if (run.stages.empty() && !run.failed) throw Error("export_report: run is empty");
  std::filesystem::create_directories(dir);
  std::vector<std::string> labels;
  for (const auto& ch : ex.model.channels) labels.push_back(ch.label);
  for (const auto& s : run.stages) {
    const auto sub = dir / stage_directory(s.epsilon);
    std::filesystem::create_directories(sub);
    const ExtremalSystem sys = ex.system(s.epsilon);
    const StageSamples smp = sample_stage(sys, s.solution, sample_points);
    detail::write_controls_csv(sub / "controls.csv", smp, labels);
    detail::write_bloch_csv(sub / "bloch.csv", smp.bloch);
    detail::write_running_csv(sub / "terminal_running.csv", smp);
    auto out = detail::open_output(sub / "verification.json");
    nlohmann::json v = detail::verification_json(s.verification);
    v["failed_checks"] = s.failed_checks;
    out << v.dump(2) << '\n';
  }
  auto out = detail::open_output(dir / "summary.json");
  out << run_summary(run).dump(2) << '\n';
}

// --- verification of stored runs --------------------------------------------

namespace detail {

inline std::vector<std::vector<double>> read_csv(const std::filesystem::path& file, std::size_t columns) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(file.string() + ": empty file");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(file.string() + ": bad number '" + cell + "' on row " + std::to_string(rows.size() + 1));
      }
    }
    if (row.size() != columns)
      throw ParseError(file.string() + ": expected " + std::to_string(columns) + " columns on row " +
                       std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ParseError(file.string() + ": need at least two rows");
  return rows;
}

}  // namespace detail

struct StoredStageCheck {
  std::string key;
  VerificationReport report;
  std::vector<std::string> failed_checks;
};

/// Re-propagates every stored stage of a run directory from its controls
/// with the dense-unitary propagator and compares against the stored Bloch
/// trajectory and terminal cost. Throws ParseError on missing or corrupt
/// files.
inline std::vector<StoredStageCheck> verify_run_directory(const std::filesystem::path& dir,
                                                          const VerificationThresholds& thr = {}) {
  const auto summary_file = dir / "summary.json";
  if (!std::filesystem::exists(summary_file)) throw ParseError("no summary.json in " + dir.string());
  nlohmann::json summary;
  try {
    std::ifstream in(summary_file);
    summary = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(std::string("summary.json: ") + e.what());
  }
  if (!summary.is_object() || summary.value("schema", "") != kRunSchema)
    throw ParseError("summary.json: schema is not " + std::string(kRunSchema));
  ExperimentConfig cfg;
  try {
    cfg = config_from_json(summary.at("config"));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("summary.json config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("summary.json config: ") + e.what());
  }
  const CompiledExperiment ex = compile_experiment(cfg);
  const int s = ex.model.n_controls();
  const int n = ex.basis.size();

  std::vector<StoredStageCheck> out;
  if (!summary.contains("stages") || !summary["stages"].is_array() || summary["stages"].empty())
    throw ParseError("summary.json: no stages");
  for (const auto& st : summary["stages"]) {
    StoredStageCheck check;
    double stored_cost = 0.0;
    std::string sub;
    try {
      check.key = st.at("key").get<std::string>();
      sub = st.at("directory").get<std::string>();
      stored_cost = st.at("terminal_cost").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("summary.json stage: ") + e.what());
    }
    const auto controls = detail::read_csv(dir / sub / "controls.csv", static_cast<std::size_t>(1 + 2 * s));
    const auto bloch_rows = detail::read_csv(dir / sub / "bloch.csv", static_cast<std::size_t>(3 + 2 * n));
    if (controls.size() != bloch_rows.size()) throw ParseError(sub + ": controls and bloch rows differ");

    const Eigen::Index m = static_cast<Eigen::Index>(controls.size());
    RVector grid(m);
    RMatrix values(s, m), slopes(s, m);
    BlochTrajectory stored;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& c = controls[static_cast<std::size_t>(i)];
      const auto& b = bloch_rows[static_cast<std::size_t>(i)];
      grid(i) = c[0];
      if (b[0] != c[0]) throw ParseError(sub + ": time columns differ on row " + std::to_string(i + 1));
      for (int l = 0; l < s; ++l) {
        values(l, i) = c[static_cast<std::size_t>(1 + l)];
        slopes(l, i) = c[static_cast<std::size_t>(1 + s + l)];
      }
      stored.u0.emplace_back(b[1], b[2]);
      CVector u(n);
      for (int j = 0; j < n; ++j) u(j) = Complex(b[static_cast<std::size_t>(3 + 2 * j)], b[static_cast<std::size_t>(4 + 2 * j)]);
      stored.u.push_back(std::move(u));
    }
    stored.mesh = grid;
    ControlTrajectory traj;
    try {
      traj = ControlTrajectory(grid, values, ControlInterpolation::CubicHermite, slopes);
    } catch (const ConfigError& e) {
      throw ParseError(sub + ": " + e.what());
    }
    const auto us = propagate_unitary_oracle(cfg.hamiltonian, traj, grid, verification_oracle_options());
    auto& r = check.report;
    const auto fi = first_integrals(stored, ex.sc);
    r.norm_deviation = fi.norm_deviation;
    r.relation_deviation = fi.relation_deviation;
    r.bloch_terminal_cost = stored_cost;
    r.oracle_terminal_cost = dense_terminal_cost(us.back(), ex.target);
    r.oracle_gap = std::abs(r.oracle_terminal_cost - stored_cost);
    r.trajectory_gap = trajectory_gap(oracle_bloch(us, grid, ex.basis), stored);
    const CMatrix& u_end = us.back();
    r.unitarity_defect = unitarity_defect(u_end);
    check.failed_checks = failed_checks(r, thr);
    out.push_back(std::move(check));
  }
  return out;
}

}  // namespace qgate

#endif  // QGATE_SYNTHESIS_DRIVER_HPP
