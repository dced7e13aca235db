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

// Acceptance criteria AC1-AC8. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `--only AC4,AC7` restricts the set; AC7
// inspects the runs made by AC4-AC6 and runs them if needed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qgate/bloch_dynamics.hpp"
#include "qgate/bvp_solver.hpp"
#include "qgate/gellmann_basis.hpp"
#include "qgate/pmp_system.hpp"
#include "qgate/synthesis_driver.hpp"
#include "qgate/system_model.hpp"

using namespace qgate;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[fail: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// --- AC1 ----------------------------------------------------------------------

void ac1(Outcome& o) {
  double worst = 0.0;
  for (int d : {2, 4, 8}) {
    const OperatorBasis basis(d);
    const auto sc = structure_constants(basis);
    const int n = basis.size();
    std::vector<CMatrix> ops;
    for (int j = 0; j < n; ++j) ops.push_back(basis[j].dense());
    for (int j = 0; j < n; ++j) {
      worst = std::max(worst, max_abs(ops[j] - ops[j].adjoint()));
      worst = std::max(worst, std::abs(ops[j].trace()));
      for (int k = 0; k < n; ++k) {
        worst = std::max(worst, std::abs((ops[j] * ops[k]).trace() - (j == k ? 2.0 : 0.0)));
        // Y_j Y_k = (2/d) delta_jk I + sum_l (g_jkl + i f_jkl) Y_l
        const auto [scalar, vec] = product_expand(j, k, sc);
        CMatrix rhs = scalar * CMatrix::Identity(d, d);
        for (int l = 0; l < n; ++l) rhs += vec(l) * ops[l];
        worst = std::max(worst, max_abs(ops[j] * ops[k] - rhs));
      }
    }
  }
  o.require(worst <= 1e-12, "basis identities");

  const auto sc2 = structure_constants(OperatorBasis(2));
  bool exact = sc2.g().empty() && sc2.f().size() == 6;
  for (const auto& e : sc2.f()) {
    const int sign = ((e.m - e.k) * (e.l - e.k) * (e.l - e.m)) > 0 ? 1 : -1;
    exact = exact && e.value == sign;
  }
  o.require(exact, "d=2 constants are g=0, f=Levi-Civita");
  o.detail << "max identity error " << sci(worst) << "; d=2 f = Levi-Civita exactly";
}

// --- AC2 ----------------------------------------------------------------------

ControlTrajectory random_controls(std::mt19937_64& rng, int s, double horizon, ControlInterpolation mode) {
  std::normal_distribution<double> normal(0.0, 1.5);
  const int nodes = 12;
  RMatrix values(s, nodes);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = normal(rng);
  return {RVector::LinSpaced(nodes, 0.0, horizon), values, mode};
}

void ac2(Outcome& o) {
  std::mt19937_64 rng(20260101);
  struct System {
    const char* name;
    HamiltonianSpec spec;
    double horizon;
  };
  const std::vector<System> systems{{"one-qubit", one_qubit_system(2.0, 1.0), 1.0},
                                    {"two-qubit", two_qubit_system(2.0, 2.0, 1.0, 0.5, 0.75), 3.0}};
  double gap = 0.0, invariants = 0.0;
  int count = 0;
  for (const auto& sys : systems) {
    const OperatorBasis basis(sys.spec.dim());
    const auto sc = structure_constants(basis);
    const auto model = compile_hamiltonian(sys.spec, basis);
    for (int trial = 0; trial < 20; ++trial) {
      const auto mode = trial % 2 ? ControlInterpolation::CubicHermite : ControlInterpolation::PiecewiseConstant;
      const auto controls = random_controls(rng, model.n_controls(), sys.horizon, mode);
      const RVector grid = RVector::LinSpaced(41, 0.0, sys.horizon);
      const auto traj = propagate_bloch(model, sc, controls, grid);
      const auto us = propagate_unitary_oracle(sys.spec, controls, grid);
      const auto dec = decompose(us.back(), basis);
      gap = std::max(gap, std::abs(dec.scalar - traj.u0.back()));
      gap = std::max(gap, (dec.vec - traj.u.back()).cwiseAbs().maxCoeff());
      const auto fi = first_integrals(traj, sc);
      invariants = std::max({invariants, fi.norm_deviation, fi.relation_deviation});
      ++count;
    }
  }
  o.require(gap <= 1e-7, "Bloch vs unitary at T");
  o.require(invariants <= 1e-8, "first integrals");
  o.detail << count << " trajectories; max component gap " << sci(gap) << ", first integrals " << sci(invariants);
}

// --- AC3 ----------------------------------------------------------------------

void ac3(Outcome& o) {
  const auto ex = compile_experiment(preset_experiment("not"));
  const double eps = 0.05;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 2.0);
  RMatrix nu(1, 32);
  for (Eigen::Index k = 0; k < nu.cols(); ++k) nu(0, k) = normal(rng);
  auto cost = [&](const RMatrix& v) {
    return reduced_cost_gradient(ex.model, ex.sc, ex.target, eps, ex.config.cost.horizon, v).value;
  };
  const RMatrix grad = reduced_cost_gradient(ex.model, ex.sc, ex.target, eps, ex.config.cost.horizon, nu).gradient;
  RMatrix fd(1, 32);
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < nu.cols(); ++k) {
    RMatrix up = nu, down = nu;
    up(0, k) += h;
    down(0, k) -= h;
    fd(0, k) = (cost(up) - cost(down)) / (2 * h);
  }
  const double rel = (grad - fd).norm() / fd.norm();
  o.require(rel <= 1e-5, "relative gradient error");
  o.detail << "32 controls, relative error " << sci(rel);
}

// --- AC4-AC7: continuation runs ----------------------------------------------

std::map<std::string, SynthesisRun>& runs() {
  static std::map<std::string, SynthesisRun> r;
  return r;
}

const SynthesisRun& preset_run(const std::string& name) {
  auto it = runs().find(name);
  if (it == runs().end()) {
    DriverOptions opts;
    it = runs().emplace(name, continuation_solve(preset_experiment(name), opts)).first;
  }
  return it->second;
}

const std::vector<double> kSchedule{5.0, 0.5, 0.05, 0.005};

/// Checks one preset: full schedule converged, strictly decreasing costs,
/// final cost <= limit. Returns the final cost.
double check_table_row(Outcome& o, const std::string& name, double limit) {
  const auto& run = preset_run(name);
  o.detail << name << ":";
  if (run.failed || run.stages.size() != kSchedule.size()) {
    o.require(false, name + " run: " + run.message);
    return INFINITY;
  }
  bool decreasing = true;
  for (std::size_t k = 0; k < run.stages.size(); ++k) {
    o.detail << " " << sci(run.stages[k].terminal_cost);
    if (k > 0 && !(run.stages[k].terminal_cost < run.stages[k - 1].terminal_cost)) decreasing = false;
  }
  const double final_cost = run.stages.back().terminal_cost;
  o.detail << " (limit " << sci(limit) << ", " << sci(run.seconds) << " s); ";
  o.require(decreasing, name + " costs strictly decreasing");
  o.require(final_cost <= limit, name + " final cost");
  return final_cost;
}

void ac4(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<std::string, double>> rows{{"not", 1.2e-3}, {"h", 1.4e-3}, {"s", 6e-4}, {"t", 5.4e-3}};
  for (const auto& [name, limit] : rows) check_table_row(o, name, limit);
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, "runtime < 2 min");
}

void ac5(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  check_table_row(o, "cz", 2e-4);
  o.require(seconds_since(t0) < 300.0, "CZ runtime < 5 min");
  const auto& cnot = preset_run("cnot");
  const bool ok = !cnot.failed && !cnot.stages.empty() && cnot.stages.back().epsilon == 5e-3;
  o.require(ok, "CNOT run: " + cnot.message);
  if (ok) {
    o.detail << "cnot (alpha = 1): " << sci(cnot.stages.back().terminal_cost) << " (limit 1e-3)";
    o.require(cnot.stages.back().terminal_cost <= 1e-3, "CNOT final cost");
  }
}

void ac6(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  check_table_row(o, "toffoli", 5e-3);
  const auto& run = preset_run("toffoli");
  Eigen::Index nodes = 0;
  for (const auto& s : run.stages) nodes = std::max(nodes, s.solution.nodes());
  o.detail << "largest mesh " << nodes;
  o.require(nodes <= 1000, "mesh <= 1000");
  o.require(seconds_since(t0) < 1800.0, "runtime < 30 min");
}

void ac7(Outcome& o) {
  double stat = 0, drift = 0, costate = 0, unit = 0;
  int stages = 0;
  std::string worst_costate, worst_unit;
  for (const auto& name : preset_names()) {
    const auto& run = preset_run(name);
    for (const auto& s : run.stages) {
      if (!s.solution.converged()) continue;
      const auto& r = s.verification;
      ++stages;
      stat = std::max(stat, r.stationarity);
      drift = std::max(drift, r.hamiltonian_drift / (1.0 + std::abs(r.hamiltonian_mean)));
      if (r.costate_norm_drift > costate) {
        costate = r.costate_norm_drift;
        worst_costate = name + "@" + epsilon_key(s.epsilon);
      }
      if (r.unitarity_defect > unit) {
        unit = r.unitarity_defect;
        worst_unit = name + "@" + epsilon_key(s.epsilon);
      }
    }
  }
  o.require(stat <= 1e-9, "stationarity");
  o.require(drift <= 1e-2, "Pontryagin-H drift");
  o.require(costate <= 1e-6, "costate norm (worst " + worst_costate + ")");
  o.require(unit <= 1e-6, "unitarity (worst " + worst_unit + ")");
  o.detail << stages << " stages; stationarity " << sci(stat) << ", H drift " << sci(drift) << ", costate norm "
           << sci(costate) << ", unitarity " << sci(unit);
}

// --- AC8 ----------------------------------------------------------------------

/// Lower-branch Bratu solution y'' + lambda e^y = 0, y(0) = y(1) = 0.
struct Bratu {
  double lambda;
  double theta;
  explicit Bratu(double l) : lambda(l), theta(1.0) {
    for (int it = 0; it < 100; ++it) theta = std::sqrt(2 * lambda) * std::cosh(theta / 4);
  }
  double operator()(double x) const {
    return -2.0 * std::log(std::cosh((x - 0.5) * theta / 2) / std::cosh(theta / 4));
  }
};

void ac8(Outcome& o) {
  struct Case {
    std::string name;
    BvpProblem problem;
    std::function<double(double)> exact;
    bool linear;
  };
  std::vector<Case> cases;
  {
    BvpProblem p;
    p.n = 2;
    p.a = 0;
    p.b = std::numbers::pi / 2;
    p.rhs = [](double, const RVector& y, RVector& dy) {
      dy.resize(2);
      dy << y(1), -y(0);
    };
    p.bc = [](const RVector& ya, const RVector& yb) {
      RVector r(2);
      r << ya(0), yb(0) - 1.0;
      return r;
    };
    cases.push_back({"sin", p, [](double t) { return std::sin(t); }, true});
  }
  for (double lambda : {1.0, 3.0}) {
    BvpProblem p;
    p.n = 2;
    p.a = 0;
    p.b = 1;
    p.rhs = [lambda](double, const RVector& y, RVector& dy) {
      dy.resize(2);
      dy << y(1), -lambda * std::exp(y(0));
    };
    p.bc = [](const RVector& ya, const RVector& yb) {
      RVector r(2);
      r << ya(0), yb(0);
      return r;
    };
    const Bratu exact(lambda);
    cases.push_back({"bratu(" + sci(lambda) + ")", p, exact, false});
  }

  SolverOptions opts;
  opts.tol = 1e-10;
  opts.fixed_mesh = true;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& c : cases) {
    std::vector<double> errs;
    for (int m : {9, 17, 33, 65}) {
      const RVector mesh = RVector::LinSpaced(m, c.problem.a, c.problem.b);
      const auto sol = solve_bvp(c.problem, mesh, RMatrix::Zero(2, m), opts);
      o.require(sol.converged(), c.name + " solve on " + std::to_string(m) + " nodes");
      if (c.linear) o.require(sol.newton_iterations == 1, c.name + " one Newton iteration");
      double err = 0;
      for (Eigen::Index i = 0; i < mesh.size(); ++i) err = std::max(err, std::abs(sol.y(0, i) - c.exact(mesh(i))));
      errs.push_back(err);
    }
    o.detail << c.name << " exponents";
    for (std::size_t k = 1; k < errs.size(); ++k) {
      const double p = std::log2(errs[k - 1] / errs[k]);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
      o.detail << " " << sci(p);
    }
    o.detail << "; ";
  }
  o.require(lo >= 3.5 && hi <= 4.5, "exponents in [3.5, 4.5]");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(item);
    } else {
      std::cerr << "usage: acceptance [--only AC1,AC2,...]\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},
      {"AC5", ac5}, {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    std::cout << name << " " << (o.pass ? "PASS" : "FAIL") << " (" << sci(seconds_since(t0)) << " s) "
              << o.detail.str() << std::endl;
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
