// Copyright 2026 The qgate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Controlled N-qubit systems H(t) = H_free + sum_l nu_l(t) H_l, gate targets
// with a global phase correction, and the preset experiments.
//
// Units: hbar = 1, all frequencies and times dimensionless.

#ifndef QGATE_SYSTEM_MODEL_HPP
#define QGATE_SYSTEM_MODEL_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/SVD>

#include "qgate/core.hpp"
#include "qgate/gellmann_basis.hpp"

namespace qgate {

struct PauliTerm {
  std::string pauli;
  double coeff = 1.0;
};

/// A Hermitian operator given either as a sum of Pauli strings or densely.
using Generator = std::variant<std::vector<PauliTerm>, CMatrix>;

/// Kronecker product of single-qubit factors, leftmost character = most
/// significant qubit, times `coeff`.
inline CMatrix parse_pauli_string(const std::string& s, double coeff) {
  if (s.empty()) throw ParseError("empty Pauli string");
  CMatrix out = CMatrix::Identity(1, 1);
  for (char c : s) {
    CMatrix f(2, 2);
    switch (c) {
      case 'I': f << 1, 0, 0, 1; break;
      case 'X': f << 0, 1, 1, 0; break;
      case 'Y': f << 0, -kI, kI, 0; break;
      case 'Z': f << 1, 0, 0, -1; break;
      default:
        throw ParseError("bad character '" + std::string(1, c) + "' in Pauli string \"" + s + "\"");
    }
    CMatrix next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c2 = 0; c2 < out.cols(); ++c2) next.block(2 * r, 2 * c2, 2, 2) = out(r, c2) * f;
    out = std::move(next);
  }
  return coeff * out;
}

inline CMatrix generator_matrix(const Generator& gen, int n_qubits) {
  const int d = 1 << n_qubits;
  if (const auto* dense = std::get_if<CMatrix>(&gen)) {
    require_dimension(dense->rows() == d && dense->cols() == d,
                      "dense generator must be " + std::to_string(d) + "x" + std::to_string(d));
    return *dense;
  }
  CMatrix out = CMatrix::Zero(d, d);
  for (const auto& term : std::get<std::vector<PauliTerm>>(gen)) {
    if (static_cast<int>(term.pauli.size()) != n_qubits)
      throw ParseError("Pauli string \"" + term.pauli + "\" has length " +
                       std::to_string(term.pauli.size()) + ", expected " + std::to_string(n_qubits));
    if (!std::isfinite(term.coeff)) throw ParseError("non-finite coefficient for \"" + term.pauli + "\"");
    out += parse_pauli_string(term.pauli, term.coeff);
  }
  return out;
}

struct ChannelSpec {
  std::string label;
  Generator generator;
};

struct HamiltonianSpec {
  int n_qubits = 1;
  Generator free_part = std::vector<PauliTerm>{};
  std::vector<ChannelSpec> channels;

  int dim() const { return 1 << n_qubits; }
  CMatrix free_matrix() const { return generator_matrix(free_part, n_qubits); }
  CMatrix channel_matrix(std::size_t l) const { return generator_matrix(channels.at(l).generator, n_qubits); }
  /// H_free + sum_l nu_l H_l.
  CMatrix total(const RVector& nu) const {
    CMatrix h = free_matrix();
    for (std::size_t l = 0; l < channels.size(); ++l) h += nu(static_cast<Eigen::Index>(l)) * channel_matrix(l);
    return h;
  }
};

struct ControlChannel {
  std::string label;
  double h0 = 0.0;
  RVector h;
  double weight = 1.0;
};

/// Bloch form of a controlled Hamiltonian.
struct HamiltonianModel {
  int dim = 2;
  double h0_free = 0.0;
  RVector h_free;
  std::vector<ControlChannel> channels;

  int size() const { return dim * dim - 1; }
  int n_controls() const { return static_cast<int>(channels.size()); }

  /// (h0, h) of H_free + sum_l nu_l H_l.
  std::pair<double, RVector> field(const RVector& nu) const {
    double h0 = h0_free;
    RVector h = h_free;
    for (int l = 0; l < n_controls(); ++l) {
      h0 += nu(l) * channels[static_cast<std::size_t>(l)].h0;
      h += nu(l) * channels[static_cast<std::size_t>(l)].h;
    }
    return {h0, h};
  }
};

namespace detail {

inline double hermitian_defect(const CMatrix& h) {
  return (h - h.adjoint()).cwiseAbs().maxCoeff() / std::max(1.0, h.cwiseAbs().maxCoeff());
}

inline std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? ", " : "") + labels[i];
  return out;
}

}  // namespace detail

/// Decomposes every generator over `basis`; w_l = h0_l^2 + |h_l|^2 unless
/// `weight_override` is given.
inline HamiltonianModel compile_hamiltonian(const HamiltonianSpec& spec, const OperatorBasis& basis,
                                            const std::optional<std::vector<double>>& weight_override = {}) {
  const int d = spec.dim();
  require_dimension(basis.dim() == d, "basis dimension " + std::to_string(basis.dim()) +
                                          " does not match " + std::to_string(spec.n_qubits) + " qubits");
  const int s = static_cast<int>(spec.channels.size());
  if (s < 1 || s > d * d)
    throw ConfigError("number of control channels must be in 1.." + std::to_string(d * d), "channels");

  auto bloch_real = [&](const CMatrix& h, const std::string& what) {
    if (detail::hermitian_defect(h) > 1e-12) throw ConfigError(what + " is not Hermitian");
    auto dec = decompose(h, basis);
    return std::make_pair(dec.scalar.real(), RVector(dec.vec.real()));
  };

  HamiltonianModel model;
  model.dim = d;
  std::tie(model.h0_free, model.h_free) = bloch_real(spec.free_matrix(), "free Hamiltonian");

  RMatrix images(s, d * d);
  for (int l = 0; l < s; ++l) {
    const auto& ch = spec.channels[static_cast<std::size_t>(l)];
    ControlChannel out;
    out.label = ch.label;
    std::tie(out.h0, out.h) = bloch_real(spec.channel_matrix(static_cast<std::size_t>(l)),
                                         "control generator '" + ch.label + "'");
    out.weight = out.h0 * out.h0 + out.h.squaredNorm();
    images(l, 0) = out.h0;
    images.row(l).tail(d * d - 1) = out.h.transpose();
    model.channels.push_back(std::move(out));
  }

  Eigen::JacobiSVD<RMatrix> svd(images.transpose(), Eigen::ComputeFullV);
  const RVector sv = svd.singularValues();
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-10) continue;
    const RVector null = svd.matrixV().col(i);
    std::vector<std::string> dependent;
    for (int l = 0; l < s; ++l)
      if (std::abs(null(l)) > 1e-8) dependent.push_back(spec.channels[static_cast<std::size_t>(l)].label);
    throw ConfigError("control channels are linearly dependent: {" + detail::join_labels(dependent) + "}",
                      "channels");
  }

  if (weight_override) {
    if (static_cast<int>(weight_override->size()) != s)
      throw ConfigError("expected " + std::to_string(s) + " weights", "cost.weights");
    for (int l = 0; l < s; ++l) {
      const double w = (*weight_override)[static_cast<std::size_t>(l)];
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("weights must be positive", "cost.weights");
      model.channels[static_cast<std::size_t>(l)].weight = w;
    }
  }
  return model;
}

/// Bloch data (g0, g) of e^{i phase} U.
struct GateTarget {
  int dim = 2;
  CMatrix unitary;
  double phase = 0.0;
  Complex g0 = 0.0;
  CVector g;

  CMatrix corrected() const { return std::exp(kI * phase) * unitary; }
};

inline GateTarget compile_gate_target(const CMatrix& u, double phase, const OperatorBasis& basis) {
  const int d = basis.dim();
  require_dimension(u.rows() == d && u.cols() == d,
                    "gate is " + std::to_string(u.rows()) + "x" + std::to_string(u.cols()) +
                        ", expected " + std::to_string(d) + "x" + std::to_string(d));
  const double defect = (u.adjoint() * u - CMatrix::Identity(d, d)).norm();
  if (defect > 1e-10) throw ConfigError("gate is not unitary: |U^dagger U - I| = " + std::to_string(defect));
  GateTarget t;
  t.dim = d;
  t.unitary = u;
  t.phase = phase;
  // Scalar and vector parts of e^{i phase} U, computed entrywise over the
  // sparse basis so this path does not go through decompose().
  const Complex rot = std::exp(kI * phase);
  t.g0 = rot * u.trace() / static_cast<double>(d);
  t.g.resize(basis.size());
  const double norm = 1.0 / std::sqrt(2.0 * d);
  for (int j = 0; j < basis.size(); ++j) {
    Complex acc = 0.0;
    for (const auto& e : basis[j].entries) acc += e.value * u(e.col, e.row);
    t.g(j) = rot * acc * norm;
  }
  return t;
}

struct GatePreset {
  std::string name;
  CMatrix unitary;
  double phase = 0.0;
};

inline std::string to_upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline std::string to_lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Gate unitary and the phase making det(e^{i phase} U) = 1.
inline GatePreset preset_gate(const std::string& name) {
  using std::numbers::pi;
  const std::string key = to_upper(name);
  const double r = 1.0 / std::sqrt(2.0);
  auto permutation = [](int d, int a, int b) {
    CMatrix p = CMatrix::Identity(d, d);
    p(a, a) = p(b, b) = 0.0;
    p(a, b) = p(b, a) = 1.0;
    return p;
  };
  CMatrix u;
  double phase = 0.0;
  if (key == "NOT") {
    u = permutation(2, 0, 1);
    phase = pi / 2;
  } else if (key == "H") {
    u.resize(2, 2);
    u << r, r, r, -r;
    phase = pi / 2;
  } else if (key == "S") {
    u = CMatrix::Identity(2, 2);
    u(1, 1) = kI;
    phase = -pi / 4;
  } else if (key == "T") {
    u = CMatrix::Identity(2, 2);
    u(1, 1) = std::exp(kI * (pi / 4));
    phase = -pi / 8;
  } else if (key == "CNOT") {
    u = permutation(4, 2, 3);
    phase = pi / 4;
  } else if (key == "CZ") {
    u = CMatrix::Identity(4, 4);
    u(3, 3) = -1.0;
    phase = pi / 4;
  } else if (key == "TOFFOLI" || key == "CCNOT") {
    u = permutation(8, 6, 7);
    phase = pi / 8;
  } else {
    throw ConfigError("unknown gate preset '" + name + "'", "gate.preset");
  }
  return {key == "CCNOT" ? "TOFFOLI" : key, u, phase};
}

/// Gate description as it appears in a config: a preset name or a matrix,
/// plus the phase correction.
struct GateSpec {
  std::optional<std::string> preset;
  CMatrix matrix;
  double phase = 0.0;

  CMatrix unitary() const { return preset ? preset_gate(*preset).unitary : matrix; }
};

struct CostSpec {
  std::vector<double> epsilon_schedule{5.0, 0.5, 0.05, 0.005};
  double horizon = 1.0;
  std::optional<std::vector<double>> weights;
};

enum class CostateConvention { Negated, NegatedConjugate };

struct SolverSettings {
  int mesh = 500;
  double tol = 1e-6;
  /// Newton stops at min(newton_tol, tol), so a loose refinement tolerance
  /// does not loosen the algebraic solve.
  double newton_tol = 1e-6;
  int max_nodes = 0;  // 0: 20 x mesh
  /// Largest ratio between consecutive continuation values of epsilon.
  double max_epsilon_ratio = 2.2;
  CostateConvention costate = CostateConvention::Negated;

  int effective_max_nodes() const { return max_nodes > 0 ? max_nodes : 20 * mesh; }
};

struct ExperimentConfig {
  std::string name;
  HamiltonianSpec hamiltonian;
  GateSpec gate;
  CostSpec cost;
  SolverSettings solver;

  /// Throws ConfigError naming the offending field.
  void validate() const {
    if (hamiltonian.n_qubits < 1 || hamiltonian.n_qubits > 6)
      throw ConfigError("n_qubits must be in 1..6", "n_qubits");
    const auto& eps = cost.epsilon_schedule;
    if (eps.empty()) throw ConfigError("schedule is empty", "cost.epsilon_schedule");
    for (std::size_t i = 0; i < eps.size(); ++i) {
      if (!(eps[i] > 0.0) || !std::isfinite(eps[i]))
        throw ConfigError("epsilon must be positive", "cost.epsilon_schedule[" + std::to_string(i) + "]");
      if (i > 0 && !(eps[i] < eps[i - 1]))
        throw ConfigError("schedule must be strictly decreasing",
                          "cost.epsilon_schedule[" + std::to_string(i) + "]");
    }
    if (!(cost.horizon > 0.0) || !std::isfinite(cost.horizon)) throw ConfigError("T must be positive", "cost.T");
    if (solver.mesh < 3) throw ConfigError("mesh must have at least 3 nodes", "solver.mesh");
    if (!(solver.tol > 0.0)) throw ConfigError("tol must be positive", "solver.tol");
    if (!(solver.newton_tol > 0.0)) throw ConfigError("newton_tol must be positive", "solver.newton_tol");
    if (solver.max_nodes != 0 && solver.max_nodes < solver.mesh)
      throw ConfigError("max_nodes must be >= mesh", "solver.max_nodes");
    if (!(solver.max_epsilon_ratio > 1.0)) throw ConfigError("must be > 1", "solver.max_epsilon_ratio");
  }
};

// --- presets ---------------------------------------------------------------

/// Parameters of the one-qubit system H = w/2 Z + a Y + nu X.
inline HamiltonianSpec one_qubit_system(double omega, double alpha) {
  HamiltonianSpec spec;
  spec.n_qubits = 1;
  spec.free_part = std::vector<PauliTerm>{{"Z", omega / 2}, {"Y", alpha}};
  spec.channels = {{"nu1", std::vector<PauliTerm>{{"X", 1.0}}}};
  return spec;
}

inline HamiltonianSpec two_qubit_system(double omega1, double omega2, double alpha, double beta1, double beta2) {
  HamiltonianSpec spec;
  spec.n_qubits = 2;
  spec.free_part = std::vector<PauliTerm>{
      {"ZI", omega1 / 2}, {"IZ", omega2 / 2}, {"IY", alpha}, {"YY", beta1}, {"ZZ", beta2}};
  spec.channels = {{"nu1", std::vector<PauliTerm>{{"XI", 1.0}}},
                   {"nu2", std::vector<PauliTerm>{{"YI", 1.0}}},
                   {"nu3", std::vector<PauliTerm>{{"IX", 1.0}}}};
  return spec;
}

/// Chain-coupled three-qubit system; couplings are (y, z) pairs.
inline HamiltonianSpec three_qubit_system(double w1, double w2, double w3, double b12y, double b12z, double b23y,
                                          double b23z) {
  HamiltonianSpec spec;
  spec.n_qubits = 3;
  spec.free_part = std::vector<PauliTerm>{{"ZII", w1 / 2}, {"IZI", w2 / 2}, {"IIZ", w3 / 2}, {"YYI", b12y},
                                          {"ZZI", b12z},   {"IYY", b23y},   {"IZZ", b23z}};
  spec.channels = {{"nu1", std::vector<PauliTerm>{{"XII", 1.0}}},
                   {"nu2", std::vector<PauliTerm>{{"IXI", 1.0}}},
                   {"nu3", std::vector<PauliTerm>{{"YII", 1.0}}},
                   {"nu4", std::vector<PauliTerm>{{"IIY", 1.0}}}};
  return spec;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"not", "h", "s", "t", "cnot", "cz", "toffoli"};
  return names;
}

/// Uncontrolled local term of the CNOT system. Not printed with the CNOT
/// results; 1 matches the other experiments.
inline constexpr double kCnotDefaultAlpha = 1.0;

inline ExperimentConfig preset_experiment(const std::string& name) {
  const std::string key = to_lower(name);
  ExperimentConfig cfg;
  cfg.name = key;
  auto gate = [&](const std::string& g) {
    cfg.gate.preset = to_upper(g);
    cfg.gate.phase = preset_gate(g).phase;
  };
  if (key == "not" || key == "h" || key == "s" || key == "t") {
    cfg.hamiltonian = one_qubit_system(2.0, 1.0);
    cfg.cost.horizon = key == "s" ? 0.6 : key == "t" ? 0.3 : 1.0;
    cfg.solver.mesh = 500;
    gate(key);
  } else if (key == "cnot") {
    cfg.hamiltonian = two_qubit_system(3.0, 4.0, kCnotDefaultAlpha, 1.25, 1.25);
    cfg.cost.horizon = 4.75;
    cfg.solver.mesh = 250;
    gate("CNOT");
  } else if (key == "cz") {
    cfg.hamiltonian = two_qubit_system(2.0, 2.0, 1.0, 0.5, 0.75);
    cfg.cost.horizon = 9.8;
    cfg.solver.mesh = 250;
    gate("CZ");
  } else if (key == "toffoli") {
    cfg.hamiltonian = three_qubit_system(1.0, 2.0, 3.0, 1.0, 3.0, 5.0, 1.5);
    cfg.cost.horizon = 7.44;
    cfg.solver.mesh = 100;
    cfg.solver.max_nodes = 1000;
    // 1e-6 needs more than 1000 nodes on this system.
    cfg.solver.tol = 1e-4;
    gate("TOFFOLI");
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return cfg;
}

}  // namespace qgate

#endif  // QGATE_SYSTEM_MODEL_HPP
