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

#include "qgate/system_model.hpp"

#include <gtest/gtest.h>

#include <numbers>

#include "test_util.hpp"

using namespace qgate;
using qgate::testing::max_abs;

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

CMatrix sigma(char c) { return parse_pauli_string(std::string(1, c), 1.0); }

}  // namespace

TEST(PauliString, SingleAndTensorProducts) {
  CMatrix x(2, 2);
  x << 0, 1, 1, 0;
  EXPECT_EQ(max_abs(parse_pauli_string("X", 1.0) - x), 0.0);
  CMatrix z(2, 2);
  z << 1, 0, 0, -1;
  EXPECT_EQ(max_abs(parse_pauli_string("ZI", 1.5) - 1.5 * kron(z, CMatrix::Identity(2, 2))), 0.0);
  EXPECT_EQ(max_abs(parse_pauli_string("YY", 1.25) - 1.25 * kron(sigma('Y'), sigma('Y'))), 0.0);
  EXPECT_THROW(parse_pauli_string("", 1.0), ParseError);
  EXPECT_THROW(parse_pauli_string("XQ", 1.0), ParseError);
}

TEST(CompileHamiltonian, OneQubitBlochImages) {
  const auto basis = build_basis(2);
  const double omega = 2.0, alpha = 1.0;
  const auto model = compile_hamiltonian(one_qubit_system(omega, alpha), basis);
  EXPECT_EQ(model.h0_free, 0.0);
  EXPECT_NEAR(model.h_free(0), 0.0, 1e-15);
  EXPECT_NEAR(model.h_free(1), alpha, 1e-15);
  EXPECT_NEAR(model.h_free(2), omega / 2, 1e-15);
  ASSERT_EQ(model.n_controls(), 1);
  EXPECT_EQ(model.channels[0].h0, 0.0);
  EXPECT_NEAR((model.channels[0].h - RVector::Unit(3, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(model.channels[0].weight, 1.0, 1e-12);
}

TEST(CompileHamiltonian, TwoQubitControlPattern) {
  const auto basis = build_basis(4);
  const double w1 = 3, w2 = 4, a = 1, b1 = 1.25, b2 = 0.75;
  const auto model = compile_hamiltonian(two_qubit_system(w1, w2, a, b1, b2), basis);
  const double r = 1.0 / std::sqrt(2.0);
  const std::vector<std::pair<int, int>> support{{3, 9}, {4, 10}, {1, 11}};
  for (int l = 0; l < 3; ++l) {
    const RVector& h = model.channels[static_cast<std::size_t>(l)].h;
    for (int j = 1; j <= 15; ++j) {
      const bool on = j == support[static_cast<std::size_t>(l)].first || j == support[static_cast<std::size_t>(l)].second;
      EXPECT_NEAR(h(j - 1), on ? r : 0.0, 1e-14) << "channel " << l << " component " << j;
    }
    EXPECT_NEAR(model.channels[static_cast<std::size_t>(l)].weight, 1.0, 1e-12);
  }
  EXPECT_NEAR(model.h_free(12), (2 * b2 + w2) / (2 * std::sqrt(2.0)), 1e-14);
  EXPECT_EQ(model.h0_free, 0.0);
}

TEST(CompileHamiltonian, WeightsFollowBlochNorm) {
  const auto basis = build_basis(2);
  HamiltonianSpec spec;
  spec.n_qubits = 1;
  spec.channels = {{"a", std::vector<PauliTerm>{{"X", 2.0}, {"I", 0.5}}}};
  const auto model = compile_hamiltonian(spec, basis);
  const auto& ch = model.channels[0];
  EXPECT_NEAR(ch.h0, 0.5, 1e-15);
  EXPECT_NEAR(ch.weight, ch.h0 * ch.h0 + ch.h.squaredNorm(), 1e-12);
  EXPECT_NEAR(ch.weight, 4.25, 1e-12);
  const auto overridden = compile_hamiltonian(spec, basis, std::vector<double>{3.0});
  EXPECT_EQ(overridden.channels[0].weight, 3.0);
  EXPECT_THROW(compile_hamiltonian(spec, basis, std::vector<double>{0.0}), ConfigError);
}

TEST(CompileHamiltonian, Rejections) {
  const auto basis = build_basis(2);
  HamiltonianSpec dependent = one_qubit_system(2, 1);
  dependent.channels.push_back({"copy", std::vector<PauliTerm>{{"X", 2.0}}});
  try {
    compile_hamiltonian(dependent, basis);
    FAIL() << "dependent channels accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("linearly dependent"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("copy"), std::string::npos);
  }
  HamiltonianSpec nonherm = one_qubit_system(2, 1);
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  nonherm.channels = {{"bad", m}};
  EXPECT_THROW(compile_hamiltonian(nonherm, basis), ConfigError);
}

TEST(GateTarget, PresetBlochData) {
  using std::numbers::pi;
  const auto b2 = build_basis(2);
  const auto gnot = compile_gate_target(preset_gate("NOT").unitary, pi / 2, b2);
  EXPECT_NEAR(std::abs(gnot.g0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gnot.g(0) - kI), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gnot.g(1)) + std::abs(gnot.g(2)), 0.0, 1e-15);

  const auto gs = compile_gate_target(preset_gate("S").unitary, -pi / 4, b2);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(gs.g0 - r), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gs.g(2) + kI * r), 0.0, 1e-15);

  const auto b4 = build_basis(4);
  const auto gc = compile_gate_target(preset_gate("CNOT").unitary, pi / 4, b4);
  const Complex one_i(1.0, 1.0);
  EXPECT_NEAR(std::abs(gc.g0 - one_i / (2 * std::sqrt(2.0))), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gc.g(10) - one_i / 2.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gc.g(13) - one_i / (2 * std::sqrt(3.0))), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gc.g(14) - one_i / (2 * std::sqrt(6.0))), 0.0, 1e-15);

  CMatrix bad = CMatrix::Identity(2, 2);
  bad(0, 0) = 2.0;
  EXPECT_THROW(compile_gate_target(bad, 0.0, b2), ConfigError);
}

TEST(GateTarget, PresetGatesAndPhases) {
  using std::numbers::pi;
  EXPECT_NEAR(preset_gate("T").phase, -pi / 8, 0);
  EXPECT_NEAR(std::abs(preset_gate("T").unitary(1, 1) - std::exp(kI * pi / 4.0)), 0.0, 1e-15);
  EXPECT_EQ(preset_gate("CZ").unitary(3, 3), Complex(-1.0));
  EXPECT_NEAR(preset_gate("CZ").phase, pi / 4, 0);
  const auto toff = preset_gate("toffoli");
  EXPECT_EQ(toff.unitary(6, 7), Complex(1.0));
  EXPECT_EQ(toff.unitary(7, 6), Complex(1.0));
  EXPECT_EQ(toff.unitary(5, 5), Complex(1.0));
  EXPECT_NEAR(toff.phase, pi / 8, 0);
  EXPECT_THROW(preset_gate("SWAP"), ConfigError);
}

TEST(GateTarget, InvariantsForAllPresets) {
  for (const std::string name : {"NOT", "H", "S", "T", "CNOT", "CZ", "TOFFOLI"}) {
    const auto g = preset_gate(name);
    const int d = static_cast<int>(g.unitary.rows());
    const auto basis = build_basis(d);
    const auto t = compile_gate_target(g.unitary, g.phase, basis);
    EXPECT_NEAR(std::norm(t.g0) + t.g.squaredNorm(), 1.0, 1e-12) << name;
    const auto dec = decompose(std::exp(kI * g.phase) * g.unitary, basis);
    EXPECT_LE(std::abs(dec.scalar - t.g0), 1e-12);
    EXPECT_LE((dec.vec - t.g).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(std::abs(t.corrected().determinant() - 1.0), 0.0, 1e-10) << name;
  }
}

TEST(Presets, CaptionParameters) {
  const auto n = preset_experiment("not");
  EXPECT_EQ(n.cost.horizon, 1.0);
  EXPECT_EQ(n.solver.mesh, 500);
  EXPECT_EQ((std::vector<double>{5, 0.5, 0.05, 0.005}), n.cost.epsilon_schedule);
  EXPECT_EQ(preset_experiment("s").cost.horizon, 0.6);
  EXPECT_EQ(preset_experiment("t").cost.horizon, 0.3);
  const auto cz = preset_experiment("cz");
  EXPECT_EQ(cz.cost.horizon, 9.8);
  EXPECT_EQ(cz.solver.mesh, 250);
  const auto toff = preset_experiment("toffoli");
  EXPECT_EQ(toff.cost.horizon, 7.44);
  EXPECT_EQ(toff.solver.mesh, 100);
  EXPECT_EQ(preset_experiment("cnot").cost.horizon, 4.75);
  EXPECT_THROW(preset_experiment("swap"), ConfigError);

  const auto basis = build_basis(2);
  const auto model = compile_hamiltonian(n.hamiltonian, basis);
  EXPECT_NEAR(model.h_free(1), 1.0, 1e-15);
  EXPECT_NEAR(model.h_free(2), 1.0, 1e-15);
  for (const auto& name : preset_names()) {
    const auto cfg = preset_experiment(name);
    EXPECT_NO_THROW(cfg.validate()) << name;
    const auto m = compile_hamiltonian(cfg.hamiltonian, build_basis(cfg.hamiltonian.dim()));
    EXPECT_EQ(m.h0_free, 0.0) << name;
    for (const auto& ch : m.channels) EXPECT_EQ(ch.h0, 0.0) << name;
  }
}

TEST(ExperimentConfig, ValidationNamesTheField) {
  auto cfg = preset_experiment("not");
  cfg.cost.epsilon_schedule = {5, 0};
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "cost.epsilon_schedule[1]");
  }
  cfg.cost.epsilon_schedule = {0.5, 5};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = preset_experiment("not");
  cfg.cost.horizon = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
