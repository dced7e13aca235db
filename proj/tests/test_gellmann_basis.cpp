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

#include "qgate/gellmann_basis.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"

using namespace qgate;
using qgate::testing::max_abs;

namespace {

CMatrix pauli(int which) {
  CMatrix m(2, 2);
  if (which == 1) m << 0, 1, 1, 0;
  if (which == 2) m << 0, -kI, kI, 0;
  if (which == 3) m << 1, 0, 0, -1;
  return m;
}

// g and f straight from dense traces.
double dense_g(const OperatorBasis& b, int k, int m, int l) {
  const CMatrix x = b[k].dense(), y = b[m].dense(), z = b[l].dense();
  return (0.25 * ((x * y + y * x) * z).trace()).real();
}
double dense_f(const OperatorBasis& b, int k, int m, int l) {
  const CMatrix x = b[k].dense(), y = b[m].dense(), z = b[l].dense();
  return (((x * y - y * x) * z).trace() / (4.0 * kI)).real();
}

int levi_civita(int i, int j, int k) { return (i - j) * (j - k) * (k - i) / 2; }

}  // namespace

TEST(GellMannBasis, QubitBasisIsPauli) {
  const auto b = build_basis(2);
  ASSERT_EQ(b.size(), 3);
  for (int j = 0; j < 3; ++j) EXPECT_LE(max_abs(b[j].dense() - pauli(j + 1)), 0.0);
}

TEST(GellMannBasis, FamilyCounts) {
  for (int d : {2, 3, 4, 8}) {
    const auto b = build_basis(d);
    int sym = 0, asym = 0, diag = 0;
    for (const auto& op : b.operators()) {
      sym += op.label.kind == BasisKind::Symmetric;
      asym += op.label.kind == BasisKind::Antisymmetric;
      diag += op.label.kind == BasisKind::Diagonal;
      EXPECT_LE(static_cast<int>(op.entries.size()), d);
    }
    EXPECT_EQ(sym, d * (d - 1) / 2);
    EXPECT_EQ(asym, d * (d - 1) / 2);
    EXPECT_EQ(diag, d - 1);
  }
}

TEST(GellMannBasis, QutritFirstDiagonal) {
  const auto op = make_basis_operator(diag_label(1), 3);
  CMatrix expect = CMatrix::Zero(3, 3);
  expect(0, 0) = 1.0;
  expect(1, 1) = -1.0;
  EXPECT_LE(max_abs(op.dense() - expect), 1e-15);
}

TEST(GellMannBasis, OrthonormalHermitianTraceless) {
  for (int d : {2, 4, 8}) {
    const auto b = build_basis(d);
    for (int k = 0; k < b.size(); ++k) {
      const CMatrix x = b[k].dense();
      EXPECT_EQ(max_abs(x - x.adjoint()), 0.0);
      Complex diag_sum = 0.0;
      for (int r = 0; r < d; ++r) diag_sum += x(r, r);
      EXPECT_EQ(std::abs(diag_sum), 0.0);
      for (int m = 0; m < b.size(); ++m) {
        const Complex t = (x * b[m].dense()).trace();
        EXPECT_NEAR(std::abs(t - Complex(k == m ? 2.0 : 0.0)), 0.0, 1e-12) << d << ' ' << k << ' ' << m;
      }
    }
  }
}

TEST(GellMannBasis, IndexConvention) {
  EXPECT_EQ(basis_index({BasisKind::Symmetric, 3, 4}, 4), 11);
  EXPECT_EQ(basis_index(diag_label(1), 4), 13);
  EXPECT_EQ(basis_index({BasisKind::Symmetric, 1, 2}, 2), 1);
  EXPECT_EQ(basis_index({BasisKind::Antisymmetric, 1, 2}, 2), 2);
  EXPECT_EQ(basis_index(diag_label(1), 2), 3);
  for (int d : {2, 3, 4, 5, 8}) {
    for (int j = 1; j <= d * d - 1; ++j) EXPECT_EQ(basis_index(basis_label(j, d), d), j);
  }
}

TEST(GellMannBasis, IndexErrors) {
  EXPECT_THROW(basis_index({BasisKind::Symmetric, 2, 2}, 4), IndexOutOfRange);
  EXPECT_THROW(basis_index({BasisKind::Symmetric, 1, 5}, 4), IndexOutOfRange);
  EXPECT_THROW(basis_index(diag_label(4), 4), IndexOutOfRange);
  EXPECT_THROW(basis_label(16, 4), IndexOutOfRange);
  EXPECT_THROW(build_basis(1), InvalidDimension);
}

TEST(GellMannBasis, DecomposeExamples) {
  const auto b2 = build_basis(2);
  auto id = decompose(CMatrix::Identity(2, 2), b2);
  EXPECT_EQ(id.scalar, Complex(1.0));
  EXPECT_EQ(id.vec.norm(), 0.0);
  auto x = decompose(pauli(1), b2);
  EXPECT_NEAR(std::abs(x.scalar), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(x.vec(0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(x.vec(1)) + std::abs(x.vec(2)), 0.0, 1e-15);
  EXPECT_THROW(decompose(CMatrix::Identity(3, 3), b2), DimensionMismatch);
}

TEST(GellMannBasis, ReconstructExamples) {
  const auto b2 = build_basis(2);
  EXPECT_LE(max_abs(reconstruct({1.0, CVector::Zero(3)}, b2) - CMatrix::Identity(2, 2)), 1e-15);
  CVector v = CVector::Zero(3);
  v(0) = kI;
  EXPECT_LE(max_abs(reconstruct({0.0, v}, b2) - kI * pauli(1)), 1e-15);
  EXPECT_THROW(reconstruct({0.0, CVector::Zero(4)}, b2), DimensionMismatch);
}

TEST(GellMannBasis, NormIdentityAndRoundTrip) {
  std::mt19937_64 rng(7);
  for (int d : {2, 4, 8}) {
    const auto b = build_basis(d);
    for (int trial = 0; trial < 100; ++trial) {
      const CMatrix x = qgate::testing::random_matrix(rng, d);
      const auto dec = decompose(x, b);
      const double lhs = std::norm(dec.scalar) + dec.vec.squaredNorm();
      const double rhs = (x.adjoint() * x).trace().real() / d;
      EXPECT_LE(std::abs(lhs - rhs) / rhs, 1e-12);
      EXPECT_LE(max_abs(reconstruct(dec, b) - x), 1e-12);
    }
  }
}

TEST(GellMannBasis, RandomOrthogonalRecombinationKeepsNorm) {
  std::mt19937_64 rng(11);
  for (int d : {2, 4}) {
    const auto b = build_basis(d);
    const int n = b.size();
    RMatrix g(n, n);
    std::normal_distribution<double> nd;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = nd(rng);
    const RMatrix o = Eigen::HouseholderQR<RMatrix>(g).householderQ();
    std::vector<CMatrix> mixed(static_cast<std::size_t>(n), CMatrix::Zero(d, d));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) mixed[static_cast<std::size_t>(i)] += o(i, j) * b[j].dense();
    for (int i = 0; i < n; ++i) {
      const CMatrix& a = mixed[static_cast<std::size_t>(i)];
      EXPECT_LE(max_abs(a - a.adjoint()), 1e-12);
      EXPECT_LE(std::abs(a.trace()), 1e-12);
      for (int j = 0; j < n; ++j)
        EXPECT_LE(std::abs((a * mixed[static_cast<std::size_t>(j)]).trace() - Complex(i == j ? 2.0 : 0.0)), 1e-12);
    }
    for (int trial = 0; trial < 20; ++trial) {
      const CMatrix x = qgate::testing::random_matrix(rng, d);
      const auto dec = decompose(x, b);
      CVector other(n);
      for (int i = 0; i < n; ++i)
        other(i) = (mixed[static_cast<std::size_t>(i)] * x).trace() / std::sqrt(2.0 * d);
      EXPECT_LE(std::abs(other.norm() - dec.vec.norm()), 1e-12);
    }
  }
}

TEST(StructureConstants, QubitIsLeviCivita) {
  const auto sc = structure_constants(build_basis(2));
  EXPECT_TRUE(sc.g().empty());
  EXPECT_EQ(sc.f().size(), 6u);
  for (int k = 0; k < 3; ++k)
    for (int m = 0; m < 3; ++m)
      for (int l = 0; l < 3; ++l) EXPECT_EQ(sc.f_value(k, m, l), levi_civita(k, m, l));
  EXPECT_EQ(sc.f_value(1, 0, 2), -1.0);
}

TEST(StructureConstants, MatchDenseTraces) {
  for (int d : {3, 4}) {
    const auto b = build_basis(d);
    const auto sc = structure_constants(b);
    for (int k = 0; k < b.size(); ++k)
      for (int m = 0; m < b.size(); ++m)
        for (int l = 0; l < b.size(); ++l) {
          EXPECT_NEAR(sc.g_value(k, m, l), dense_g(b, k, m, l), 1e-12);
          EXPECT_NEAR(sc.f_value(k, m, l), dense_f(b, k, m, l), 1e-12);
        }
  }
}

TEST(StructureConstants, SymmetriesAndCyclicity) {
  for (int d : {2, 4, 8}) {
    const auto sc = structure_constants(build_basis(d));
    for (const auto& e : sc.g()) {
      EXPECT_EQ(sc.g_value(e.m, e.k, e.l), e.value);
      EXPECT_TRUE(std::isfinite(e.value));
      EXPECT_GE(std::abs(e.value), kDropThreshold);
    }
    for (const auto& e : sc.f()) {
      EXPECT_EQ(sc.f_value(e.m, e.k, e.l), -e.value);
      if (d <= 4) {
        EXPECT_NEAR(sc.f_value(e.l, e.k, e.m), e.value, 1e-12);
      }
    }
  }
}

TEST(StructureConstants, ProductExpansion) {
  const auto sc2 = structure_constants(build_basis(2));
  auto [s11, v11] = product_expand(0, 0, sc2);
  EXPECT_EQ(s11, Complex(1.0));
  EXPECT_EQ(v11.norm(), 0.0);
  auto [s12, v12] = product_expand(0, 1, sc2);
  EXPECT_EQ(s12, Complex(0.0));
  EXPECT_EQ(v12(2), kI);
  EXPECT_THROW(product_expand(0, 3, sc2), IndexOutOfRange);

  for (int d : {2, 4}) {
    const auto b = build_basis(d);
    const auto sc = structure_constants(b);
    for (int k = 0; k < b.size(); ++k)
      for (int m = 0; m < b.size(); ++m) {
        auto [s, v] = product_expand(k, m, sc);
        // Y_k Y_m = s I + sum_l v_l Y_l, i.e. Bloch scalar s, vector v / sqrt(d/2).
        const CMatrix rebuilt = reconstruct({s, v / std::sqrt(d / 2.0)}, b);
        EXPECT_LE(max_abs(rebuilt - b[k].dense() * b[m].dense()), 1e-12);
      }
  }
}

TEST(StructureConstants, JsonCacheRoundTrip) {
  const auto b = build_basis(4);
  const auto sc = structure_constants(b);
  const auto back = structure_constants_from_json(structure_constants_to_json(sc));
  ASSERT_EQ(back.g().size(), sc.g().size());
  ASSERT_EQ(back.f().size(), sc.f().size());
  for (std::size_t i = 0; i < sc.g().size(); ++i) EXPECT_EQ(back.g()[i].value, sc.g()[i].value);
  for (std::size_t i = 0; i < sc.f().size(); ++i) EXPECT_EQ(back.f()[i].value, sc.f()[i].value);

  auto j = structure_constants_to_json(sc);
  j["ordering"] = "blocked";
  EXPECT_THROW(structure_constants_from_json(j), ParseError);

  const auto dir = std::filesystem::temp_directory_path() / "qgate-cache-test";
  std::filesystem::remove_all(dir);
  const auto first = cached_structure_constants(b, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "su4-structure.json"));
  const auto second = cached_structure_constants(b, dir);
  ASSERT_EQ(first.f().size(), second.f().size());
  for (std::size_t i = 0; i < first.f().size(); ++i) EXPECT_EQ(first.f()[i].value, second.f()[i].value);
  std::filesystem::remove_all(dir);
}
