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

// Generalized Gell-Mann operator basis of SU(d), the Bloch decomposition of
// d x d operators over it, and the symmetric/antisymmetric structure
// constants g, f.
//
// Ordering ("interleaved-v1"): for every pair 1 <= m < k <= d, taken in
// lexicographic order, the symmetric operator comes first and the
// antisymmetric one second; the d-1 diagonal operators follow. For d = 2
// this gives (sigma_1, sigma_2, sigma_3); for d = 4 the component of
// |3><4| + |4><3| is number 11 and the first diagonal operator is number 13.
//
// Component numbers (basis_index) are 1-based. Everywhere else vectors are
// 0-based, so component j lives at vec[j - 1].

#ifndef QGATE_GELLMANN_BASIS_HPP
#define QGATE_GELLMANN_BASIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "qgate/core.hpp"

namespace qgate {

inline constexpr const char* kOrderingTag = "interleaved-v1";
inline constexpr int kStructureCacheVersion = 1;
inline constexpr double kDropThreshold = 1e-14;

enum class BasisKind { Symmetric, Antisymmetric, Diagonal };

inline const char* to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Symmetric: return "sym";
    case BasisKind::Antisymmetric: return "asym";
    case BasisKind::Diagonal: return "diag";
  }
  return "?";
}

/// Identifies one Gell-Mann operator. For sym/asym, `m < k` are 1-based
/// levels; for diag, `m` is the level l in 1..d-1 and `k` is unused.
struct BasisLabel {
  BasisKind kind = BasisKind::Symmetric;
  int m = 1;
  int k = 2;

  friend bool operator==(const BasisLabel&, const BasisLabel&) = default;
};

inline BasisLabel diag_label(int level) { return {BasisKind::Diagonal, level, 0}; }

struct SparseEntry {
  int row;
  int col;
  Complex value;
};

/// One Hermitian traceless basis operator, stored by its nonzero entries.
struct BasisOperator {
  int dim = 0;
  BasisLabel label;
  std::vector<SparseEntry> entries;

  CMatrix dense() const {
    CMatrix out = CMatrix::Zero(dim, dim);
    for (const auto& e : entries) out(e.row, e.col) += e.value;
    return out;
  }

  /// tr[this * X] without materializing the product.
  Complex trace_with(const CMatrix& x) const {
    Complex acc = 0.0;
    for (const auto& e : entries) acc += e.value * x(e.col, e.row);
    return acc;
  }
};

/// 1-based component number of a label in the interleaved ordering.
inline int basis_index(const BasisLabel& label, int d) {
  if (d < 2) throw InvalidDimension("dimension must be >= 2, got " + std::to_string(d));
  if (label.kind == BasisKind::Diagonal) {
    if (label.m < 1 || label.m > d - 1)
      throw IndexOutOfRange("diagonal level " + std::to_string(label.m) + " outside 1.." +
                            std::to_string(d - 1));
    return d * (d - 1) + label.m;
  }
  const int m = label.m;
  const int k = label.k;
  if (m < 1 || k > d || m >= k)
    throw IndexOutOfRange("pair (" + std::to_string(m) + "," + std::to_string(k) +
                          ") invalid for d = " + std::to_string(d));
  // Pairs with first level < m: sum_{a=1}^{m-1} (d - a).
  const int before = (m - 1) * d - (m - 1) * m / 2;
  const int pair = before + (k - m - 1);
  return 2 * pair + (label.kind == BasisKind::Symmetric ? 1 : 2);
}

/// Inverse of basis_index.
inline BasisLabel basis_label(int index, int d) {
  if (d < 2) throw InvalidDimension("dimension must be >= 2, got " + std::to_string(d));
  if (index < 1 || index > d * d - 1)
    throw IndexOutOfRange("component " + std::to_string(index) + " outside 1.." +
                          std::to_string(d * d - 1));
  const int offdiag = d * (d - 1);
  if (index > offdiag) return diag_label(index - offdiag);
  const int pair = (index - 1) / 2;
  const BasisKind kind = (index - 1) % 2 == 0 ? BasisKind::Symmetric : BasisKind::Antisymmetric;
  int m = 1;
  int remaining = pair;
  while (remaining >= d - m) {
    remaining -= d - m;
    ++m;
  }
  return {kind, m, m + 1 + remaining};
}

inline BasisOperator make_basis_operator(const BasisLabel& label, int d) {
  BasisOperator op;
  op.dim = d;
  op.label = label;
  switch (label.kind) {
    case BasisKind::Symmetric:
      op.entries = {{label.m - 1, label.k - 1, 1.0}, {label.k - 1, label.m - 1, 1.0}};
      break;
    case BasisKind::Antisymmetric:
      op.entries = {{label.m - 1, label.k - 1, -kI}, {label.k - 1, label.m - 1, kI}};
      break;
    case BasisKind::Diagonal: {
      const int l = label.m;
      const double scale = std::sqrt(2.0 / (l * (l + 1.0)));
      // The last entry cancels the running sum so the trace is exactly 0.
      Complex sum = 0.0;
      for (int j = 0; j < l; ++j) {
        op.entries.push_back({j, j, scale});
        sum += scale;
      }
      op.entries.push_back({l, l, -sum});
      break;
    }
  }
  return op;
}

/// The d^2 - 1 generalized Gell-Mann operators in interleaved order.
class OperatorBasis {
 public:
  explicit OperatorBasis(int d) : dim_(d) {
    if (d < 2) throw InvalidDimension("dimension must be >= 2, got " + std::to_string(d));
    ops_.reserve(static_cast<std::size_t>(d * d - 1));
    for (int j = 1; j <= d * d - 1; ++j) ops_.push_back(make_basis_operator(basis_label(j, d), d));
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(ops_.size()); }
  const BasisOperator& operator[](int position) const { return ops_[static_cast<std::size_t>(position)]; }
  const std::vector<BasisOperator>& operators() const { return ops_; }

 private:
  int dim_;
  std::vector<BasisOperator> ops_;
};

inline OperatorBasis build_basis(int d) { return OperatorBasis(d); }

/// X = scalar * I + sqrt(d/2) * sum_j vec_j Y_j.
struct BlochDecomposition {
  Complex scalar = 0.0;
  CVector vec;
};

inline BlochDecomposition decompose(const CMatrix& x, const OperatorBasis& basis) {
  const int d = basis.dim();
  require_dimension(x.rows() == d && x.cols() == d,
                    "operator is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                        ", basis dimension is " + std::to_string(d));
  BlochDecomposition out;
  out.scalar = x.trace() / static_cast<double>(d);
  out.vec.resize(basis.size());
  const double norm = 1.0 / std::sqrt(2.0 * d);
  for (int j = 0; j < basis.size(); ++j) out.vec(j) = basis[j].trace_with(x) * norm;
  return out;
}

inline CMatrix reconstruct(const BlochDecomposition& dec, const OperatorBasis& basis) {
  const int d = basis.dim();
  require_dimension(dec.vec.size() == basis.size(),
                    "Bloch vector has length " + std::to_string(dec.vec.size()) + ", expected " +
                        std::to_string(basis.size()));
  CMatrix x = dec.scalar * CMatrix::Identity(d, d);
  const double scale = std::sqrt(d / 2.0);
  for (int j = 0; j < basis.size(); ++j) {
    const Complex c = scale * dec.vec(j);
    if (c == Complex(0.0)) continue;
    for (const auto& e : basis[j].entries) x(e.row, e.col) += c * e.value;
  }
  return x;
}

struct StructureEntry {
  int k;
  int m;
  int l;
  double value;
};

/// Sparse g and f tensors, 0-based positions. Every nonzero (k, m, l) slot
/// is stored explicitly, so contractions are plain loops over the entries.
/// Entries are sorted by (k, m, l).
class StructureConstants {
 public:
  StructureConstants() = default;
  StructureConstants(int d, std::vector<StructureEntry> g, std::vector<StructureEntry> f)
      : dim_(d), g_(std::move(g)), f_(std::move(f)) {
    sort_entries(g_);
    sort_entries(f_);
  }

  int dim() const { return dim_; }
  int size() const { return dim_ * dim_ - 1; }
  const std::vector<StructureEntry>& g() const { return g_; }
  const std::vector<StructureEntry>& f() const { return f_; }

  double g_value(int k, int m, int l) const { return lookup(g_, k, m, l); }
  double f_value(int k, int m, int l) const { return lookup(f_, k, m, l); }

  /// Entries of a tensor with first two positions (k, m).
  static std::pair<std::vector<StructureEntry>::const_iterator,
                   std::vector<StructureEntry>::const_iterator>
  slice(const std::vector<StructureEntry>& t, int k, int m) {
    auto lo = std::lower_bound(t.begin(), t.end(), std::make_pair(k, m),
                               [](const StructureEntry& e, const std::pair<int, int>& key) {
                                 return std::tie(e.k, e.m) < std::tie(key.first, key.second);
                               });
    auto hi = lo;
    while (hi != t.end() && hi->k == k && hi->m == m) ++hi;
    return {lo, hi};
  }

 private:
  static void sort_entries(std::vector<StructureEntry>& t) {
    std::sort(t.begin(), t.end(), [](const StructureEntry& a, const StructureEntry& b) {
      return std::tie(a.k, a.m, a.l) < std::tie(b.k, b.m, b.l);
    });
  }
  static double lookup(const std::vector<StructureEntry>& t, int k, int m, int l) {
    auto [lo, hi] = slice(t, k, m);
    for (auto it = lo; it != hi; ++it)
      if (it->l == l) return it->value;
    return 0.0;
  }

  int dim_ = 0;
  std::vector<StructureEntry> g_;
  std::vector<StructureEntry> f_;
};

/// g_kml = 1/4 tr[{Y_k, Y_m} Y_l], f_kml = 1/(4i) tr[[Y_k, Y_m] Y_l].
inline StructureConstants structure_constants(const OperatorBasis& basis) {
  const int d = basis.dim();
  const int n = basis.size();
  std::vector<StructureEntry> g;
  std::vector<StructureEntry> f;
  CMatrix km(d, d);
  CMatrix mk(d, d);
  auto product = [d](const BasisOperator& a, const BasisOperator& b, CMatrix& out) {
    out.setZero(d, d);
    for (const auto& ea : a.entries)
      for (const auto& eb : b.entries)
        if (ea.col == eb.row) out(ea.row, eb.col) += ea.value * eb.value;
  };
  for (int k = 0; k < n; ++k) {
    for (int m = k; m < n; ++m) {
      product(basis[k], basis[m], km);
      product(basis[m], basis[k], mk);
      for (int l = 0; l < n; ++l) {
        const Complex anti = 0.25 * (basis[l].trace_with(km) + basis[l].trace_with(mk));
        const Complex comm = (basis[l].trace_with(km) - basis[l].trace_with(mk)) / (4.0 * kI);
        if (std::abs(anti.imag()) > 1e-12 || std::abs(comm.imag()) > 1e-12)
          throw Error("structure constants are not real at (" + std::to_string(k) + "," +
                      std::to_string(m) + "," + std::to_string(l) + ")");
        if (std::abs(anti.real()) >= kDropThreshold) {
          g.push_back({k, m, l, anti.real()});
          if (m != k) g.push_back({m, k, l, anti.real()});
        }
        if (m != k && std::abs(comm.real()) >= kDropThreshold) {
          f.push_back({k, m, l, comm.real()});
          f.push_back({m, k, l, -comm.real()});
        }
      }
    }
  }
  return StructureConstants(d, std::move(g), std::move(f));
}

/// Y_k Y_m = scalar * I + sum_l vec_l Y_l with scalar = (2/d) delta_km and
/// vec_l = g_kml + i f_kml. Positions are 0-based.
inline std::pair<Complex, CVector> product_expand(int k, int m, const StructureConstants& sc) {
  const int n = sc.size();
  if (k < 0 || k >= n || m < 0 || m >= n)
    throw IndexOutOfRange("product_expand positions (" + std::to_string(k) + "," +
                          std::to_string(m) + ") outside 0.." + std::to_string(n - 1));
  CVector vec = CVector::Zero(n);
  auto [glo, ghi] = StructureConstants::slice(sc.g(), k, m);
  for (auto it = glo; it != ghi; ++it) vec(it->l) += it->value;
  auto [flo, fhi] = StructureConstants::slice(sc.f(), k, m);
  for (auto it = flo; it != fhi; ++it) vec(it->l) += kI * it->value;
  const Complex scalar = k == m ? Complex(2.0 / sc.dim()) : Complex(0.0);
  return {scalar, vec};
}

// ---------------------------------------------------------------------------
// Cache file: JSON {version, d, ordering, g: [[k,m,l,value]...], f: [...]}
// with 0-based positions and every stored entry listed.

inline nlohmann::json structure_constants_to_json(const StructureConstants& sc) {
  nlohmann::json j;
  j["version"] = kStructureCacheVersion;
  j["d"] = sc.dim();
  j["ordering"] = kOrderingTag;
  auto triples = [](const std::vector<StructureEntry>& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : t) arr.push_back({e.k, e.m, e.l, e.value});
    return arr;
  };
  j["g"] = triples(sc.g());
  j["f"] = triples(sc.f());
  return j;
}

inline StructureConstants structure_constants_from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != kStructureCacheVersion)
    throw ParseError("structure-constant cache: unsupported version");
  if (j.value("ordering", std::string{}) != kOrderingTag)
    throw ParseError("structure-constant cache: ordering tag is not " + std::string(kOrderingTag));
  const int d = j.at("d").get<int>();
  auto read = [](const nlohmann::json& arr) {
    std::vector<StructureEntry> t;
    t.reserve(arr.size());
    for (const auto& e : arr)
      t.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>(), e.at(3).get<double>()});
    return t;
  };
  return StructureConstants(d, read(j.at("g")), read(j.at("f")));
}

/// Loads the constants for `basis` from `<dir>/su<d>-structure.json`,
/// computing and writing the file when it is missing or unreadable. An empty
/// directory disables caching.
inline StructureConstants cached_structure_constants(const OperatorBasis& basis,
                                                     const std::filesystem::path& dir) {
  if (dir.empty()) return structure_constants(basis);
  const auto file = dir / ("su" + std::to_string(basis.dim()) + "-structure.json");
  if (std::filesystem::exists(file)) {
    try {
      std::ifstream in(file);
      auto sc = structure_constants_from_json(nlohmann::json::parse(in));
      if (sc.dim() == basis.dim()) return sc;
    } catch (const std::exception&) {
      // stale or corrupt cache; recompute below
    }
  }
  auto sc = structure_constants(basis);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(file);
  if (out) out << structure_constants_to_json(sc).dump();
  return sc;
}

}  // namespace qgate

#endif  // QGATE_GELLMANN_BASIS_HPP
