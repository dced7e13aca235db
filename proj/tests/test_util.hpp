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

#ifndef QGATE_TESTS_TEST_UTIL_HPP
#define QGATE_TESTS_TEST_UTIL_HPP

#include <random>

#include "qgate/core.hpp"

namespace qgate::testing {

inline CMatrix random_matrix(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = Complex(n(rng), n(rng));
  return m;
}

inline CMatrix random_hermitian(std::mt19937_64& rng, int d) {
  const CMatrix m = random_matrix(rng, d);
  return 0.5 * (m + m.adjoint());
}

inline CVector random_cvector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

inline RVector random_rvector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  RVector v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

inline double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace qgate::testing

#endif  // QGATE_TESTS_TEST_UTIL_HPP
