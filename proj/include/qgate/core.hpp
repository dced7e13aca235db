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

#ifndef QGATE_CORE_HPP
#define QGATE_CORE_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qgate {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, gate or experiment description. `path` names the offending
/// config field when the error came from a config file.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string path = {})
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Zero or negative running-cost weight; the control feedback is undefined.
class SingularFeedback : public Error {
 public:
  using Error::Error;
};

/// A propagation produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Evaluation point outside the domain of an interpolant or grid.
class DomainError : public Error {
 public:
  using Error::Error;
};

inline void require_dimension(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

}  // namespace qgate

#endif  // QGATE_CORE_HPP
