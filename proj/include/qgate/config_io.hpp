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

// JSON form of ExperimentConfig. Schema "qgate-config-v1", see
// docs/formats.md.

#ifndef QGATE_CONFIG_IO_HPP
#define QGATE_CONFIG_IO_HPP

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qgate/core.hpp"
#include "qgate/system_model.hpp"

namespace qgate {

inline constexpr const char* kConfigSchema = "qgate-config-v1";

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown field", path.empty() ? key : path + "." + key);
}

inline const json& require_field(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing required field", path.empty() ? key : path + "." + key);
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("expected a number", path);
  return v.get<double>();
}

inline int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError("expected an integer", path);
  return v.get<int>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError("expected a string", path);
  return v.get<std::string>();
}

inline const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("expected an array", path);
  return v;
}

inline const json& as_object(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError("expected an object", path);
  return v;
}

inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

/// [[ [re, im] | re, ... ], ...] -> square complex matrix.
inline CMatrix parse_matrix(const json& v, const std::string& path) {
  as_array(v, path);
  const auto rows = v.size();
  if (rows == 0) throw ConfigError("matrix is empty", path);
  CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = as_array(v[r], at(path, r));
    if (row.size() != rows) throw ConfigError("matrix must be square", at(path, r));
    for (std::size_t c = 0; c < rows; ++c) {
      const auto p = at(at(path, r), c);
      const auto& e = row[c];
      Complex z;
      if (e.is_number()) {
        z = e.get<double>();
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        z = {e[0].get<double>(), e[1].get<double>()};
      } else {
        throw ConfigError("expected a number or [re, im]", p);
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = z;
    }
  }
  return m;
}

inline json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<PauliTerm> parse_terms(const json& v, const std::string& path) {
  std::vector<PauliTerm> terms;
  as_array(v, path);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto p = at(path, i);
    as_object(v[i], p);
    reject_unknown(v[i], {"pauli", "coeff"}, p);
    PauliTerm t;
    t.pauli = as_string(require_field(v[i], "pauli", p), p + ".pauli");
    t.coeff = as_number(require_field(v[i], "coeff", p), p + ".coeff");
    terms.push_back(std::move(t));
  }
  return terms;
}

/// A generator is either a list of Pauli terms or {"matrix": [...]}.
inline Generator parse_generator(const json& v, const std::string& path) {
  if (v.is_object()) {
    reject_unknown(v, {"matrix"}, path);
    return parse_matrix(require_field(v, "matrix", path), path + ".matrix");
  }
  return parse_terms(v, path);
}

inline json generator_to_json(const Generator& g) {
  if (const auto* dense = std::get_if<CMatrix>(&g)) return json{{"matrix", matrix_to_json(*dense)}};
  json arr = json::array();
  for (const auto& t : std::get<std::vector<PauliTerm>>(g)) arr.push_back({{"pauli", t.pauli}, {"coeff", t.coeff}});
  return arr;
}

inline std::vector<double> parse_numbers(const json& v, const std::string& path) {
  std::vector<double> out;
  as_array(v, path);
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], at(path, i)));
  return out;
}

}  // namespace detail

/// Parses and validates a config object. Every error names a field path.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using namespace detail;
  as_object(j, "<root>");
  reject_unknown(j, {"schema", "name", "n_qubits", "free_terms", "channels", "gate", "cost", "solver"}, "");
  if (j.contains("schema") && as_string(j["schema"], "schema") != kConfigSchema)
    throw ConfigError("unsupported schema, expected " + std::string(kConfigSchema), "schema");

  ExperimentConfig cfg;
  if (j.contains("name")) cfg.name = as_string(j["name"], "name");
  cfg.hamiltonian.n_qubits = as_int(require_field(j, "n_qubits", ""), "n_qubits");
  if (cfg.hamiltonian.n_qubits < 1 || cfg.hamiltonian.n_qubits > 6)
    throw ConfigError("n_qubits must be in 1..6", "n_qubits");
  cfg.hamiltonian.free_part =
      j.contains("free_terms") ? parse_generator(j["free_terms"], "free_terms") : Generator{std::vector<PauliTerm>{}};

  const auto& channels = as_array(require_field(j, "channels", ""), "channels");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto p = at("channels", i);
    as_object(channels[i], p);
    reject_unknown(channels[i], {"label", "terms"}, p);
    ChannelSpec ch;
    ch.label = channels[i].contains("label") ? as_string(channels[i]["label"], p + ".label")
                                             : "nu" + std::to_string(i + 1);
    ch.generator = parse_generator(require_field(channels[i], "terms", p), p + ".terms");
    cfg.hamiltonian.channels.push_back(std::move(ch));
  }

  const auto& gate = as_object(require_field(j, "gate", ""), "gate");
  reject_unknown(gate, {"preset", "matrix", "phase"}, "gate");
  if (gate.contains("preset") == gate.contains("matrix"))
    throw ConfigError("exactly one of preset or matrix is required", "gate");
  if (gate.contains("preset")) {
    const auto name = as_string(gate["preset"], "gate.preset");
    try {
      const auto p = preset_gate(name);
      cfg.gate.preset = p.name;
      cfg.gate.phase = p.phase;
    } catch (const Error& e) {
      throw ConfigError(e.what(), "gate.preset");
    }
  } else {
    cfg.gate.matrix = parse_matrix(gate["matrix"], "gate.matrix");
  }
  if (gate.contains("phase")) cfg.gate.phase = as_number(gate["phase"], "gate.phase");

  if (j.contains("cost")) {
    const auto& cost = as_object(j["cost"], "cost");
    reject_unknown(cost, {"epsilon_schedule", "T", "weights"}, "cost");
    if (cost.contains("epsilon_schedule"))
      cfg.cost.epsilon_schedule = parse_numbers(cost["epsilon_schedule"], "cost.epsilon_schedule");
    if (cost.contains("T")) cfg.cost.horizon = as_number(cost["T"], "cost.T");
    if (cost.contains("weights")) cfg.cost.weights = parse_numbers(cost["weights"], "cost.weights");
  }
  if (j.contains("solver")) {
    const auto& s = as_object(j["solver"], "solver");
    reject_unknown(s, {"mesh", "tol", "newton_tol", "max_nodes", "max_epsilon_ratio", "costate"}, "solver");
    if (s.contains("mesh")) cfg.solver.mesh = as_int(s["mesh"], "solver.mesh");
    if (s.contains("tol")) cfg.solver.tol = as_number(s["tol"], "solver.tol");
    if (s.contains("newton_tol")) cfg.solver.newton_tol = as_number(s["newton_tol"], "solver.newton_tol");
    if (s.contains("max_nodes")) cfg.solver.max_nodes = as_int(s["max_nodes"], "solver.max_nodes");
    if (s.contains("max_epsilon_ratio"))
      cfg.solver.max_epsilon_ratio = as_number(s["max_epsilon_ratio"], "solver.max_epsilon_ratio");
    if (s.contains("costate")) {
      const auto c = as_string(s["costate"], "solver.costate");
      if (c == "negated") {
        cfg.solver.costate = CostateConvention::Negated;
      } else if (c == "negated-conjugate") {
        cfg.solver.costate = CostateConvention::NegatedConjugate;
      } else {
        throw ConfigError("expected \"negated\" or \"negated-conjugate\"", "solver.costate");
      }
    }
  }

  const int d = cfg.hamiltonian.dim();
  if (!cfg.gate.preset && cfg.gate.matrix.rows() != d)
    throw ConfigError("gate matrix must be " + std::to_string(d) + "x" + std::to_string(d), "gate.matrix");
  if (cfg.gate.preset && preset_gate(*cfg.gate.preset).unitary.rows() != d)
    throw ConfigError("preset gate does not act on " + std::to_string(cfg.hamiltonian.n_qubits) + " qubits",
                      "gate.preset");
  if (cfg.cost.weights && cfg.cost.weights->size() != cfg.hamiltonian.channels.size())
    throw ConfigError("expected one weight per channel", "cost.weights");
  cfg.validate();
  return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  using namespace detail;
  json j;
  j["schema"] = kConfigSchema;
  j["name"] = cfg.name;
  j["n_qubits"] = cfg.hamiltonian.n_qubits;
  j["free_terms"] = generator_to_json(cfg.hamiltonian.free_part);
  json channels = json::array();
  for (const auto& ch : cfg.hamiltonian.channels)
    channels.push_back({{"label", ch.label}, {"terms", generator_to_json(ch.generator)}});
  j["channels"] = channels;
  json gate;
  if (cfg.gate.preset) {
    gate["preset"] = *cfg.gate.preset;
  } else {
    gate["matrix"] = matrix_to_json(cfg.gate.matrix);
  }
  gate["phase"] = cfg.gate.phase;
  j["gate"] = gate;
  json cost{{"epsilon_schedule", cfg.cost.epsilon_schedule}, {"T", cfg.cost.horizon}};
  if (cfg.cost.weights) cost["weights"] = *cfg.cost.weights;
  j["cost"] = cost;
  j["solver"] = {{"mesh", cfg.solver.mesh},
                 {"tol", cfg.solver.tol},
                 {"newton_tol", cfg.solver.newton_tol},
                 {"max_nodes", cfg.solver.max_nodes},
                 {"max_epsilon_ratio", cfg.solver.max_epsilon_ratio},
                 {"costate", cfg.solver.costate == CostateConvention::Negated ? "negated" : "negated-conjugate"}};
  return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace qgate

#endif  // QGATE_CONFIG_IO_HPP
