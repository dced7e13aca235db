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

// Evolution of the Bloch components (u0, u) of U(t):
//   i du0/dt  = h0 u0 + h.u
//   i du_j/dt = h0 u_j + u0 h_j + sqrt(d/2) sum_{k,m} (g_kmj + i f_kmj) h_k u_m
// with u0(0) = 1, u(0) = 0. Writing z = (u0, u) in C^{d^2}, this is
// dz/dt = -i M(h0, h) z with M Hermitian (see bloch_generator).
//
// propagate_unitary_oracle integrates i dU/dt = H U directly with unitary
// exponential steps and never touches the structure constants.

#ifndef QGATE_BLOCH_DYNAMICS_HPP
#define QGATE_BLOCH_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qgate/core.hpp"
#include "qgate/gellmann_basis.hpp"
#include "qgate/system_model.hpp"

namespace qgate {

/// (du0/dt, du/dt) evaluated by contracting the sparse structure constants.
inline std::pair<Complex, CVector> bloch_rhs(Complex u0, const CVector& u, double h0, const RVector& h,
                                             const StructureConstants& sc) {
  const int n = sc.size();
  require_dimension(u.size() == n && h.size() == n,
                    "bloch_rhs: vectors must have length " + std::to_string(n));
  const double scale = std::sqrt(sc.dim() / 2.0);
  const Complex du0 = -kI * (h0 * u0 + (h.cast<Complex>().array() * u.array()).sum());
  CVector acc = h0 * u + u0 * h.cast<Complex>();
  for (const auto& e : sc.g()) acc(e.l) += scale * e.value * h(e.k) * u(e.m);
  for (const auto& e : sc.f()) acc(e.l) += scale * kI * e.value * h(e.k) * u(e.m);
  return {du0, -kI * acc};
}

/// Hermitian M with dz/dt = -i M z for z = (u0, u):
///   M = [[h0, h^T], [h, h0 I + sqrt(d/2) G(h)]],
///   G(h)_{jm} = sum_k (g_kmj + i f_kmj) h_k.
inline CMatrix bloch_generator(double h0, const RVector& h, const StructureConstants& sc) {
  const int n = sc.size();
  require_dimension(h.size() == n, "bloch_generator: h must have length " + std::to_string(n));
  const double scale = std::sqrt(sc.dim() / 2.0);
  CMatrix m = CMatrix::Zero(n + 1, n + 1);
  m.diagonal().setConstant(h0);
  m.block(0, 1, 1, n) = h.transpose().cast<Complex>();
  m.block(1, 0, n, 1) = h.cast<Complex>();
  for (const auto& e : sc.g()) m(1 + e.l, 1 + e.m) += scale * e.value * h(e.k);
  for (const auto& e : sc.f()) m(1 + e.l, 1 + e.m) += kI * (scale * e.value * h(e.k));
  return m;
}

/// Dense generators of the free part and of each control channel, built once
/// per model; M(nu) = M_free + sum_l nu_l M_l.
class BlochFlow {
 public:
  BlochFlow(const HamiltonianModel& model, const StructureConstants& sc) : dim_(model.dim) {
    require_dimension(sc.dim() == model.dim, "structure constants and model dimensions differ");
    free_ = bloch_generator(model.h0_free, model.h_free, sc);
    for (const auto& ch : model.channels) channels_.push_back(bloch_generator(ch.h0, ch.h, sc));
  }

  int dim() const { return dim_; }
  int state_size() const { return dim_ * dim_; }
  int n_controls() const { return static_cast<int>(channels_.size()); }
  const CMatrix& free_generator() const { return free_; }
  const CMatrix& channel_generator(int l) const { return channels_[static_cast<std::size_t>(l)]; }

  CMatrix generator(const RVector& nu) const {
    CMatrix m = free_;
    for (int l = 0; l < n_controls(); ++l) m += nu(l) * channels_[static_cast<std::size_t>(l)];
    return m;
  }

  /// -i M(nu) z without forming M(nu).
  CVector apply(const RVector& nu, const CVector& z) const {
    CVector out = free_ * z;
    for (int l = 0; l < n_controls(); ++l) out.noalias() += nu(l) * (channels_[static_cast<std::size_t>(l)] * z);
    return -kI * out;
  }

 private:
  int dim_;
  CMatrix free_;
  std::vector<CMatrix> channels_;
};

enum class ControlInterpolation { PiecewiseConstant, CubicHermite };

/// Control values nu_l(t) sampled on a mesh. Piecewise-constant trajectories
/// use column i on [t_i, t_{i+1}); cubic trajectories are C^1 Hermite
/// interpolants, with explicit slopes when given and three-point slopes
/// otherwise.
class ControlTrajectory {
 public:
  ControlTrajectory() = default;
  ControlTrajectory(RVector mesh, RMatrix values, ControlInterpolation mode,
                    std::optional<RMatrix> slopes = std::nullopt)
      : mesh_(std::move(mesh)), values_(std::move(values)), mode_(mode) {
    if (mesh_.size() < 2) throw ConfigError("control mesh needs at least two nodes");
    for (Eigen::Index i = 1; i < mesh_.size(); ++i)
      if (!(mesh_(i) > mesh_(i - 1))) throw ConfigError("control mesh must be strictly increasing");
    require_dimension(values_.cols() == mesh_.size(), "control values must have one column per mesh node");
    if (!values_.allFinite()) throw ConfigError("control values must be finite");
    if (mode_ == ControlInterpolation::CubicHermite) {
      if (slopes) {
        require_dimension(slopes->rows() == values_.rows() && slopes->cols() == values_.cols(),
                          "control slopes must match values");
        slopes_ = std::move(*slopes);
      } else {
        slopes_ = three_point_slopes();
      }
    }
  }

  /// Zero controls on [0, T].
  static ControlTrajectory zero(int n_controls, double horizon) {
    RVector mesh(2);
    mesh << 0.0, horizon;
    return {mesh, RMatrix::Zero(n_controls, 2), ControlInterpolation::PiecewiseConstant};
  }

  int n_controls() const { return static_cast<int>(values_.rows()); }
  const RVector& mesh() const { return mesh_; }
  const RMatrix& values() const { return values_; }
  const RMatrix& slopes() const { return slopes_; }
  ControlInterpolation mode() const { return mode_; }
  double start() const { return mesh_(0); }
  double end() const { return mesh_(mesh_.size() - 1); }

  Eigen::Index segment_of(double t) const {
    const auto* b = mesh_.data();
    const auto* e = b + mesh_.size();
    Eigen::Index i = std::upper_bound(b, e, t) - b - 1;
    return std::clamp<Eigen::Index>(i, 0, mesh_.size() - 2);
  }

  /// Value on segment i (left limit at its right end for piecewise constant).
  RVector evaluate_in(Eigen::Index i, double t) const {
    if (mode_ == ControlInterpolation::PiecewiseConstant) return values_.col(i);
    const double h = mesh_(i + 1) - mesh_(i);
    const double s = (t - mesh_(i)) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * values_.col(i) + h10 * h * slopes_.col(i) + h01 * values_.col(i + 1) + h11 * h * slopes_.col(i + 1);
  }

  RVector evaluate(double t) const { return evaluate_in(segment_of(t), t); }

 private:
  RMatrix three_point_slopes() const {
    const Eigen::Index m = mesh_.size();
    RMatrix out(values_.rows(), m);
    if (m == 2) {
      const RVector s = (values_.col(1) - values_.col(0)) / (mesh_(1) - mesh_(0));
      out.col(0) = s;
      out.col(1) = s;
      return out;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index c = std::clamp<Eigen::Index>(i, 1, m - 2);
      const double x0 = mesh_(c - 1), x1 = mesh_(c), x2 = mesh_(c + 1), x = mesh_(i);
      // Derivative of the quadratic through the three nodes, evaluated at x.
      const double w0 = (2 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
      const double w1 = (2 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
      const double w2 = (2 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
      out.col(i) = w0 * values_.col(c - 1) + w1 * values_.col(c) + w2 * values_.col(c + 1);
    }
    return out;
  }

  RVector mesh_;
  RMatrix values_;
  RMatrix slopes_;
  ControlInterpolation mode_ = ControlInterpolation::PiecewiseConstant;
};

struct BlochTrajectory {
  RVector mesh;
  std::vector<Complex> u0;
  std::vector<CVector> u;

  std::size_t size() const { return u0.size(); }
  CVector state(std::size_t i) const {
    CVector z(u[i].size() + 1);
    z(0) = u0[i];
    z.tail(u[i].size()) = u[i];
    return z;
  }
};

struct PropagationOptions {
  /// Step halving must change the final state by less than this (max norm).
  double tol = 1e-9;
  /// Initial substeps per integration segment.
  int min_substeps = 1;
  int max_doublings = 18;
  /// When set, exactly this many substeps per segment and no step control.
  std::optional<int> fixed_substeps;
};

namespace detail {

/// Integration segments: the union of the output grid and the control
/// breakpoints inside [grid.front(), grid.back()].
inline RVector merge_breakpoints(const RVector& grid, const ControlTrajectory& controls) {
  std::vector<double> pts(grid.data(), grid.data() + grid.size());
  const double a = grid(0), b = grid(grid.size() - 1);
  for (Eigen::Index i = 0; i < controls.mesh().size(); ++i) {
    const double t = controls.mesh()(i);
    if (t > a && t < b) pts.push_back(t);
  }
  std::sort(pts.begin(), pts.end());
  const double eps = 1e-13 * std::max(1.0, std::abs(b - a));
  std::vector<double> out;
  for (double t : pts)
    if (out.empty() || t - out.back() > eps) out.push_back(t);
  if (out.back() < b) out.back() = b;
  return Eigen::Map<RVector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline void check_grid(const RVector& grid, const ControlTrajectory& controls) {
  if (grid.size() < 2) throw ConfigError("time grid needs at least two nodes");
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (!(grid(i) > grid(i - 1))) throw ConfigError("time grid must be strictly increasing");
  const double tol = 1e-12 * std::max(1.0, std::abs(grid(grid.size() - 1)));
  if (grid(0) < controls.start() - tol || grid(grid.size() - 1) > controls.end() + tol)
    throw ConfigError("time grid extends beyond the control trajectory");
}

/// Runs `step(segment_index, a, b, n_sub)` over every segment, doubling
/// n_sub until the final state moves by less than opts.tol. `final_state`
/// reads the state after a full sweep.
template <typename Sweep>
auto controlled_sweep(const PropagationOptions& opts, int initial, Sweep&& sweep) {
  if (opts.fixed_substeps) return sweep(*opts.fixed_substeps);
  int n = std::max(initial, opts.min_substeps);
  auto coarse = sweep(n);
  for (int k = 0; k < opts.max_doublings; ++k) {
    n *= 2;
    auto fine = sweep(n);
    const double change = (fine.final_state() - coarse.final_state()).cwiseAbs().maxCoeff();
    coarse = std::move(fine);
    if (change < opts.tol) return coarse;
  }
  throw Error("step control failed to reach tolerance " + std::to_string(opts.tol));
}

}  // namespace detail

/// Fixed-step RK4 from u0 = 1, u = 0, outputs at `grid` nodes.
inline BlochTrajectory propagate_bloch(const HamiltonianModel& model, const StructureConstants& sc,
                                       const ControlTrajectory& controls, const RVector& grid,
                                       const PropagationOptions& opts = {}) {
  require_dimension(controls.n_controls() == model.n_controls(), "control count does not match the model");
  detail::check_grid(grid, controls);
  const BlochFlow flow(model, sc);
  const RVector nodes = detail::merge_breakpoints(grid, controls);
  const int n = model.dim * model.dim;

  struct Result {
    BlochTrajectory traj;
    CVector last;
    const CVector& final_state() const { return last; }
  };

  // Step count scale from the largest generator norm seen on the mesh.
  double gen_norm = flow.free_generator().cwiseAbs().rowwise().sum().maxCoeff();
  double control_peak = controls.values().size() ? controls.values().cwiseAbs().maxCoeff() : 0.0;
  for (int l = 0; l < flow.n_controls(); ++l)
    gen_norm += control_peak * flow.channel_generator(l).cwiseAbs().rowwise().sum().maxCoeff();
  double longest = 0.0;
  for (Eigen::Index i = 1; i < nodes.size(); ++i) longest = std::max(longest, nodes(i) - nodes(i - 1));
  const int initial = static_cast<int>(std::clamp(std::ceil(longest * gen_norm / 0.5), 1.0, 1e6));

  auto sweep = [&](int n_sub) {
    Result r;
    r.traj.mesh = grid;
    CVector z = CVector::Zero(n);
    z(0) = 1.0;
    std::size_t out = 0;
    auto record = [&](double t) {
      while (out < static_cast<std::size_t>(grid.size()) &&
             std::abs(grid(static_cast<Eigen::Index>(out)) - t) <= 1e-12 * std::max(1.0, std::abs(t))) {
        r.traj.u0.push_back(z(0));
        r.traj.u.push_back(z.tail(n - 1));
        ++out;
      }
    };
    record(nodes(0));
    for (Eigen::Index s = 0; s + 1 < nodes.size(); ++s) {
      const double a = nodes(s), b = nodes(s + 1);
      const Eigen::Index seg = controls.segment_of(0.5 * (a + b));
      const double h = (b - a) / n_sub;
      for (int k = 0; k < n_sub; ++k) {
        const double t = a + k * h;
        const CVector k1 = flow.apply(controls.evaluate_in(seg, t), z);
        const RVector mid = controls.evaluate_in(seg, t + 0.5 * h);
        const CVector k2 = flow.apply(mid, z + 0.5 * h * k1);
        const CVector k3 = flow.apply(mid, z + 0.5 * h * k2);
        const CVector k4 = flow.apply(controls.evaluate_in(seg, t + h), z + h * k3);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!z.allFinite()) throw DivergenceError("Bloch propagation diverged", t + h);
      }
      record(b);
    }
    r.last = z;
    return r;
  };
  return detail::controlled_sweep(opts, initial, sweep).traj;
}

enum class ExponentialRule {
  /// exp(-i H(t + h/2) h); second order, exact for constant-in-step H.
  Midpoint,
  /// Two-point Gauss Magnus expansion; fourth order, also unitary.
  Magnus4,
};

struct OracleOptions : PropagationOptions {
  ExponentialRule rule = ExponentialRule::Magnus4;
};

namespace detail {

/// exp(-i K) for Hermitian K.
inline CMatrix unitary_exp(const CMatrix& k) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (k + k.adjoint()));
  const CVector phases = (-kI * es.eigenvalues().cast<Complex>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// U(t) from i dU/dt = H(t) U, U(0) = I, by exponential stepping on the dense
/// Hamiltonian. Outputs at `grid` nodes.
inline std::vector<CMatrix> propagate_unitary_oracle(const HamiltonianSpec& spec, const ControlTrajectory& controls,
                                                     const RVector& grid, const OracleOptions& opts = {}) {
  require_dimension(controls.n_controls() == static_cast<int>(spec.channels.size()),
                    "control count does not match the Hamiltonian");
  detail::check_grid(grid, controls);
  const int d = spec.dim();
  const CMatrix h_free = spec.free_matrix();
  std::vector<CMatrix> h_ctrl;
  for (std::size_t l = 0; l < spec.channels.size(); ++l) h_ctrl.push_back(spec.channel_matrix(l));
  auto hamiltonian = [&](const RVector& nu) {
    CMatrix h = h_free;
    for (std::size_t l = 0; l < h_ctrl.size(); ++l) h += nu(static_cast<Eigen::Index>(l)) * h_ctrl[l];
    return h;
  };
  const RVector nodes = detail::merge_breakpoints(grid, controls);

  struct Result {
    std::vector<CMatrix> out;
    CMatrix last;
    const CMatrix& final_state() const { return last; }
  };

  double gen_norm = h_free.cwiseAbs().rowwise().sum().maxCoeff();
  const double peak = controls.values().size() ? controls.values().cwiseAbs().maxCoeff() : 0.0;
  for (const auto& h : h_ctrl) gen_norm += peak * h.cwiseAbs().rowwise().sum().maxCoeff();
  double longest = 0.0;
  for (Eigen::Index i = 1; i < nodes.size(); ++i) longest = std::max(longest, nodes(i) - nodes(i - 1));
  const int initial = static_cast<int>(std::clamp(std::ceil(longest * gen_norm / 0.5), 1.0, 1e6));

  const double gauss = std::sqrt(3.0) / 6.0;
  auto sweep = [&](int n_sub) {
    Result r;
    CMatrix u = CMatrix::Identity(d, d);
    std::size_t out = 0;
    auto record = [&](double t) {
      while (out < static_cast<std::size_t>(grid.size()) &&
             std::abs(grid(static_cast<Eigen::Index>(out)) - t) <= 1e-12 * std::max(1.0, std::abs(t))) {
        r.out.push_back(u);
        ++out;
      }
    };
    record(nodes(0));
    for (Eigen::Index s = 0; s + 1 < nodes.size(); ++s) {
      const double a = nodes(s), b = nodes(s + 1);
      const Eigen::Index seg = controls.segment_of(0.5 * (a + b));
      const double h = (b - a) / n_sub;
      for (int k = 0; k < n_sub; ++k) {
        const double t = a + k * h;
        CMatrix kmat;
        if (opts.rule == ExponentialRule::Midpoint) {
          kmat = h * hamiltonian(controls.evaluate_in(seg, t + 0.5 * h));
        } else {
          const CMatrix h1 = hamiltonian(controls.evaluate_in(seg, t + (0.5 - gauss) * h));
          const CMatrix h2 = hamiltonian(controls.evaluate_in(seg, t + (0.5 + gauss) * h));
          kmat = 0.5 * h * (h1 + h2) - kI * (std::sqrt(3.0) / 12.0 * h * h) * (h2 * h1 - h1 * h2);
        }
        u = detail::unitary_exp(kmat) * u;
        if (!u.allFinite()) throw DivergenceError("unitary propagation diverged", t + h);
      }
      record(b);
    }
    r.last = u;
    return r;
  };
  return detail::controlled_sweep(opts, initial, sweep).out;
}

struct FirstIntegralReport {
  /// max over nodes of | |u0|^2 + |u|^2 - 1 |
  double norm_deviation = 0.0;
  /// max over nodes and j of the unitarity relations for component j
  double relation_deviation = 0.0;
};

/// Residuals of the unitarity relations for one state:
///   u0 conj(u_j) + conj(u0) u_j + sqrt(d/2) sum_{k,m} (g_kmj + i f_kmj) u_k conj(u_m).
inline CVector unitarity_relations(Complex u0, const CVector& u, const StructureConstants& sc) {
  const double scale = std::sqrt(sc.dim() / 2.0);
  CVector r = u0 * u.conjugate() + std::conj(u0) * u;
  for (const auto& e : sc.g()) r(e.l) += scale * e.value * u(e.k) * std::conj(u(e.m));
  for (const auto& e : sc.f()) r(e.l) += scale * kI * e.value * u(e.k) * std::conj(u(e.m));
  return r;
}

inline FirstIntegralReport first_integrals(const BlochTrajectory& traj, const StructureConstants& sc) {
  FirstIntegralReport rep;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double norm = std::norm(traj.u0[i]) + traj.u[i].squaredNorm();
    rep.norm_deviation = std::max(rep.norm_deviation, std::abs(norm - 1.0));
    const CVector r = unitarity_relations(traj.u0[i], traj.u[i], sc);
    if (r.size()) rep.relation_deviation = std::max(rep.relation_deviation, r.cwiseAbs().maxCoeff());
  }
  return rep;
}

/// 1/2 (|u0 - g0|^2 + |u - g|^2).
inline double terminal_cost(Complex u0, const CVector& u, const GateTarget& target) {
  require_dimension(u.size() == target.g.size(), "terminal_cost: length mismatch");
  return 0.5 * (std::norm(u0 - target.g0) + (u - target.g).squaredNorm());
}

/// Terminal-cost value at every node of a trajectory.
inline RVector running_terminal_cost(const BlochTrajectory& traj, const GateTarget& target) {
  RVector out(static_cast<Eigen::Index>(traj.size()));
  for (std::size_t i = 0; i < traj.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = terminal_cost(traj.u0[i], traj.u[i], target);
  return out;
}

/// (1 / 2d) |U - e^{i phase} U_gate|^2 computed on dense matrices.
inline double dense_terminal_cost(const CMatrix& u, const GateTarget& target) {
  return (u - target.corrected()).squaredNorm() / (2.0 * target.dim);
}

}  // namespace qgate

#endif  // QGATE_BLOCH_DYNAMICS_HPP
