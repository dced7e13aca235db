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

// Extremal system of the gate-synthesis problem
//
//   min  1/2 (|u0(T) - g0|^2 + |u(T) - g|^2) + eps/2 int sum_l w_l nu_l^2 dt
//
// subject to the Bloch dynamics. The state z = (u0, u) and costate
// q = (p0, p) follow the same flow dz/dt = -i M(nu) z, dq/dt = -i M(nu) q,
// with z(0) = (1, 0) and q(T) = -(g0, g). The control enters the Pontryagin
// function quadratically, so the stationarity condition has the closed-form
// root
//
//   nu_l = -Im(q^dagger M_l z) / (eps w_l),
//
// which turns the optimality conditions into a plain two-point BVP in the
// 4 d^2 real unknowns of RealEncoding.

#ifndef QGATE_PMP_SYSTEM_HPP
#define QGATE_PMP_SYSTEM_HPP

#include <array>
#include <cmath>
#include <vector>

#include "qgate/bloch_dynamics.hpp"
#include "qgate/core.hpp"
#include "qgate/gellmann_basis.hpp"
#include "qgate/system_model.hpp"

namespace qgate {

struct ExtremalState {
  Complex u0 = 1.0;
  CVector u;
  Complex p0 = 0.0;
  CVector p;

  CVector z() const {
    CVector out(u.size() + 1);
    out(0) = u0;
    out.tail(u.size()) = u;
    return out;
  }
  CVector q() const {
    CVector out(p.size() + 1);
    out(0) = p0;
    out.tail(p.size()) = p;
    return out;
  }
  static ExtremalState from(const CVector& z, const CVector& q) {
    return {z(0), z.tail(z.size() - 1), q(0), q.tail(q.size() - 1)};
  }
};

/// Real layout of an extremal state, 4 d^2 entries:
///   [Re u0, Im u0, Re u_1 .. Re u_N, Im u_1 .. Im u_N,
///    Re p0, Im p0, Re p_1 .. Re p_N, Im p_1 .. Im p_N],  N = d^2 - 1.
class RealEncoding {
 public:
  explicit RealEncoding(int d) : dim_(d), n_(d * d) {
    re_.resize(n_);
    im_.resize(n_);
    re_[0] = 0;
    im_[0] = 1;
    for (int c = 1; c < n_; ++c) {
      re_[c] = 1 + c;
      im_[c] = n_ + c;
    }
  }

  int dim() const { return dim_; }
  /// Complex length of one block (d^2).
  int block() const { return n_; }
  int size() const { return 4 * n_; }
  /// Real positions of complex component c of block b (0: state, 1: costate).
  int re(int b, int c) const { return 2 * n_ * b + re_[static_cast<std::size_t>(c)]; }
  int im(int b, int c) const { return 2 * n_ * b + im_[static_cast<std::size_t>(c)]; }

  void write(int b, const CVector& v, RVector& y) const {
    for (int c = 0; c < n_; ++c) {
      y(re(b, c)) = v(c).real();
      y(im(b, c)) = v(c).imag();
    }
  }
  CVector read(int b, const RVector& y) const {
    CVector v(n_);
    for (int c = 0; c < n_; ++c) v(c) = Complex(y(re(b, c)), y(im(b, c)));
    return v;
  }

  RVector encode(const ExtremalState& s) const {
    require_dimension(s.u.size() == n_ - 1 && s.p.size() == n_ - 1, "extremal state has wrong length");
    RVector y(size());
    write(0, s.z(), y);
    write(1, s.q(), y);
    return y;
  }
  ExtremalState decode(const RVector& y) const {
    require_dimension(y.size() == size(), "encoded state must have length " + std::to_string(size()));
    return ExtremalState::from(read(0, y), read(1, y));
  }

  /// Writes the real form of z -> A z into rows/cols of block b of `jac`.
  void add_block(int b, const CMatrix& a, RMatrix& jac) const {
    for (int r = 0; r < n_; ++r) {
      for (int c = 0; c < n_; ++c) {
        const Complex v = a(r, c);
        jac(re(b, r), re(b, c)) += v.real();
        jac(re(b, r), im(b, c)) -= v.imag();
        jac(im(b, r), re(b, c)) += v.imag();
        jac(im(b, r), im(b, c)) += v.real();
      }
    }
  }

 private:
  int dim_;
  int n_;
  std::vector<int> re_;
  std::vector<int> im_;
};

struct PontryaginValue {
  double value = 0.0;
  double running = 0.0;
  /// 2 Im(conj(p0) [h0 u0 + h.u])
  double scalar_term = 0.0;
  /// 2 Im(conj(p).[h0 u + u0 h])
  double vector_term = 0.0;
  /// sqrt(2d) Im(sum (g_kmj + i f_kmj) h_k u_m conj(p_j))
  double structure_term = 0.0;
};

namespace detail {

inline void check_weights(const HamiltonianModel& model, double epsilon) {
  if (!(epsilon > 0.0)) throw SingularFeedback("epsilon must be positive, got " + std::to_string(epsilon));
  for (const auto& ch : model.channels)
    if (!(ch.weight > 0.0)) throw SingularFeedback("channel '" + ch.label + "' has non-positive weight");
}

/// The bracket of the stationarity condition for channel l, summed term by
/// term over the structure constants:
///   h0_l Im(conj(p0) u0 + conj(p).u) + h_l.Im(conj(p0) u + u0 conj(p))
///   + sqrt(d/2) Im(sum (g_kmj + i f_kmj) h_l^k u_m conj(p_j)).
inline double stationarity_bracket(const ExtremalState& s, const ControlChannel& ch, const StructureConstants& sc) {
  const double scale = std::sqrt(sc.dim() / 2.0);
  double out = ch.h0 * (std::conj(s.p0) * s.u0 + s.p.conjugate().cwiseProduct(s.u).sum()).imag();
  const CVector mixed = std::conj(s.p0) * s.u + s.u0 * s.p.conjugate();
  out += ch.h.dot(mixed.imag());
  Complex triple = 0.0;
  for (const auto& e : sc.g()) triple += e.value * ch.h(e.k) * s.u(e.m) * std::conj(s.p(e.l));
  for (const auto& e : sc.f()) triple += kI * e.value * ch.h(e.k) * s.u(e.m) * std::conj(s.p(e.l));
  return out + scale * triple.imag();
}

}  // namespace detail

/// Closed-form root of dH/dnu = 0, evaluated from the explicit sums.
inline RVector control_feedback(const ExtremalState& s, const HamiltonianModel& model, const StructureConstants& sc,
                                double epsilon) {
  detail::check_weights(model, epsilon);
  RVector nu(model.n_controls());
  for (int l = 0; l < model.n_controls(); ++l) {
    const auto& ch = model.channels[static_cast<std::size_t>(l)];
    nu(l) = -detail::stationarity_bracket(s, ch, sc) / (epsilon * ch.weight);
  }
  return nu;
}

inline PontryaginValue pontryagin_hamiltonian(const ExtremalState& s, const RVector& nu, const HamiltonianModel& model,
                                              const StructureConstants& sc, double epsilon) {
  require_dimension(nu.size() == model.n_controls(), "control vector has wrong length");
  PontryaginValue v;
  for (int l = 0; l < model.n_controls(); ++l)
    v.running += epsilon * nu(l) * nu(l) * model.channels[static_cast<std::size_t>(l)].weight;
  const auto [h0, h] = model.field(nu);
  const CVector hc = h.cast<Complex>();
  v.scalar_term = 2.0 * (std::conj(s.p0) * (h0 * s.u0 + hc.cwiseProduct(s.u).sum())).imag();
  v.vector_term = 2.0 * s.p.conjugate().cwiseProduct(h0 * s.u + s.u0 * hc).sum().imag();
  Complex triple = 0.0;
  for (const auto& e : sc.g()) triple += e.value * h(e.k) * s.u(e.m) * std::conj(s.p(e.l));
  for (const auto& e : sc.f()) triple += kI * e.value * h(e.k) * s.u(e.m) * std::conj(s.p(e.l));
  v.structure_term = std::sqrt(2.0 * sc.dim()) * triple.imag();
  v.value = v.running + v.scalar_term + v.vector_term + v.structure_term;
  return v;
}

/// Boundary residuals [z(0) - (1, 0), q(T) + gate] in the RealEncoding
/// layout; the convention selects -g or -conj(g) for q(T).
inline RVector boundary_residual(const RVector& y_start, const RVector& y_end, const GateTarget& target,
                                 CostateConvention convention = CostateConvention::Negated) {
  const RealEncoding enc(target.dim);
  require_dimension(y_start.size() == enc.size() && y_end.size() == enc.size(),
                    "boundary_residual: encoded states have wrong length");
  CVector gate(enc.block());
  gate(0) = target.g0;
  gate.tail(enc.block() - 1) = target.g;
  if (convention == CostateConvention::NegatedConjugate) gate = gate.conjugate();
  CVector z0 = enc.read(0, y_start);
  z0(0) -= 1.0;
  RVector r(enc.size());
  enc.write(0, z0, r);
  enc.write(1, enc.read(1, y_end) + gate, r);
  return r;
}

/// The assembled extremal BVP for one value of epsilon. Methods are const and
/// reentrant.
class ExtremalSystem {
 public:
  ExtremalSystem(const HamiltonianModel& model, const StructureConstants& sc, const GateTarget& target, double epsilon,
                 CostateConvention convention = CostateConvention::Negated)
      : model_(model), flow_(model, sc), enc_(model.dim), target_(target), epsilon_(epsilon),
        convention_(convention) {
    detail::check_weights(model, epsilon);
    require_dimension(target.dim == model.dim, "gate and model dimensions differ");
  }

  const HamiltonianModel& model() const { return model_; }
  const BlochFlow& flow() const { return flow_; }
  const RealEncoding& encoding() const { return enc_; }
  const GateTarget& target() const { return target_; }
  double epsilon() const { return epsilon_; }
  CostateConvention convention() const { return convention_; }
  int size() const { return enc_.size(); }

  /// nu from the generator products Im(q^dagger M_l z).
  RVector feedback(const CVector& z, const CVector& q) const {
    RVector nu(flow_.n_controls());
    for (int l = 0; l < flow_.n_controls(); ++l)
      nu(l) = -q.dot(flow_.channel_generator(l) * z).imag() / (epsilon_ * weight(l));
    return nu;
  }
  RVector feedback(const RVector& y) const { return feedback(enc_.read(0, y), enc_.read(1, y)); }

  /// eps w_l nu_l + Im(q^dagger M_l z); zero at the feedback law.
  RVector stationarity(const CVector& z, const CVector& q, const RVector& nu) const {
    RVector r(flow_.n_controls());
    for (int l = 0; l < flow_.n_controls(); ++l)
      r(l) = epsilon_ * weight(l) * nu(l) + q.dot(flow_.channel_generator(l) * z).imag();
    return r;
  }

  void rhs(double /*t*/, const RVector& y, RVector& dy) const {
    const CVector z = enc_.read(0, y);
    const CVector q = enc_.read(1, y);
    dy.resize(enc_.size());
    const RVector nu = feedback(z, q);
    enc_.write(0, flow_.apply(nu, z), dy);
    enc_.write(1, flow_.apply(nu, q), dy);
  }

  RVector rhs(double t, const RVector& y) const {
    RVector dy;
    rhs(t, y, dy);
    return dy;
  }

  /// d nu_l / dy, one row per channel.
  RMatrix feedback_gradient(const RVector& y) const {
    const CVector z = enc_.read(0, y);
    const CVector q = enc_.read(1, y);
    RMatrix grad = RMatrix::Zero(flow_.n_controls(), enc_.size());
    for (int l = 0; l < flow_.n_controls(); ++l) {
      const CMatrix& ml = flow_.channel_generator(l);
      const CVector a = ml * q;
      const CVector b = ml * z;
      const double scale = -1.0 / (epsilon_ * weight(l));
      for (int c = 0; c < enc_.block(); ++c) {
        grad(l, enc_.re(0, c)) = scale * -a(c).imag();
        grad(l, enc_.im(0, c)) = scale * a(c).real();
        grad(l, enc_.re(1, c)) = scale * b(c).imag();
        grad(l, enc_.im(1, c)) = scale * -b(c).real();
      }
    }
    return grad;
  }

  /// Analytic Jacobian of rhs: block-diagonal flow part plus one rank-one
  /// term per control channel.
  void jacobian(double /*t*/, const RVector& y, RMatrix& jac) const {
    const CVector z = enc_.read(0, y);
    const CVector q = enc_.read(1, y);
    const RVector nu = feedback(z, q);
    const CMatrix a = -kI * flow_.generator(nu);
    jac.setZero(enc_.size(), enc_.size());
    enc_.add_block(0, a, jac);
    enc_.add_block(1, a, jac);
    const RMatrix grad = feedback_gradient(y);
    RVector col(enc_.size());
    for (int l = 0; l < flow_.n_controls(); ++l) {
      const CMatrix& ml = flow_.channel_generator(l);
      enc_.write(0, -kI * (ml * z), col);
      enc_.write(1, -kI * (ml * q), col);
      jac.noalias() += col * grad.row(l);
    }
  }

  RVector boundary(const RVector& y_start, const RVector& y_end) const {
    return boundary_residual(y_start, y_end, target_, convention_);
  }

  void boundary_jacobian(RMatrix& ba, RMatrix& bb) const {
    const int n = enc_.size();
    const int half = n / 2;
    ba = RMatrix::Zero(n, n);
    bb = RMatrix::Zero(n, n);
    ba.topLeftCorner(half, half).setIdentity();
    bb.bottomRightCorner(half, half).setIdentity();
  }

  PontryaginValue hamiltonian(const RVector& y, const RVector& nu, const StructureConstants& sc) const {
    return pontryagin_hamiltonian(enc_.decode(y), nu, model_, sc, epsilon_);
  }

  /// 2 eps-weighted running cost plus 2 Im(q^dagger M(nu) z); equal to the
  /// term-by-term Pontryagin function.
  double hamiltonian_value(const CVector& z, const CVector& q, const RVector& nu) const {
    double run = 0.0;
    for (int l = 0; l < nu.size(); ++l) run += epsilon_ * weight(l) * nu(l) * nu(l);
    return run + 2.0 * q.dot(flow_.generator(nu) * z).imag();
  }

  /// Terminal costate (q(T)) prescribed by the boundary condition.
  CVector terminal_costate() const {
    CVector gate(enc_.block());
    gate(0) = target_.g0;
    gate.tail(enc_.block() - 1) = target_.g;
    if (convention_ == CostateConvention::NegatedConjugate) gate = gate.conjugate();
    return -gate;
  }

  double weight(int l) const { return model_.channels[static_cast<std::size_t>(l)].weight; }

 private:
  HamiltonianModel model_;
  BlochFlow flow_;
  RealEncoding enc_;
  GateTarget target_;
  double epsilon_;
  CostateConvention convention_;
};

/// Free-function form of the extremal right-hand side.
inline RVector extremal_rhs(double t, const RVector& y, const HamiltonianModel& model, double epsilon,
                            const StructureConstants& sc, const GateTarget& target) {
  return ExtremalSystem(model, sc, target, epsilon).rhs(t, y);
}

// --- reduced cost for piecewise-constant controls ---------------------------

struct ReducedCost {
  double value = 0.0;
  double terminal = 0.0;
  double running = 0.0;
  /// dJ / d nu_{l,k}, shape (s, K).
  RMatrix gradient;
};

namespace detail {

inline const std::array<std::pair<double, double>, 8>& gauss_legendre_8() {
  // nodes on [-1, 1] and weights
  static const std::array<std::pair<double, double>, 8> rule{{
      {-0.9602898564975363, 0.1012285362903763},
      {-0.7966664774136267, 0.2223810344533745},
      {-0.5255324099163290, 0.3137066458778873},
      {-0.1834346424956498, 0.3626837833783620},
      {0.1834346424956498, 0.3626837833783620},
      {0.5255324099163290, 0.3137066458778873},
      {0.7966664774136267, 0.2223810344533745},
      {0.9602898564975363, 0.1012285362903763},
  }};
  return rule;
}

}  // namespace detail

/// J(nu) = terminal cost + eps/2 sum_l w_l int nu_l^2 for controls constant
/// on K equal intervals of [0, T] (values has shape (s, K)). The gradient is
/// assembled from the forward state and the backward costate:
///   dJ/dnu_{l,k} = eps w_l nu_{l,k} dt + int_k Im(q^dagger M_l z) dt.
/// Each interval is propagated exactly through the eigen-decomposition of
/// its constant generator.
inline ReducedCost reduced_cost_gradient(const HamiltonianModel& model, const StructureConstants& sc,
                                         const GateTarget& target, double epsilon, double horizon,
                                         const RMatrix& values,
                                         CostateConvention convention = CostateConvention::Negated) {
  const ExtremalSystem sys(model, sc, target, epsilon, convention);
  const BlochFlow& flow = sys.flow();
  const int s = model.n_controls();
  require_dimension(values.rows() == s, "control values must have one row per channel");
  const Eigen::Index k_count = values.cols();
  const double dt = horizon / static_cast<double>(k_count);
  const int n = flow.state_size();

  std::vector<Eigen::SelfAdjointEigenSolver<CMatrix>> eig;
  std::vector<CVector> z_nodes(static_cast<std::size_t>(k_count + 1));
  z_nodes[0] = CVector::Zero(n);
  z_nodes[0](0) = 1.0;
  auto propagator = [](const Eigen::SelfAdjointEigenSolver<CMatrix>& es, double t) {
    const CVector phase = (-kI * t * es.eigenvalues().cast<Complex>()).array().exp();
    return CMatrix(es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint());
  };
  for (Eigen::Index k = 0; k < k_count; ++k) {
    eig.emplace_back(flow.generator(values.col(k)));
    z_nodes[static_cast<std::size_t>(k + 1)] = propagator(eig.back(), dt) * z_nodes[static_cast<std::size_t>(k)];
  }

  ReducedCost out;
  const CVector& z_end = z_nodes.back();
  out.terminal = terminal_cost(z_end(0), z_end.tail(n - 1), target);
  out.gradient = RMatrix::Zero(s, k_count);
  for (Eigen::Index k = 0; k < k_count; ++k)
    for (int l = 0; l < s; ++l) {
      const double v = values(l, k);
      out.running += 0.5 * epsilon * sys.weight(l) * v * v * dt;
      out.gradient(l, k) = epsilon * sys.weight(l) * v * dt;
    }
  out.value = out.terminal + out.running;

  CVector q = sys.terminal_costate();
  for (Eigen::Index k = k_count - 1; k >= 0; --k) {
    const auto& es = eig[static_cast<std::size_t>(k)];
    const CVector q_start = propagator(es, dt).adjoint() * q;
    const CVector& z_start = z_nodes[static_cast<std::size_t>(k)];
    for (const auto& [x, w] : detail::gauss_legendre_8()) {
      const double tau = 0.5 * dt * (x + 1.0);
      const CMatrix e = propagator(es, tau);
      const CVector zt = e * z_start;
      const CVector qt = e * q_start;
      for (int l = 0; l < s; ++l)
        out.gradient(l, k) += 0.5 * dt * w * qt.dot(flow.channel_generator(l) * zt).imag();
    }
    q = q_start;
  }
  return out;
}

}  // namespace qgate

#endif  // QGATE_PMP_SYSTEM_HPP
