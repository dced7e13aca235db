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

// Two-point boundary value problems y' = f(t, y), bc(y(a), y(b)) = 0.
//
// Discretization: 3-stage Lobatto IIIA collocation. On each interval the
// solution is the C1 cubic through (y_i, f_i) and (y_{i+1}, f_{i+1}); the
// collocation condition at the midpoint reads
//
//   y_{i+1} - y_i - h/6 (f_i + 4 f_mid + f_{i+1}) = 0,
//   y_mid = (y_i + y_{i+1}) / 2 - h/8 (f_{i+1} - f_i).
//
// The global system is solved by damped Newton. Its Jacobian is almost block
// diagonal (one [A_i C_i] block row per interval plus the boundary rows); it
// is eliminated interval by interval with Householder QR, never assembled.
// After each Newton solve the rms ODE defect of the interpolant is estimated
// per interval and intervals above tol are subdivided.

#ifndef QGATE_BVP_SOLVER_HPP
#define QGATE_BVP_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgate/core.hpp"

namespace qgate {

struct BvpProblem {
  using Rhs = std::function<void(double t, const RVector& y, RVector& dy)>;
  using Jacobian = std::function<void(double t, const RVector& y, RMatrix& jac)>;
  using Boundary = std::function<RVector(const RVector& ya, const RVector& yb)>;
  using BoundaryJacobian = std::function<void(const RVector& ya, const RVector& yb, RMatrix& ba, RMatrix& bb)>;

  int n = 0;
  double a = 0.0;
  double b = 1.0;
  Rhs rhs;
  Boundary bc;
  Jacobian jacobian;               // optional
  BoundaryJacobian bc_jacobian;    // optional

  void validate() const {
    if (n < 1) throw InvalidDimension("BVP state dimension must be at least 1");
    if (!(a < b)) throw DomainError("BVP interval must satisfy a < b");
    if (!rhs || !bc) throw Error("BVP needs rhs and bc callbacks");
  }
};

struct NewtonOptions {
  int max_iterations = 12;
  double damping = 0.5;
  double min_step = 1e-10;
  double armijo = 1e-4;
};

struct SolverOptions {
  double tol = 1e-6;
  /// Collocation tolerance that ends Newton on a mesh; defaults to tol.
  double newton_tol = 0.0;
  /// Tolerance on |bc|; defaults to the Newton tolerance.
  double bc_tol = 0.0;
  /// 0 means 20 x initial mesh size.
  int max_nodes = 0;
  int max_refinements = 40;
  /// Solve on the given mesh only: success means Newton converged, the
  /// residual estimate is reported but never refines.
  bool fixed_mesh = false;
  NewtonOptions newton;
  bool verbose = false;
  /// Receives one line per Newton iteration when set (or std::clog if verbose).
  std::ostream* log = nullptr;
};

enum class BvpStatus { Converged, MaxNodesExceeded, NewtonFailed };

inline std::string to_string(BvpStatus s) {
  switch (s) {
    case BvpStatus::Converged:
      return "converged";
    case BvpStatus::MaxNodesExceeded:
      return "max-nodes-exceeded";
    case BvpStatus::NewtonFailed:
      return "newton-failed";
  }
  return "unknown";
}

/// Cubic Hermite interpolation on [t0, t0 + h].
inline void hermite_eval(double t0, double h, const RVector& y0, const RVector& y1, const RVector& f0,
                         const RVector& f1, double t, RVector* value, RVector* deriv) {
  const double s = (t - t0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  if (value) {
    *value = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * f1;
  }
  if (deriv) {
    *deriv = ((6 * s2 - 6 * s) * y0 + (-6 * s2 + 6 * s) * y1) / h + (3 * s2 - 4 * s + 1) * f0 + (3 * s2 - 2 * s) * f1;
  }
}

struct BvpSolution {
  RVector mesh;
  /// Nodal states, one column per node.
  RMatrix y;
  /// Nodal derivatives f(t_i, y_i); with y these define the C1 cubic.
  RMatrix yp;
  /// Normalized rms residual per interval.
  RVector residuals;
  double max_residual = 0.0;
  double max_bc_residual = 0.0;
  int newton_iterations = 0;
  int refinements = 0;
  BvpStatus status = BvpStatus::NewtonFailed;
  std::string message;

  bool converged() const { return status == BvpStatus::Converged; }
  int n() const { return static_cast<int>(y.rows()); }
  Eigen::Index nodes() const { return mesh.size(); }

  Eigen::Index interval_of(double t) const {
    const double a = mesh(0);
    const double b = mesh(mesh.size() - 1);
    const double slack = 1e-12 * (b - a);
    if (!(t >= a - slack && t <= b + slack)) throw DomainError("evaluation point outside the solution interval");
    const auto* begin = mesh.data();
    const auto* it = std::upper_bound(begin, begin + mesh.size(), t);
    Eigen::Index i = static_cast<Eigen::Index>(it - begin) - 1;
    return std::clamp<Eigen::Index>(i, 0, mesh.size() - 2);
  }

  RVector evaluate(double t) const {
    const Eigen::Index i = interval_of(t);
    if (t == mesh(i)) return y.col(i);
    if (t == mesh(i + 1)) return y.col(i + 1);
    RVector v;
    hermite_eval(mesh(i), mesh(i + 1) - mesh(i), y.col(i), y.col(i + 1), yp.col(i), yp.col(i + 1), t, &v, nullptr);
    return v;
  }

  RMatrix evaluate(const RVector& ts) const {
    RMatrix out(y.rows(), ts.size());
    for (Eigen::Index k = 0; k < ts.size(); ++k) out.col(k) = evaluate(ts(k));
    return out;
  }

  RVector derivative(double t) const {
    const Eigen::Index i = interval_of(t);
    RVector d;
    hermite_eval(mesh(i), mesh(i + 1) - mesh(i), y.col(i), y.col(i + 1), yp.col(i), yp.col(i + 1), t, nullptr, &d);
    return d;
  }
};

namespace detail {

inline void fd_jacobian(const BvpProblem::Rhs& f, double t, const RVector& y, const RVector& f0, RMatrix& jac) {
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  jac.resize(f0.size(), y.size());
  RVector yy = y;
  RVector df;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double step = eps * std::max(1.0, std::abs(y(j)));
    yy(j) = y(j) + step;
    f(t, yy, df);
    jac.col(j) = (df - f0) / step;
    yy(j) = y(j);
  }
}

inline void fd_bc_jacobian(const BvpProblem::Boundary& bc, const RVector& ya, const RVector& yb, RMatrix& ba,
                           RMatrix& bb) {
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  const RVector r0 = bc(ya, yb);
  ba.resize(r0.size(), ya.size());
  bb.resize(r0.size(), yb.size());
  RVector a = ya;
  RVector b = yb;
  for (Eigen::Index j = 0; j < ya.size(); ++j) {
    const double step = eps * std::max(1.0, std::abs(ya(j)));
    a(j) = ya(j) + step;
    ba.col(j) = (bc(a, yb) - r0) / step;
    a(j) = ya(j);
  }
  for (Eigen::Index j = 0; j < yb.size(); ++j) {
    const double step = eps * std::max(1.0, std::abs(yb(j)));
    b(j) = yb(j) + step;
    bb.col(j) = (bc(ya, b) - r0) / step;
    b(j) = yb(j);
  }
}

inline bool triangular_ok(const RMatrix& r) {
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < r.rows(); ++k)
    if (!(std::abs(r(k, k)) > 1e-13 * scale)) return false;
  return true;
}

}  // namespace detail

/// Sequential elimination of the almost-block-diagonal system
///
///   Ba dy_0 + Bb dy_{m-1} = rbc,
///   A_i dy_i + C_i dy_{i+1} = r_i,   i = 0 .. m-2.
///
/// Blocks are pushed in interval order and need not be kept by the caller.
/// With separated boundary rows (each row touches only y(a) or only y(b)) the
/// y(a) rows lead the first interval and no fill arises; otherwise a fill
/// column block for dy_0 is carried and a final 2n system is solved.
class AbdSolver {
 public:
  AbdSolver(const RMatrix& ba, const RMatrix& bb, const RVector& rbc) : n_(static_cast<int>(ba.rows())) {
    std::vector<int> rows_a;
    std::vector<int> rows_b;
    separated_ = true;
    for (int r = 0; r < n_; ++r) {
      const bool uses_a = ba.row(r).cwiseAbs().maxCoeff() > 0.0;
      const bool uses_b = bb.row(r).cwiseAbs().maxCoeff() > 0.0;
      if (uses_a && uses_b) separated_ = false;
      if (uses_a && !uses_b) rows_a.push_back(r);
      else rows_b.push_back(r);
    }
    if (separated_) {
      pend_ = RMatrix(rows_a.size(), n_);
      pend_rhs_ = RVector(rows_a.size());
      for (std::size_t k = 0; k < rows_a.size(); ++k) {
        pend_.row(static_cast<Eigen::Index>(k)) = ba.row(rows_a[k]);
        pend_rhs_(static_cast<Eigen::Index>(k)) = rbc(rows_a[k]);
      }
      bb_ = RMatrix(rows_b.size(), n_);
      rbc_ = RVector(rows_b.size());
      for (std::size_t k = 0; k < rows_b.size(); ++k) {
        bb_.row(static_cast<Eigen::Index>(k)) = bb.row(rows_b[k]);
        rbc_(static_cast<Eigen::Index>(k)) = rbc(rows_b[k]);
      }
    } else {
      ba_ = ba;
      bb_ = bb;
      rbc_ = rbc;
    }
  }

  bool separated() const { return separated_; }

  /// Returns false when the pivot block is numerically singular.
  bool push(const RMatrix& a, const RMatrix& c, const RVector& r) {
    if (!ok_) return false;
    if (!separated_ && pushed_ == 0) {
      pend_ = c;
      fill_ = a;
      pend_rhs_ = r;
      ++pushed_;
      return true;
    }
    const Eigen::Index p = pend_.rows();
    const Eigen::Index rows = p + n_;
    RMatrix s(rows, n_);
    s << pend_, a;
    RMatrix e = RMatrix::Zero(rows, n_);
    e.bottomRows(n_) = c;
    RVector rr(rows);
    rr << pend_rhs_, r;
    Eigen::HouseholderQR<RMatrix> qr(s);
    const auto qt = qr.householderQ().transpose();
    e.applyOnTheLeft(qt);
    rr.applyOnTheLeft(qt);
    Step st;
    st.r = qr.matrixQR().topRows(n_).triangularView<Eigen::Upper>();
    if (!detail::triangular_ok(st.r)) {
      ok_ = false;
      return false;
    }
    st.t = e.topRows(n_);
    st.rhs = rr.head(n_);
    pend_ = e.bottomRows(p);
    pend_rhs_ = rr.tail(p);
    if (!separated_) {
      RMatrix f = RMatrix::Zero(rows, n_);
      f.topRows(n_) = fill_;
      f.applyOnTheLeft(qt);
      st.fill = f.topRows(n_);
      fill_ = f.bottomRows(p);
    }
    steps_.push_back(std::move(st));
    ++pushed_;
    return true;
  }

  /// Solution with one column per node, or nullopt if singular.
  std::optional<RMatrix> finish() {
    if (!ok_) return std::nullopt;
    const Eigen::Index m = pushed_ + 1;
    RMatrix dy(n_, m);
    if (separated_) {
      RMatrix last(n_, n_);
      last << pend_, bb_;
      RVector rhs(n_);
      rhs << pend_rhs_, rbc_;
      Eigen::ColPivHouseholderQR<RMatrix> qr(last);
      qr.setThreshold(1e-12);
      if (qr.rank() < n_) return std::nullopt;
      dy.col(m - 1) = qr.solve(rhs);
      for (Eigen::Index i = m - 2; i >= 0; --i) {
        const Step& st = steps_[static_cast<std::size_t>(i)];
        dy.col(i) = st.r.triangularView<Eigen::Upper>().solve(st.rhs - st.t * dy.col(i + 1));
      }
    } else {
      RMatrix last(2 * n_, 2 * n_);
      last << pend_, fill_, bb_, ba_;
      RVector rhs(2 * n_);
      rhs << pend_rhs_, rbc_;
      Eigen::ColPivHouseholderQR<RMatrix> qr(last);
      qr.setThreshold(1e-12);
      if (qr.rank() < 2 * n_) return std::nullopt;
      const RVector sol = qr.solve(rhs);
      dy.col(m - 1) = sol.head(n_);
      dy.col(0) = sol.tail(n_);
      for (Eigen::Index i = m - 2; i >= 1; --i) {
        const Step& st = steps_[static_cast<std::size_t>(i - 1)];
        dy.col(i) =
            st.r.triangularView<Eigen::Upper>().solve(st.rhs - st.t * dy.col(i + 1) - st.fill * dy.col(0));
      }
    }
    return dy;
  }

 private:
  struct Step {
    RMatrix r;
    RMatrix t;
    RMatrix fill;
    RVector rhs;
  };

  int n_;
  bool separated_ = true;
  bool ok_ = true;
  Eigen::Index pushed_ = 0;
  RMatrix ba_, bb_;
  RVector rbc_;
  RMatrix pend_;
  RMatrix fill_;
  RVector pend_rhs_;
  std::vector<Step> steps_;
};

namespace detail {

/// Collocation residuals and node/midpoint data for the current iterate.
struct Collocation {
  RMatrix f;        // n x m
  RMatrix y_mid;    // n x (m-1)
  RMatrix f_mid;    // n x (m-1)
  RMatrix res;      // n x (m-1)
  RVector bc;
};

inline Collocation collocate(const BvpProblem& p, const RVector& x, const RMatrix& y) {
  const Eigen::Index m = x.size();
  Collocation c;
  c.f.resize(p.n, m);
  RVector tmp;
  for (Eigen::Index i = 0; i < m; ++i) {
    p.rhs(x(i), y.col(i), tmp);
    c.f.col(i) = tmp;
  }
  c.y_mid.resize(p.n, m - 1);
  c.f_mid.resize(p.n, m - 1);
  c.res.resize(p.n, m - 1);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double h = x(i + 1) - x(i);
    c.y_mid.col(i) = 0.5 * (y.col(i + 1) + y.col(i)) - 0.125 * h * (c.f.col(i + 1) - c.f.col(i));
    p.rhs(x(i) + 0.5 * h, c.y_mid.col(i), tmp);
    c.f_mid.col(i) = tmp;
    c.res.col(i) = y.col(i + 1) - y.col(i) - h / 6.0 * (c.f.col(i) + c.f.col(i + 1) + 4.0 * c.f_mid.col(i));
  }
  c.bc = p.bc(y.col(0), y.col(m - 1));
  return c;
}

/// Merit: collocation rows scaled by 1/h (ODE defect units) plus bc rows.
inline double merit(const RVector& x, const Collocation& c) {
  double s = c.bc.squaredNorm();
  for (Eigen::Index i = 0; i < c.res.cols(); ++i) s += c.res.col(i).squaredNorm() / std::pow(x(i + 1) - x(i), 2);
  return s;
}

inline bool collocation_converged(const RVector& x, const Collocation& c, double tol, double bc_tol) {
  for (Eigen::Index i = 0; i < c.res.cols(); ++i) {
    const double tol_r = 2.0 / 3.0 * (x(i + 1) - x(i)) * 5e-2 * tol;
    for (Eigen::Index k = 0; k < c.res.rows(); ++k)
      if (!(std::abs(c.res(k, i)) < tol_r * (1.0 + std::abs(c.f_mid(k, i))))) return false;
  }
  return c.bc.size() == 0 || c.bc.cwiseAbs().maxCoeff() < bc_tol;
}

inline void node_jacobian(const BvpProblem& p, double t, const RVector& y, const RVector& f, RMatrix& jac) {
  if (p.jacobian) p.jacobian(t, y, jac);
  else fd_jacobian(p.rhs, t, y, f, jac);
}

/// Newton direction for the collocation system at (x, y).
inline std::optional<RMatrix> newton_direction(const BvpProblem& p, const RVector& x, const RMatrix& y,
                                               const Collocation& c) {
  const Eigen::Index m = x.size();
  const int n = p.n;
  RMatrix ba, bb;
  if (p.bc_jacobian) p.bc_jacobian(y.col(0), y.col(m - 1), ba, bb);
  else fd_bc_jacobian(p.bc, y.col(0), y.col(m - 1), ba, bb);
  AbdSolver solver(ba, bb, -c.bc);
  const RMatrix eye = RMatrix::Identity(n, n);
  RMatrix j_left, j_right, j_mid, a(n, n), cc(n, n), tmp(n, n);
  node_jacobian(p, x(0), y.col(0), c.f.col(0), j_left);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double h = x(i + 1) - x(i);
    node_jacobian(p, x(i + 1), y.col(i + 1), c.f.col(i + 1), j_right);
    node_jacobian(p, x(i) + 0.5 * h, c.y_mid.col(i), c.f_mid.col(i), j_mid);
    tmp = 0.5 * eye + (h / 8.0) * j_left;
    a.noalias() = j_mid * tmp;
    a = -eye - (h / 6.0) * (j_left + 4.0 * a);
    tmp = 0.5 * eye - (h / 8.0) * j_right;
    cc.noalias() = j_mid * tmp;
    cc = eye - (h / 6.0) * (j_right + 4.0 * cc);
    if (!solver.push(a, cc, -c.res.col(i))) return std::nullopt;
    std::swap(j_left, j_right);
  }
  return solver.finish();
}

struct NewtonResult {
  int iterations = 0;
  bool singular = false;
  bool converged = false;
};

inline NewtonResult newton(const BvpProblem& p, const RVector& x, RMatrix& y, const SolverOptions& opt,
                           std::ostream* log) {
  NewtonResult out;
  const double newton_tol = opt.newton_tol > 0 ? opt.newton_tol : opt.tol;
  const double bc_tol = opt.bc_tol > 0 ? opt.bc_tol : newton_tol;
  Collocation c = collocate(p, x, y);
  double phi = merit(x, c);
  for (int it = 0; it < opt.newton.max_iterations; ++it) {
    if (!std::isfinite(phi)) {
      out.singular = true;
      return out;
    }
    const auto dir = newton_direction(p, x, y, c);
    ++out.iterations;
    if (!dir) {
      out.singular = true;
      return out;
    }
    double alpha = 1.0;
    RMatrix y_try;
    Collocation c_try;
    double phi_try = phi;
    bool accepted = false;
    while (alpha >= opt.newton.min_step) {
      y_try = y + alpha * *dir;
      c_try = collocate(p, x, y_try);
      phi_try = merit(x, c_try);
      if (std::isfinite(phi_try) && phi_try <= (1.0 - 2.0 * opt.newton.armijo * alpha) * phi) {
        accepted = true;
        break;
      }
      alpha *= opt.newton.damping;
    }
    if (log) {
      *log << "newton iter " << out.iterations << " residual " << std::sqrt(accepted ? phi_try : phi) << " damping "
           << (accepted ? alpha : 0.0) << " nodes " << x.size() << '\n';
    }
    if (!accepted) return out;
    y = std::move(y_try);
    c = std::move(c_try);
    phi = phi_try;
    if (collocation_converged(x, c, newton_tol, bc_tol)) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace detail

/// Per-interval normalized rms residual of the solution's interpolant. The
/// ODE defect r = s' - f(t, s) is sampled at the midpoint and at the two
/// Lobatto points mid +- h/2 sqrt(3/7), each component normalized by
/// (1 + |f|), and combined with the 5-point Lobatto quadrature weights.
inline RVector estimate_residual(const BvpSolution& sol, const BvpProblem& p) {
  const Eigen::Index m = sol.mesh.size();
  RVector rms(m - 1);
  const double off = 0.5 * std::sqrt(3.0 / 7.0);
  RVector v, d, f;
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double t0 = sol.mesh(i);
    const double h = sol.mesh(i + 1) - t0;
    auto sample = [&](double t) {
      hermite_eval(t0, h, sol.y.col(i), sol.y.col(i + 1), sol.yp.col(i), sol.yp.col(i + 1), t, &v, &d);
      p.rhs(t, v, f);
      return ((d - f).array() / (1.0 + f.array().abs())).matrix().squaredNorm();
    };
    const double r_mid = sample(t0 + 0.5 * h);
    const double r1 = sample(t0 + (0.5 + off) * h);
    const double r2 = sample(t0 + (0.5 - off) * h);
    rms(i) = std::sqrt(0.5 * (32.0 / 45.0 * r_mid + 49.0 / 90.0 * (r1 + r2)));
  }
  return rms;
}

namespace detail {

/// Nodes to add per interval: 1 above tol, 2 at or above 100 tol, and 1 in
/// each neighbor of an interval above 10 tol.
inline std::vector<int> refinement_plan(const RVector& rms, double tol) {
  const Eigen::Index k = rms.size();
  std::vector<int> add(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (rms(i) >= 100 * tol) add[static_cast<std::size_t>(i)] = 2;
    else if (rms(i) > tol) add[static_cast<std::size_t>(i)] = 1;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(rms(i) > 10 * tol)) continue;
    if (i > 0) add[static_cast<std::size_t>(i - 1)] = std::max(add[static_cast<std::size_t>(i - 1)], 1);
    if (i + 1 < k) add[static_cast<std::size_t>(i + 1)] = std::max(add[static_cast<std::size_t>(i + 1)], 1);
  }
  return add;
}

inline RVector refine_mesh(const RVector& x, const std::vector<int>& add) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.size()) * 2);
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    out.push_back(x(i));
    const int a = add[static_cast<std::size_t>(i)];
    for (int k = 1; k <= a; ++k) out.push_back(x(i) + (x(i + 1) - x(i)) * k / (a + 1));
  }
  out.push_back(x(x.size() - 1));
  return Eigen::Map<RVector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline void finalize(BvpSolution& sol, const BvpProblem& p, const Collocation& c) {
  sol.yp = c.f;
  sol.residuals = estimate_residual(sol, p);
  sol.max_residual = sol.residuals.size() ? sol.residuals.maxCoeff() : 0.0;
  sol.max_bc_residual = c.bc.size() ? c.bc.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace detail

inline BvpSolution solve_bvp(const BvpProblem& problem, const RVector& initial_mesh, const RMatrix& guess,
                             const SolverOptions& options = {}) {
  problem.validate();
  if (!(options.tol > 0)) throw Error("solver tolerance must be positive");
  const Eigen::Index m0 = initial_mesh.size();
  if (m0 < 2) throw InvalidDimension("initial mesh needs at least two nodes");
  require_dimension(guess.rows() == problem.n && guess.cols() == m0, "guess must be n x (number of mesh nodes)");
  for (Eigen::Index i = 0; i + 1 < m0; ++i)
    if (!(initial_mesh(i + 1) > initial_mesh(i))) throw DomainError("mesh must be strictly increasing");
  if (std::abs(initial_mesh(0) - problem.a) > 1e-12 * (problem.b - problem.a) ||
      std::abs(initial_mesh(m0 - 1) - problem.b) > 1e-12 * (problem.b - problem.a))
    throw DomainError("mesh must span the problem interval");
  {
    RVector f0;
    problem.rhs(initial_mesh(0), guess.col(0), f0);
    if (f0.size() != problem.n || !f0.allFinite()) throw Error("rhs is not finite at the initial guess");
    if (problem.bc(guess.col(0), guess.col(m0 - 1)).size() != problem.n)
      throw DimensionMismatch("bc must return n residuals");
  }

  const int max_nodes = options.max_nodes > 0 ? options.max_nodes : static_cast<int>(20 * m0);
  std::ostream* log = options.log ? options.log : (options.verbose ? &std::clog : nullptr);

  BvpSolution sol;
  sol.mesh = initial_mesh;
  sol.y = guess;
  for (int round = 0;; ++round) {
    const auto nr = detail::newton(problem, sol.mesh, sol.y, options, log);
    sol.newton_iterations += nr.iterations;
    const auto c = detail::collocate(problem, sol.mesh, sol.y);
    detail::finalize(sol, problem, c);
    if (nr.singular) {
      sol.status = BvpStatus::NewtonFailed;
      sol.message = "singular or non-finite collocation system";
      return sol;
    }
    if (options.fixed_mesh) {
      sol.status = nr.converged ? BvpStatus::Converged : BvpStatus::NewtonFailed;
      sol.message = nr.converged ? "converged on the fixed mesh" : "Newton did not converge on the fixed mesh";
      return sol;
    }
    const auto plan = detail::refinement_plan(sol.residuals, options.tol);
    int added = 0;
    for (int a : plan) added += a;
    if (log) {
      *log << "refine round " << round << " max residual " << sol.max_residual << " bc " << sol.max_bc_residual
           << " nodes " << sol.mesh.size() << " adding " << added << '\n';
    }
    const double bc_tol = options.bc_tol > 0 ? options.bc_tol : options.tol;
    if (added == 0 && sol.max_bc_residual <= bc_tol) {
      sol.status = BvpStatus::Converged;
      sol.message = "converged";
      return sol;
    }
    if (sol.mesh.size() + added > max_nodes) {
      sol.status = BvpStatus::MaxNodesExceeded;
      sol.message = "refinement would exceed " + std::to_string(max_nodes) + " nodes";
      return sol;
    }
    if (round >= options.max_refinements) {
      sol.status = BvpStatus::NewtonFailed;
      sol.message = "no convergence after " + std::to_string(round + 1) + " refinement rounds";
      return sol;
    }
    if (added > 0) {
      const RVector x_new = detail::refine_mesh(sol.mesh, plan);
      RMatrix y_new = sol.evaluate(x_new);
      sol.mesh = x_new;
      sol.y = std::move(y_new);
      ++sol.refinements;
    }
  }
}

}  // namespace qgate

#endif  // QGATE_BVP_SOLVER_HPP
