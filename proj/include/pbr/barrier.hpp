#pragma once

// Log-barrier path-following solver for small conic programs
//
//   minimize   phi(y)
//   subject to A y + b >= 0            (linear cone)
//              F0 + sum_i y_i F_i >= 0  (one real symmetric PSD block)
//
// with phi convex and smooth on the interior. Centering uses damped Newton
// steps, which are feasible by construction because t*phi plus the barrier
// is self-concordant for the objectives used here (linear, and the weighted
// negative log-likelihood whose log terms share a cell with a positivity
// constraint).
//
// After the path is followed, the barrier multipliers give a dual point
// from which rigorous bounds are formed; the bounds use a priori box limits
// |y_i| <= bound_i on the feasible set to absorb residual dual infeasibility.

#include <Eigen/Dense>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pbr/errors.hpp"

namespace pbr::conic {

struct Constraints {
  Eigen::MatrixXd lin_A;  // s = lin_A * y + lin_b > 0
  Eigen::VectorXd lin_b;
  Eigen::MatrixXd psd_F0;  // empty when there is no PSD block
  std::vector<Eigen::MatrixXd> psd_F;
  Eigen::VectorXd bound;  // |y_i| <= bound_i for every feasible y (may be +inf)

  int num_vars() const { return static_cast<int>(bound.size()); }
  int psd_dim() const { return static_cast<int>(psd_F0.rows()); }
  int num_linear() const { return static_cast<int>(lin_A.rows()); }
  double degree() const { return static_cast<double>(num_linear() + psd_dim()); }

  Eigen::VectorXd slacks(const Eigen::VectorXd& y) const {
    if (num_linear() == 0) return {};
    return lin_A * y + lin_b;
  }

  Eigen::MatrixXd psd_matrix(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd F = psd_F0;
    for (int i = 0; i < num_vars() && psd_dim() > 0; ++i)
      if (y(i) != 0.0) F += y(i) * psd_F[i];
    return F;
  }

  bool strictly_feasible(const Eigen::VectorXd& y) const {
    if (!y.allFinite()) return false;
    if (num_linear() > 0 && !(slacks(y).array() > 0.0).all()) return false;
    if (psd_dim() > 0) {
      Eigen::LLT<Eigen::MatrixXd> llt(psd_matrix(y));
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  /// Constraints in new variables w where y = base + S w.
  Constraints substitute(const Eigen::VectorXd& base, const Eigen::MatrixXd& S,
                         const Eigen::VectorXd& new_bound) const {
    Constraints c;
    if (num_linear() > 0) {
      c.lin_A = lin_A * S;
      c.lin_b = lin_A * base + lin_b;
    } else {
      c.lin_A.resize(0, S.cols());
      c.lin_b.resize(0);
    }
    if (psd_dim() > 0) {
      c.psd_F0 = psd_matrix(base);
      c.psd_F.assign(S.cols(), Eigen::MatrixXd::Zero(psd_dim(), psd_dim()));
      for (int j = 0; j < S.cols(); ++j)
        for (int i = 0; i < num_vars(); ++i)
          if (S(i, j) != 0.0) c.psd_F[j] += S(i, j) * psd_F[i];
    }
    c.bound = new_bound;
    return c;
  }

  /// Drops linear rows that no longer depend on the variables; returns false
  /// if one of them is violated.
  bool drop_constant_rows(double tol = 0.0) {
    std::vector<int> keep;
    for (int k = 0; k < num_linear(); ++k) {
      if (lin_A.row(k).lpNorm<Eigen::Infinity>() > 0.0) {
        keep.push_back(k);
      } else if (lin_b(k) < -tol) {
        return false;
      }
    }
    Eigen::MatrixXd A(keep.size(), num_vars());
    Eigen::VectorXd b(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      A.row(r) = lin_A.row(keep[r]);
      b(r) = lin_b(keep[r]);
    }
    lin_A = std::move(A);
    lin_b = std::move(b);
    return true;
  }
};

template <class F>
concept Objective = requires(const F& f, const Eigen::VectorXd& y) {
  { f.value(y) } -> std::convertible_to<double>;
  { f.gradient(y) } -> std::convertible_to<Eigen::VectorXd>;
  { f.hessian(y) } -> std::convertible_to<Eigen::MatrixXd>;
  { f.in_domain(y) } -> std::convertible_to<bool>;
};

/// minimize c^T y
struct LinearObjective {
  Eigen::VectorXd c;

  double value(const Eigen::VectorXd& y) const { return c.dot(y); }
  Eigen::VectorXd gradient(const Eigen::VectorXd&) const { return c; }
  Eigen::MatrixXd hessian(const Eigen::VectorXd&) const { return Eigen::MatrixXd::Zero(c.size(), c.size()); }
  bool in_domain(const Eigen::VectorXd&) const { return true; }
};

/// minimize sum_k w_k log(f_k / (q_k + G_k y)) over the cells with w_k > 0.
struct RelativeEntropyObjective {
  Eigen::VectorXd weight;  // w_k = P_xy f_k
  Eigen::VectorXd target;  // f_k
  Eigen::VectorXd q0;      // affine model of the compared distribution
  Eigen::MatrixXd G;

  Eigen::VectorXd model(const Eigen::VectorXd& y) const { return q0 + G * y; }

  bool in_domain(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd q = model(y);
    for (int k = 0; k < q.size(); ++k)
      if (weight(k) > 0.0 && !(q(k) > 0.0)) return false;
    return true;
  }
  double value(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd q = model(y);
    double v = 0.0;
    for (int k = 0; k < q.size(); ++k)
      if (weight(k) > 0.0) v += weight(k) * (std::log(target(k)) - std::log(q(k)));
    return v;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd q = model(y);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(y.size());
    for (int k = 0; k < q.size(); ++k)
      if (weight(k) > 0.0) g -= (weight(k) / q(k)) * G.row(k).transpose();
    return g;
  }
  Eigen::MatrixXd hessian(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd q = model(y);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(q.size());
    for (int k = 0; k < q.size(); ++k)
      if (weight(k) > 0.0) d(k) = weight(k) / (q(k) * q(k));
    return G.transpose() * d.asDiagonal() * G;
  }
};

struct Options {
  double t_initial = 1.0;
  double t_growth = 10.0;
  double gap_tol = 1e-10;    // stop once degree / t <= gap_tol
  double newton_tol = 1e-9;  // half squared Newton decrement at intermediate centers
  double final_newton_tol = 1e-15;
  int max_newton_per_center = 200;
};

struct Result {
  Eigen::VectorXd y;
  double objective = 0.0;
  double t = 0.0;
  double gap_bound = 0.0;  // degree / t, the central-path duality gap
  int outer_iterations = 0;
  int newton_steps = 0;
};

namespace detail {

struct BarrierState {
  Eigen::VectorXd s;
  Eigen::MatrixXd Finv;
  std::vector<Eigen::MatrixXd> G;  // L^{-1} F_i L^{-T}
  double value = 0.0;
  bool ok = false;
};

inline BarrierState evaluate_barrier(const Constraints& c, const Eigen::VectorXd& y, bool derivatives) {
  BarrierState st;
  st.value = 0.0;
  if (c.num_linear() > 0) {
    st.s = c.slacks(y);
    if (!(st.s.array() > 0.0).all()) return st;
    st.value -= st.s.array().log().sum();
  }
  if (c.psd_dim() > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(c.psd_matrix(y));
    if (llt.info() != Eigen::Success) return st;
    const Eigen::MatrixXd L = llt.matrixL();
    double logdet = 0.0;
    for (int i = 0; i < L.rows(); ++i) {
      if (!(L(i, i) > 0.0)) return st;
      logdet += 2.0 * std::log(L(i, i));
    }
    st.value -= logdet;
    if (derivatives) {
      const int d = c.psd_dim();
      st.Finv = llt.solve(Eigen::MatrixXd::Identity(d, d));
      st.G.resize(c.num_vars());
      for (int i = 0; i < c.num_vars(); ++i) {
        Eigen::MatrixXd tmp = llt.matrixL().solve(c.psd_F[i]);
        st.G[i] = llt.matrixL().solve(tmp.transpose());
      }
    }
  }
  st.ok = std::isfinite(st.value);
  return st;
}

// Solves H x = r for a symmetric positive semidefinite H; near the optimum of
// a degenerate problem H can be numerically singular, in which case a small
// diagonal shift is added.
inline Eigen::VectorXd solve_regularized(const Eigen::MatrixXd& H, const Eigen::VectorXd& r) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) return llt.solve(r);
  const double base = std::max(1e-300, H.diagonal().cwiseAbs().maxCoeff());
  const int n = static_cast<int>(H.rows());
  for (double shift = 1e-14; shift <= 1e-4; shift *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> reg(H + shift * base * Eigen::MatrixXd::Identity(n, n));
    if (reg.info() == Eigen::Success) return reg.solve(r);
  }
  throw SolverFailure("barrier: singular Newton system");
}

// Jacobi scaling keeps the factorization accurate at large t.
inline Eigen::VectorXd newton_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  const auto n = H.rows();
  Eigen::VectorXd scale(n);
  for (int i = 0; i < n; ++i) scale(i) = H(i, i) > 0.0 ? 1.0 / std::sqrt(H(i, i)) : 1.0;
  const Eigen::MatrixXd Hs = scale.asDiagonal() * H * scale.asDiagonal();
  return scale.asDiagonal() * solve_regularized(Hs, -(scale.asDiagonal() * g));
}

inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> barrier_derivatives(const Constraints& cons,
                                                                       const BarrierState& st) {
  const int n = cons.num_vars();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  if (cons.num_linear() > 0) {
    const Eigen::VectorXd inv = st.s.cwiseInverse();
    g -= cons.lin_A.transpose() * inv;
    H += cons.lin_A.transpose() * inv.cwiseAbs2().asDiagonal() * cons.lin_A;
  }
  if (cons.psd_dim() > 0) {
    for (int i = 0; i < n; ++i) {
      g(i) -= st.G[i].trace();
      for (int j = 0; j <= i; ++j) {
        const double h = st.G[i].cwiseProduct(st.G[j]).sum();
        H(i, j) += h;
        if (j != i) H(j, i) += h;
      }
    }
  }
  return {g, H};
}

}  // namespace detail

template <Objective F>
Result minimize(const F& phi, const Constraints& cons, Eigen::VectorXd y, const Options& opt = {}) {
  const int n = cons.num_vars();
  if (y.size() != n) throw SolverFailure("barrier: starting point has wrong dimension");
  if (!cons.strictly_feasible(y) || !phi.in_domain(y))
    throw SolverFailure("barrier: starting point is not strictly feasible");

  Result res;
  double t = opt.t_initial;
  const double degree = std::max(1.0, cons.degree());

  auto center = [&](double tol) {
    for (int it = 0; it < opt.max_newton_per_center; ++it) {
      const auto st = detail::evaluate_barrier(cons, y, true);
      if (!st.ok) throw SolverFailure("barrier: iterate left the interior");
      auto [gB, HB] = detail::barrier_derivatives(cons, st);
      const Eigen::VectorXd g = t * phi.gradient(y) + gB;
      const Eigen::MatrixXd H = t * phi.hessian(y) + HB;
      const Eigen::VectorXd step = detail::newton_step(H, g);
      if (!step.allFinite()) throw SolverFailure("barrier: non-finite Newton step");
      const double dec2 = std::max(0.0, -g.dot(step));
      ++res.newton_steps;
      if (0.5 * dec2 <= tol) return;
      const double lambda = std::sqrt(dec2);
      double alpha = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
      Eigen::VectorXd trial = y + alpha * step;
      int halvings = 0;
      while (!(cons.strictly_feasible(trial) && phi.in_domain(trial))) {
        alpha *= 0.5;
        trial = y + alpha * step;
        if (++halvings > 60) throw SolverFailure("barrier: line search failed to stay feasible");
      }
      if (trial == y) return;
      y = std::move(trial);
    }
  };

  for (;;) {
    ++res.outer_iterations;
    const bool last = degree / t <= opt.gap_tol;
    center(last ? opt.final_newton_tol : opt.newton_tol);
    if (last) break;
    t = std::min(t * opt.t_growth, std::max(t, degree / opt.gap_tol));
  }

  res.y = y;
  res.objective = phi.value(y);
  res.t = t;
  res.gap_bound = degree / t;
  return res;
}

struct DualPoint {
  Eigen::MatrixXd Z;       // PSD block multiplier
  Eigen::VectorXd lambda;  // linear multipliers
};

/// Dual estimate at a near-central point y for the problem "minimize
/// c^T y". The plain barrier multipliers (F^{-1}/t, 1/(t s)) are corrected by
/// one Newton step of the centering problem, which cancels their dual
/// residual up to linear-algebra rounding; the correction keeps them in the
/// cone whenever the Newton decrement is below one.
inline DualPoint dual_point(const Constraints& cons, const Eigen::VectorXd& y, double t,
                            const Eigen::VectorXd& c) {
  const auto st = detail::evaluate_barrier(cons, y, true);
  if (!st.ok) throw SolverFailure("barrier: dual point requested outside the interior");
  auto [gB, HB] = detail::barrier_derivatives(cons, st);
  const Eigen::VectorXd step = detail::newton_step(HB, t * c + gB);
  DualPoint d;
  if (cons.num_linear() > 0) {
    const Eigen::VectorXd ds = cons.lin_A * step;
    d.lambda = ((1.0 - (ds.array() / st.s.array())) / (t * st.s.array())).matrix();
  }
  if (cons.psd_dim() > 0) {
    Eigen::MatrixXd dF = Eigen::MatrixXd::Zero(cons.psd_dim(), cons.psd_dim());
    for (int i = 0; i < cons.num_vars(); ++i) dF += step(i) * cons.psd_F[i];
    d.Z = (st.Finv - st.Finv * dF * st.Finv) / t;
  }
  return d;
}

/// Rigorous upper bound on max { c^T y : y feasible } from any dual point
/// (Z >= 0, lambda >= 0). Residual dual infeasibility is charged against the
/// box |y_i| <= bound_i.
inline double upper_bound(const Eigen::VectorXd& c, const Constraints& cons, const DualPoint& dual) {
  const Eigen::MatrixXd& Z = dual.Z;
  const Eigen::VectorXd& lambda = dual.lambda;
  double u = 0.0, mag = 0.0;
  Eigen::VectorXd r = c;
  if (cons.num_linear() > 0) {
    const Eigen::VectorXd lam = lambda.cwiseMax(0.0);
    r += cons.lin_A.transpose() * lam;
    u += lam.dot(cons.lin_b);
    mag += (lam.array() * cons.lin_b.array().abs()).sum();
  }
  if (cons.psd_dim() > 0) {
    // symmetrize and clip to the PSD cone so the certificate is a genuine dual point
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Z + Z.transpose()));
    const Eigen::MatrixXd Zp =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
    for (int i = 0; i < cons.num_vars(); ++i) r(i) += Zp.cwiseProduct(cons.psd_F[i]).sum();
    u += Zp.cwiseProduct(cons.psd_F0).sum();
    mag += Zp.cwiseAbs().cwiseProduct(cons.psd_F0.cwiseAbs()).sum();
  }
  for (int i = 0; i < cons.num_vars(); ++i) {
    if (r(i) == 0.0) continue;
    if (!std::isfinite(cons.bound(i))) return std::numeric_limits<double>::infinity();
    u += std::abs(r(i)) * cons.bound(i);
    mag += std::abs(r(i)) * cons.bound(i);
  }
  // allowance for rounding in the sums above
  return u + 64.0 * std::numeric_limits<double>::epsilon() * (mag + std::abs(u));
}

}  // namespace pbr::conic
