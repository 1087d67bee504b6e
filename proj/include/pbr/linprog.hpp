#pragma once

// Dense two-phase simplex for small linear programs in standard form
//
//   maximize c^T x  subject to  A x = b,  x >= 0.
//
// Bland's rule is used for both entering and leaving variables, so the
// method terminates on degenerate problems (vertex weights of polytopes are
// highly degenerate). Redundant equality rows are detected and dropped after
// phase one.

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace pbr::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Result {
  Status status = Status::Infeasible;
  Eigen::VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
};

namespace detail {

class Tableau {
 public:
  Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol)
      : m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())), tol_(tol) {
    // columns: n originals, m artificials, rhs
    t_ = Eigen::MatrixXd::Zero(m_ + 1, n_ + m_ + 1);
    basis_.resize(m_);
    active_.assign(m_, true);
    for (int i = 0; i < m_; ++i) {
      const double sgn = b(i) < 0 ? -1.0 : 1.0;
      t_.row(i + 1).head(n_) = sgn * A.row(i);
      t_(i + 1, n_ + i) = 1.0;
      t_(i + 1, n_ + m_) = sgn * b(i);
      basis_[i] = n_ + i;
    }
  }

  // Cost row d_j = c_j - c_B^T B^{-1} A_j, objective value stored at the rhs slot.
  void set_cost(const Eigen::VectorXd& c_full) {
    t_.row(0).setZero();
    t_.row(0).head(n_ + m_) = c_full.transpose();
    for (int i = 0; i < m_; ++i) {
      if (!active_[i]) continue;
      const double cb = c_full(basis_[i]);
      if (cb != 0.0) t_.row(0) -= cb * t_.row(i + 1);
    }
  }

  /// Returns false when unbounded.
  bool optimize(int allowed_cols) {
    for (int iter = 0; iter < 100000; ++iter) {
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j)
        if (t_(0, j) > tol_) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (!active_[i]) continue;
        const double a = t_(i + 1, enter);
        if (a <= tol_) continue;
        const double ratio = t_(i + 1, n_ + m_) / a;
        if (ratio < best - tol_ || (ratio <= best + tol_ && leave >= 0 && basis_[i] < basis_[leave])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return true;
  }

  void pivot(int row, int col) {
    t_.row(row + 1) /= t_(row + 1, col);
    for (int i = 0; i <= m_; ++i) {
      if (i == row + 1) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row + 1);
    }
    basis_[row] = col;
  }

  // After phase one: pivot zero-level artificials out of the basis, or drop their row.
  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (!active_[i] || basis_[i] < n_) continue;
      int col = -1;
      for (int j = 0; j < n_; ++j)
        if (std::abs(t_(i + 1, j)) > tol_) {
          col = j;
          break;
        }
      if (col >= 0)
        pivot(i, col);
      else
        active_[i] = false;
    }
  }

  double objective() const { return -t_(0, n_ + m_); }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i)
      if (active_[i] && basis_[i] < n_) x(basis_[i]) = t_(i + 1, n_ + m_);
    return x;
  }

  int n() const { return n_; }
  int m() const { return m_; }

 private:
  int m_, n_;
  double tol_;
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
  std::vector<bool> active_;
};

}  // namespace detail

inline Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                       double tol = 1e-11) {
  detail::Tableau tab(A, b, tol);
  const int n = tab.n(), m = tab.m();

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setConstant(-1.0);
  tab.set_cost(phase1);
  tab.optimize(n + m);
  Result r;
  if (tab.objective() < -1e3 * tol * std::max(1.0, b.lpNorm<1>())) {
    r.status = Status::Infeasible;
    return r;
  }
  tab.expel_artificials();

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = c;
  tab.set_cost(phase2);
  if (!tab.optimize(n)) {
    r.status = Status::Unbounded;
    r.value = std::numeric_limits<double>::infinity();
    return r;
  }
  r.status = Status::Optimal;
  r.x = tab.solution();
  r.value = c.dot(r.x);
  return r;
}

}  // namespace pbr::lp
