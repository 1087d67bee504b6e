#pragma once

// The four convex correlation sets and the queries run against them:
// maximization of a weighted linear functional, membership, and white-noise
// visibility.
//
//   local  - convex hull of the 16 deterministic strategies; equivalently the
//            no-signaling polytope cut by the 8 CHSH facets
//   ns     - the no-signaling polytope, 24 vertices
//   q1     - NPA level 1 (macroscopic locality), 5x5 moment matrix
//   aq     - almost-quantum set, 9x9 moment matrix (level 1+AB)

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pbr/barrier.hpp"
#include "pbr/coordinates.hpp"
#include "pbr/linprog.hpp"
#include "pbr/moments.hpp"
#include "pbr/scenario.hpp"

namespace pbr {

enum class SetKind { Local, Nosignaling, Npa1, AlmostQuantum };

inline std::string to_string(SetKind k) {
  switch (k) {
    case SetKind::Local: return "local";
    case SetKind::Nosignaling: return "ns";
    case SetKind::Npa1: return "q1";
    case SetKind::AlmostQuantum: return "aq";
  }
  return "?";
}

inline SetKind parse_set_kind(const std::string& s) {
  if (s == "local") return SetKind::Local;
  if (s == "ns") return SetKind::Nosignaling;
  if (s == "q1") return SetKind::Npa1;
  if (s == "aq") return SetKind::AlmostQuantum;
  throw ValidationError("unknown hypothesis set '" + s + "' (expected local, ns, q1 or aq)");
}

struct VertexList {
  std::vector<Behavior> vertices;

  std::size_t size() const { return vertices.size(); }
  const Behavior& operator[](std::size_t i) const { return vertices[i]; }
};

/// Deterministic strategies P(a,b|x,y) = [a == g(x)][b == h(y)], ordered
/// lexicographically by (g(0), g(1), h(0), h(1)).
inline VertexList local_vertices(const Scenario& s = Scenario::chsh()) {
  s.validate();
  VertexList out;
  for (int k = 0; k < 16; ++k) {
    const int g[2] = {(k >> 3) & 1, (k >> 2) & 1};
    const int h[2] = {(k >> 1) & 1, k & 1};
    CellTable t{};
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) t[cell_index(x, y, g[x], h[y])] = 1.0;
    out.vertices.push_back(Behavior::from_table(t));
  }
  return out;
}

/// PR-type box 1/2 [a xor b == xy xor alpha x xor beta y xor gamma].
inline Behavior pr_variant(int alpha, int beta, int gamma) {
  CellTable t{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          t[cell_index(x, y, a, b)] = ((a ^ b) == ((x & y) ^ (alpha & x) ^ (beta & y) ^ gamma)) ? 0.5 : 0.0;
  return Behavior::from_table(t);
}

/// The 16 local vertices followed by the 8 PR variants in lexicographic
/// (alpha, beta, gamma) order. Index j here is vertex j+1 of the noise model.
inline VertexList nosignaling_vertices(const Scenario& s = Scenario::chsh()) {
  VertexList out = local_vertices(s);
  for (int k = 0; k < 8; ++k) out.vertices.push_back(pr_variant((k >> 2) & 1, (k >> 1) & 1, k & 1));
  return out;
}

struct LinearMax {
  double value = 0.0;
  double upper_certificate = 0.0;
};

struct Membership {
  bool inside = false;
  double margin = 0.0;
};

class HypothesisSet {
 public:
  static HypothesisSet make(SetKind kind, const Scenario& scenario = Scenario::chsh()) {
    scenario.validate();
    HypothesisSet h;
    h.kind_ = kind;
    h.scenario_ = scenario;
    switch (kind) {
      case SetKind::Local: h.vertices_ = local_vertices(scenario); break;
      case SetKind::Nosignaling: h.vertices_ = nosignaling_vertices(scenario); break;
      case SetKind::Npa1: h.moments_ = MomentStructure::npa_level1(); break;
      case SetKind::AlmostQuantum: h.moments_ = MomentStructure::almost_quantum(); break;
    }
    h.constraints_ = h.build_constraints();
    return h;
  }

  SetKind kind() const { return kind_; }
  std::string name() const { return to_string(kind_); }
  const Scenario& scenario() const { return scenario_; }
  bool has_vertices() const { return vertices_.has_value(); }
  const VertexList& vertices() const { return *vertices_; }
  bool has_moments() const { return moments_.has_value(); }
  const MomentStructure& moments() const { return *moments_; }

  /// Decision variables are [theta, free moments].
  int num_vars() const { return kNsDim + (moments_ ? moments_->free_count() : 0); }

  /// Constraints over the decision variables: cell positivity, the CHSH
  /// facets for the local set, the moment matrix for the SDP sets.
  const conic::Constraints& constraints() const { return constraints_; }

  /// A strictly feasible point realized by a classical model; `weights` are
  /// over the 16 deterministic strategies and must keep every cell positive.
  Eigen::VectorXd interior_point(const std::array<double, 16>& weights = uniform_weights()) const {
    if (moments_) return moments_->classical_moments(weights);
    const auto lv = local_vertices(scenario_);
    CellTable t{};
    for (int k = 0; k < 16; ++k)
      for (int i = 0; i < kCells; ++i) t[i] += weights[k] * lv[k][i];
    Eigen::VectorXd y = ns_coordinates(Behavior::from_table(t));
    return y;
  }

  static std::array<double, 16> uniform_weights() {
    std::array<double, 16> w;
    w.fill(1.0 / 16.0);
    return w;
  }

 private:
  conic::Constraints build_constraints() const {
    const auto& m = ns_affine_map();
    const int n = num_vars();
    const int rows = kCells + (kind_ == SetKind::Local ? 8 : 0);
    conic::Constraints c;
    c.lin_A = Eigen::MatrixXd::Zero(rows, n);
    c.lin_b = Eigen::VectorXd::Zero(rows);
    c.lin_A.topLeftCorner(kCells, kNsDim) = m.map;
    c.lin_b.head(kCells) = m.offset;
    if (kind_ == SetKind::Local) {
      for (int k = 0; k < 8; ++k) {
        const auto fn = chsh_variant((k >> 2) & 1, (k >> 1) & 1, k & 1);
        Eigen::Matrix<double, 1, kCells> coef;
        for (int i = 0; i < kCells; ++i) coef(i) = fn.coefficients[i];
        // 2 - S(p) >= 0
        c.lin_A.block(kCells + k, 0, 1, kNsDim) = -coef * m.map;
        c.lin_b(kCells + k) = 2.0 - coef.dot(m.offset.transpose());
      }
    }
    if (moments_) {
      auto [F0, F] = moments_->affine_matrices();
      c.psd_F0 = std::move(F0);
      c.psd_F = std::move(F);
    } else {
      c.psd_F0.resize(0, 0);
    }
    // probabilities lie in [0,1]; moment entries are bounded by the unit diagonal
    c.bound = Eigen::VectorXd::Ones(n);
    return c;
  }

  SetKind kind_ = SetKind::Local;
  Scenario scenario_;
  std::optional<VertexList> vertices_;
  std::optional<MomentStructure> moments_;
  conic::Constraints constraints_;
};

namespace detail {

inline bool is_white_noise(const Behavior& b) { return max_abs_difference(b, Behavior::uniform()) <= 1e-15; }

// max nu s.t. nu*b + (1-nu)*P_I is a convex combination of the vertices;
// b must be no-signaling. Solved in theta coordinates (8 equations plus
// normalization of the weights).
inline double vertex_visibility_lp(const Behavior& b, const VertexList& verts) {
  const int J = static_cast<int>(verts.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(kNsDim + 1, J + 1);
  Eigen::VectorXd rhs(kNsDim + 1);
  const NsCoordinates th_i = ns_coordinates(Behavior::uniform());
  const NsCoordinates th_b = ns_coordinates(b);
  for (int j = 0; j < J; ++j) {
    A.block(0, j, kNsDim, 1) = ns_coordinates(verts[j]);
    A(kNsDim, j) = 1.0;
  }
  A.block(0, J, kNsDim, 1) = th_i - th_b;
  rhs.head(kNsDim) = th_i;
  rhs(kNsDim) = 1.0;
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(J + 1);
  cost(J) = 1.0;
  const auto r = lp::maximize(cost, A, rhs);
  if (r.status == lp::Status::Unbounded) return std::numeric_limits<double>::infinity();
  if (r.status != lp::Status::Optimal) throw SolverFailure("visibility LP reported infeasibility");
  return r.value;
}

inline Eigen::VectorXd weighted_cell_costs(const BellFunctional& fn, const InputDistribution& dist) {
  Eigen::VectorXd w(kCells);
  for (int i = 0; i < kCells; ++i) w(i) = fn.coefficients[i] * dist.weight(i / kOutcomes);
  return w;
}

}  // namespace detail

/// max over the set of sum fn(a,b,x,y) P_xy P(a,b|x,y) + fn.offset.
/// Vertex sets are exact; moment sets return the barrier solution and a
/// rigorous dual upper bound.
inline LinearMax max_linear_functional(const BellFunctional& fn, const HypothesisSet& h,
                                       const InputDistribution& dist, const conic::Options& opt = {}) {
  const Eigen::VectorXd w = detail::weighted_cell_costs(fn, dist);
  if (h.has_vertices()) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : h.vertices().vertices) {
      double s = 0.0;
      for (int i = 0; i < kCells; ++i) s += w(i) * v[i];
      best = std::max(best, s);
    }
    return {best + fn.offset, best + fn.offset};
  }
  const auto& m = ns_affine_map();
  const double constant = w.dot(m.offset) + fn.offset;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(h.num_vars());
  c.head(kNsDim) = m.map.transpose() * w;
  const double scale = c.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return {constant, constant};
  const Eigen::VectorXd chat = c / scale;
  const auto& cons = h.constraints();
  const auto res = conic::minimize(conic::LinearObjective{-chat}, cons, h.interior_point(), opt);
  LinearMax out;
  out.value = scale * chat.dot(res.y) + constant;
  out.upper_certificate = scale * conic::upper_bound(chat, cons, conic::dual_point(cons, res.y, res.t, -chat)) + constant;
  return out;
}

/// Largest nu >= 0 with nu*b + (1-nu)*P_I in the set (+inf for b = P_I).
/// Signaling behaviors have visibility 0 for every set.
inline double visibility(const Behavior& b, const HypothesisSet& h, const conic::Options& opt = {}) {
  if (detail::is_white_noise(b)) return std::numeric_limits<double>::infinity();
  if (!is_nonsignaling(b, kExactTol).ok) return 0.0;
  if (h.has_vertices()) return detail::vertex_visibility_lp(b, h.vertices());

  // variables w = [nu, z]; theta = theta_I + nu (theta_b - theta_I)
  const int n = h.num_vars();
  const NsCoordinates th_i = ns_coordinates(Behavior::uniform());
  const NsCoordinates th_b = ns_coordinates(b);
  Eigen::VectorXd base = Eigen::VectorXd::Zero(n);
  base.head(kNsDim) = th_i;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n - kNsDim + 1);
  S.block(0, 0, kNsDim, 1) = th_b - th_i;
  S.bottomRightCorner(n - kNsDim, n - kNsDim).setIdentity();
  Eigen::VectorXd bound = Eigen::VectorXd::Ones(S.cols());
  bound(0) = std::numeric_limits<double>::infinity();
  auto cons = h.constraints().substitute(base, S, bound);
  if (!cons.drop_constant_rows()) throw SolverFailure("visibility: white noise violates the set constraints");

  Eigen::VectorXd start = Eigen::VectorXd::Zero(S.cols());
  start.tail(n - kNsDim) = h.interior_point().tail(n - kNsDim);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(S.cols());
  c(0) = -1.0;
  const auto res = conic::minimize(conic::LinearObjective{c}, cons, start, opt);
  return res.y(0);
}

/// Membership with a signed margin (>= 0 inside).
///  - signaling input: margin = -(largest no-signaling violation)
///  - vertex sets: margin = min(visibility, 2) - 1 (linear feasibility of a
///    convex-weight reconstruction)
///  - moment sets: margin = max over completions of the smallest eigenvalue
///    of the moment matrix
inline Membership membership(const Behavior& b, const HypothesisSet& h, double tol = 1e-7,
                             const conic::Options& opt = {}) {
  const auto ns = is_nonsignaling(b, tol);
  if (!ns.ok) return {false, -ns.max_violation};
  if (h.has_vertices()) {
    const double nu = detail::is_white_noise(b) ? std::numeric_limits<double>::infinity()
                                                : detail::vertex_visibility_lp(b, h.vertices());
    const double margin = std::min(nu, 2.0) - 1.0;
    return {margin >= -tol, margin};
  }

  // variables w = [z, lambda]: Gamma(theta_b, z) - lambda I >= 0
  const int n = h.num_vars();
  const int nz = n - kNsDim;
  Eigen::VectorXd base = Eigen::VectorXd::Zero(n);
  base.head(kNsDim) = ns_coordinates(b);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, nz + 1);
  S.bottomLeftCorner(nz, nz).setIdentity();
  Eigen::VectorXd bound = Eigen::VectorXd::Ones(nz + 1);
  auto cons = h.constraints().substitute(base, S, bound);
  const int d = cons.psd_dim();
  cons.psd_F[nz] = -Eigen::MatrixXd::Identity(d, d);
  if (!cons.drop_constant_rows(tol)) return {false, -tol};

  Eigen::VectorXd start(nz + 1);
  start.head(nz) = h.interior_point().tail(nz);
  start(nz) = 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cons.psd_matrix(start));
  start(nz) = es.eigenvalues().minCoeff() - 1.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(nz + 1);
  c(nz) = -1.0;
  const auto res = conic::minimize(conic::LinearObjective{c}, cons, start, opt);
  const double margin = res.y(nz);
  return {margin >= -tol, margin};
}

}  // namespace pbr
