#pragma once

// Information projection of observed frequencies onto a hypothesis set,
// and the prediction-based ratio built from it.
//
// The projection minimizes the input-weighted relative entropy
//
//   D(f || P) = sum_{x,y} P_xy sum_{a,b} f(a,b|x,y) log(f(a,b|x,y) / P(a,b|x,y))
//
// over P in the set, in the no-signaling coordinates of the set's
// constraints. Natural logarithms are used internally; divergences are
// reported in bits.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "pbr/barrier.hpp"
#include "pbr/coordinates.hpp"
#include "pbr/errors.hpp"
#include "pbr/hypothesis_sets.hpp"
#include "pbr/scenario.hpp"

namespace pbr {

struct ProjectionResult {
  Behavior minimizer;
  double divergence = 0.0;   // bits, value at the returned minimizer
  double lower_bound = 0.0;  // bits, certified lower bound on the minimum
  double solver_gap = 0.0;   // divergence - lower_bound
  int outer_iterations = 0;
  int newton_steps = 0;
};

struct RatioTable {
  CellTable r{};
  double certified_bound = 1.0;  // certified max expectation over the set
  double raw_bound = 1.0;        // certificate before renormalization (m)
};

struct ProjectionOptions {
  conic::Options solver;
  /// Classical-model weights of the starting point; must have full support.
  std::optional<std::array<double, 16>> start_weights;
};

/// Relative entropy in bits; +infinity when p vanishes on a cell that f
/// charges at a setting of positive weight.
inline double kl_divergence(const Behavior& f, const Behavior& p, const InputDistribution& dist) {
  double d = 0.0;
  for (int i = 0; i < kCells; ++i) {
    const double w = dist.weight(i / kOutcomes);
    if (w == 0.0 || f[i] == 0.0) continue;
    if (p[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += w * f[i] * std::log2(f[i] / p[i]);
  }
  return d;
}

namespace detail {

inline conic::RelativeEntropyObjective kl_objective(const Behavior& f, const InputDistribution& dist, int num_vars) {
  const auto& m = ns_affine_map();
  conic::RelativeEntropyObjective obj;
  obj.weight = Eigen::VectorXd::Zero(kCells);
  obj.target = Eigen::VectorXd::Zero(kCells);
  obj.q0 = m.offset;
  obj.G = Eigen::MatrixXd::Zero(kCells, num_vars);
  obj.G.leftCols(kNsDim) = m.map;
  for (int i = 0; i < kCells; ++i) {
    obj.target(i) = f[i];
    obj.weight(i) = dist.weight(i / kOutcomes) * f[i];
  }
  return obj;
}

}  // namespace detail

inline ProjectionResult project_kl(const Behavior& f, const InputDistribution& dist, const HypothesisSet& h,
                                   const ProjectionOptions& opt = {}) {
  for (int s = 0; s < kSettings; ++s) {
    if (dist.weight(s) == 0.0) continue;
    double mass = 0.0;
    for (int o = 0; o < kOutcomes; ++o) mass += f[s * kOutcomes + o];
    if (!(mass > 0.5)) throw NumericalDegeneracy("project_kl: setting " + std::to_string(s) + " has empty support");
  }
  const auto& cons = h.constraints();
  const auto phi = detail::kl_objective(f, dist, h.num_vars());
  const Eigen::VectorXd start = h.interior_point(opt.start_weights.value_or(HypothesisSet::uniform_weights()));
  const auto res = conic::minimize(phi, cons, start, opt.solver);

  // phi is convex: phi(y) >= phi(yh) + g.(y - yh), and min_y g.y is bounded
  // below by the dual point of the linear problem with the same centering
  const Eigen::VectorXd g = phi.gradient(res.y);
  const double scale = std::max(g.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
  const Eigen::VectorXd ghat = g / scale;
  const double max_neg = scale * conic::upper_bound(-ghat, cons, conic::dual_point(cons, res.y, res.t, ghat));
  const double lower = res.objective - g.dot(res.y) - max_neg;

  ProjectionResult out;
  out.minimizer = behavior_from_coordinates(res.y.head(kNsDim));
  out.divergence = std::max(res.objective, 0.0) / std::numbers::ln2;
  out.lower_bound = std::max(lower, 0.0) / std::numbers::ln2;
  out.solver_gap = std::max(out.divergence - out.lower_bound, 0.0);
  out.outer_iterations = res.outer_iterations;
  out.newton_steps = res.newton_steps;
  return out;
}

/// r = f / P* on cells with f > 0, and 0 elsewhere.
inline RatioTable build_ratios(const Behavior& f, const ProjectionResult& proj, double support_tol = 1e-300) {
  RatioTable out;
  for (int i = 0; i < kCells; ++i) {
    if (f[i] == 0.0) continue;
    const double q = proj.minimizer[i];
    if (!(q > support_tol))
      throw SupportMismatch("build_ratios: projection vanishes on cell " + std::to_string(i) + " where f > 0");
    out.r[i] = f[i] / q;
    if (!std::isfinite(out.r[i])) throw SupportMismatch("build_ratios: non-finite ratio on cell " + std::to_string(i));
  }
  return out;
}

/// Certifies sum P_xy r P <= 1 over the whole set, dividing r by the
/// certified maximum m when m > 1.
inline RatioTable certify_ratios(const RatioTable& r, const InputDistribution& dist, const HypothesisSet& h,
                                 const conic::Options& opt = {}) {
  for (double v : r.r)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("certify_ratios: ratios must be finite and nonnegative");
  BellFunctional fn;
  fn.coefficients = r.r;
  const double m = max_linear_functional(fn, h, dist, opt).upper_certificate;
  if (!std::isfinite(m)) throw SolverFailure("certify_ratios: no finite certificate");
  RatioTable out = r;
  out.raw_bound = m;
  if (m > 1.0)
    for (double& v : out.r) v /= m;
  out.certified_bound = std::min(m, 1.0);
  return out;
}

}  // namespace pbr
