#pragma once

// Affine coordinates on the no-signaling subspace of the (2,2,2) scenario.
//
//   theta = [PA(0|0), PA(0|1), PB(0|0), PB(0|1), P(00|00), P(00|01), P(00|10), P(00|11)]
//
// Every no-signaling table is p = offset + map * theta, and the map is
// injective, so these eight numbers are the natural decision variables of
// all optimizations over subsets of the no-signaling set.

#include <Eigen/Dense>

#include "pbr/scenario.hpp"

namespace pbr {

inline constexpr int kNsDim = 8;

constexpr int theta_alice(int x) { return x; }
constexpr int theta_bob(int y) { return 2 + y; }
constexpr int theta_joint(int x, int y) { return 4 + setting_index(x, y); }

struct NsAffineMap {
  Eigen::Matrix<double, kCells, 1> offset;
  Eigen::Matrix<double, kCells, kNsDim> map;
};

inline const NsAffineMap& ns_affine_map() {
  static const NsAffineMap m = [] {
    NsAffineMap r;
    r.offset.setZero();
    r.map.setZero();
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        const int c = theta_joint(x, y), ax = theta_alice(x), by = theta_bob(y);
        r.map(cell_index(x, y, 0, 0), c) = 1.0;
        r.map(cell_index(x, y, 0, 1), ax) = 1.0;
        r.map(cell_index(x, y, 0, 1), c) = -1.0;
        r.map(cell_index(x, y, 1, 0), by) = 1.0;
        r.map(cell_index(x, y, 1, 0), c) = -1.0;
        r.offset(cell_index(x, y, 1, 1)) = 1.0;
        r.map(cell_index(x, y, 1, 1), ax) = -1.0;
        r.map(cell_index(x, y, 1, 1), by) = -1.0;
        r.map(cell_index(x, y, 1, 1), c) = 1.0;
      }
    return r;
  }();
  return m;
}

using NsCoordinates = Eigen::Matrix<double, kNsDim, 1>;

/// Coordinates of a behavior; marginals are averaged over the other
/// party's setting, so this is exact only for no-signaling input.
inline NsCoordinates ns_coordinates(const Behavior& p) {
  NsCoordinates th;
  for (int x = 0; x < 2; ++x) {
    double s = 0.0;
    for (int y = 0; y < 2; ++y) s += p(0, 0, x, y) + p(0, 1, x, y);
    th(theta_alice(x)) = 0.5 * s;
  }
  for (int y = 0; y < 2; ++y) {
    double s = 0.0;
    for (int x = 0; x < 2; ++x) s += p(0, 0, x, y) + p(1, 0, x, y);
    th(theta_bob(y)) = 0.5 * s;
  }
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) th(theta_joint(x, y)) = p(0, 0, x, y);
  return th;
}

inline CellTable table_from_coordinates(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const auto& m = ns_affine_map();
  const Eigen::Matrix<double, kCells, 1> p = m.offset + m.map * theta.head<kNsDim>();
  CellTable t{};
  for (int i = 0; i < kCells; ++i) t[i] = p(i);
  return t;
}

inline Behavior behavior_from_coordinates(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                          double tol = kSolverTol) {
  return Behavior::from_table(table_from_coordinates(theta), tol);
}

}  // namespace pbr
