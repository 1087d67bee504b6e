#pragma once

// Reference computations that share no code path with the library's solvers.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "pbr/scenario.hpp"

namespace oracle {

using pbr::CellTable;
using pbr::cell_index;

/// Equality rows of {p : normalization, no-signaling} in the full 16-cell space.
inline std::vector<std::array<double, 17>> nosignaling_equalities() {
  std::vector<std::array<double, 17>> rows;  // 16 coefficients, then the right-hand side
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      std::array<double, 17> r{};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) r[cell_index(x, y, a, b)] = 1.0;
      r[16] = 1.0;
      rows.push_back(r);
    }
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a) {
      std::array<double, 17> r{};
      for (int b = 0; b < 2; ++b) {
        r[cell_index(x, 0, a, b)] += 1.0;
        r[cell_index(x, 1, a, b)] -= 1.0;
      }
      rows.push_back(r);
    }
  for (int y = 0; y < 2; ++y)
    for (int b = 0; b < 2; ++b) {
      std::array<double, 17> r{};
      for (int a = 0; a < 2; ++a) {
        r[cell_index(0, y, a, b)] += 1.0;
        r[cell_index(1, y, a, b)] -= 1.0;
      }
      rows.push_back(r);
    }
  return rows;
}

/// Vertices of {p >= 0, normalization, no-signaling} by brute force: every
/// choice of 8 cells forced to zero is combined with the equalities, and
/// each system of full column rank with a nonnegative solution is a vertex.
inline std::vector<CellTable> enumerate_nosignaling_vertices(double tol = 1e-10) {
  const auto eq = nosignaling_equalities();
  const int ne = static_cast<int>(eq.size());
  std::vector<CellTable> out;
  for (unsigned mask = 0; mask < (1u << 16); ++mask) {
    if (__builtin_popcount(mask) != 8) continue;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ne + 8, 16);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ne + 8);
    for (int i = 0; i < ne; ++i) {
      for (int c = 0; c < 16; ++c) A(i, c) = eq[i][c];
      rhs(i) = eq[i][16];
    }
    int row = ne;
    for (int c = 0; c < 16; ++c)
      if (mask & (1u << c)) A(row++, c) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < 16) continue;
    const Eigen::VectorXd p = lu.solve(rhs);
    if ((A * p - rhs).lpNorm<Eigen::Infinity>() > tol) continue;
    if (p.minCoeff() < -tol) continue;
    CellTable t;
    for (int c = 0; c < 16; ++c) t[c] = std::abs(p(c)) < tol ? 0.0 : p(c);
    const bool seen = std::any_of(out.begin(), out.end(), [&](const CellTable& v) {
      for (int c = 0; c < 16; ++c)
        if (std::abs(v[c] - t[c]) > 1e-9) return false;
      return true;
    });
    if (!seen) out.push_back(t);
  }
  return out;
}

/// Deterministic strategies built directly from response functions.
inline std::vector<CellTable> deterministic_strategies() {
  std::vector<CellTable> out;
  for (int g0 = 0; g0 < 2; ++g0)
    for (int g1 = 0; g1 < 2; ++g1)
      for (int h0 = 0; h0 < 2; ++h0)
        for (int h1 = 0; h1 < 2; ++h1) {
          CellTable t{};
          const int g[2] = {g0, g1}, h[2] = {h0, h1};
          for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y) t[cell_index(x, y, g[x], h[y])] = 1.0;
          out.push_back(t);
        }
  return out;
}

/// Weighted relative entropy in nats, sum_k w_k log(f_k / q_k).
inline double weighted_kl(const CellTable& f, const CellTable& q, const std::array<double, 4>& dist) {
  double d = 0.0;
  for (int c = 0; c < 16; ++c) {
    const double w = dist[c / 4] * f[c];
    if (w > 0.0) d += w * std::log(f[c] / q[c]);
  }
  return d;
}

/// Minimum over mixtures of the 16 deterministic strategies of the weighted
/// relative entropy (bits), by multiplicative mixture-weight (EM) updates
/// from several random simplex starts. Each update cannot increase the
/// objective; the best run is returned.
inline double local_projection_bits(const CellTable& f, const std::array<double, 4>& dist, int starts = 20,
                                    int iterations = 20000, unsigned seed = 1) {
  const auto V = deterministic_strategies();
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts; ++s) {
    std::array<double, 16> pi;
    double sum = 0.0;
    for (auto& w : pi) sum += (w = expo(rng));
    for (auto& w : pi) w /= sum;
    CellTable q{};
    for (int it = 0; it < iterations; ++it) {
      q.fill(0.0);
      for (int l = 0; l < 16; ++l)
        for (int c = 0; c < 16; ++c) q[c] += pi[l] * V[l][c];
      std::array<double, 16> next{};
      double total = 0.0;
      for (int l = 0; l < 16; ++l) {
        double g = 0.0;
        for (int c = 0; c < 16; ++c)
          if (V[l][c] > 0.0) g += dist[c / 4] * f[c] * V[l][c] / q[c];
        next[l] = pi[l] * g;
        total += next[l];
      }
      for (int l = 0; l < 16; ++l) pi[l] = next[l] / total;
    }
    q.fill(0.0);
    for (int l = 0; l < 16; ++l)
      for (int c = 0; c < 16; ++c) q[c] += pi[l] * V[l][c];
    best = std::min(best, weighted_kl(f, q, dist) / std::log(2.0));
  }
  return best;
}

/// White-noise visibility from the closed-form description of the local
/// polytope inside the no-signaling set: positivity and the 8 CHSH facets.
/// Every facet vanishes on white noise, so each one caps nu at 2 / S_k(b).
inline double local_visibility_from_facets(const pbr::Behavior& b) {
  double nu = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k) {
    double s = 0.0;
    const int al = (k >> 2) & 1, be = (k >> 1) & 1, ga = k & 1;
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        const double sign = ((x * y + al * x + be * y + ga) % 2 == 0) ? 1.0 : -1.0;
        double e = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int bb = 0; bb < 2; ++bb) e += ((a + bb) % 2 == 0 ? 1.0 : -1.0) * b(a, bb, x, y);
        s += sign * e;
      }
    if (s > 0.0) nu = std::min(nu, 2.0 / s);
  }
  for (int c = 0; c < 16; ++c)
    if (b[c] < 0.25) nu = std::min(nu, 0.25 / (0.25 - b[c]));
  return nu;
}

/// Positivity-only visibility (the no-signaling set).
inline double nosignaling_visibility(const pbr::Behavior& b) {
  double nu = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 16; ++c)
    if (b[c] < 0.25) nu = std::min(nu, 0.25 / (0.25 - b[c]));
  return nu;
}

/// A random point of the local polytope with full support.
inline pbr::Behavior random_local_interior(std::mt19937_64& rng) {
  const auto V = deterministic_strategies();
  std::exponential_distribution<double> expo(1.0);
  std::array<double, 16> pi;
  double sum = 0.0;
  for (auto& w : pi) sum += (w = expo(rng) + 0.05);
  CellTable t{};
  for (int l = 0; l < 16; ++l)
    for (int c = 0; c < 16; ++c) t[c] += pi[l] / sum * V[l][c];
  return pbr::Behavior::from_table(t);
}

/// A random no-signaling behavior: a random mixture of the 16 deterministic
/// strategies and the 8 relabelled PR boxes, built from first principles.
inline pbr::Behavior random_nosignaling(std::mt19937_64& rng) {
  auto V = deterministic_strategies();
  for (int k = 0; k < 8; ++k) {
    CellTable t{};
    const int al = (k >> 2) & 1, be = (k >> 1) & 1, ga = k & 1;
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) t[cell_index(x, y, a, b)] = ((a ^ b) == ((x & y) ^ (al & x) ^ (be & y) ^ ga)) ? 0.5 : 0.0;
    V.push_back(t);
  }
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> pi(V.size());
  double sum = 0.0;
  for (auto& w : pi) sum += (w = expo(rng));
  CellTable t{};
  for (std::size_t l = 0; l < V.size(); ++l)
    for (int c = 0; c < 16; ++c) t[c] += pi[l] / sum * V[l][c];
  return pbr::Behavior::from_table(t);
}

/// Counts of n i.i.d. draws per setting from a behavior, sampled cell by cell.
inline pbr::CountsTable sample_counts(const pbr::Behavior& b, std::uint64_t n_per_setting, std::mt19937_64& rng) {
  std::array<std::uint64_t, 16> n{};
  for (int s = 0; s < 4; ++s) {
    std::discrete_distribution<int> d({b[s * 4], b[s * 4 + 1], b[s * 4 + 2], b[s * 4 + 3]});
    for (std::uint64_t i = 0; i < n_per_setting; ++i) ++n[s * 4 + d(rng)];
  }
  return pbr::CountsTable::from_table(n);
}

}  // namespace oracle
