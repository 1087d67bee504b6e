#pragma once

// Data model for the bipartite two-setting two-outcome Bell scenario:
// behaviors P(a,b|x,y), empirical counts, trial sequences and linear
// Bell functionals. Every dense table is ordered (x,y,a,b) row-major.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pbr/errors.hpp"

namespace pbr {

inline constexpr int kSettings = 4;
inline constexpr int kOutcomes = 4;
inline constexpr int kCells = 16;

/// Tolerance for probability tables derived by exact arithmetic.
inline constexpr double kExactTol = 1e-12;
/// Tolerance for probability tables returned by a numerical solver.
inline constexpr double kSolverTol = 1e-9;

constexpr int setting_index(int x, int y) { return x * 2 + y; }
constexpr int cell_index(int x, int y, int a, int b) { return ((x * 2 + y) * 2 + a) * 2 + b; }

using CellTable = std::array<double, kCells>;

struct Scenario {
  int parties = 2;
  std::vector<int> inputs_per_party{2, 2};
  std::vector<int> outputs_per_input{2, 2, 2, 2};

  static Scenario chsh() { return {}; }

  void validate() const {
    if (parties < 1) throw ValidationError("scenario: party count must be >= 1");
    for (int m : inputs_per_party)
      if (m < 1) throw ValidationError("scenario: input counts must be >= 1");
    for (int k : outputs_per_input)
      if (k < 1) throw ValidationError("scenario: output counts must be >= 1");
    const bool is_222 = parties == 2 && inputs_per_party == std::vector<int>{2, 2} &&
                        outputs_per_input == std::vector<int>{2, 2, 2, 2};
    if (!is_222)
      throw UnsupportedScenario("only the (2 parties, 2 inputs, 2 outputs) scenario is supported");
  }

  bool operator==(const Scenario&) const = default;
};

class InputDistribution {
 public:
  InputDistribution() : p_{0.25, 0.25, 0.25, 0.25} {}

  static InputDistribution uniform() { return {}; }

  static InputDistribution from_table(const std::array<double, kSettings>& p) {
    double sum = 0.0;
    for (double v : p) {
      if (!std::isfinite(v) || v < 0.0)
        throw ValidationError("input distribution entries must be finite and >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kExactTol)
      throw ValidationError("input distribution must sum to 1");
    InputDistribution d;
    d.p_ = p;
    return d;
  }

  double operator()(int x, int y) const { return p_[setting_index(x, y)]; }
  double weight(int setting) const { return p_[setting]; }
  const std::array<double, kSettings>& table() const { return p_; }

  bool operator==(const InputDistribution&) const = default;

 private:
  std::array<double, kSettings> p_;
};

/// A full table of conditional outcome distributions P(a,b|x,y).
class Behavior {
 public:
  Behavior() { p_.fill(0.25); }

  static Behavior uniform() { return {}; }

  static Behavior from_table(const CellTable& p, double tol = kExactTol) {
    for (double v : p)
      if (!std::isfinite(v) || v < -tol) throw ValidationError("behavior entries must be finite and >= 0");
    for (int s = 0; s < kSettings; ++s) {
      double sum = 0.0;
      for (int o = 0; o < kOutcomes; ++o) sum += p[s * kOutcomes + o];
      if (std::abs(sum - 1.0) > tol) throw ValidationError("behavior setting rows must sum to 1");
    }
    Behavior b;
    b.p_ = p;
    for (double& v : b.p_)
      if (v < 0.0) v = 0.0;
    return b;
  }

  double operator()(int a, int b, int x, int y) const { return p_[cell_index(x, y, a, b)]; }
  double operator[](int cell) const { return p_[cell]; }
  const CellTable& table() const { return p_; }

  bool operator==(const Behavior&) const = default;

 private:
  CellTable p_;
};

/// alpha * first + (1 - alpha) * second.
inline Behavior mix(double alpha, const Behavior& first, const Behavior& second) {
  CellTable t{};
  for (int i = 0; i < kCells; ++i) t[i] = alpha * first[i] + (1.0 - alpha) * second[i];
  return Behavior::from_table(t);
}

inline double max_abs_difference(const Behavior& lhs, const Behavior& rhs) {
  double m = 0.0;
  for (int i = 0; i < kCells; ++i) m = std::max(m, std::abs(lhs[i] - rhs[i]));
  return m;
}

class CountsTable {
 public:
  CountsTable() { n_.fill(0); }

  static CountsTable from_table(const std::array<std::uint64_t, kCells>& n) {
    CountsTable c;
    c.n_ = n;
    return c;
  }

  std::uint64_t operator()(int a, int b, int x, int y) const { return n_[cell_index(x, y, a, b)]; }
  std::uint64_t operator[](int cell) const { return n_[cell]; }
  void add(int x, int y, int a, int b, std::uint64_t k = 1) { n_[cell_index(x, y, a, b)] += k; }

  std::uint64_t setting_total(int x, int y) const {
    std::uint64_t s = 0;
    for (int o = 0; o < kOutcomes; ++o) s += n_[setting_index(x, y) * kOutcomes + o];
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto v : n_) s += v;
    return s;
  }
  const std::array<std::uint64_t, kCells>& table() const { return n_; }

  bool operator==(const CountsTable&) const = default;

 private:
  std::array<std::uint64_t, kCells> n_;
};

struct Trial {
  std::int64_t index = 0;  // 1-based
  std::uint8_t x = 0, y = 0, a = 0, b = 0;

  int cell() const { return cell_index(x, y, a, b); }
  bool operator==(const Trial&) const = default;
};

class TrialSequence {
 public:
  TrialSequence() = default;
  explicit TrialSequence(std::vector<Trial> trials) : trials_(std::move(trials)) { validate(); }

  void validate() const {
    std::int64_t prev = 0;
    for (const auto& t : trials_) {
      if (t.index <= prev) throw ValidationError("trial indices must be >= 1 and strictly increasing");
      if (t.x > 1 || t.y > 1 || t.a > 1 || t.b > 1)
        throw ValidationError("trial symbol outside {0,1} at index " + std::to_string(t.index));
      prev = t.index;
    }
  }

  std::size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }
  const Trial& operator[](std::size_t i) const { return trials_[i]; }
  const std::vector<Trial>& trials() const { return trials_; }
  auto begin() const { return trials_.begin(); }
  auto end() const { return trials_.end(); }

  /// Counts over the half-open range [first, last) of positions.
  CountsTable counts(std::size_t first, std::size_t last) const {
    CountsTable c;
    for (std::size_t i = first; i < last; ++i) c.add(trials_[i].x, trials_[i].y, trials_[i].a, trials_[i].b);
    return c;
  }
  CountsTable counts() const { return counts(0, trials_.size()); }

  bool operator==(const TrialSequence&) const = default;

 private:
  std::vector<Trial> trials_;
};

enum class ZeroCountPolicy { Fail, UniformFallback };

struct Frequencies {
  Behavior behavior;
  std::array<bool, kSettings> fallback{};  // true where N_xy == 0 and the uniform row was used

  bool any_fallback() const {
    for (bool f : fallback)
      if (f) return true;
    return false;
  }
};

/// Relative frequencies f(a,b|x,y) = N_abxy / N_xy.
inline Frequencies frequencies_from_counts(const CountsTable& counts,
                                           ZeroCountPolicy policy = ZeroCountPolicy::Fail) {
  CellTable t{};
  Frequencies out;
  for (int s = 0; s < kSettings; ++s) {
    std::uint64_t n = 0;
    for (int o = 0; o < kOutcomes; ++o) n += counts[s * kOutcomes + o];
    if (n == 0) {
      if (policy == ZeroCountPolicy::Fail)
        throw ZeroCountSetting("setting (" + std::to_string(s / 2) + "," + std::to_string(s % 2) +
                               ") has no counts");
      out.fallback[s] = true;
      for (int o = 0; o < kOutcomes; ++o) t[s * kOutcomes + o] = 1.0 / kOutcomes;
      continue;
    }
    for (int o = 0; o < kOutcomes; ++o)
      t[s * kOutcomes + o] = static_cast<double>(counts[s * kOutcomes + o]) / static_cast<double>(n);
  }
  out.behavior = Behavior::from_table(t);
  return out;
}

struct NonsignalingReport {
  bool ok = false;
  double max_violation = 0.0;
};

/// Largest deviation among the marginal-equality (no-signaling) constraints.
inline NonsignalingReport is_nonsignaling(const Behavior& p, double tol = kExactTol) {
  auto alice = [&](int a, int x, int y) { return p(a, 0, x, y) + p(a, 1, x, y); };
  auto bob = [&](int b, int x, int y) { return p(0, b, x, y) + p(1, b, x, y); };
  double worst = 0.0;
  for (int o = 0; o < 2; ++o) {
    for (int s = 0; s < 2; ++s) {
      worst = std::max(worst, std::abs(alice(o, s, 0) - alice(o, s, 1)));
      worst = std::max(worst, std::abs(bob(o, 0, s) - bob(o, 1, s)));
    }
  }
  return {worst <= tol, worst};
}

struct BellFunctional {
  CellTable coefficients{};
  double offset = 0.0;

  double operator()(int a, int b, int x, int y) const { return coefficients[cell_index(x, y, a, b)]; }
};

inline double bell_value(const BellFunctional& fn, const Behavior& p) {
  double v = fn.offset;
  for (int i = 0; i < kCells; ++i) v += fn.coefficients[i] * p[i];
  return v;
}

/// sum_xy sign[xy] * E_xy with E_xy = sum_ab (-1)^(a+b) P(a,b|x,y).
inline BellFunctional correlator_functional(const std::array<double, kSettings>& sign) {
  BellFunctional fn;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          fn.coefficients[cell_index(x, y, a, b)] = sign[setting_index(x, y)] * ((a + b) % 2 == 0 ? 1.0 : -1.0);
  return fn;
}

/// E00 + E01 + E10 - E11
inline BellFunctional chsh_functional() { return correlator_functional({1.0, 1.0, 1.0, -1.0}); }

/// -E00 + E01 + E10 + E11
inline BellFunctional chsh_prime_functional() { return correlator_functional({-1.0, 1.0, 1.0, 1.0}); }

/// The eight relabelled CHSH expressions sum_xy (-1)^(xy + alpha x + beta y + gamma) E_xy.
/// Local bound 2, algebraic bound 4.
inline BellFunctional chsh_variant(int alpha, int beta, int gamma) {
  std::array<double, kSettings> sign{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) sign[setting_index(x, y)] = ((x * y + alpha * x + beta * y + gamma) % 2 == 0) ? 1.0 : -1.0;
  return correlator_functional(sign);
}

/// S_CHSH cos(theta) + S'_CHSH sin(theta).
inline BellFunctional chsh_slice_functional(double theta) {
  const auto s = chsh_functional();
  const auto sp = chsh_prime_functional();
  BellFunctional fn;
  const double c = std::cos(theta), sn = std::sin(theta);
  for (int i = 0; i < kCells; ++i) fn.coefficients[i] = c * s.coefficients[i] + sn * sp.coefficients[i];
  return fn;
}

/// The Popescu-Rohrlich box P(a,b|x,y) = 1/2 [a xor b == xy].
inline Behavior pr_box() {
  CellTable t{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) t[cell_index(x, y, a, b)] = ((a ^ b) == (x & y)) ? 0.5 : 0.0;
  return Behavior::from_table(t);
}

inline std::string setting_key(int x, int y) { return std::to_string(x) + "," + std::to_string(y); }

}  // namespace pbr
