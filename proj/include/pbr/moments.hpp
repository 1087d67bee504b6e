#pragma once

// Moment-matrix structures for the two semidefinite relaxations of the
// quantum set in the (2,2,2) scenario.
//
// Operators are the outcome-0 projectors E_x (Alice) and F_y (Bob); outcome-1
// projectors are eliminated through 1 - E_x. Alice's operators commute with
// Bob's and are idempotent, so a matrix entry <S^dag T> is identified by a
// pair of reduced words (alice word, bob word). Only real moment matrices
// are used: the real part of a feasible complex moment matrix is feasible,
// which identifies a word with its reverse.
//
// Decision variables y = [theta (8 no-signaling coordinates), z (free moments)].

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pbr/coordinates.hpp"

namespace pbr {

/// Label of a row/column of the moment matrix: a product of at most one
/// Alice projector and at most one Bob projector (-1 means identity).
struct OperatorLabel {
  int alice = -1;
  int bob = -1;

  std::string name() const {
    std::string s;
    if (alice >= 0) s += "A" + std::to_string(alice);
    if (bob >= 0) s += "B" + std::to_string(bob);
    return s.empty() ? "1" : s;
  }
};

class MomentStructure {
 public:
  /// What one matrix entry equals: 1, a theta coordinate, or a free moment.
  struct Entry {
    enum class Kind { One, Theta, Free } kind = Kind::One;
    int index = 0;
  };

  /// Level 1: rows {1, A0, A1, B0, B1}.
  static MomentStructure npa_level1() {
    return MomentStructure({{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {-1, 1}});
  }

  /// Level 1+AB: rows {1, A0, A1, B0, B1, A0B0, A0B1, A1B0, A1B1}.
  static MomentStructure almost_quantum() {
    return MomentStructure(
        {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {-1, 1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}});
  }

  int dimension() const { return static_cast<int>(labels_.size()); }
  int free_count() const { return static_cast<int>(free_words_.size()); }
  int num_vars() const { return kNsDim + free_count(); }
  const std::vector<OperatorLabel>& labels() const { return labels_; }
  const Entry& entry(int i, int j) const { return entries_[i * dimension() + j]; }

  /// Free moments rendered as operator strings, e.g. "A0A1|B1".
  std::vector<std::string> free_moment_names() const {
    std::vector<std::string> out;
    for (const auto& w : free_words_) out.push_back(render(w));
    return out;
  }

  /// Constant and per-variable coefficient matrices of Gamma(y).
  std::pair<Eigen::MatrixXd, std::vector<Eigen::MatrixXd>> affine_matrices() const {
    const int d = dimension();
    Eigen::MatrixXd F0 = Eigen::MatrixXd::Zero(d, d);
    std::vector<Eigen::MatrixXd> F(num_vars(), Eigen::MatrixXd::Zero(d, d));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const auto& e = entry(i, j);
        switch (e.kind) {
          case Entry::Kind::One: F0(i, j) = 1.0; break;
          case Entry::Kind::Theta: F[e.index](i, j) = 1.0; break;
          case Entry::Kind::Free: F[kNsDim + e.index](i, j) = 1.0; break;
        }
      }
    return {F0, F};
  }

  Eigen::MatrixXd matrix(const Eigen::VectorXd& y) const {
    const int d = dimension();
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const auto& e = entry(i, j);
        M(i, j) = e.kind == Entry::Kind::One ? 1.0 : e.kind == Entry::Kind::Theta ? y(e.index) : y(kNsDim + e.index);
      }
    return M;
  }

  /// Moments of a classical model: a mixture over the 16 deterministic
  /// strategies, indexed (g0, g1, h0, h1) lexicographically, where g_x / h_y
  /// is the outcome produced for input x / y. The mixture with uniform
  /// weights gives a positive definite moment matrix.
  Eigen::VectorXd classical_moments(const std::array<double, 16>& weights) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(num_vars());
    for (int s = 0; s < 16; ++s) {
      if (weights[s] == 0.0) continue;
      const int g[2] = {(s >> 3) & 1, (s >> 2) & 1};
      const int h[2] = {(s >> 1) & 1, s & 1};
      // projector E_x is the indicator of outcome 0
      auto value = [&](const Word& w) {
        double v = 1.0;
        for (int x : w.first) v *= (g[x] == 0) ? 1.0 : 0.0;
        for (int yb : w.second) v *= (h[yb] == 0) ? 1.0 : 0.0;
        return v;
      };
      for (int x = 0; x < 2; ++x) y(theta_alice(x)) += weights[s] * value({{x}, {}});
      for (int b = 0; b < 2; ++b) y(theta_bob(b)) += weights[s] * value({{}, {b}});
      for (int x = 0; x < 2; ++x)
        for (int b = 0; b < 2; ++b) y(theta_joint(x, b)) += weights[s] * value({{x}, {b}});
      for (int k = 0; k < free_count(); ++k) y(kNsDim + k) += weights[s] * value(free_words_[k]);
    }
    return y;
  }

 private:
  using Word = std::pair<std::vector<int>, std::vector<int>>;

  explicit MomentStructure(std::vector<OperatorLabel> labels) : labels_(std::move(labels)) {
    const int d = dimension();
    entries_.resize(d * d);
    std::map<Word, int> free_index;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const Word w = canonical(product(labels_[i], labels_[j]));
        Entry e;
        if (w.first.size() <= 1 && w.second.size() <= 1) {
          if (w.first.empty() && w.second.empty()) {
            e.kind = Entry::Kind::One;
          } else if (w.second.empty()) {
            e = {Entry::Kind::Theta, theta_alice(w.first[0])};
          } else if (w.first.empty()) {
            e = {Entry::Kind::Theta, theta_bob(w.second[0])};
          } else {
            e = {Entry::Kind::Theta, theta_joint(w.first[0], w.second[0])};
          }
        } else {
          auto [it, inserted] = free_index.try_emplace(w, static_cast<int>(free_words_.size()));
          if (inserted) free_words_.push_back(w);
          e = {Entry::Kind::Free, it->second};
        }
        entries_[i * d + j] = e;
      }
  }

  // S^dag T with S = E_{s.alice} F_{s.bob}; the parties' operators commute.
  static Word product(const OperatorLabel& s, const OperatorLabel& t) {
    Word w;
    if (s.alice >= 0) w.first.push_back(s.alice);
    if (t.alice >= 0) w.first.push_back(t.alice);
    if (s.bob >= 0) w.second.push_back(s.bob);
    if (t.bob >= 0) w.second.push_back(t.bob);
    return w;
  }

  static std::vector<int> reduce(std::vector<int> v) {
    v.erase(std::unique(v.begin(), v.end()), v.end());  // projectors are idempotent
    return v;
  }

  static Word canonical(const Word& raw) {
    Word w{reduce(raw.first), reduce(raw.second)};
    Word r{std::vector<int>(w.first.rbegin(), w.first.rend()), std::vector<int>(w.second.rbegin(), w.second.rend())};
    return std::min(w, r);
  }

  static std::string render(const Word& w) {
    std::string s;
    for (int x : w.first) s += "A" + std::to_string(x);
    s += "|";
    for (int y : w.second) s += "B" + std::to_string(y);
    return s;
  }

  std::vector<OperatorLabel> labels_;
  std::vector<Entry> entries_;
  std::vector<Word> free_words_;
};

}  // namespace pbr
