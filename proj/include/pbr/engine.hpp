#pragma once

// Hypothesis-testing pipeline: split the trials, learn a ratio table from the
// training part, and evaluate the log test statistic on the test part.
//
//   train -> frequencies -> shrinkage -> KL projection -> ratios -> certify
//   test  -> log10 t = sum_i log10 r(a_i,b_i,x_i,y_i) -> p <= min(10^-log10 t, 1)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "pbr/errors.hpp"
#include "pbr/hypothesis_sets.hpp"
#include "pbr/kl_projection.hpp"
#include "pbr/scenario.hpp"

namespace pbr {

/// Default share of trials used for training when n_est is not given.
inline constexpr double kDefaultTrainFraction = 0.2;

struct AnalysisConfig {
  SetKind hypothesis = SetKind::Local;
  std::optional<std::int64_t> n_est;  // overrides train_fraction
  double train_fraction = kDefaultTrainFraction;
  InputDistribution input_distribution = InputDistribution::uniform();
  std::optional<double> shrinkage_eta;  // default 1 / (n_est + 1)
  std::int64_t adaptive_block = 0;      // 0 disables block-adaptive retraining
  ZeroCountPolicy zero_counts = ZeroCountPolicy::UniformFallback;
  conic::Options solver;

  std::int64_t resolve_n_est(std::int64_t n_total) const {
    const std::int64_t n = n_est ? *n_est : static_cast<std::int64_t>(std::floor(train_fraction * n_total));
    if (n <= 0 || n >= n_total)
      throw BadSplit("n_est must satisfy 0 < n_est < N_total (n_est=" + std::to_string(n) +
                     ", N_total=" + std::to_string(n_total) + ")");
    return n;
  }

  double resolve_eta(std::int64_t n_train) const {
    return shrinkage_eta ? *shrinkage_eta : 1.0 / (static_cast<double>(n_train) + 1.0);
  }

  void validate() const {
    if (!n_est && !(train_fraction > 0.0 && train_fraction < 1.0))
      throw ValidationError("train_fraction must lie in (0, 1)");
    if (shrinkage_eta && !(*shrinkage_eta >= 0.0 && *shrinkage_eta < 0.5))
      throw ValidationError("shrinkage eta must lie in [0, 0.5)");
    if (adaptive_block < 0) throw ValidationError("adaptive_block must be >= 0");
  }
};

struct SettingDiagnostics {
  std::uint64_t train_count = 0;
  std::uint64_t test_count = 0;
  bool fallback = false;        // training setting had no counts
  double log10_t_share = 0.0;   // contribution of this setting to log10 t
};

struct BlockRecord {
  std::int64_t first = 0;  // 0-based positions [first, last) of the test block
  std::int64_t last = 0;
  double log10_t = 0.0;
  double raw_bound = 1.0;
  double divergence_bits = 0.0;
};

struct AnalysisReport {
  SetKind hypothesis = SetKind::Local;
  std::int64_t n_est = 0;
  std::int64_t n_test = 0;
  double log10_t = 0.0;
  double p_bound = 1.0;
  double certified_bound = 1.0;  // largest certified expectation over all ratio tables used
  double raw_bound = 1.0;        // largest pre-renormalization certificate m
  double divergence_bits = 0.0;  // projection of the (first) training frequencies
  double solver_gap_bits = 0.0;
  double ns_check_max_violation = 0.0;
  InputDistribution assumed_input_distribution;
  double shrinkage_eta = 0.0;
  std::int64_t adaptive_block = 0;
  bool trial_ordering_available = true;
  std::array<SettingDiagnostics, kSettings> settings{};
  Behavior training_frequencies;  // after shrinkage
  Behavior minimizer;
  RatioTable ratios;  // certified table of the first block
  std::vector<BlockRecord> blocks;
};

/// Order-preserving prefix / suffix split.
inline std::pair<TrialSequence, TrialSequence> split_trials(const TrialSequence& seq, std::int64_t n_est) {
  if (n_est <= 0 || n_est >= static_cast<std::int64_t>(seq.size()))
    throw BadSplit("n_est must satisfy 0 < n_est < " + std::to_string(seq.size()));
  const auto& t = seq.trials();
  return {TrialSequence({t.begin(), t.begin() + n_est}), TrialSequence({t.begin() + n_est, t.end()})};
}

namespace detail {

inline std::array<double, kCells> log10_ratios(const RatioTable& r) {
  std::array<double, kCells> lr;
  for (int i = 0; i < kCells; ++i)
    lr[i] = r.r[i] > 0.0 ? std::log10(r.r[i]) : -std::numeric_limits<double>::infinity();
  return lr;
}

// Neumaier summation in extended precision
class Accumulator {
 public:
  void add(long double v) {
    const long double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return static_cast<double>(sum_ + comp_); }

 private:
  long double sum_ = 0.0L, comp_ = 0.0L;
};

}  // namespace detail

/// log10 t as the trial-by-trial sum of log10 r; -inf if a test trial hits r = 0.
inline double log_statistic(const RatioTable& r, const TrialSequence& test, std::size_t first = 0,
                            std::size_t last = std::numeric_limits<std::size_t>::max()) {
  const auto lr = detail::log10_ratios(r);
  last = std::min(last, test.size());
  detail::Accumulator acc;
  for (std::size_t i = first; i < last; ++i) {
    const double v = lr[test[i].cell()];
    if (std::isinf(v)) return -std::numeric_limits<double>::infinity();
    acc.add(v);
  }
  return acc.value();
}

/// log10 t = sum over cells of N' log10 r.
inline double log_statistic(const RatioTable& r, const CountsTable& test) {
  const auto lr = detail::log10_ratios(r);
  detail::Accumulator acc;
  for (int i = 0; i < kCells; ++i) {
    if (test[i] == 0) continue;
    if (std::isinf(lr[i])) return -std::numeric_limits<double>::infinity();
    acc.add(static_cast<long double>(test[i]) * static_cast<long double>(lr[i]));
  }
  return acc.value();
}

/// min(10^-log10_t, 1), kept strictly positive.
inline double p_bound(double log10_t) {
  if (!(log10_t > 0.0)) return 1.0;
  return std::max(std::pow(10.0, -log10_t), std::numeric_limits<double>::denorm_min());
}

namespace detail {

struct TrainedRatios {
  Frequencies raw;
  Behavior shrunk;
  ProjectionResult projection;
  RatioTable ratios;
  double eta = 0.0;
};

inline TrainedRatios train_ratios(const CountsTable& train, const AnalysisConfig& cfg, const HypothesisSet& h) {
  TrainedRatios out;
  out.raw = frequencies_from_counts(train, cfg.zero_counts);
  out.eta = cfg.resolve_eta(static_cast<std::int64_t>(train.total()));
  out.shrunk = out.eta > 0.0 ? mix(1.0 - out.eta, out.raw.behavior, Behavior::uniform()) : out.raw.behavior;
  out.projection = project_kl(out.shrunk, cfg.input_distribution, h, {cfg.solver, std::nullopt});
  out.ratios = certify_ratios(build_ratios(out.shrunk, out.projection), cfg.input_distribution, h, cfg.solver);
  return out;
}

inline AnalysisReport start_report(const AnalysisConfig& cfg, const CountsTable& train, const CountsTable& test,
                                   const TrainedRatios& tr) {
  AnalysisReport rep;
  rep.hypothesis = cfg.hypothesis;
  rep.n_est = static_cast<std::int64_t>(train.total());
  rep.n_test = static_cast<std::int64_t>(test.total());
  rep.certified_bound = tr.ratios.certified_bound;
  rep.raw_bound = tr.ratios.raw_bound;
  rep.divergence_bits = tr.projection.divergence;
  rep.solver_gap_bits = tr.projection.solver_gap;
  rep.ns_check_max_violation = is_nonsignaling(tr.raw.behavior).max_violation;
  rep.assumed_input_distribution = cfg.input_distribution;
  rep.shrinkage_eta = tr.eta;
  rep.adaptive_block = cfg.adaptive_block;
  rep.training_frequencies = tr.shrunk;
  rep.minimizer = tr.projection.minimizer;
  rep.ratios = tr.ratios;
  const auto lr = log10_ratios(tr.ratios);
  for (int s = 0; s < kSettings; ++s) {
    auto& d = rep.settings[s];
    d.train_count = train.setting_total(s / 2, s % 2);
    d.test_count = test.setting_total(s / 2, s % 2);
    d.fallback = tr.raw.fallback[s];
    for (int o = 0; o < kOutcomes; ++o) {
      const int c = s * kOutcomes + o;
      if (test[c] > 0) d.log10_t_share += static_cast<double>(test[c]) * lr[c];
    }
  }
  return rep;
}

inline void finish_report(AnalysisReport& rep) { rep.p_bound = p_bound(rep.log10_t); }

}  // namespace detail

/// Counts-only analysis: ratios learned from `train`, statistic evaluated on
/// `test` in counts form. Trial ordering is not available in this mode.
inline AnalysisReport analyze_counts_pair(const CountsTable& train, const CountsTable& test,
                                          const AnalysisConfig& cfg) {
  cfg.validate();
  if (train.total() == 0 || test.total() == 0) throw BadSplit("training and test counts must both be nonempty");
  const auto h = HypothesisSet::make(cfg.hypothesis);
  const auto tr = detail::train_ratios(train, cfg, h);
  auto rep = detail::start_report(cfg, train, test, tr);
  rep.log10_t = log_statistic(tr.ratios, test);
  rep.trial_ordering_available = false;
  rep.blocks.push_back({0, rep.n_test, rep.log10_t, tr.ratios.raw_bound, tr.projection.divergence});
  detail::finish_report(rep);
  return rep;
}

/// Ratios rebuilt before each block of `adaptive_block` test trials from all
/// trials preceding the block.
inline AnalysisReport block_adaptive_analyze(const TrialSequence& seq, const AnalysisConfig& cfg) {
  cfg.validate();
  if (cfg.adaptive_block < 1) throw ValidationError("block-adaptive analysis needs adaptive_block >= 1");
  const std::int64_t n_total = static_cast<std::int64_t>(seq.size());
  const std::int64_t n_est = cfg.resolve_n_est(n_total);
  const auto h = HypothesisSet::make(cfg.hypothesis);

  AnalysisReport rep;
  double total = 0.0;
  for (std::int64_t first = n_est; first < n_total; first += cfg.adaptive_block) {
    const std::int64_t last = std::min(n_total, first + cfg.adaptive_block);
    const auto train = seq.counts(0, static_cast<std::size_t>(first));
    const auto tr = detail::train_ratios(train, cfg, h);
    const double lt = log_statistic(tr.ratios, seq, static_cast<std::size_t>(first), static_cast<std::size_t>(last));
    if (first == n_est) rep = detail::start_report(cfg, train, seq.counts(static_cast<std::size_t>(n_est), seq.size()), tr);
    rep.certified_bound = std::max(rep.certified_bound, tr.ratios.certified_bound);
    rep.raw_bound = std::max(rep.raw_bound, tr.ratios.raw_bound);
    rep.blocks.push_back({first, last, lt, tr.ratios.raw_bound, tr.projection.divergence});
    total = (std::isinf(total) || std::isinf(lt)) ? -std::numeric_limits<double>::infinity() : total + lt;
  }
  rep.log10_t = total;
  if (rep.blocks.size() > 1)
    for (auto& d : rep.settings) d.log10_t_share = std::numeric_limits<double>::quiet_NaN();
  detail::finish_report(rep);
  return rep;
}

/// Full pipeline on a time-ordered trial sequence.
inline AnalysisReport analyze_sequence(const TrialSequence& seq, const AnalysisConfig& cfg) {
  cfg.validate();
  if (seq.empty()) throw ValidationError("empty trial sequence");
  if (cfg.adaptive_block > 0) return block_adaptive_analyze(seq, cfg);
  const std::int64_t n_est = cfg.resolve_n_est(static_cast<std::int64_t>(seq.size()));
  const auto h = HypothesisSet::make(cfg.hypothesis);
  const auto train = seq.counts(0, static_cast<std::size_t>(n_est));
  const auto test = seq.counts(static_cast<std::size_t>(n_est), seq.size());
  const auto tr = detail::train_ratios(train, cfg, h);
  auto rep = detail::start_report(cfg, train, test, tr);
  rep.log10_t = log_statistic(tr.ratios, seq, static_cast<std::size_t>(n_est));
  rep.blocks.push_back({n_est, static_cast<std::int64_t>(seq.size()), rep.log10_t, tr.ratios.raw_bound,
                        tr.projection.divergence});
  detail::finish_report(rep);
  return rep;
}

}  // namespace pbr
