#pragma once

// Sources mixing a PR box with white noise and with nonsignaling-vertex
// noise, trial sampling, and batches of simulated Bell tests.
//
// Random numbers: std::mt19937_64; experiment e of a batch uses seed ^ e. A
// uniform variate is (next() >> 11) * 2^-53. Categorical draws use the
// inverse CDF over the frozen orderings below, with the last CDF entry set
// to exactly 1. Per trial, TRIALWISE mode draws the noise vertex first, then
// (x,y), then (a,b); IID mode draws (x,y) then (a,b).

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "pbr/engine.hpp"
#include "pbr/errors.hpp"
#include "pbr/hypothesis_sets.hpp"
#include "pbr/scenario.hpp"

namespace pbr {

inline constexpr int kNoiseVertices = 24;
using NoiseWeights = std::array<double, kNoiseVertices>;

enum class SourceMode { Iid, Trialwise };

inline std::string to_string(SourceMode m) { return m == SourceMode::Iid ? "iid" : "trialwise"; }

inline SourceMode parse_source_mode(const std::string& s) {
  if (s == "iid") return SourceMode::Iid;
  if (s == "trialwise") return SourceMode::Trialwise;
  throw ValidationError("unknown source mode '" + s + "' (expected iid or trialwise)");
}

struct SourceSpec {
  SourceMode mode = SourceMode::Iid;
  double v = 0.72;
  double epsilon = 0.01;
  std::optional<NoiseWeights> noise_weights;  // nullopt: uniform over the 24 vertices
  std::uint64_t seed = 0;

  NoiseWeights weights() const {
    if (noise_weights) return *noise_weights;
    NoiseWeights w;
    w.fill(1.0 / kNoiseVertices);
    return w;
  }

  void validate() const {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("v must lie in [0, 1]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
    if (noise_weights) {
      double s = 0.0;
      for (double p : *noise_weights) {
        if (!(p >= 0.0)) throw ValidationError("noise weights must be nonnegative");
        s += p;
      }
      if (std::abs(s - 1.0) > kExactTol) throw ValidationError("noise weights must sum to 1");
    }
  }
};

inline const char* kRngName = "mt19937_64";

/// v * PR + (1 - v) * white noise.
inline Behavior iso_source(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("v must lie in [0, 1]");
  return mix(v, pr_box(), Behavior::uniform());
}

/// (1 - eps) * iso_source(v) + eps * sum_j p_j vertex_j.
inline Behavior mixed_source(double v, double epsilon, const NoiseWeights& weights) {
  const auto verts = nosignaling_vertices();
  const Behavior iso = iso_source(v);
  CellTable t{};
  for (int i = 0; i < kCells; ++i) {
    double noise = 0.0;
    for (int j = 0; j < kNoiseVertices; ++j) noise += weights[j] * verts[j][i];
    t[i] = (1.0 - epsilon) * iso[i] + epsilon * noise;
  }
  return Behavior::from_table(t);
}

inline Behavior mixed_source(const SourceSpec& s) {
  s.validate();
  return mixed_source(s.v, s.epsilon, s.weights());
}

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <std::size_t N>
std::array<double, N> make_cdf(const std::array<double, N>& p) {
  std::array<double, N> c;
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    s += p[i];
    c[i] = s;
  }
  c[N - 1] = 1.0;
  return c;
}

template <std::size_t N>
int draw(const std::array<double, N>& cdf, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  for (std::size_t i = 0; i + 1 < N; ++i)
    if (u < cdf[i]) return static_cast<int>(i);
  return static_cast<int>(N - 1);
}

inline std::array<double, kOutcomes> outcome_row(const Behavior& b, int s) {
  std::array<double, kOutcomes> p;
  for (int o = 0; o < kOutcomes; ++o) p[o] = b[s * kOutcomes + o];
  return p;
}

}  // namespace detail

/// Precomputed inverse-CDF tables for one source and input distribution.
class TrialSampler {
 public:
  TrialSampler(const SourceSpec& spec, const InputDistribution& dist) : mode_(spec.mode) {
    spec.validate();
    settings_cdf_ = detail::make_cdf(dist.table());
    const Behavior mixed = mixed_source(spec);
    for (int s = 0; s < kSettings; ++s) iid_cdf_[s] = detail::make_cdf(detail::outcome_row(mixed, s));
    if (mode_ == SourceMode::Trialwise) {
      vertex_cdf_ = detail::make_cdf(spec.weights());
      const auto verts = nosignaling_vertices();
      const Behavior iso = iso_source(spec.v);
      vertex_outcome_cdf_.resize(kNoiseVertices);
      for (int j = 0; j < kNoiseVertices; ++j) {
        const Behavior bj = mix(1.0 - spec.epsilon, iso, verts[j]);
        for (int s = 0; s < kSettings; ++s) vertex_outcome_cdf_[j][s] = detail::make_cdf(detail::outcome_row(bj, s));
      }
    }
  }

  Trial draw(std::mt19937_64& rng, std::int64_t index) const {
    const std::array<double, kOutcomes>* row = nullptr;
    int s = 0;
    if (mode_ == SourceMode::Trialwise) {
      const int j = detail::draw(vertex_cdf_, rng);
      s = detail::draw(settings_cdf_, rng);
      row = &vertex_outcome_cdf_[j][s];
    } else {
      s = detail::draw(settings_cdf_, rng);
      row = &iid_cdf_[s];
    }
    const int o = detail::draw(*row, rng);
    Trial t;
    t.index = index;
    t.x = static_cast<std::uint8_t>(s / 2);
    t.y = static_cast<std::uint8_t>(s % 2);
    t.a = static_cast<std::uint8_t>(o / 2);
    t.b = static_cast<std::uint8_t>(o % 2);
    return t;
  }

 private:
  using OutcomeCdf = std::array<double, kOutcomes>;
  SourceMode mode_;
  std::array<double, kSettings> settings_cdf_{};
  std::array<OutcomeCdf, kSettings> iid_cdf_{};
  std::array<double, kNoiseVertices> vertex_cdf_{};
  std::vector<std::array<OutcomeCdf, kSettings>> vertex_outcome_cdf_;
};

inline Trial draw_trial(const SourceSpec& spec, const InputDistribution& dist, std::mt19937_64& rng,
                        std::int64_t index = 1) {
  return TrialSampler(spec, dist).draw(rng, index);
}

/// n trials from the stream seeded with `seed`.
inline TrialSequence simulate(const SourceSpec& spec, const InputDistribution& dist, std::int64_t n,
                              std::uint64_t seed) {
  if (n <= 0) throw ValidationError("number of trials must be positive");
  const TrialSampler sampler(spec, dist);
  std::mt19937_64 rng(seed);
  std::vector<Trial> trials(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) trials[i] = sampler.draw(rng, i + 1);
  return TrialSequence(std::move(trials));
}

inline TrialSequence simulate(const SourceSpec& spec, const InputDistribution& dist, std::int64_t n) {
  return simulate(spec, dist, n, spec.seed);
}

/// A weight vector drawn uniformly from the simplex.
inline NoiseWeights random_noise_weights(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NoiseWeights w;
  double s = 0.0;
  for (auto& p : w) {
    p = -std::log1p(-detail::uniform01(rng));
    s += p;
  }
  for (auto& p : w) p /= s;
  return w;
}

// p_bound thresholds of the cumulative summary bins; the last bin counts
// trivial bounds (exactly 1).
inline constexpr std::array<double, 4> kBinThresholds = {1e-10, 1e-4, 1e-2, 1e-1};
inline constexpr int kBins = 5;

struct ExperimentRecord {
  int experiment = 0;
  std::uint64_t seed = 0;
  std::vector<AnalysisReport> reports;  // one per analysis config
};

struct HypothesisRow {
  std::string label;
  SetKind hypothesis = SetKind::Local;
  std::array<int, kBins> counts{};
  double smallest_p_bound = 1.0;

  double fraction(int bin, int n) const { return n > 0 ? static_cast<double>(counts[bin]) / n : 0.0; }
};

struct BatchSummary {
  std::string rng = kRngName;
  SourceSpec source;
  InputDistribution input_distribution;
  int n_experiments = 0;
  std::int64_t n_total = 0;
  std::vector<HypothesisRow> rows;
  std::vector<ExperimentRecord> records;
};

inline void add_to_row(HypothesisRow& row, double p) {
  for (int k = 0; k < 4; ++k)
    if (p <= kBinThresholds[k]) ++row.counts[k];
  if (p == 1.0) ++row.counts[4];
  row.smallest_p_bound = std::min(row.smallest_p_bound, p);
}

/// Experiments run on `threads` workers (0: hardware concurrency); the
/// summary does not depend on scheduling.
inline BatchSummary run_batch(const SourceSpec& spec, const InputDistribution& dist, int n_experiments,
                              std::int64_t n_total, const std::vector<AnalysisConfig>& analyses,
                              unsigned threads = 0) {
  spec.validate();
  if (n_experiments <= 0) throw ValidationError("number of experiments must be positive");
  if (n_total <= 1) throw ValidationError("trials per experiment must be at least 2");
  if (analyses.empty()) throw ValidationError("at least one hypothesis is required");

  BatchSummary out;
  out.source = spec;
  out.input_distribution = dist;
  out.n_experiments = n_experiments;
  out.n_total = n_total;
  out.records.resize(n_experiments);

  const TrialSampler sampler(spec, dist);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int e = next++; e < n_experiments; e = next++) {
      try {
        ExperimentRecord rec;
        rec.experiment = e;
        rec.seed = spec.seed ^ static_cast<std::uint64_t>(e);
        std::mt19937_64 rng(rec.seed);
        std::vector<Trial> trials(static_cast<std::size_t>(n_total));
        for (std::int64_t i = 0; i < n_total; ++i) trials[i] = sampler.draw(rng, i + 1);
        const TrialSequence seq(std::move(trials));
        for (const auto& cfg : analyses) rec.reports.push_back(analyze_sequence(seq, cfg));
        out.records[e] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_experiments;
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_experiments));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& cfg : analyses) {
    HypothesisRow row;
    row.hypothesis = cfg.hypothesis;
    row.label = to_string(cfg.hypothesis);
    out.rows.push_back(row);
  }
  for (const auto& rec : out.records)
    for (std::size_t k = 0; k < analyses.size(); ++k) add_to_row(out.rows[k], rec.reports[k].p_bound);
  return out;
}

}  // namespace pbr
