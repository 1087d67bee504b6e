#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pbr/engine.hpp"
#include "pbr/simulator.hpp"

using namespace pbr;

namespace {

TrialSequence numbered(int n) {
  std::vector<Trial> t;
  for (int i = 1; i <= n; ++i) t.push_back({i, std::uint8_t(i % 2), std::uint8_t((i / 2) % 2), 0, 1});
  return TrialSequence(t);
}

RatioTable random_ratios(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  RatioTable r;
  for (double& v : r.r) v = u(rng);
  return r;
}

CellTable signaling_table() {
  // Alice's marginal depends on Bob's setting
  CellTable t{};
  for (int x = 0; x < 2; ++x) {
    t[cell_index(x, 0, 0, 0)] = 0.35;
    t[cell_index(x, 0, 0, 1)] = 0.25;
    t[cell_index(x, 0, 1, 0)] = 0.15;
    t[cell_index(x, 0, 1, 1)] = 0.25;
    t[cell_index(x, 1, 0, 0)] = 0.2;
    t[cell_index(x, 1, 0, 1)] = 0.2;
    t[cell_index(x, 1, 1, 0)] = 0.3;
    t[cell_index(x, 1, 1, 1)] = 0.3;
  }
  return t;
}

}  // namespace

TEST(Split, PrefixSuffix) {
  const auto seq = numbered(10);
  const auto [train, test] = split_trials(seq, 5);
  ASSERT_EQ(train.size(), 5u);
  ASSERT_EQ(test.size(), 5u);
  EXPECT_EQ(train[0].index, 1);
  EXPECT_EQ(train[4].index, 5);
  EXPECT_EQ(test[0].index, 6);
  EXPECT_EQ(test[4].index, 10);
  EXPECT_EQ(split_trials(seq, 9).second.size(), 1u);
  EXPECT_THROW(split_trials(seq, 10), BadSplit);
  EXPECT_THROW(split_trials(seq, 0), BadSplit);
}

TEST(LogStatistic, UnitRatiosAndSingleTrial) {
  RatioTable ones;
  ones.r.fill(1.0);
  const auto seq = numbered(50);
  EXPECT_EQ(log_statistic(ones, seq), 0.0);
  EXPECT_EQ(log_statistic(ones, seq.counts()), 0.0);

  RatioTable r = ones;
  const TrialSequence one({{1, 1, 0, 1, 1}});
  r.r[one[0].cell()] = 2.0;
  EXPECT_DOUBLE_EQ(log_statistic(r, one), std::log10(2.0));
}

TEST(LogStatistic, ZeroRatioGivesMinusInfinity) {
  RatioTable r;
  r.r.fill(1.0);
  const auto seq = numbered(4);
  r.r[seq[2].cell()] = 0.0;
  EXPECT_TRUE(std::isinf(log_statistic(r, seq)) && log_statistic(r, seq) < 0);
  EXPECT_TRUE(std::isinf(log_statistic(r, seq.counts())) && log_statistic(r, seq.counts()) < 0);
  EXPECT_EQ(p_bound(log_statistic(r, seq)), 1.0);
}

TEST(LogStatistic, CountsFormEqualsTrialProduct) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const auto r = random_ratios(rng);
    SourceSpec spec;
    spec.v = 0.3 + 0.005 * k;
    const auto seq = simulate(spec, InputDistribution::uniform(), 1000 + 90 * k, 1000 + k);
    EXPECT_NEAR(log_statistic(r, seq), log_statistic(r, seq.counts()), 1e-12);
  }
}

TEST(PBound, Values) {
  EXPECT_EQ(p_bound(0.0), 1.0);
  EXPECT_DOUBLE_EQ(p_bound(20.0), 1e-20);
  EXPECT_EQ(p_bound(-5.0), 1.0);
  EXPECT_EQ(p_bound(-std::numeric_limits<double>::infinity()), 1.0);
  const double tiny = p_bound(1e6);
  EXPECT_GT(tiny, 0.0);
  EXPECT_LE(tiny, 1.0);
  double prev = 1.0;
  for (double l = -3; l < 400; l += 0.5) {
    EXPECT_LE(p_bound(l), prev);
    prev = p_bound(l);
  }
}

TEST(Config, Validation) {
  AnalysisConfig c;
  EXPECT_EQ(c.resolve_n_est(1000), 200);
  c.n_est = 1000;
  EXPECT_THROW(c.resolve_n_est(1000), BadSplit);
  c.n_est = 0;
  EXPECT_THROW(c.resolve_n_est(1000), BadSplit);
  AnalysisConfig e;
  e.shrinkage_eta = 0.5;
  EXPECT_THROW(e.validate(), ValidationError);
  e.shrinkage_eta = -0.1;
  EXPECT_THROW(e.validate(), ValidationError);
  EXPECT_DOUBLE_EQ(AnalysisConfig{}.resolve_eta(99), 0.01);
}

TEST(AnalyzeSequence, ReportCarriesThePipeline) {
  SourceSpec spec;
  const auto seq = simulate(spec, InputDistribution::uniform(), 20000, 4);
  AnalysisConfig cfg;
  cfg.hypothesis = SetKind::AlmostQuantum;
  const auto rep = analyze_sequence(seq, cfg);
  EXPECT_EQ(rep.n_est, 4000);
  EXPECT_EQ(rep.n_test, 16000);
  EXPECT_DOUBLE_EQ(rep.shrinkage_eta, 1.0 / 4001.0);
  EXPECT_EQ(rep.p_bound, p_bound(rep.log10_t));
  EXPECT_LE(rep.certified_bound, 1.0);
  EXPECT_GE(rep.ns_check_max_violation, 0.0);
  EXPECT_TRUE(rep.trial_ordering_available);
  double share = 0.0;
  std::uint64_t test_total = 0;
  for (const auto& s : rep.settings) {
    share += s.log10_t_share;
    test_total += s.test_count;
  }
  EXPECT_NEAR(share, rep.log10_t, 1e-9);
  EXPECT_EQ(test_total, 16000u);
  // the sequence and its counts give the same statistic
  EXPECT_NEAR(log_statistic(rep.ratios, seq.counts(4000, seq.size())), rep.log10_t, 1e-12);
}

TEST(AnalyzeCountsPair, ValidOnIndependentLocalTables) {
  // independent train and test tables from a local source: Pr(p <= q) <= q up to binomial slack
  std::mt19937_64 rng(41);
  AnalysisConfig cfg;
  cfg.hypothesis = SetKind::Local;
  const int n = 200;
  int below = 0;
  for (int e = 0; e < n; ++e) {
    const auto train = oracle::sample_counts(iso_source(0.5), 500, rng);
    const auto test = oracle::sample_counts(iso_source(0.5), 2000, rng);
    const auto rep = analyze_counts_pair(train, test, cfg);
    EXPECT_FALSE(rep.trial_ordering_available);
    below += rep.p_bound <= 0.1;
  }
  EXPECT_LE(below / double(n), 0.1 + 3 * std::sqrt(0.1 * 0.9 / n));
}

TEST(AnalyzeCountsPair, SignalingDataGrowsLinearly) {
  const auto src = Behavior::from_table(signaling_table());
  const auto dist = InputDistribution::uniform();
  const auto h = HypothesisSet::make(SetKind::Nosignaling);
  const double slope = project_kl(src, dist, h).divergence * std::log10(2.0);
  ASSERT_GT(slope, 1e-3);
  std::mt19937_64 rng(42);
  AnalysisConfig cfg;
  cfg.hypothesis = SetKind::Nosignaling;
  double prev = 0.0;
  for (std::uint64_t n : {25000u, 250000u}) {
    const auto train = oracle::sample_counts(src, n, rng);
    const auto test = oracle::sample_counts(src, n, rng);
    const auto rep = analyze_counts_pair(train, test, cfg);
    EXPECT_NEAR(rep.log10_t / double(rep.n_test), slope, 0.05 * slope) << n;
    EXPECT_GT(rep.log10_t, prev);
    prev = rep.log10_t;
  }
  EXPECT_LT(p_bound(prev), 1e-100);
}

TEST(AnalyzeCountsPair, OrderSensitive) {
  std::mt19937_64 rng(43);
  const auto a = oracle::sample_counts(iso_source(0.9), 3000, rng);
  const auto b = oracle::sample_counts(iso_source(0.75), 3000, rng);
  AnalysisConfig cfg;
  cfg.hypothesis = SetKind::Local;
  EXPECT_NE(analyze_counts_pair(a, b, cfg).log10_t, analyze_counts_pair(b, a, cfg).log10_t);
}

TEST(AnalyzeCountsPair, EmptyTablesAreRejected) {
  AnalysisConfig cfg;
  EXPECT_THROW(analyze_counts_pair(CountsTable{}, CountsTable{}, cfg), BadSplit);
}

TEST(BlockAdaptive, OneBlockMatchesStaticAnalysis) {
  const auto seq = simulate(SourceSpec{}, InputDistribution::uniform(), 30000, 8);
  for (auto k : {SetKind::Local, SetKind::AlmostQuantum}) {
    AnalysisConfig cfg;
    cfg.hypothesis = k;
    const auto stat = analyze_sequence(seq, cfg);
    cfg.adaptive_block = stat.n_test;
    const auto ad = block_adaptive_analyze(seq, cfg);
    EXPECT_NEAR(ad.log10_t, stat.log10_t, 1e-12);
    EXPECT_EQ(ad.p_bound, stat.p_bound);
    EXPECT_EQ(ad.blocks.size(), 1u);
  }
}

TEST(BlockAdaptive, BlocksCoverTheTestSet) {
  const auto seq = simulate(SourceSpec{}, InputDistribution::uniform(), 10000, 9);
  AnalysisConfig cfg;
  cfg.hypothesis = SetKind::Local;
  cfg.adaptive_block = 3000;
  const auto rep = analyze_sequence(seq, cfg);
  ASSERT_EQ(rep.blocks.size(), 3u);
  EXPECT_EQ(rep.blocks[0].first, 2000);
  EXPECT_EQ(rep.blocks[2].last, 10000);
  double total = 0.0;
  for (const auto& b : rep.blocks) total += b.log10_t;
  EXPECT_NEAR(total, rep.log10_t, 1e-12);
  cfg.adaptive_block = -1;
  EXPECT_THROW(analyze_sequence(seq, cfg), ValidationError);
}

TEST(BlockAdaptive, ValidUnderTheNull) {
  // LOCAL boundary source, hypothesis LOCAL: Pr(p <= q) <= q up to binomial slack
  SourceSpec spec;
  spec.v = 0.5;
  spec.epsilon = 0.0;
  AnalysisConfig cfg;
  cfg.hypothesis = SetKind::Local;
  cfg.adaptive_block = 1000;
  const int n = 100;
  int below = 0;
  for (int e = 0; e < n; ++e) {
    const auto rep = analyze_sequence(simulate(spec, InputDistribution::uniform(), 5000, 500 + e), cfg);
    below += rep.p_bound <= 0.1;
  }
  EXPECT_LE(below / double(n), 0.1 + 3 * std::sqrt(0.1 * 0.9 / n));
}

TEST(AnalyzeSequence, ValidUnderTheNullForEverySet) {
  // iso_source(0.5) sits on the local boundary and hence inside all four sets
  SourceSpec spec;
  spec.v = 0.5;
  spec.epsilon = 0.0;
  const int n = 200;
  for (auto k : {SetKind::Local, SetKind::Nosignaling, SetKind::Npa1, SetKind::AlmostQuantum}) {
    AnalysisConfig cfg;
    cfg.hypothesis = k;
    std::vector<double> p;
    for (int e = 0; e < n; ++e) p.push_back(analyze_sequence(simulate(spec, InputDistribution::uniform(), 5000, 700 + e), cfg).p_bound);
    for (double q : {0.01, 0.1, 0.5}) {
      const double frac = std::count_if(p.begin(), p.end(), [&](double v) { return v <= q; }) / double(n);
      EXPECT_LE(frac, q + 3 * std::sqrt(q * (1 - q) / n)) << to_string(k) << " q=" << q;
    }
  }
}
