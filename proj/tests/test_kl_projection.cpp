#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pbr/kl_projection.hpp"
#include "pbr/simulator.hpp"

using namespace pbr;

namespace {

const HypothesisSet& set(SetKind k) {
  static const HypothesisSet sets[] = {HypothesisSet::make(SetKind::Local), HypothesisSet::make(SetKind::Nosignaling),
                                       HypothesisSet::make(SetKind::Npa1), HypothesisSet::make(SetKind::AlmostQuantum)};
  return sets[static_cast<int>(k)];
}

const SetKind kAll[] = {SetKind::Local, SetKind::Nosignaling, SetKind::Npa1, SetKind::AlmostQuantum};

// PR projected onto LOCAL, computed once with the independent EM oracle
double pr_local_oracle_bits() {
  static const double v = oracle::local_projection_bits(pr_box().table(), {0.25, 0.25, 0.25, 0.25});
  return v;
}

}  // namespace

TEST(KlDivergence, ClosedForms) {
  const auto dist = InputDistribution::uniform();
  EXPECT_EQ(kl_divergence(pr_box(), pr_box(), dist), 0.0);
  CellTable t{};
  for (int s = 0; s < kSettings; ++s) t[s * kOutcomes + (s % 4)] = 1.0;
  EXPECT_DOUBLE_EQ(kl_divergence(Behavior::from_table(t), Behavior::uniform(), dist), 2.0);
  EXPECT_TRUE(std::isinf(kl_divergence(Behavior::uniform(), pr_box(), dist)));
}

TEST(KlDivergence, AgreesWithTheProjection) {
  const auto dist = InputDistribution::uniform();
  const auto p = project_kl(pr_box(), dist, set(SetKind::Local));
  EXPECT_NEAR(kl_divergence(pr_box(), p.minimizer, dist), p.divergence, 1e-9);
}

TEST(ProjectKl, WhiteNoiseIsInEverySet) {
  for (auto k : kAll) {
    const auto p = project_kl(Behavior::uniform(), InputDistribution::uniform(), set(k));
    EXPECT_LT(p.divergence, 1e-12);
    EXPECT_LT(max_abs_difference(p.minimizer, Behavior::uniform()), 1e-9);
  }
}

TEST(ProjectKl, PrIsNosignaling) {
  const auto p = project_kl(pr_box(), InputDistribution::uniform(), set(SetKind::Nosignaling));
  EXPECT_LT(p.divergence, 1e-9);
  EXPECT_LT(max_abs_difference(p.minimizer, pr_box()), 1e-9);
}

TEST(ProjectKl, PrOntoLocalMatchesOracle) {
  const auto p = project_kl(pr_box(), InputDistribution::uniform(), set(SetKind::Local));
  EXPECT_NEAR(p.divergence, pr_local_oracle_bits(), 1e-4);
  EXPECT_LE(p.solver_gap, 1e-9);
  EXPECT_LE(p.lower_bound, p.divergence);
  EXPECT_GE(membership(p.minimizer, set(SetKind::Local)).margin, -1e-7);
}

TEST(ProjectKl, MinimizersAreMembers) {
  const Behavior src = mixed_source(0.72, 0.01, SourceSpec{}.weights());
  for (auto k : kAll) {
    const auto p = project_kl(src, InputDistribution::uniform(), set(k));
    EXPECT_GE(membership(p.minimizer, set(k)).margin, -1e-7) << to_string(k);
    EXPECT_GE(p.divergence, 0.0);
  }
}

TEST(ProjectKl, InteriorBehaviorsHaveZeroDivergence) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 10; ++i) {
    const auto b = oracle::random_local_interior(rng);
    for (auto k : kAll) EXPECT_LT(project_kl(b, InputDistribution::uniform(), set(k)).divergence, 1e-8);
  }
}

TEST(ProjectKl, UniqueAcrossStartingPoints) {
  std::mt19937_64 rng(22);
  std::exponential_distribution<double> expo(1.0);
  const Behavior src = mixed_source(0.72, 0.01, SourceSpec{}.weights());
  for (auto k : kAll) {
    for (const Behavior& f : {pr_box(), src}) {
      const auto a = project_kl(f, InputDistribution::uniform(), set(k));
      ProjectionOptions opt;
      std::array<double, 16> w;
      double s = 0.0;
      for (auto& x : w) s += (x = expo(rng) + 0.01);
      for (auto& x : w) x /= s;
      opt.start_weights = w;
      const auto b = project_kl(f, InputDistribution::uniform(), set(k), opt);
      for (int c = 0; c < kCells; ++c)
        if (f[c] > 0) EXPECT_NEAR(a.minimizer[c], b.minimizer[c], 1e-6) << to_string(k) << " cell " << c;
    }
  }
}

TEST(ProjectKl, PythagoreanInequality) {
  std::mt19937_64 rng(23);
  const auto dist = InputDistribution::uniform();
  const Behavior f = iso_source(0.9);
  const auto p = project_kl(f, dist, set(SetKind::Local));
  for (int i = 0; i < 100; ++i) {
    const auto q = oracle::random_local_interior(rng);
    EXPECT_LE(p.divergence, kl_divergence(f, q, dist) + 1e-12);
  }
}

TEST(ProjectKl, LargerSetsAreCloser) {
  std::mt19937_64 rng(24);
  const auto dist = InputDistribution::uniform();
  for (int i = 0; i < 5; ++i) {
    const auto f = oracle::random_nosignaling(rng);
    double d[4];
    for (auto k : kAll) d[static_cast<int>(k)] = project_kl(f, dist, set(k)).divergence;
    EXPECT_LE(d[1], d[2] + 1e-7);
    EXPECT_LE(d[2], d[3] + 1e-7);
    EXPECT_LE(d[3], d[0] + 1e-7);
  }
}

TEST(ProjectKl, NonuniformInputDistribution) {
  const auto dist = InputDistribution::from_table({0.4, 0.3, 0.2, 0.1});
  const auto p = project_kl(pr_box(), dist, set(SetKind::Local));
  const double ref = oracle::local_projection_bits(pr_box().table(), dist.table(), 10, 20000, 7);
  EXPECT_NEAR(p.divergence, ref, 1e-4);
}

TEST(Ratios, IdentityInsideTheSet) {
  std::mt19937_64 rng(25);
  const auto f = oracle::random_local_interior(rng);
  const auto p = project_kl(f, InputDistribution::uniform(), set(SetKind::Local));
  const auto r = build_ratios(f, p);
  for (double v : r.r) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Ratios, PrOntoLocal) {
  const auto dist = InputDistribution::uniform();
  const auto p = project_kl(pr_box(), dist, set(SetKind::Local));
  const auto r = build_ratios(pr_box(), p);
  // the local projection of PR is white noise mixed at visibility 1/2: P* = 3/8 on PR cells
  EXPECT_NEAR(r.r[cell_index(0, 0, 0, 0)], 0.5 / 0.375, 1e-6);
  EXPECT_EQ(r.r[cell_index(0, 0, 0, 1)], 0.0);
  // expectation under PR: sum_xy P_xy sum_ab PR * r
  double e = 0.0, against_minimizer = 0.0;
  for (int c = 0; c < kCells; ++c) {
    e += 0.25 * pr_box()[c] * r.r[c];
    against_minimizer += 0.25 * p.minimizer[c] * r.r[c];
  }
  EXPECT_GT(e, 1.0);
  EXPECT_NEAR(against_minimizer, 1.0, 1e-9);
  EXPECT_NEAR(p.divergence, std::log2(4.0 / 3.0), 1e-9);
}

TEST(Ratios, IntegrateToOneAgainstTheMinimizer) {
  const auto dist = InputDistribution::uniform();
  const Behavior src = mixed_source(0.72, 0.01, SourceSpec{}.weights());
  for (auto k : kAll) {
    const auto p = project_kl(src, dist, set(k));
    const auto r = build_ratios(src, p);
    double s = 0.0;
    for (int c = 0; c < kCells; ++c) s += dist.weight(c / kOutcomes) * r.r[c] * p.minimizer[c];
    EXPECT_NEAR(s, 1.0, 1e-9) << to_string(k);
  }
}

TEST(Ratios, SupportMismatch) {
  ProjectionResult p;
  p.minimizer = pr_box();
  EXPECT_THROW(build_ratios(Behavior::uniform(), p), SupportMismatch);
}

TEST(Certify, AllOnesIsUnchanged) {
  RatioTable ones;
  ones.r.fill(1.0);
  for (auto k : kAll) {
    const auto c = certify_ratios(ones, InputDistribution::uniform(), set(k));
    EXPECT_NEAR(c.raw_bound, 1.0, 1e-9);
    for (double v : c.r) EXPECT_NEAR(v, 1.0, 1e-9);
    EXPECT_LE(c.certified_bound, 1.0);
  }
}

TEST(Certify, ExactProjectionsNeedNoRenormalization) {
  const auto dist = InputDistribution::uniform();
  const Behavior src = mixed_source(0.72, 0.01, SourceSpec{}.weights());
  for (auto k : kAll) {
    const auto p = project_kl(src, dist, set(k));
    const auto c = certify_ratios(build_ratios(src, p), dist, set(k));
    EXPECT_GE(c.raw_bound, 1.0 - 1e-6) << to_string(k);
    EXPECT_LE(c.raw_bound, 1.0 + 1e-6) << to_string(k);
  }
}

TEST(Certify, UndoesScalarScaling) {
  const auto dist = InputDistribution::uniform();
  for (auto k : kAll) {
    const auto p = project_kl(pr_box(), dist, set(k));
    const auto base = certify_ratios(build_ratios(pr_box(), p), dist, set(k));
    RatioTable doubled = base;
    for (double& v : doubled.r) v *= 2.0;
    const auto c = certify_ratios(doubled, dist, set(k));
    for (int i = 0; i < kCells; ++i) EXPECT_NEAR(c.r[i], base.r[i], 1e-9) << to_string(k);
    BellFunctional fn;
    fn.coefficients = c.r;
    EXPECT_LE(max_linear_functional(fn, set(k), dist).upper_certificate, 1.0 + 1e-12) << to_string(k);
  }
}

TEST(Certify, RejectsNegativeRatios) {
  RatioTable r;
  r.r.fill(1.0);
  r.r[3] = -0.1;
  EXPECT_THROW(certify_ratios(r, InputDistribution::uniform(), set(SetKind::Local)), ValidationError);
}
