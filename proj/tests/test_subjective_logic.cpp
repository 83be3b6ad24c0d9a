#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "evfuse/dirichlet.hpp"
#include "evfuse/error.hpp"
#include "evfuse/subjective_logic.hpp"
#include "evfuse/types.hpp"
#include "support.hpp"

using namespace evfuse;
using namespace evfuse::testing;

namespace {

void expect_opinion(const Opinion& o, std::vector<double> b, double u, double tol) {
  ASSERT_EQ(o.num_classes(), b.size());
  for (std::size_t k = 0; k < b.size(); ++k) EXPECT_NEAR(o.belief(k), b[k], tol) << "b" << k;
  EXPECT_NEAR(o.uncertainty(), u, tol) << "u";
}

void expect_same(const Opinion& o, const RawOpinion& r, double tol) {
  expect_opinion(o, r.b, r.u, tol);
}

double mass(const Opinion& o) {
  double s = o.uncertainty();
  for (double b : o.beliefs()) s += b;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Value types

TEST(Opinion, ValidatesMass) {
  EXPECT_NO_THROW(Opinion({0.2, 0.3}, 0.5));
  EXPECT_THROW(Opinion({0.2, 0.3}, 0.6), ValidationError);
  EXPECT_THROW(Opinion({0.5}, 0.5), ValidationError);
  EXPECT_THROW(Opinion({-0.1, 0.6}, 0.5), ValidationError);
  EXPECT_THROW(Opinion({0.2, 0.3}, std::nan("")), ValidationError);
  EXPECT_THROW(Opinion({1.2, -0.2}, 0.0), ValidationError);
}

TEST(Opinion, SnapsRoundingResidue) {
  const Opinion o({1.0 + 1e-14, -1e-14}, 0.0);
  EXPECT_EQ(o.belief(0), 1.0);
  EXPECT_EQ(o.belief(1), 0.0);
}

TEST(Opinion, VacuousAndDogmatic) {
  const Opinion v = Opinion::vacuous(3);
  EXPECT_EQ(v.uncertainty(), 1.0);
  for (double b : v.beliefs()) EXPECT_EQ(b, 0.0);
  EXPECT_FALSE(v.is_dogmatic());
  EXPECT_TRUE(Opinion({1.0, 0.0}, 0.0).is_dogmatic());
}

TEST(BaseRate, Validates) {
  EXPECT_NO_THROW(BaseRate({0.3, 0.7}, 2.0));
  EXPECT_THROW(BaseRate({0.3, 0.6}, 2.0), ValidationError);
  EXPECT_THROW(BaseRate({0.0, 1.0}, 2.0), ValidationError);
  EXPECT_THROW(BaseRate({0.5, 0.5}, 0.0), ValidationError);
  EXPECT_THROW(BaseRate({0.5, 0.5}, -1.0), ValidationError);
  EXPECT_THROW(BaseRate({1.0}, 1.0), ValidationError);
}

TEST(BaseRate, UniformAndPrior) {
  const BaseRate a = BaseRate::uniform(4);
  EXPECT_EQ(a.weight(), 4.0);
  for (double r : a.rates()) EXPECT_DOUBLE_EQ(r, 0.25);
  const DirichletParams beta = BaseRate({0.25, 0.75}, 2.0).prior();
  EXPECT_DOUBLE_EQ(beta[0], 0.5);
  EXPECT_DOUBLE_EQ(beta[1], 1.5);
}

TEST(EvidenceVector, Validates) {
  EXPECT_NO_THROW(EvidenceVector({0.0, 3.0}));
  EXPECT_THROW(EvidenceVector({-1e-3, 1.0}), ValidationError);
  EXPECT_THROW(EvidenceVector({std::numeric_limits<double>::infinity(), 1.0}), ValidationError);
  EXPECT_DOUBLE_EQ(EvidenceVector({1.5, 2.5}).total(), 4.0);
}

TEST(DirichletParams, Validates) {
  EXPECT_THROW(DirichletParams({1.0}), ValidationError);
  EXPECT_THROW(DirichletParams({1.0, 0.0}), ValidationError);
  EXPECT_THROW(DirichletParams({1.0, std::nan("")}), ValidationError);
}

// ---------------------------------------------------------------------------
// Mappings

TEST(Mappings, DirichletFromEvidence) {
  const auto a2 = BaseRate::uniform(2);
  EXPECT_EQ(sl::dirichlet_from_evidence(EvidenceVector({0, 0}), a2).alpha()[0], 1.0);
  const auto alpha = sl::dirichlet_from_evidence(EvidenceVector({2, 2}), a2);
  EXPECT_DOUBLE_EQ(alpha[0], 3.0);
  EXPECT_DOUBLE_EQ(alpha[1], 3.0);
  const auto alpha4 = sl::dirichlet_from_evidence(EvidenceVector({4, 0, 0, 0}), BaseRate::uniform(4));
  const double want[] = {5, 1, 1, 1};
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(alpha4[k], want[k]);
  EXPECT_THROW(sl::dirichlet_from_evidence(EvidenceVector({1, 2, 3}), a2), ValidationError);
}

TEST(Mappings, OpinionFromDirichlet) {
  const auto a2 = BaseRate::uniform(2);
  expect_opinion(sl::opinion_from_dirichlet(DirichletParams({1, 1}), a2), {0, 0}, 1, 1e-15);
  expect_opinion(sl::opinion_from_dirichlet(DirichletParams({3, 3}), a2), {1. / 3, 1. / 3}, 1. / 3,
                 1e-15);
  expect_opinion(sl::opinion_from_dirichlet(DirichletParams({5, 1, 1, 1}), BaseRate::uniform(4)),
                 {0.5, 0, 0, 0}, 0.5, 1e-15);
  // alpha below the prior means negative evidence.
  EXPECT_THROW(sl::opinion_from_dirichlet(DirichletParams({0.5, 3}), a2), ValidationError);
}

TEST(Mappings, DirichletFromOpinion) {
  const auto a2 = BaseRate::uniform(2);
  const auto v = sl::dirichlet_from_opinion(Opinion::vacuous(2), a2);
  EXPECT_DOUBLE_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v[1], 1.0);
  const auto t = sl::dirichlet_from_opinion(Opinion({1. / 3, 1. / 3}, 1. / 3), a2);
  EXPECT_NEAR(t[0], 3.0, 1e-14);
  EXPECT_NEAR(t[1], 3.0, 1e-14);
  EXPECT_THROW(sl::dirichlet_from_opinion(Opinion({1, 0}, 0), a2), ValidationError);
}

TEST(Mappings, ProjectedProbability) {
  const auto a2 = BaseRate::uniform(2);
  auto p = sl::projected_probability(Opinion::vacuous(2), a2);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  p = sl::projected_probability(Opinion({0.6, 0.2}, 0.2), a2);
  EXPECT_NEAR(p[0], 0.7, 1e-15);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
  p = sl::projected_probability(Opinion({1, 0}, 0), BaseRate({0.1, 0.9}, 2));
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_THROW(sl::projected_probability(Opinion::vacuous(3), a2), ValidationError);
}

TEST(Mappings, OpinionIndependentOfRates) {
  const EvidenceVector e({3, 1, 6});
  const Opinion x = sl::opinion_from_evidence(e, BaseRate({0.2, 0.3, 0.5}, 3));
  const Opinion y = sl::opinion_from_evidence(e, BaseRate::uniform(3));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(x.belief(k), y.belief(k));
  EXPECT_DOUBLE_EQ(x.uncertainty(), y.uncertainty());
}

TEST(MappingsProperty, RoundTripOpinionDirichlet) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = 2 + i % 5;
    const Opinion o = random_opinion(rng, k, 1e-6, 1.0);
    const BaseRate a = random_base_rate(rng, k, 0.5 + (i % 7));
    const Opinion back = sl::opinion_from_dirichlet(sl::dirichlet_from_opinion(o, a), a);
    for (std::size_t j = 0; j < k; ++j) ASSERT_NEAR(back.belief(j), o.belief(j), 1e-12);
    ASSERT_NEAR(back.uncertainty(), o.uncertainty(), 1e-12);
  }
}

TEST(MappingsProperty, ProjectedProbabilityIsDirichletMean) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t k = 2 + i % 4;
    const BaseRate a = random_base_rate(rng, k);
    const EvidenceVector e(random_evidence(rng, k, 0.0, 50.0));
    const DirichletParams alpha = sl::dirichlet_from_evidence(e, a);
    const auto p = sl::projected_probability(sl::opinion_from_dirichlet(alpha, a), a);
    double s = 0.0;
    for (double x : alpha.alpha()) s += x;
    for (std::size_t j = 0; j < k; ++j) ASSERT_NEAR(p[j], alpha[j] / s, 1e-12);
  }
}

TEST(MappingsProperty, EvidenceRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const BaseRate a = random_base_rate(rng, 3);
    const EvidenceVector e(random_evidence(rng, 3));
    const EvidenceVector back = sl::evidence_from_opinion(sl::opinion_from_evidence(e, a), a);
    for (std::size_t j = 0; j < 3; ++j) ASSERT_NEAR(back[j], e[j], 1e-11);
  }
}

// ---------------------------------------------------------------------------
// Fusion operators

TEST(Cbf, WorkedPair) {
  const Opinion f = sl::cbf_fuse(Opinion({0.2, 0.4}, 0.4), Opinion({0.3, 0.1}, 0.6));
  // Exact values of the defining formula: b = (6, 7) / 19, u = 6 / 19.
  expect_opinion(f, {6.0 / 19, 7.0 / 19}, 6.0 / 19, 1e-15);
  EXPECT_NEAR(f.belief(0), 0.32, 0.005);
  EXPECT_NEAR(f.belief(1), 0.37, 0.005);
}

TEST(Cbf, VacuousIsNeutral) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Opinion m = random_opinion(rng, 3, 0.0, 1.0);
    const Opinion f = sl::cbf_fuse(m, Opinion::vacuous(3));
    expect_same(f, raw(m), 1e-15);
  }
}

TEST(Cbf, RejectsTwoDogmaticOperands) {
  EXPECT_THROW(sl::cbf_fuse(Opinion({1, 0}, 0), Opinion({0, 1}, 0)), FusionError);
  EXPECT_NO_THROW(sl::cbf_fuse(Opinion({1, 0}, 0), Opinion({0.5, 0}, 0.5)));
  EXPECT_THROW(sl::cbf_fuse(Opinion::vacuous(2), Opinion::vacuous(3)), ValidationError);
}

TEST(CbfProperty, MatchesFormulaOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t k = 2 + i % 4;
    const Opinion m = random_opinion(rng, k);
    const Opinion n = random_opinion(rng, k);
    expect_same(sl::cbf_fuse(m, n), oracle_cbf(raw(m), raw(n)), 1e-13);
  }
}

TEST(CbfProperty, CommutativeAndAssociative) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 2000; ++i) {
    const Opinion x = random_opinion(rng, 3);
    const Opinion y = random_opinion(rng, 3);
    const Opinion z = random_opinion(rng, 3);
    expect_same(sl::cbf_fuse(x, y), raw(sl::cbf_fuse(y, x)), 1e-10);
    expect_same(sl::cbf_fuse(sl::cbf_fuse(x, y), z), raw(sl::cbf_fuse(x, sl::cbf_fuse(y, z))),
                1e-10);
  }
}

TEST(CbfProperty, EvidenceAdds) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t k = 2 + i % 4;
    const BaseRate a = random_base_rate(rng, k);
    const EvidenceVector em(random_evidence(rng, k));
    const EvidenceVector en(random_evidence(rng, k));
    const Opinion f = sl::cbf_fuse(sl::opinion_from_evidence(em, a), sl::opinion_from_evidence(en, a));
    const EvidenceVector e = sl::evidence_from_opinion(f, a);
    for (std::size_t j = 0; j < k; ++j) ASSERT_NEAR(e[j], em[j] + en[j], 1e-9);
  }
}

TEST(CbfProperty, UncertaintyNeverIncreases) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5000; ++i) {
    const Opinion m = random_opinion(rng, 3);
    const Opinion n = random_opinion(rng, 3);
    ASSERT_LE(sl::cbf_fuse(m, n).uncertainty(),
              std::min(m.uncertainty(), n.uncertainty()) + 1e-15);
  }
}

TEST(Bcf, WorkedRows) {
  struct Row {
    Opinion m, n;
    double b0, b1, u;
  };
  const Row rows[] = {
      {Opinion({0.1, 0.5}, 0.4), Opinion({0.4, 0.2}, 0.4), 0.31, 0.49, 0.21},
      {Opinion({0.2, 0.7}, 0.1), Opinion({0.3, 0.1}, 0.6), 0.27, 0.65, 0.08},
      {Opinion({0.1, 0.2}, 0.7), Opinion({0.2, 0.1}, 0.7), 0.24, 0.24, 0.52},
  };
  for (const auto& r : rows) {
    const Opinion f = sl::bcf_fuse(r.m, r.n);
    expect_opinion(f, {r.b0, r.b1}, r.u, 0.005);
    expect_same(f, oracle_bcf(raw(r.m), raw(r.n)), 1e-15);
  }
}

TEST(Bcf, VacuousIsIdentity) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Opinion d = random_opinion(rng, 2 + i % 4, 0.0, 1.0);
    expect_same(sl::bcf_fuse(d, Opinion::vacuous(d.num_classes())), raw(d), 1e-12);
    expect_same(sl::bcf_fuse(Opinion::vacuous(d.num_classes()), d), raw(d), 1e-12);
  }
  expect_opinion(sl::bcf_fuse(Opinion::vacuous(2), Opinion::vacuous(2)), {0, 0}, 1, 0.0);
}

TEST(Bcf, TotalConflictIsDistinctError) {
  const Opinion m({1, 0}, 0);
  const Opinion n({0, 1}, 0);
  EXPECT_EQ(sl::bcf_normalizer(m, n), 0.0);
  EXPECT_THROW(sl::bcf_fuse(m, n), ConflictError);
  try {
    sl::bcf_fuse(m, n);
  } catch (const FusionError& e) {
    EXPECT_NE(dynamic_cast<const ConflictError*>(&e), nullptr);
  }
}

TEST(Bcf, NormalizerFormula) {
  const Opinion m({0.1, 0.5}, 0.4);
  const Opinion n({0.4, 0.2}, 0.4);
  EXPECT_NEAR(sl::bcf_normalizer(m, n), 1.0 - (0.1 * 0.2 + 0.5 * 0.4), 1e-15);
}

TEST(BcfProperty, MatchesFormulaOracleAndClosesMass) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t k = 2 + i % 4;
    const Opinion m = random_opinion(rng, k, 0.05);
    const Opinion n = random_opinion(rng, k, 0.05);
    const Opinion f = sl::bcf_fuse(m, n);
    expect_same(f, oracle_bcf(raw(m), raw(n)), 1e-12);
    ASSERT_NEAR(mass(f), 1.0, 1e-9);
  }
}

TEST(BcfProperty, ArgmaxFollowsAgreementUnderBound) {
  std::mt19937_64 rng(11);
  int checked = 0;
  while (checked < 2000) {
    AgreementCase c;
    if (!make_agreement_case(rng, 2 + checked % 4, c)) continue;
    const Opinion f = sl::bcf_fuse(Opinion(c.m.b, c.m.u), Opinion(c.n.b, c.n.u));
    ASSERT_EQ(argmax(f.beliefs()), c.expected) << "u = " << c.m.u << " bound " << c.bound;
    ++checked;
  }
}

TEST(BcfProperty, ShortfallShrinksAsSecondOperandBecomesVacuous) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = 2 + i % 4;
    const Opinion m = random_opinion(rng, k, 0.01);
    const Opinion dir = random_opinion(rng, k, 0.0, 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step <= 50; ++step) {
      const double t = step / 50.0;
      std::vector<double> b(dir.beliefs().begin(), dir.beliefs().end());
      for (double& x : b) x *= 1.0 - t;
      const Opinion f = sl::bcf_fuse(m, Opinion(b, t));
      double worst = 0.0;
      for (std::size_t j = 0; j < k; ++j) worst = std::max(worst, m.belief(j) - f.belief(j));
      ASSERT_LE(worst, prev + 1e-9) << "t = " << t;
      prev = worst;
    }
    EXPECT_NEAR(prev, 0.0, 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Combination rule

TEST(Combine, TwoViewsIsBcf) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Opinion l = random_opinion(rng, 3, 0.05);
    const Opinion g = random_opinion(rng, 3, 0.05);
    const Opinion views[] = {l, g};
    expect_same(sl::combine_views(views), raw(sl::bcf_fuse(l, g)), 0.0);
  }
}

TEST(Combine, VacuousLocalsReturnGlobal) {
  std::mt19937_64 rng(14);
  const Opinion g = random_opinion(rng, 4, 0.05);
  const std::vector<Opinion> locals(3, Opinion::vacuous(4));
  expect_same(sl::combine_multiview(locals, g), raw(g), 1e-12);
  expect_same(sl::combine_multiview({}, g), raw(g), 1e-12);
}

TEST(Combine, MatchesLonghandChain) {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = 2 + i % 3;
    std::vector<Opinion> v;
    for (int j = 0; j < 4; ++j) v.push_back(random_opinion(rng, k, 0.05));
    const RawOpinion want =
        oracle_bcf(oracle_cbf(oracle_cbf(raw(v[0]), raw(v[1])), raw(v[2])), raw(v[3]));
    expect_same(sl::combine_views(v), want, 1e-12);
  }
}

TEST(Combine, NamesFailingStage) {
  const std::vector<Opinion> locals = {Opinion({1, 0}, 0), Opinion({0, 1}, 0)};
  try {
    sl::combine_multiview(locals, Opinion::vacuous(2));
    FAIL() << "expected a fusion error";
  } catch (const FusionError& e) {
    EXPECT_EQ(e.stage(), "cbf[1]");
  }
  const std::vector<Opinion> one = {Opinion({1, 0}, 0)};
  try {
    sl::combine_multiview(one, Opinion({0, 1}, 0));
    FAIL() << "expected a conflict";
  } catch (const ConflictError& e) {
    EXPECT_EQ(e.stage(), "bcf");
  }
}

TEST(Combine, Guards) {
  const std::vector<Opinion> single = {Opinion::vacuous(2)};
  EXPECT_THROW(sl::combine_views(single), ValidationError);
  const std::vector<Opinion> mixed = {Opinion::vacuous(2), Opinion::vacuous(3)};
  EXPECT_THROW(sl::combine_views(mixed), ValidationError);
}

TEST(CombineProperty, OutputsCloseMass) {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 2000; ++i) {
    std::vector<Opinion> v;
    for (int j = 0; j < 2 + i % 4; ++j) v.push_back(random_opinion(rng, 3, 0.05));
    ASSERT_NEAR(mass(sl::combine_views(v)), 1.0, 1e-9);
  }
}
