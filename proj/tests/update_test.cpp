#include <gtest/gtest.h>

#include "rankone/update.hpp"
#include "test_support.hpp"

using namespace rankone;
using rankone::testing::Rng;
using rankone::testing::angle_deg;

namespace {

struct Case {
  rankone::testing::Spectral spec;
  Vector v;
  double rho;
  Matrix b;
  lab::FullEigen oracle;
};

Case make_case(Index n, double rho, Rng& rng, double tail_scale = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector vals(n);
  for (Index i = 0; i < n; ++i) vals(i) = i < 10 ? 1.0 + u(rng) : tail_scale * u(rng);
  Case c{rankone::testing::with_spectrum(vals, rng), rankone::testing::random_unit(n, rng), rho, {}, {}};
  c.b = c.spec.a + rho * c.v * c.v.transpose();
  c.oracle = lab::oracle_eigh(c.b);
  return c;
}

}  // namespace

TEST(Deflate, GenericInstanceKeepsEverything) {
  Rng rng(1);
  auto c = make_case(20, 1.0, rng);
  auto rep = deflate(rankone::testing::leading(c.spec, 6), c.v);
  EXPECT_EQ(rep.kept.size(), 6u);
  EXPECT_TRUE(rep.frozen.empty());
  EXPECT_TRUE(rep.merged.empty());
}

TEST(Deflate, AllDeflatedWhenNothingCouples) {
  PartialEigen eig((Vector(2) << 2.0, 1.0).finished(), Matrix::Identity(2, 2));
  Vector v = Vector::Zero(2);
  v(0) = 1e-14;
  v(1) = 1e-14;
  try {
    deflate(eig, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllDeflated);
  }
}

TEST(Update, OrthogonalVectorLeavesPairsUnchanged) {
  auto a = SymmetricMatrix::diagonal((Vector(3) << 2.0, 1.0, 0.0).finished());
  PartialEigen eig((Vector(2) << 2.0, 1.0).finished(), Matrix::Identity(3, 2));
  RankOneUpdate upd(0.5, Vector::Unit(3, 2));
  auto r = rank_one_update(eig, upd, TruncationConfig{}, &a, true);
  EXPECT_TRUE(r.unchanged);
  EXPECT_EQ(r.values, eig.values());
  EXPECT_EQ(r.vectors, eig.vectors());
}

TEST(Update, TwoByTwoClosedForm) {
  auto a = SymmetricMatrix::diagonal((Vector(2) << 1.0, 0.0).finished());
  PartialEigen eig((Vector(1) << 1.0).finished(), Matrix::Identity(2, 1));
  Vector v(2);
  v << 1, 1;
  RankOneUpdate upd(0.5, v);  // normalized to rho = 1
  auto r = rank_one_update(eig, upd, TruncationConfig{}, &a);
  EXPECT_NEAR(r.values(0), 1.0 + 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.vectors(0, 0), 0.9238795325112867, 1e-12);
  EXPECT_NEAR(r.vectors(1, 0), 0.3826834323650898, 1e-12);
  EXPECT_EQ(r.mu_used, 0.0);
}

TEST(Update, ZeroRhoReturnsInput) {
  Rng rng(2);
  auto c = make_case(12, 1.0, rng);
  auto eig = rankone::testing::leading(c.spec, 4);
  auto r = rank_one_update(eig, RankOneUpdate(0.0, c.v), TruncationConfig{});
  EXPECT_TRUE(r.unchanged);
  EXPECT_FALSE(r.notes.empty());
  EXPECT_EQ(r.values, eig.values());
}

TEST(Update, FrozenPairIsBitForBit) {
  Rng rng(3);
  auto c = make_case(15, 0.8, rng);
  auto eig = rankone::testing::leading(c.spec, 5);
  // remove the component along q_3
  Vector v = c.v - eig.vectors().col(2) * eig.vectors().col(2).dot(c.v);
  v -= eig.vectors().col(2) * eig.vectors().col(2).dot(v);
  auto a = SymmetricMatrix::dense(c.spec.a);
  for (bool ortho : {false, true}) {
    UpdateOptions opts;
    opts.orthogonalize = ortho;
    auto r = rank_one_update(eig, RankOneUpdate(0.8, v), TruncationConfig{}, &a, opts);
    ASSERT_EQ(r.deflation.frozen.size(), 1u);
    EXPECT_EQ(r.deflation.frozen[0], 2);
    bool found = false;
    for (Index i = 0; i < 5; ++i) {
      if (r.values(i) == eig.values()(2)) {
        found = true;
        EXPECT_TRUE((r.vectors.col(i).array() == eig.vectors().col(2).array()).all());
      }
    }
    EXPECT_TRUE(found);
    for (Index i = 1; i < 5; ++i) EXPECT_GE(r.values(i - 1), r.values(i));
  }
}

TEST(Update, MergedClusterMatchesOracle) {
  // A = diag(3, 2, 2, 1); top three known; tail value 1 used as mu makes the
  // truncated equation exact, so the result must match the oracle.
  Vector vals(4);
  vals << 3.0, 2.0, 2.0, 1.0;
  auto a = SymmetricMatrix::diagonal(vals);
  PartialEigen eig(vals.head(3), Matrix::Identity(4, 3));
  Vector v(4);
  v << 0.5, 0.4, 0.6, 0.3;
  RankOneUpdate upd(0.7, v);
  TruncationConfig cfg;
  cfg.mu = MuPolicy::explicit_value(1.0);
  auto r = rank_one_update(eig, upd, cfg, &a);
  ASSERT_EQ(r.deflation.merged.size(), 1u);
  const auto& g = r.deflation.merged[0];
  EXPECT_EQ(g.members, (std::vector<Index>{1, 2}));
  EXPECT_NEAR(g.weight * g.weight, upd.v()(1) * upd.v()(1) + upd.v()(2) * upd.v()(2), 1e-15);
  Matrix b = a.to_dense() + upd.rho() * upd.v() * upd.v().transpose();
  auto oracle = lab::oracle_eigh(b);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(r.values(i), oracle.values(i), 1e-12);
    EXPECT_LE(angle_deg(r.vectors.col(i), oracle.vectors.col(i)), 1e-6);
  }
}

TEST(Update, FullKnowledgeIsExact) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    auto c = make_case(30, trial % 2 ? 0.9 : -0.9, rng, 1.0);
    auto eig = rankone::testing::leading(c.spec, 30);
    auto a = SymmetricMatrix::dense(c.spec.a);
    for (Order order : {Order::First, Order::Second}) {
      TruncationConfig cfg;
      cfg.order = order;
      cfg.mu = MuPolicy::star();
      auto r = rank_one_update(eig, RankOneUpdate(c.rho, c.v), cfg, &a);
      EXPECT_TRUE(r.mu_fallback);
      for (Index i = 0; i < 30; ++i) {
        EXPECT_NEAR(r.values(i), c.oracle.values(i), 1e-8);
        EXPECT_LE(angle_deg(r.vectors.col(i), c.oracle.vectors.col(i)), 1e-6);
      }
    }
  }
}

TEST(Update, StarFallsBackToMeanWhenResidualVanishes) {
  Rng rng(5);
  auto c = make_case(10, 1.0, rng);
  auto eig = rankone::testing::leading(c.spec, 4);
  Vector v = eig.vectors() * rankone::testing::random_unit(4, rng);
  auto a = SymmetricMatrix::dense(c.spec.a);
  TruncationConfig cfg;
  cfg.mu = MuPolicy::star();
  auto r = rank_one_update(eig, RankOneUpdate(1.0, v), cfg, &a);
  EXPECT_TRUE(r.mu_fallback);
  EXPECT_EQ(r.mu_policy_used, MuPolicyKind::Mean);
  EXPECT_NEAR(r.mu_used, c.spec.values.tail(6).mean(), 1e-12);
}

TEST(Update, SecondOrderNeedsMatrixOrS) {
  Rng rng(6);
  auto c = make_case(10, 1.0, rng);
  auto eig = rankone::testing::leading(c.spec, 4);
  TruncationConfig cfg;
  cfg.order = Order::Second;
  EXPECT_THROW(rank_one_update(eig, RankOneUpdate(1.0, c.v), cfg), Error);
  UpdateOptions opts;
  opts.formula = EigvecFormula::FirstOrder;
  opts.s = compute_s(SymmetricMatrix::dense(c.spec.a), eig.vectors(), c.v);
  EXPECT_NO_THROW(rank_one_update(eig, RankOneUpdate(1.0, c.v), cfg, nullptr, opts));
}

TEST(Update, BeatsNoUpdateOnResidual) {
  Rng rng(7);
  auto c = make_case(50, 1.0, rng);
  auto eig = rankone::testing::leading(c.spec, 10);
  auto a = SymmetricMatrix::dense(c.spec.a);
  auto b = SymmetricMatrix::dense(c.b);
  auto r = rank_one_update(eig, RankOneUpdate(c.rho, c.v), TruncationConfig{}, &a);
  const double before = residual_quality(b, eig.vectors(), eig.values());
  EXPECT_LT(*r.residual_quality, before);
  EXPECT_NEAR(*r.residual_quality, residual_quality(b, r.vectors, r.values), 1e-10);
}

TEST(ResidualQuality, ExactPairsGiveZero) {
  Rng rng(8);
  auto c = make_case(20, 1.0, rng);
  auto b = SymmetricMatrix::dense(c.b);
  EXPECT_LE(residual_quality(b, c.oracle.vectors, c.oracle.values), 1e-10 * b.frobenius_norm());
}

TEST(Reorthogonalize, OrthonormalInputIsKept) {
  Rng rng(9);
  Matrix q = rankone::testing::random_orthonormal(10, 4, rng);
  auto r = reorthogonalize(q);
  EXPECT_LE((r.vectors - q).norm(), 1e-12);
  EXPECT_LE(r.gram_defect, 1e-12);
  auto p = reorthogonalize(q, OrthoMethod::Polar);
  EXPECT_LE((p.vectors - q).norm(), 1e-12);
}

TEST(Reorthogonalize, PerturbationBound) {
  Matrix p = Matrix::Zero(3, 2);
  p(0, 0) = 1.0;
  p(0, 1) = 1.0;
  p(1, 1) = 1e-3;
  for (auto method : {OrthoMethod::GramSchmidt, OrthoMethod::Polar}) {
    auto r = reorthogonalize(p, method);
    const double g = (p.transpose() * p - Matrix::Identity(2, 2)).norm();
    EXPECT_NEAR(r.gram_defect, g, 1e-15);
    EXPECT_LE((r.vectors.transpose() * r.vectors - Matrix::Identity(2, 2)).norm(), 1e-12 * 2);
    // E from P = P_bar (I + E)
    EXPECT_LE((r.vectors * (Matrix::Identity(2, 2) + r.e) - p).norm(), 1e-12);
  }
}

TEST(Reorthogonalize, BoundHoldsOnRandomPerturbations) {
  Rng rng(10);
  std::uniform_real_distribution<double> u(0.0, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix q = rankone::testing::random_orthonormal(12, 5, rng);
    Matrix p = q + u(rng) * rankone::testing::gaussian(12, 5, rng) / std::sqrt(60.0);
    for (auto method : {OrthoMethod::GramSchmidt, OrthoMethod::Polar}) {
      auto r = reorthogonalize(p, method);
      if (!r.bounded) continue;
      EXPECT_LT(r.e.norm(), r.e_bound);
    }
  }
}

TEST(Reorthogonalize, UnboundedAndRankDeficient) {
  Matrix p = Matrix::Zero(3, 2);
  p(0, 0) = 1.0;
  p(0, 1) = 1.0;
  p(1, 1) = 1.0;
  auto r = reorthogonalize(p);
  EXPECT_FALSE(r.bounded);
  EXPECT_LE((r.vectors.transpose() * r.vectors - Matrix::Identity(2, 2)).norm(), 1e-12);
  p(1, 1) = 0.0;
  try {
    reorthogonalize(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RankDeficient);
  }
  EXPECT_THROW(reorthogonalize(p, OrthoMethod::Polar), Error);
}

TEST(Update, OrthogonalizationQualityInequality) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    auto c = make_case(40, 1.0, rng, 0.6);
    auto eig = rankone::testing::leading(c.spec, 8);
    auto a = SymmetricMatrix::dense(c.spec.a);
    auto b = SymmetricMatrix::dense(c.b);
    UpdateOptions opts;
    opts.orthogonalize = true;
    auto r = rank_one_update(eig, RankOneUpdate(c.rho, c.v), TruncationConfig{}, &a, opts);
    EXPECT_LE(r.output_gram_defect, 1e-10 * 8);
    ASSERT_TRUE(r.e_bound.has_value());
    const double g = r.gram_defect;
    const double lhs = residual_quality(b, r.vectors, r.values);
    const double rhs = residual_quality(b, r.raw_vectors, r.values) +
                       2 * g * r.vectors.norm() * (b.frobenius_norm() + r.values.norm());
    EXPECT_LE(lhs, rhs);
  }
}
