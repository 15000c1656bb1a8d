#include <gtest/gtest.h>

#include "rankone/eigvec.hpp"
#include "rankone/secular.hpp"
#include "test_support.hpp"

using namespace rankone;
using rankone::testing::Rng;
using rankone::testing::angle_deg;

namespace {

// Exact unnormalized eigenvector (A - t)^{-1} v expressed in the eigenbasis.
Vector exact_raw(const rankone::testing::Spectral& s, const Vector& z_full, double t) {
  Vector c = z_full.array() / (s.values.array() - t);
  return s.vectors * c;
}

}  // namespace

TEST(Eigvec, TwoByTwoFirstOrder) {
  auto a = SymmetricMatrix::diagonal((Vector(2) << 1.0, 0.0).finished());
  PartialEigen eig((Vector(1) << 1.0).finished(), Matrix::Identity(2, 1));
  Vector v(2);
  v << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  Vector t(1);
  t << 1 + 1 / std::sqrt(2.0);
  Matrix p = eigvec_estimate(eig, v, t, 0.0, EigvecFormula::FirstOrder, &a);
  EXPECT_NEAR(p(0, 0), 0.9238795325112867, 1e-12);
  EXPECT_NEAR(p(1, 0), 0.3826834323650898, 1e-12);
  Matrix p2 = eigvec_estimate(eig, v, t, 0.0, EigvecFormula::SecondOrder, &a);
  EXPECT_LE((p2 - p).norm(), 1e-12);
}

TEST(Eigvec, FullKnowledgeAllFormulasExact) {
  Rng rng(3);
  Vector vals = Vector::LinSpaced(8, 1.0, 3.0);
  auto s = rankone::testing::with_spectrum(vals, rng);
  Vector v = rankone::testing::random_unit(8, rng);
  const double rho = 0.7;
  auto oracle = lab::oracle_eigh(Matrix(s.a + rho * v * v.transpose()));
  auto eig = rankone::testing::leading(s, 8);
  auto a = SymmetricMatrix::dense(s.a);
  for (auto f : {EigvecFormula::Naive, EigvecFormula::FirstOrder, EigvecFormula::SecondOrder}) {
    Matrix p = eigvec_estimate(eig, v, oracle.values, 0.0, f, &a);
    for (Index i = 0; i < 8; ++i) EXPECT_LE(angle_deg(p.col(i), oracle.vectors.col(i)), 1e-8);
  }
}

TEST(Eigvec, ConstantTailMakesEstimatesExact) {
  Rng rng(5);
  Vector vals(9);
  vals << 3.0, 2.5, 2.1, 1.7, 0.4, 0.4, 0.4, 0.4, 0.4;
  auto s = rankone::testing::with_spectrum(vals, rng);
  Vector v = rankone::testing::random_unit(9, rng);
  auto oracle = lab::oracle_eigh(Matrix(s.a + 0.5 * v * v.transpose()));
  auto eig = rankone::testing::leading(s, 4);
  auto a = SymmetricMatrix::dense(s.a);
  for (auto f : {EigvecFormula::FirstOrder, EigvecFormula::SecondOrder}) {
    Matrix p = eigvec_estimate(eig, v, oracle.values.head(4), 0.4, f, &a);
    for (Index i = 0; i < 4; ++i) EXPECT_LE(angle_deg(p.col(i), oracle.vectors.col(i)), 1e-8);
  }
}

TEST(Eigvec, UnitColumnsAndSignConvention) {
  Rng rng(7);
  Vector vals = Vector::LinSpaced(20, 0.0, 2.0);
  auto s = rankone::testing::with_spectrum(vals, rng);
  Vector v = rankone::testing::random_unit(20, rng);
  auto oracle = lab::oracle_eigh(Matrix(s.a + 0.3 * v * v.transpose()));
  auto eig = rankone::testing::leading(s, 5);
  Matrix p = eigvec_estimate(eig, v, oracle.values.head(5), 0.0, EigvecFormula::FirstOrder);
  for (Index i = 0; i < 5; ++i) {
    EXPECT_NEAR(p.col(i).norm(), 1.0, 1e-12);
    Index arg = 0;
    p.col(i).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(p(arg, i), 0.0);
  }
}

TEST(Eigvec, BoundsWithExactValues) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 50, m = 5;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector vals(n);
    for (Index i = 0; i < n; ++i) vals(i) = i < m ? 1.0 + u(rng) : 0.2 * u(rng);
    auto s = rankone::testing::with_spectrum(vals, rng);
    Vector v = rankone::testing::random_unit(n, rng);
    const double rho = 0.5;
    Vector z_full = s.vectors.transpose() * v;
    auto oracle = lab::oracle_eigh(Matrix(s.a + rho * v * v.transpose()));
    auto eig = rankone::testing::leading(s, m);
    auto a = SymmetricMatrix::dense(s.a);
    const Vector tail = s.values.tail(n - m);
    const double mu = (z_full.tail(n - m).array().square() * tail.array()).sum() / z_full.tail(n - m).squaredNorm();
    const double dev = (tail.array() - mu).abs().maxCoeff();
    const Vector t = oracle.values.head(m);
    Matrix p1 = eigvec_estimate_raw(eig, v, t, mu, EigvecFormula::FirstOrder, &a);
    Matrix p2 = eigvec_estimate_raw(eig, v, t, mu, EigvecFormula::SecondOrder, &a);
    for (Index i = 0; i < m; ++i) {
      const Vector exact = exact_raw(s, z_full, t(i));
      const double c1 = 1.0 / (std::abs(mu - t(i)) * std::abs(s.values(m) - t(i)));
      const double c2 = c1 / std::abs(mu - t(i));
      EXPECT_LE((exact - p1.col(i)).norm(), c1 * dev * (1 + 1e-8) + 1e-12 * exact.norm());
      EXPECT_LE((exact - p2.col(i)).norm(), c2 * dev * dev * (1 + 1e-8) + 1e-12 * exact.norm());
    }
  }
}

TEST(Eigvec, Errors) {
  PartialEigen eig((Vector(2) << 2.0, 1.0).finished(), Matrix::Identity(3, 2));
  Vector v = Vector::Ones(3) / std::sqrt(3.0);
  Vector t(2);
  t << 2.5, 1.5;
  try {
    eigvec_estimate(eig, v, t, 0.0, EigvecFormula::SecondOrder);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingMatrix);
  }
  t << 2.0, 1.5;
  try {
    eigvec_estimate(eig, v, t, 0.0, EigvecFormula::FirstOrder);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PoleCollision);
    EXPECT_EQ(e.index().value(), 0u);
  }
  t << 1.5, 2.5;
  EXPECT_THROW(eigvec_estimate(eig, v, t, 0.0, EigvecFormula::FirstOrder), Error);
  t << 2.5, 1.5;
  EXPECT_THROW(eigvec_estimate(eig, v, t, 1.5, EigvecFormula::FirstOrder), Error);
  EXPECT_NO_THROW(eigvec_estimate(eig, v, t, 1.5, EigvecFormula::Naive));
}
