#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ctxbandit/linalg.hpp"
#include "oracle.hpp"

using namespace ctxbandit;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

oracle::Vec to_std(const Vector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

struct Instance {
  PsdAccumulator acc;
  std::vector<oracle::Vec> xs;
  double lambda;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index d, std::size_t n) {
  std::uniform_real_distribution<double> lam(0.1, 3.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Instance in{PsdAccumulator(d, lam(rng)), {}, 0.0};
  in.lambda = in.acc.ridge();
  for (std::size_t k = 0; k < n; ++k) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = g(rng);
    in.acc.add_outer(v);
    in.xs.push_back(to_std(v));
  }
  return in;
}

}  // namespace

TEST(RankOneUpdate, UnitVectorOuterProduct) {
  PsdAccumulator acc(2, 1.0);
  acc = rank_one_update(acc, vec({1, 0}));
  Matrix want(2, 2);
  want << 1, 0, 0, 0;
  EXPECT_EQ(acc.gram(), want);
}

TEST(RankOneUpdate, ZeroVectorLeavesGramUnchanged) {
  PsdAccumulator acc = PsdAccumulator::from_gram(Matrix::Identity(2, 2), 1.0);
  const PsdAccumulator before = acc;
  acc = rank_one_update(acc, vec({0, 0}));
  EXPECT_TRUE(acc == before);
}

TEST(RankOneUpdate, HandSummedOuterProducts) {
  PsdAccumulator acc(2, 1.0);
  acc.add_outer(vec({1, 2}));
  acc.add_outer(vec({2, 1}));
  Matrix want(2, 2);
  want << 5, 4, 4, 5;
  EXPECT_EQ(acc.gram(), want);
}

TEST(RankOneUpdate, DimensionMismatchIsContractViolation) {
  PsdAccumulator acc(2, 1.0);
  EXPECT_THROW(acc.add_outer(vec({1, 2, 3})), ContractViolation);
}

TEST(RankOneUpdate, StaysExactlySymmetric) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Instance in = random_instance(rng, 1 + rep % 20, 30);
    EXPECT_EQ(in.acc.gram(), in.acc.gram().transpose());
  }
}

TEST(LogDetRatio, IdentityRatioIsZero) {
  PsdAccumulator a(3, 1.0);
  a.add_outer(vec({1, 2, 3}));
  EXPECT_EQ(log_det_ratio(a, a), 0.0);
}

TEST(LogDetRatio, ScalarDeterminant) {
  PsdAccumulator now = PsdAccumulator::from_gram(Matrix::Constant(1, 1, 3.0), 1.0);
  PsdAccumulator then(1, 1.0);
  EXPECT_NEAR(log_det_ratio(now, then), std::log(4.0), 1e-15);
  EXPECT_NEAR(log_det_ratio(now, then), 1.3863, 5e-5);
}

TEST(LogDetRatio, TwoByTwoIdentity) {
  PsdAccumulator now = PsdAccumulator::from_gram(Matrix::Identity(2, 2), 1.0);
  PsdAccumulator then(2, 1.0);
  EXPECT_NEAR(log_det_ratio(now, then), std::log(4.0), 1e-15);
}

TEST(LogDetRatio, MonotoneUnderRankOneAdditions) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  PsdAccumulator acc(8, 1.0);
  double prev = log_det(acc);
  for (int k = 0; k < 200; ++k) {
    Vector v(8);
    for (auto& x : v) x = g(rng) * (k % 7 == 0 ? 0.0 : 1.0);
    acc.add_outer(v);
    const double now = log_det(acc);
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(LogDetRatio, MatchesLuOracleOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index d = 1 + rep % 20;
    Instance then = random_instance(rng, d, 3);
    Instance now = then;
    std::normal_distribution<double> g;
    for (int k = 0; k < 10; ++k) {
      Vector v(d);
      for (auto& x : v) x = g(rng);
      now.acc.add_outer(v);
      now.xs.push_back(to_std(v));
    }
    const double want = oracle::log_abs_det(oracle::ridge_gram(d, now.lambda, now.xs)) -
                        oracle::log_abs_det(oracle::ridge_gram(d, then.lambda, then.xs));
    EXPECT_LE(oracle::rel_err(log_det_ratio(now.acc, then.acc), want), 1e-9);
  }
}

TEST(LogDetRatio, EllipticalPotentialBound) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::Index d = 1 + rep % 12;
    const double lambda = 0.5 + rep * 0.1, L = 1.0;
    PsdAccumulator acc(d, lambda);
    const std::size_t n = 20 + 10 * rep;
    for (std::size_t k = 0; k < n; ++k) {
      Vector v(d);
      for (auto& x : v) x = u(rng);
      if (v.norm() > L) v /= v.norm();
      acc.add_outer(v);
    }
    const double dd = static_cast<double>(d);
    const double bound = dd * std::log((lambda * dd + static_cast<double>(n) * L * L) / (lambda * dd));
    EXPECT_LE(log_det(acc) - dd * std::log(lambda), bound + 1e-12);
  }
}

TEST(RidgeSolve, ZeroRightHandSide) {
  PsdAccumulator acc(3, 1.0);
  acc.add_outer(vec({1, 1, 1}));
  EXPECT_EQ(ridge_solve(acc, LinearStatistics(3)), Vector::Zero(3));
}

TEST(RidgeSolve, ScalarSample) {
  PsdAccumulator acc(1, 1.0);
  LinearStatistics st(1);
  acc.add_outer(vec({1}));
  st.add(vec({1}), 2.0);
  EXPECT_NEAR(ridge_solve(acc, st)[0], 1.0, 1e-15);
}

TEST(RidgeSolve, MultiplyBackReproducesRightHandSide) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index d = 1 + rep % 20;
    const Instance in = random_instance(rng, d, 25);
    LinearStatistics st(d);
    Vector u(d);
    for (auto& x : u) x = g(rng);
    st.add(u, 1.0);
    const Vector theta = ridge_solve(in.acc, st);
    const Vector back = in.acc.regularized() * theta;
    EXPECT_LE((back - u).norm() / u.norm(), 1e-10);
  }
}

TEST(RidgeSolve, MatchesLuOracle) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index d = 1 + rep % 20;
    const Instance in = random_instance(rng, d, 1 + rep % 30);
    LinearStatistics st(d);
    Vector u(d);
    for (auto& x : u) x = g(rng);
    st.add(u, 1.0);
    const Vector got = ridge_solve(in.acc, st);
    const oracle::Vec want = oracle::solve(oracle::ridge_gram(d, in.lambda, in.xs), to_std(u));
    for (Eigen::Index i = 0; i < d; ++i) {
      const double scale = std::max(1.0, Eigen::Map<const Vector>(want.data(), d).cwiseAbs().maxCoeff());
      EXPECT_LE(std::abs(got[i] - want[i]) / scale, 1e-9);
    }
  }
}

TEST(RidgeSolve, DimensionMismatch) {
  EXPECT_THROW(ridge_solve(PsdAccumulator(2, 1.0), LinearStatistics(3)), ContractViolation);
}

TEST(WeightedNorm, ZeroVector) { EXPECT_EQ(weighted_norm(PsdAccumulator(4, 1.0), Vector::Zero(4)), 0.0); }

TEST(WeightedNorm, IdentityMetricIsEuclidean) {
  EXPECT_NEAR(weighted_norm(PsdAccumulator(3, 1.0), vec({1, -2, 2})), 3.0, 1e-15);
}

TEST(WeightedNorm, Scalar) {
  const PsdAccumulator acc = PsdAccumulator::from_gram(Matrix::Constant(1, 1, 3.0), 1.0);
  EXPECT_NEAR(weighted_norm(acc, vec({2})), 1.0, 1e-15);
}

TEST(WeightedNorm, BoundedByRidge) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index d = 1 + rep % 20;
    const Instance in = random_instance(rng, d, rep % 15);
    Vector v(d);
    for (auto& x : v) x = g(rng);
    const double w = weighted_norm(in.acc, v);
    EXPECT_LE(w * w, v.squaredNorm() / in.lambda * (1 + 1e-12));
  }
}

TEST(WeightedNorm, MatchesInverseOracle) {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index d = 1 + rep % 20;
    const Instance in = random_instance(rng, d, rep % 25);
    Vector v(d);
    for (auto& x : v) x = g(rng);
    const double want = oracle::inverse_quadratic_norm(oracle::ridge_gram(d, in.lambda, in.xs), to_std(v));
    EXPECT_LE(oracle::rel_err(weighted_norm(in.acc, v), want), 1e-9);
  }
}

TEST(SpdFactor, NonPositiveDefiniteThrows) {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;
  EXPECT_THROW(SpdFactor(PsdAccumulator::from_gram(m, 1e-12)), NumericalError);
}

TEST(Accumulators, AdditionAndZeroing) {
  PsdAccumulator a(2, 1.0), b(2, 1.0);
  a.add_outer(vec({1, 2}));
  b.add_outer(vec({2, 1}));
  PsdAccumulator c = a + b;
  EXPECT_EQ(c.gram()(0, 1), 4.0);
  c.set_zero();
  EXPECT_TRUE(c.is_zero());
  LinearStatistics s(2);
  s.add(vec({1, 2}), 3.0);
  EXPECT_EQ(s.vector(), vec({3, 6}));
  s.set_zero();
  EXPECT_TRUE(s.is_zero());
}
