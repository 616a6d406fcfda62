#include <gtest/gtest.h>

#include <numeric>

#include "test_util.hpp"

using namespace nlarhmm;
using namespace testutil;

TEST(LogGaussian, StandardExamples) {
  const GaussianNoise I2 = GaussianNoise::identity(2);
  EXPECT_NEAR(log_gaussian_density(Vector::Zero(2), Vector::Zero(2), I2), -1.8378770664093453, 1e-12);
  EXPECT_NEAR(log_gaussian_density(Vector{{1.0, 0.0}}, Vector::Zero(2), I2), -2.3378770664093453, 1e-12);
}

TEST(LogGaussian, MatchesDenseInverse) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Matrix cov = random_spd(3, rng);
    const Vector x = randn(3, rng), m = randn(3, rng);
    EXPECT_NEAR(log_gaussian_density(x, m, GaussianNoise(cov)), dense_log_gaussian(x, m, cov), 1e-10);
  }
}

TEST(LogGaussian, PermutationInvariant) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const int d = 4;
    const Matrix cov = random_spd(d, rng);
    const Vector x = randn(d, rng), m = randn(d, rng);
    std::vector<int> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> P(d);
    for (int i = 0; i < d; ++i) P.indices()(i) = idx[static_cast<std::size_t>(i)];
    const Matrix pcov = P * cov * P.transpose();
    EXPECT_NEAR(log_gaussian_density(P * x, P * m, GaussianNoise(pcov)), log_gaussian_density(x, m, GaussianNoise(cov)),
                1e-12);
  }
}

TEST(LogGaussian, DimensionMismatchThrows) {
  EXPECT_THROW(log_gaussian_density(Vector::Zero(3), Vector::Zero(2), GaussianNoise::identity(2)), DimensionError);
}

TEST(GaussianNoise, FloorRegularizesSingularCovariance) {
  Matrix c = Matrix::Zero(2, 2);
  c(0, 0) = 1.0;  // rank one
  const GaussianNoise n(c);
  EXPECT_NEAR(n.covariance()(1, 1), 1e-9 * 0.5, 1e-20);
  EXPECT_TRUE(std::isfinite(n.log_det()));
  const GaussianNoise z(Matrix::Zero(3, 3));
  EXPECT_NEAR(z.covariance()(0, 0), 1e-9, 1e-20);
  EXPECT_THROW(GaussianNoise(Matrix::Constant(2, 2, std::nan(""))), IllConditionedCovariance);
}

TEST(GaussianNoise, SymmetricAfterConstruction) {
  std::mt19937_64 rng(3);
  Matrix c = random_spd(3, rng);
  c(0, 1) += 1e-13;
  const GaussianNoise n(c);
  EXPECT_LE((n.covariance() - n.covariance().transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NormalizeLogWeights, Examples) {
  auto a = normalize_log_weights(Vector{{0.0, 0.0}});
  EXPECT_NEAR(a.probs(0), 0.5, 1e-15);
  EXPECT_NEAR(a.log_normalizer, std::log(2.0), 1e-15);
  auto b = normalize_log_weights(Vector{{std::log(0.95), std::log(0.05)}});
  EXPECT_NEAR(b.probs(0), 0.95, 1e-12);
  EXPECT_NEAR(b.log_normalizer, 0.0, 1e-12);
  auto c = normalize_log_weights(Vector{{-1000.0, -1001.0}});
  const double e = std::exp(1.0);
  EXPECT_NEAR(c.probs(0), e / (1.0 + e), 1e-12);
  EXPECT_NEAR(c.log_normalizer, -1000.0 + std::log(1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(c.probs.sum(), 1.0, 1e-12);
}

TEST(NormalizeLogWeights, ShiftInvariantAndUnderflow) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const Vector w = 5.0 * randn(6, rng);
    const double c = uniform(rng, -500, 500);
    const Vector shifted = (w.array() + c).matrix();
    EXPECT_LE((normalize_log_weights(w).probs - normalize_log_weights(shifted).probs).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(normalize_log_weights(Vector::Constant(3, kNegInf)), ProbabilityUnderflow);
  const auto p = normalize_log_weights(Vector{{kNegInf, 0.0}});
  EXPECT_EQ(p.probs(0), 0.0);
  EXPECT_EQ(p.probs(1), 1.0);
}

TEST(Distributions, SimplexChecks) {
  EXPECT_THROW(InitialDistribution(Vector{{0.5, 0.6}}), std::invalid_argument);
  EXPECT_THROW(InitialDistribution(Vector{{-0.1, 1.1}}), std::invalid_argument);
  EXPECT_NO_THROW(InitialDistribution(Vector{{0.25, 0.75}}));
  Matrix t(2, 2);
  t << 0.9, 0.1, 0.3, 0.6;
  EXPECT_THROW(TransitionMatrix{t}, std::invalid_argument);
  EXPECT_THROW(ModeSet(0), std::invalid_argument);
  const auto fc = TransitionMatrix::from_counts(Matrix{{3.0, 1.0}, {0.0, 0.0}});
  EXPECT_DOUBLE_EQ(fc(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(fc(1, 1), 0.5);
  const auto st = TransitionMatrix::sticky(3, 0.9);
  EXPECT_NEAR(st(0, 0), 0.9, 1e-15);
  EXPECT_NEAR(st(0, 2), 0.05, 1e-15);
}

TEST(ModelParams, ValidatesShape) {
  std::mt19937_64 rng(5);
  const auto m = random_cartesian_model(2, 2, BasisFamily::linear(2), rng);
  EXPECT_EQ(m.num_modes(), 2);
  EXPECT_THROW(ModelParams(InitialDistribution::uniform(3), m.trans(), m.emissions()), DimensionError);
  std::vector<EmissionDynamics> one{m.emission(0)};
  EXPECT_THROW(ModelParams(m.init(), m.trans(), one), DimensionError);
  // Modes must agree on layout.
  const auto other = random_cartesian_model(2, 3, BasisFamily::linear(3), rng);
  std::vector<EmissionDynamics> mixed{m.emission(0), other.emission(0)};
  EXPECT_THROW(ModelParams(m.init(), m.trans(), mixed), DimensionError);
}
