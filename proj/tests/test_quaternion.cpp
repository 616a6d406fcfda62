#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace nlarhmm;
using namespace testutil;

namespace {

// Hamilton product written from the i² = j² = k² = ijk = -1 table.
Vector4 table_product(const Vector4& p, const Vector4& q) {
  // basis products e_a e_b = sign * e_c
  static const int idx[4][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
  static const double sgn[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, -1, -1, 1}, {1, 1, -1, -1}};
  Vector4 out = Vector4::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out(idx[a][b]) += sgn[a][b] * p(a) * q(b);
  return out;
}

Vector4 unit4(std::mt19937_64& rng) { return randn(4, rng).normalized(); }

// Noise-free trajectory q_{t+1} = Exp(r) q_t.
Matrix rotation_rows(const RotationVector& r, const Vector4& q0, int T) {
  const QuaternionDynamics dyn(r, GaussianNoise::identity(4));
  Matrix rows(T + 1, 4);
  UnitQuaternion q = UnitQuaternion::normalized(q0);
  rows.row(0) = q.vec().transpose();
  for (int t = 1; t <= T; ++t) {
    q = dyn.predict(q);
    rows.row(t) = q.vec().transpose();
  }
  return rows;
}

}  // namespace

TEST(Quaternion, ExpHasUnitNormEverywhere) {
  for (int i = 0; i <= 10000; ++i) {
    const double theta = 10.0 * M_PI * i / 10000.0;
    const Eigen::Vector3d axis = Eigen::Vector3d(1.0, -2.0, 0.5).normalized();
    const UnitQuaternion q = quat_exp(theta * axis(0), theta * axis(1), theta * axis(2));
    EXPECT_NEAR(q.vec().norm(), 1.0, 1e-14);
  }
  // series branch
  for (double theta : {0.0, 1e-12, 1e-9, 5e-9}) {
    const Vector4 e = exp_pure(theta, 0.0, 0.0);
    EXPECT_NEAR(e.norm(), 1.0, 1e-15);
    EXPECT_NEAR(e(1), std::sin(theta), 1e-20);
  }
  const Vector4 half_turn = exp_pure(0.0, 0.0, M_PI / 2);
  EXPECT_NEAR(half_turn(0), 0.0, 1e-15);
  EXPECT_NEAR(half_turn(3), 1.0, 1e-15);
}

TEST(Quaternion, MultiplicationTable) {
  const UnitQuaternion i(0, 1, 0, 0), j(0, 0, 1, 0), k(0, 0, 0, 1);
  EXPECT_EQ(quat_mul(i, j).vec(), k.vec());
  EXPECT_EQ(quat_mul(j, k).vec(), i.vec());
  EXPECT_EQ(quat_mul(k, i).vec(), j.vec());
  EXPECT_EQ(quat_mul(j, i).vec(), (-k).vec());
  EXPECT_EQ(quat_mul(i, i).vec(), Vector4(-1, 0, 0, 0));

  std::mt19937_64 rng(31);
  for (int n = 0; n < 100; ++n) {
    const Vector4 p = randn(4, rng), q = randn(4, rng);
    EXPECT_LE((hamilton(p, q) - table_product(p, q)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((right_mul_matrix(q) * p - hamilton(p, q)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Quaternion, PredictComposesIncrement) {
  std::mt19937_64 rng(32);
  for (int n = 0; n < 50; ++n) {
    const RotationVector r = 0.7 * randn(3, rng);
    const QuaternionDynamics dyn(r, GaussianNoise::identity(4));
    const UnitQuaternion q = UnitQuaternion::normalized(unit4(rng));
    const Vector4 expected = table_product(exp_pure(r(0), r(1), r(2)), q.vec());
    EXPECT_LE((dyn.predict(q).vec() - expected).cwiseAbs().maxCoeff(), 1e-14);
    // As rotations: R(Exp(r)) applied after R(q).
    const Matrix3 Rr = Eigen::AngleAxisd(2.0 * r.norm(), r.normalized()).toRotationMatrix();
    EXPECT_LE((to_rotation_matrix(dyn.predict(q)) - Rr * to_rotation_matrix(q)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Quaternion, LogEmissionMatchesDenseGaussian) {
  std::mt19937_64 rng(33);
  for (int n = 0; n < 50; ++n) {
    const Matrix cov = 0.1 * random_spd(4, rng);
    const RotationVector r = randn(3, rng);
    const QuaternionDynamics dyn(r, GaussianNoise(cov));
    const UnitQuaternion prev = UnitQuaternion::normalized(unit4(rng));
    const UnitQuaternion next = UnitQuaternion::normalized(unit4(rng));
    const Vector4 mean = table_product(exp_pure(r(0), r(1), r(2)), prev.vec());
    EXPECT_NEAR(dyn.log_emission(prev, next), dense_log_gaussian(next.vec(), mean, cov), 1e-10);
    // The emission is not invariant under the double cover.
    EXPECT_GT(std::abs(dyn.log_emission(prev, next) - dyn.log_emission(prev, -next)), 1e-6);
  }
}

TEST(Quaternion, BatchedLogEmissionsMatchPointwise) {
  std::mt19937_64 rng(34);
  const QuaternionDynamics dyn(randn(3, rng), GaussianNoise(0.05 * random_spd(4, rng)));
  Matrix rows(8, 4);
  for (int t = 0; t < 8; ++t) rows.row(t) = unit4(rng).transpose();
  const Vector le = dyn.log_emissions(dyn.prepare(rows));
  for (int t = 0; t < 7; ++t) {
    EXPECT_NEAR(le(t),
                dyn.log_emission(UnitQuaternion(Vector4(rows.row(t).transpose())),
                                 UnitQuaternion(Vector4(rows.row(t + 1).transpose()))),
                1e-12);
  }
}

TEST(Quaternion, ObjectiveEqualsDirectWeightedSum) {
  std::mt19937_64 rng(35);
  std::vector<QuaternionData> data;
  std::vector<Vector> g;
  for (int n = 0; n < 3; ++n) {
    Matrix rows(12, 4);
    for (int t = 0; t < 12; ++t) rows.row(t) = unit4(rng).transpose();
    data.push_back(QuaternionDynamics::identity().prepare(rows));
    Vector w(11);
    for (auto& x : w) x = uniform(rng);
    g.push_back(w);
  }
  const Matrix cov = 0.2 * random_spd(4, rng);
  const RotationObjective J(data, g, GaussianNoise(cov));
  const Matrix P = cov.inverse();
  for (int k = 0; k < 10; ++k) {
    const RotationVector r = randn(3, rng);
    const Vector4 e = exp_pure(r(0), r(1), r(2));
    double direct = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) {
      for (Eigen::Index t = 0; t < 11; ++t) {
        const Vector4 res = data[n].next.row(t).transpose() - table_product(e, data[n].prev.row(t).transpose());
        direct += g[n](t) * res.dot(P * res);
      }
    }
    EXPECT_NEAR(J.value(r), direct, 1e-9 * std::max(1.0, std::abs(direct)));
  }
}

TEST(Quaternion, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(36);
  std::vector<QuaternionData> data;
  std::vector<Vector> g;
  Matrix rows(30, 4);
  for (int t = 0; t < 30; ++t) rows.row(t) = unit4(rng).transpose();
  data.push_back(QuaternionDynamics::identity().prepare(rows));
  Vector w(29);
  for (auto& x : w) x = uniform(rng);
  g.push_back(w);
  const RotationObjective J(data, g, GaussianNoise(0.3 * random_spd(4, rng)));
  const double h = 1e-6;
  const std::vector<RotationVector> points = {RotationVector::Zero(), RotationVector(1e-9, -2e-9, 0.0),
                                              RotationVector(1e-5, 0.0, 3e-5), 0.4 * randn(3, rng), 2.0 * randn(3, rng)};
  for (const auto& r : points) {
    const RotationVector grad = J.gradient(r);
    RotationVector fd;
    for (int i = 0; i < 3; ++i) {
      RotationVector p = r, m = r;
      p(i) += h;
      m(i) -= h;
      fd(i) = (J.value(p) - J.value(m)) / (2 * h);
    }
    EXPECT_LT((grad - fd).norm() / std::max(fd.norm(), 1e-3), 1e-5) << "at r = " << r.transpose();
  }
}

TEST(Quaternion, NoiseFreeRotationIsRecovered) {
  std::mt19937_64 rng(37);
  const RotationVector truth(0.05, -0.02, 0.01);
  for (int draw = 0; draw < 8; ++draw) {
    std::vector<Matrix> seqs;
    std::vector<Vector> g;
    for (int n = 0; n < 4; ++n) {
      seqs.push_back(rotation_rows(truth, unit4(rng), 25));
      g.push_back(Vector::Ones(25));
    }
    OptimizerReport report;
    const auto dyn = QuaternionDynamics::identity().m_step(seqs, g, {}, CovarianceKind::Full, &report);
    EXPECT_LE((dyn.rotvec() - truth).cwiseAbs().maxCoeff(), 1e-6) << "iterations " << report.iterations;
  }
}

TEST(Quaternion, OptimizerNeverIncreasesObjective) {
  std::mt19937_64 rng(38);
  for (int k = 0; k < 20; ++k) {
    const RotationVector truth = 0.2 * randn(3, rng);
    Matrix rows = rotation_rows(truth, unit4(rng), 40);
    rows += 0.02 * randn(41, 4, rng);
    std::vector<Vector> g = {Vector::Ones(40)};
    for (auto& x : g[0]) x = uniform(rng);
    const RotationObjective J({QuaternionDynamics::identity().prepare(rows)}, g, GaussianNoise(random_spd(4, rng)));
    for (int iters : {1, 2, 5, 20, 100}) {
      OptimizerConfig cfg;
      cfg.max_iters = iters;
      const RotationVector start = randn(3, rng);
      const auto [x, report] = minimize_rotation(J, start, cfg);
      EXPECT_LE(report.final_objective, report.initial_objective);
      EXPECT_DOUBLE_EQ(report.final_objective, J.value(x));
      EXPECT_DOUBLE_EQ(report.initial_objective, J.value(start));
    }
  }
}

TEST(Quaternion, MStepValidation) {
  std::mt19937_64 rng(39);
  const std::vector<Matrix> seqs = {rotation_rows(RotationVector(0.1, 0, 0), unit4(rng), 10)};
  const auto dyn = QuaternionDynamics::identity();
  EXPECT_THROW(dyn.m_step(seqs, {Vector::Zero(10)}), InsufficientData);
  EXPECT_THROW(dyn.m_step(seqs, {Vector::Constant(10, -0.1)}), std::invalid_argument);
  EXPECT_THROW(dyn.prepare(Matrix::Zero(5, 3)), DimensionError);
}

TEST(Quaternion, CanonicalRotationVector) {
  const RotationVector r(0.3, -0.2, 0.1);
  const RotationVector wrapped = r + 2.0 * M_PI * r.normalized() * 3.0;
  const RotationVector c = canonical_rotvec(wrapped);
  EXPECT_LE((c - r).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((exp_pure(c(0), c(1), c(2)) - exp_pure(wrapped(0), wrapped(1), wrapped(2))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(canonical_rotvec(r), r);
}

TEST(Quaternion, RepeatedPredictionStaysUnit) {
  const QuaternionDynamics dyn(RotationVector(0.013, -0.021, 0.007), GaussianNoise::identity(4));
  UnitQuaternion q = UnitQuaternion::normalized(Vector4(0.3, -0.5, 0.1, 0.8));
  for (int t = 0; t < 1000000; ++t) q = dyn.predict(q);
  EXPECT_NEAR(q.vec().norm(), 1.0, 1e-12);
}

TEST(Quaternion, FromRotationMatrix) {
  EXPECT_LE((from_rotation_matrix(Matrix3::Identity()).vec() - Vector4(1, 0, 0, 0)).cwiseAbs().maxCoeff(), 1e-15);
  Matrix3 Rz;
  Rz << -1, 0, 0, 0, -1, 0, 0, 0, 1;
  const Vector4 q = from_rotation_matrix(Rz).vec();
  EXPECT_NEAR(std::abs(q(3)), 1.0, 1e-15);
  EXPECT_NEAR(q.head<3>().norm(), 0.0, 1e-15);

  std::mt19937_64 rng(40);
  for (int n = 0; n < 200; ++n) {
    const UnitQuaternion u = UnitQuaternion::normalized(unit4(rng));
    const UnitQuaternion back = from_rotation_matrix(to_rotation_matrix(u));
    EXPECT_NEAR(std::abs(back.vec().dot(u.vec())), 1.0, 1e-12);
  }
}

TEST(Quaternion, SignContinuize) {
  Matrix rows(4, 4);
  rows << 1, 0, 0, 0, -0.99, -0.1, 0, 0, 0.98, 0.2, 0, 0, -0.97, -0.24, 0, 0;
  sign_continuize(rows);
  for (int t = 1; t < 4; ++t) EXPECT_GT(rows.row(t).dot(rows.row(t - 1)), 0.0);
  EXPECT_GT(rows(3, 0), 0.0);
}
