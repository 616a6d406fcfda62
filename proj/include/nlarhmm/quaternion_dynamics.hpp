#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "nlarhmm/cartesian_dynamics.hpp"
#include "nlarhmm/core.hpp"
#include "nlarhmm/quaternion.hpp"

namespace nlarhmm {

// Gradient descent with backtracking for the rotation-vector update.
struct OptimizerConfig {
  double initial_step = 1e-1;
  double grad_tol = 1e-8;  // stop when the gradient ∞-norm falls below this
  int max_iters = 500;
  double min_step = 1e-30;  // give up on an iteration once the step shrinks below this
};

struct OptimizerReport {
  int iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  bool converged = false;  // gradient tolerance reached
};

using RotationVector = Eigen::Vector3d;

// Consecutive quaternion pairs of one sequence.
struct QuaternionData {
  Matrix prev;  // T × 4, row t = vec(q_t)
  Matrix next;  // T × 4, row t = vec(q_{t+1})
};

// The weighted Σ⁻¹-seminorm objective
//   J(r) = Σ_t γ_t |vec(q_{t+1}) - vec(Exp(r) * q_t)|²_{Σ⁻¹}
// reduced to its sufficient statistics: since vec(p * q_t) = R(q_t) vec(p),
//   J(r) = c - 2 vᵀ e(r) + e(r)ᵀ M e(r),  e(r) = vec(Exp(r)).
class RotationObjective {
 public:
  RotationObjective(const std::vector<QuaternionData>& data, const std::vector<Vector>& gammas,
                    const GaussianNoise& noise) {
    require_same_size(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(gammas.size()),
                      "RotationObjective");
    require_same_size(noise.dim(), 4, "RotationObjective noise");
    const Matrix4 precision = noise.precision();
    constant_ = 0.0;
    linear_.setZero();
    quadratic_.setZero();
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& seq = data[n];
      require_same_size(gammas[n].size(), seq.prev.rows(), "RotationObjective gamma length");
      for (Eigen::Index t = 0; t < seq.prev.rows(); ++t) {
        const double g = gammas[n](t);
        if (g == 0.0) continue;
        const Vector4 qn = seq.next.row(t).transpose();
        const Matrix4 R = right_mul_matrix(seq.prev.row(t).transpose());
        const Vector4 Pqn = precision * qn;
        constant_ += g * qn.dot(Pqn);
        linear_.noalias() += g * R.transpose() * Pqn;
        quadratic_.noalias() += g * R.transpose() * precision * R;
      }
    }
    quadratic_ = 0.5 * (quadratic_ + quadratic_.transpose());
  }

  double value(const RotationVector& r) const {
    const Vector4 e = exp_pure(r(0), r(1), r(2));
    return constant_ - 2.0 * linear_.dot(e) + e.dot(quadratic_ * e);
  }

  RotationVector gradient(const RotationVector& r) const {
    const Vector4 e = exp_pure(r(0), r(1), r(2));
    const Vector4 de = 2.0 * (quadratic_ * e - linear_);
    return exp_pure_jacobian(r(0), r(1), r(2)).transpose() * de;
  }

 private:
  double constant_ = 0.0;
  Vector4 linear_;
  Matrix4 quadratic_;
};

// Backtracking gradient descent: each iteration starts from the configured
// step and halves it until the objective decreases.
inline std::pair<RotationVector, OptimizerReport> minimize_rotation(const RotationObjective& objective,
                                                                    RotationVector start,
                                                                    const OptimizerConfig& cfg) {
  OptimizerReport report;
  RotationVector x = std::move(start);
  double fx = objective.value(x);
  if (!std::isfinite(fx)) throw NumericalError("minimize_rotation: non-finite objective");
  report.initial_objective = fx;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const RotationVector g = objective.gradient(x);
    if (!g.allFinite()) throw NumericalError("minimize_rotation: non-finite gradient");
    if (g.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
      report.converged = true;
      break;
    }
    double step = cfg.initial_step;
    bool moved = false;
    while (step >= cfg.min_step) {
      const RotationVector candidate = x - step * g;
      const double fc = objective.value(candidate);
      if (fc < fx) {
        x = candidate;
        fx = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    report.iterations = it + 1;
    if (!moved) break;
  }
  report.final_objective = fx;
  return {x, report};
}

// Equivalent rotation vector with |r| <= π; Exp(r) is unchanged.
inline RotationVector canonical_rotvec(const RotationVector& r) {
  const double theta = r.norm();
  if (theta <= std::numbers::pi) return r;
  return r * (std::remainder(theta, 2.0 * std::numbers::pi) / theta);
}

// q_t | z_t = s, q_{t-1} ~ N(vec(q_t) | vec(Exp(a i + b j + c k) * q_{t-1}), Σ_s)
class QuaternionDynamics {
 public:
  QuaternionDynamics(RotationVector rotvec, GaussianNoise noise) : rotvec_(std::move(rotvec)), noise_(std::move(noise)) {
    require_same_size(noise_.dim(), 4, "QuaternionDynamics noise");
    if (!rotvec_.allFinite()) throw DataError("QuaternionDynamics: non-finite rotation vector");
  }

  static QuaternionDynamics identity() { return {RotationVector::Zero(), GaussianNoise::identity(4)}; }

  const RotationVector& rotvec() const { return rotvec_; }
  const GaussianNoise& noise() const { return noise_; }

  UnitQuaternion increment() const { return quat_exp(rotvec_(0), rotvec_(1), rotvec_(2)); }

  UnitQuaternion predict(const UnitQuaternion& q_prev) const {
    Vector4 v = hamilton(increment().vec(), q_prev.vec());
    if (std::abs(v.norm() - 1.0) > 1e-12) v.normalize();
    return UnitQuaternion(v);
  }

  double log_emission(const UnitQuaternion& q_prev, const UnitQuaternion& q_next) const {
    return log_gaussian_density(q_next.vec(), predict(q_prev).vec(), noise_);
  }

  // `rows` holds vec(q_0)..vec(q_T) of one sequence.
  QuaternionData prepare(const Matrix& rows) const {
    require_same_size(rows.cols(), 4, "QuaternionDynamics::prepare");
    if (rows.rows() < 2) throw DataError("QuaternionDynamics::prepare: need at least two observations");
    const Eigen::Index T = rows.rows() - 1;
    return {rows.topRows(T), rows.bottomRows(T)};
  }

  // vec(Exp(r) * q_t) for every row, T × 4.
  Matrix predicted_rows(const QuaternionData& data) const {
    const Vector4 e = exp_pure(rotvec_(0), rotvec_(1), rotvec_(2));
    Matrix out(data.prev.rows(), 4);
    for (Eigen::Index t = 0; t < data.prev.rows(); ++t) {
      Vector4 v = hamilton(e, data.prev.row(t).transpose());
      const double n = v.norm();
      if (std::abs(n - 1.0) > 1e-12) v /= n;
      out.row(t) = v.transpose();
    }
    return out;
  }

  Vector log_emissions(const QuaternionData& data) const {
    const Matrix residual = (data.next - predicted_rows(data)).transpose();
    return CartesianDynamics::gaussian_log_densities(residual, noise_);
  }

  double weighted_log_likelihood(const std::vector<QuaternionData>& data, const std::vector<Vector>& gammas) const {
    double total = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) total += gammas[n].dot(log_emissions(data[n]));
    return total;
  }

  // Σ is updated first from the residuals of the incoming rotation vector;
  // the rotation vector is then refined by backtracking gradient descent on
  // the weighted Σ⁻¹-seminorm objective, warm-started at the incoming value.
  QuaternionDynamics m_step(const std::vector<QuaternionData>& data, const std::vector<Vector>& gammas,
                            const OptimizerConfig& opt = {}, CovarianceKind cov_kind = CovarianceKind::Full,
                            OptimizerReport* report = nullptr) const {
    require_same_size(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(gammas.size()),
                      "QuaternionDynamics::m_step");
    Matrix4 scatter = Matrix4::Zero();
    double total = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& g = gammas[n];
      require_same_size(g.size(), data[n].prev.rows(), "QuaternionDynamics::m_step gamma length");
      if ((g.array() < 0.0).any() || (g.array() > 1.0).any() || !g.allFinite()) {
        throw std::invalid_argument("QuaternionDynamics::m_step: responsibilities must lie in [0,1]");
      }
      const Matrix residual = data[n].next - predicted_rows(data[n]);  // T × 4
      scatter.noalias() += residual.transpose() * (residual.array().colwise() * g.array()).matrix();
      total += g.sum();
    }
    if (!(total > kMinModeWeight)) {
      throw InsufficientData("QuaternionDynamics::m_step: mode has no responsibility mass");
    }
    Matrix sigma = scatter / total;
    if (cov_kind == CovarianceKind::Diagonal) sigma = Matrix(sigma.diagonal().asDiagonal());
    GaussianNoise noise(sigma);

    const RotationObjective objective(data, gammas, noise);
    auto [rotvec, rep] = minimize_rotation(objective, rotvec_, opt);
    if (report != nullptr) *report = rep;
    return QuaternionDynamics(canonical_rotvec(rotvec), std::move(noise));
  }

  QuaternionDynamics m_step(const std::vector<Matrix>& sequences, const std::vector<Vector>& gammas,
                            const OptimizerConfig& opt = {}, CovarianceKind cov_kind = CovarianceKind::Full,
                            OptimizerReport* report = nullptr) const {
    std::vector<QuaternionData> data;
    data.reserve(sequences.size());
    for (const auto& rows : sequences) data.push_back(prepare(rows));
    return m_step(data, gammas, opt, cov_kind, report);
  }

 private:
  RotationVector rotvec_;
  GaussianNoise noise_;
};

}  // namespace nlarhmm
