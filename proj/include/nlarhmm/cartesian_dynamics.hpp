#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "nlarhmm/basis.hpp"
#include "nlarhmm/core.hpp"

namespace nlarhmm {

enum class CovarianceKind { Full, Diagonal };

// Minimum total responsibility a mode needs before its emission parameters
// are re-estimated.
inline constexpr double kMinModeWeight = 1e-8;

// Transitions of one sequence restricted to a Cartesian block, with the
// features of every predecessor evaluated once.
struct CartesianData {
  Matrix features;  // T × L, row t = φ(y_t)
  Matrix next;      // T × d, row t = y_{t+1}
};

// y_t | z_t = s, y_{t-1} ~ N(Ω_s φ(y_{t-1}), Σ_s)
class CartesianDynamics {
 public:
  CartesianDynamics(BasisFamily basis, Matrix weights, GaussianNoise noise)
      : basis_(std::move(basis)), weights_(std::move(weights)), noise_(std::move(noise)) {
    if (weights_.cols() != basis_.output_len()) {
      throw DimensionError("CartesianDynamics: weight columns (" + std::to_string(weights_.cols()) +
                           ") != basis output length (" + std::to_string(basis_.output_len()) + ")");
    }
    if (weights_.rows() != basis_.input_dim() || noise_.dim() != basis_.input_dim()) {
      throw DimensionError("CartesianDynamics: weight rows and noise dimension must equal d");
    }
  }

  // Ω = 0, Σ = I.
  static CartesianDynamics zero(const BasisFamily& basis) {
    const int d = basis.input_dim();
    return CartesianDynamics(basis, Matrix::Zero(d, basis.output_len()), GaussianNoise::identity(d));
  }

  const BasisFamily& basis() const { return basis_; }
  const Matrix& weights() const { return weights_; }
  const GaussianNoise& noise() const { return noise_; }
  int dim() const { return basis_.input_dim(); }

  Vector predict(const Vector& y_prev) const { return weights_ * basis_.evaluate(y_prev); }

  double log_emission(const Vector& y_prev, const Vector& y_next) const {
    require_same_size(y_next.size(), dim(), "CartesianDynamics::log_emission");
    return log_gaussian_density(y_next, predict(y_prev), noise_);
  }

  // `rows` holds y_0..y_T of one sequence (one observation per row).
  CartesianData prepare(const Matrix& rows) const {
    require_same_size(rows.cols(), dim(), "CartesianDynamics::prepare");
    if (rows.rows() < 2) throw DataError("CartesianDynamics::prepare: need at least two observations");
    const Eigen::Index T = rows.rows() - 1;
    return {basis_.evaluate_rows(rows.topRows(T)), rows.bottomRows(T)};
  }

  // log p(y_{t+1} | y_t) for every transition of a prepared sequence.
  Vector log_emissions(const CartesianData& data) const {
    require_same_size(data.features.cols(), basis_.output_len(), "CartesianDynamics::log_emissions");
    const Matrix residual = (data.next - data.features * weights_.transpose()).transpose();  // d × T
    return gaussian_log_densities(residual, noise_);
  }

  // Sum of weighted log-emissions; the per-mode Q_out term.
  double weighted_log_likelihood(const std::vector<CartesianData>& data, const std::vector<Vector>& gammas) const {
    require_same_size(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(gammas.size()),
                      "CartesianDynamics::weighted_log_likelihood");
    double total = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) total += gammas[n].dot(log_emissions(data[n]));
    return total;
  }

  // Weighted M-step. Σ is re-estimated first from the residuals of the
  // incoming Ω; Ω is then the weighted least-squares solution, computed from
  // the √γ-scaled design (minimum-norm when the design is rank deficient).
  // Sums run over all sequences.
  CartesianDynamics m_step(const std::vector<CartesianData>& data, const std::vector<Vector>& gammas,
                           CovarianceKind cov_kind = CovarianceKind::Full) const {
    require_same_size(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(gammas.size()),
                      "CartesianDynamics::m_step");
    const Eigen::Index L = basis_.output_len();
    const Eigen::Index d = dim();
    Eigen::Index rows = 0;
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& g = gammas[n];
      require_same_size(g.size(), data[n].next.rows(), "CartesianDynamics::m_step gamma length");
      if ((g.array() < 0.0).any() || (g.array() > 1.0).any() || !g.allFinite()) {
        throw std::invalid_argument("CartesianDynamics::m_step: responsibilities must lie in [0,1]");
      }
      rows += (g.array() > 0.0).count();
    }

    Matrix design(rows, L);   // rows √γ φ(y_t)ᵀ
    Matrix target(rows, d);   // rows √γ y_{t+1}ᵀ
    Matrix scatter = Matrix::Zero(d, d);  // Σ γ e eᵀ with e from the incoming Ω
    double total = 0.0;
    Eigen::Index r = 0;
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& seq = data[n];
      const auto& g = gammas[n];
      const Matrix residual = seq.next - seq.features * weights_.transpose();  // T × d
      scatter.noalias() += residual.transpose() * (residual.array().colwise() * g.array()).matrix();
      total += g.sum();
      for (Eigen::Index t = 0; t < g.size(); ++t) {
        if (!(g(t) > 0.0)) continue;
        const double w = std::sqrt(g(t));
        design.row(r) = w * seq.features.row(t);
        target.row(r) = w * seq.next.row(t);
        ++r;
      }
    }
    if (!(total > kMinModeWeight)) {
      throw InsufficientData("CartesianDynamics::m_step: mode has no responsibility mass");
    }

    Matrix sigma = scatter / total;
    if (cov_kind == CovarianceKind::Diagonal) sigma = Matrix(sigma.diagonal().asDiagonal());
    GaussianNoise noise(sigma);

    Matrix omega = solve_least_squares(design, target);
    return CartesianDynamics(basis_, std::move(omega), std::move(noise));
  }

  // Convenience overload taking raw per-sequence block rows (y_0..y_T each).
  CartesianDynamics m_step(const std::vector<Matrix>& sequences, const std::vector<Vector>& gammas,
                           CovarianceKind cov_kind = CovarianceKind::Full) const {
    std::vector<CartesianData> data;
    data.reserve(sequences.size());
    for (const auto& rows : sequences) data.push_back(prepare(rows));
    return m_step(data, gammas, cov_kind);
  }

  // Log-densities of the columns of `residual` under N(0, Σ).
  static Vector gaussian_log_densities(const Matrix& residual, const GaussianNoise& noise) {
    const Matrix white = noise.whiten(residual);
    const double d = static_cast<double>(residual.rows());
    const double c = d * std::log(2.0 * std::numbers::pi) + noise.log_det();
    return (-0.5 * (white.colwise().squaredNorm().array() + c)).matrix().transpose();
  }

 private:
  static Matrix solve_least_squares(const Matrix& design, const Matrix& target) {
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(design);
    Matrix omega = cod.solve(target).transpose();
    if (!omega.allFinite()) throw NumericalError("CartesianDynamics::m_step: non-finite weights");
    return omega;
  }

  BasisFamily basis_;
  Matrix weights_;
  GaussianNoise noise_;
};

}  // namespace nlarhmm
