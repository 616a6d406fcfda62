#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nlarhmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kCovarianceFloor = 1e-9;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Error hierarchy. The CLI maps DataError to exit code 3 and
// NumericalError (and subclasses) to exit code 4.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : DataError {
  using DataError::DataError;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IllConditionedCovariance : NumericalError {
  using NumericalError::NumericalError;
};

struct ProbabilityUnderflow : NumericalError {
  using NumericalError::NumericalError;
};

// Raised by an emission M-step when a mode carries too little
// responsibility mass to determine its parameters.
struct InsufficientData : NumericalError {
  using NumericalError::NumericalError;
};

inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

// Number of hidden modes.
class ModeSet {
 public:
  explicit ModeSet(int count) : count_(count) {
    if (count < 1) throw std::invalid_argument("ModeSet: need at least one mode");
  }
  int count() const { return count_; }

 private:
  int count_;
};

class InitialDistribution {
 public:
  explicit InitialDistribution(Vector weights) : weights_(std::move(weights)) {
    if (weights_.size() < 1) throw std::invalid_argument("InitialDistribution: empty");
    for (double w : weights_) {
      if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("InitialDistribution: entry outside [0,1]");
    }
    if (std::abs(weights_.sum() - 1.0) > kSimplexTol) {
      throw std::invalid_argument("InitialDistribution: weights do not sum to 1");
    }
  }

  static InitialDistribution uniform(int S) { return InitialDistribution(Vector::Constant(S, 1.0 / S)); }

  // Normalizes non-negative masses; used by the M-step.
  static InitialDistribution from_counts(const Vector& counts) {
    const double total = counts.sum();
    if (!(total > 0.0)) throw NumericalError("InitialDistribution: zero total mass");
    Vector w = counts / total;
    w /= w.sum();
    return InitialDistribution(std::move(w));
  }

  const Vector& weights() const { return weights_; }
  int size() const { return static_cast<int>(weights_.size()); }
  double operator[](int i) const { return weights_(i); }

 private:
  Vector weights_;
};

class TransitionMatrix {
 public:
  explicit TransitionMatrix(Matrix probs) : probs_(std::move(probs)) {
    if (probs_.rows() < 1 || probs_.rows() != probs_.cols()) {
      throw std::invalid_argument("TransitionMatrix: must be square and non-empty");
    }
    for (Eigen::Index i = 0; i < probs_.rows(); ++i) {
      for (Eigen::Index j = 0; j < probs_.cols(); ++j) {
        const double p = probs_(i, j);
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("TransitionMatrix: entry outside [0,1]");
      }
      if (std::abs(probs_.row(i).sum() - 1.0) > kSimplexTol) {
        throw std::invalid_argument("TransitionMatrix: row " + std::to_string(i) + " does not sum to 1");
      }
    }
  }

  static TransitionMatrix uniform(int S) { return TransitionMatrix(Matrix::Constant(S, S, 1.0 / S)); }

  // Diagonal mass `stay`, remainder spread evenly over the other modes.
  static TransitionMatrix sticky(int S, double stay) {
    if (S == 1) return TransitionMatrix(Matrix::Ones(1, 1));
    Matrix m = Matrix::Constant(S, S, (1.0 - stay) / (S - 1));
    m.diagonal().setConstant(stay);
    return from_counts(m);
  }

  // Row-normalizes non-negative counts. Rows with no mass fall back to uniform.
  static TransitionMatrix from_counts(const Matrix& counts) {
    Matrix m = counts;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double total = m.row(i).sum();
      if (total > 0.0) {
        m.row(i) /= total;
        m.row(i) /= m.row(i).sum();
      } else {
        m.row(i).setConstant(1.0 / static_cast<double>(m.cols()));
      }
    }
    return TransitionMatrix(std::move(m));
  }

  const Matrix& probs() const { return probs_; }
  int size() const { return static_cast<int>(probs_.rows()); }
  double operator()(int i, int j) const { return probs_(i, j); }

 private:
  Matrix probs_;
};

namespace detail {

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return kNegInf;
  return es.eigenvalues()(0);
}

}  // namespace detail

// Symmetric positive-definite noise covariance with a cached Cholesky factor.
//
// Construction applies the global floor: if the factorization fails or the
// smallest eigenvalue is below 1e-9, 1e-9 * (trace/d) * I is added and the
// factorization is retried once. A zero or non-finite trace uses a unit
// scale so that noise-free data still yields a usable (tiny) covariance.
class GaussianNoise {
 public:
  explicit GaussianNoise(const Matrix& covariance) : GaussianNoise(covariance, true) {}

 private:
  GaussianNoise(const Matrix& covariance, bool check_floor) {
    if (covariance.rows() < 1 || covariance.rows() != covariance.cols()) {
      throw DimensionError("GaussianNoise: covariance must be square and non-empty");
    }
    if (!covariance.allFinite()) throw IllConditionedCovariance("GaussianNoise: non-finite covariance");
    cov_ = detail::symmetrized(covariance);
    if (!try_factor(check_floor)) {
      const double d = static_cast<double>(cov_.rows());
      double scale = cov_.trace() / d;
      if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
      cov_.diagonal().array() += kCovarianceFloor * scale;
      if (!try_factor(false)) {
        throw IllConditionedCovariance("GaussianNoise: covariance factorization failed after regularization");
      }
    }
  }

 public:
  static GaussianNoise identity(int d) { return GaussianNoise(Matrix::Identity(d, d)); }

  // Rebuilds a covariance that already went through the floor (e.g. loaded
  // from a model file) without regularizing it a second time.
  static GaussianNoise restored(const Matrix& covariance) { return GaussianNoise(covariance, false); }

  int dim() const { return static_cast<int>(cov_.rows()); }
  const Matrix& covariance() const { return cov_; }
  double log_det() const { return log_det_; }

  // Squared Mahalanobis norm rᵀ Σ⁻¹ r.
  double mahalanobis_sq(const Vector& r) const { return llt_.matrixL().solve(r).squaredNorm(); }

  // L⁻¹ R column-wise, where Σ = L Lᵀ.
  Matrix whiten(const Matrix& r) const { return llt_.matrixL().solve(r); }

  // Σ⁻¹ r.
  Vector solve(const Vector& r) const { return llt_.solve(r); }

  Matrix precision() const { return llt_.solve(Matrix::Identity(cov_.rows(), cov_.cols())); }

 private:
  bool try_factor(bool check_floor) {
    llt_.compute(cov_);
    if (llt_.info() != Eigen::Success) return false;
    const auto diag = llt_.matrixLLT().diagonal();
    if (!(diag.array() > 0.0).all() || !diag.allFinite()) return false;
    if (check_floor && detail::min_eigenvalue(cov_) < kCovarianceFloor) return false;
    log_det_ = 2.0 * diag.array().log().sum();
    return true;
  }

  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

inline double log_gaussian_density(const Vector& x, const Vector& mean, const GaussianNoise& cov) {
  require_same_size(x.size(), mean.size(), "log_gaussian_density");
  require_same_size(x.size(), cov.dim(), "log_gaussian_density");
  const double d = static_cast<double>(x.size());
  const double quad = cov.mahalanobis_sq(x - mean);
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + cov.log_det() + quad);
}

struct NormalizedWeights {
  Vector probs;
  double log_normalizer = 0.0;
};

// Max-shifted log-sum-exp normalization.
inline NormalizedWeights normalize_log_weights(const Vector& logw) {
  if (logw.size() < 1) throw std::invalid_argument("normalize_log_weights: empty input");
  const double m = logw.maxCoeff();
  if (std::isnan(m)) throw NumericalError("normalize_log_weights: NaN weight");
  if (m == kNegInf) throw ProbabilityUnderflow("normalize_log_weights: all weights are -inf");
  if (m == std::numeric_limits<double>::infinity()) throw NumericalError("normalize_log_weights: +inf weight");
  // Scalar exp: the vectorized one clamps -inf to a denormal instead of 0.
  Vector p = (logw.array() - m).unaryExpr([](double x) { return std::exp(x); }).matrix();
  const double total = p.sum();
  p /= total;
  return {std::move(p), m + std::log(total)};
}

inline double log_sum_exp(const Vector& logw) { return normalize_log_weights(logw).log_normalizer; }

// log of a probability, mapping 0 to -inf without a floating-point warning.
inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

}  // namespace nlarhmm
