#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "nlarhmm/core.hpp"

namespace nlarhmm {

// φ(y) = [1, y_1, ..., y_d]
struct LinearBasis {
  int d = 1;
};

// φ_0 = 1, φ_i(y) = exp(-|y - μ_i|² / ς_i) for i = 1..N (isotropic covariances ς_i I).
struct GrbfBasis {
  Matrix centers;  // N × d, one center per row
  Vector widths;   // N
};

// All monomials ∏ y_i^{c_i} with Σ c_i ≤ k, graded lexicographic order.
struct PolynomialBasis {
  int d = 1;
  int k = 1;
};

inline std::int64_t binomial(int n, int r) {
  if (r < 0 || r > n) return 0;
  std::int64_t out = 1;
  for (int i = 1; i <= r; ++i) out = out * (n - r + i) / i;
  return out;
}

// Exponent tuples for total degree ≤ k: degree 0 first, then 1, ...; within a
// degree, lexicographically descending (largest c_1 first, then c_2, ...).
inline std::vector<std::vector<int>> monomial_exponents(int d, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(d), 0);
  // Fill positions i..d-1 with exactly `remaining` total degree, largest first.
  auto fill = [&](auto&& self, int i, int remaining) -> void {
    if (i == d - 1) {
      current[static_cast<std::size_t>(i)] = remaining;
      out.push_back(current);
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      current[static_cast<std::size_t>(i)] = c;
      self(self, i + 1, remaining - c);
    }
  };
  for (int degree = 0; degree <= k; ++degree) fill(fill, 0, degree);
  return out;
}

class BasisFamily {
 public:
  using Kind = std::variant<LinearBasis, GrbfBasis, PolynomialBasis>;

  BasisFamily(LinearBasis b) : kind_(b) {
    if (b.d < 1) throw std::invalid_argument("LinearBasis: d must be >= 1");
  }

  BasisFamily(GrbfBasis b) : kind_(std::move(b)) {
    const auto& g = std::get<GrbfBasis>(kind_);
    if (g.centers.rows() != g.widths.size()) {
      throw std::invalid_argument("GrbfBasis: need one width per center");
    }
    if (g.centers.cols() < 1) throw std::invalid_argument("GrbfBasis: centers need d >= 1 columns");
    for (double w : g.widths) {
      if (!(w > 0.0)) throw std::invalid_argument("GrbfBasis: widths must be strictly positive");
    }
  }

  BasisFamily(PolynomialBasis b) : kind_(b) {
    if (b.d < 1 || b.k < 1) throw std::invalid_argument("PolynomialBasis: need d >= 1 and k >= 1");
    exponents_ = monomial_exponents(b.d, b.k);
  }

  static BasisFamily linear(int d) { return BasisFamily(LinearBasis{d}); }
  static BasisFamily polynomial(int d, int k) { return BasisFamily(PolynomialBasis{d, k}); }
  static BasisFamily grbf(Matrix centers, Vector widths) {
    return BasisFamily(GrbfBasis{std::move(centers), std::move(widths)});
  }

  const Kind& kind() const { return kind_; }

  int input_dim() const {
    return std::visit(
        [](const auto& b) -> int {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, GrbfBasis>) {
            return static_cast<int>(b.centers.cols());
          } else {
            return b.d;
          }
        },
        kind_);
  }

  int output_len() const {
    return std::visit(
        [](const auto& b) -> int {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, LinearBasis>) {
            return b.d + 1;
          } else if constexpr (std::is_same_v<T, GrbfBasis>) {
            return static_cast<int>(b.centers.rows()) + 1;
          } else {
            return static_cast<int>(binomial(b.d + b.k, b.k));
          }
        },
        kind_);
  }

  Vector evaluate(const Vector& y) const {
    require_same_size(y.size(), input_dim(), "BasisFamily::evaluate");
    return evaluate_rows(y.transpose()).row(0).transpose();
  }

  // Row-wise evaluation: row t of the result is φ(Y.row(t)).
  Matrix evaluate_rows(const Matrix& Y) const {
    require_same_size(Y.cols(), input_dim(), "BasisFamily::evaluate_rows");
    const Eigen::Index n = Y.rows();
    Matrix out(n, output_len());
    out.col(0).setOnes();
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, LinearBasis>) {
            out.rightCols(b.d) = Y;
          } else if constexpr (std::is_same_v<T, GrbfBasis>) {
            for (Eigen::Index i = 0; i < b.centers.rows(); ++i) {
              const auto diff = Y.rowwise() - b.centers.row(i);
              out.col(i + 1) = (-diff.rowwise().squaredNorm() / b.widths(i)).array().exp().matrix();
            }
          } else {
            for (std::size_t m = 0; m < exponents_.size(); ++m) {
              auto col = out.col(static_cast<Eigen::Index>(m));
              col.setOnes();
              for (int i = 0; i < b.d; ++i) {
                const int c = exponents_[m][static_cast<std::size_t>(i)];
                for (int p = 0; p < c; ++p) col.array() *= Y.col(i).array();
              }
            }
          }
        },
        kind_);
    return out;
  }

  // Exponent table for polynomial bases (empty otherwise).
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

 private:
  Kind kind_;
  std::vector<std::vector<int>> exponents_;
};

inline Vector evaluate(const BasisFamily& family, const Vector& y) { return family.evaluate(y); }
inline int output_len(const BasisFamily& family) { return family.output_len(); }

// GRBF family with `per_dim` centers per axis on a uniform grid spanning the
// box [lower, upper]; every width is the squared grid spacing (the smallest
// spacing across axes), so neighbouring bumps overlap at about exp(-1).
inline BasisFamily grbf_on_grid(const Vector& lower, const Vector& upper, int per_dim) {
  require_same_size(lower.size(), upper.size(), "grbf_on_grid");
  if (per_dim < 1) throw std::invalid_argument("grbf_on_grid: per_dim must be >= 1");
  const int d = static_cast<int>(lower.size());
  Eigen::Index n = 1;
  for (int i = 0; i < d; ++i) n *= per_dim;
  Matrix centers(n, d);
  double spacing = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    const double span = upper(i) - lower(i);
    if (!(span > 0.0)) throw std::invalid_argument("grbf_on_grid: empty box");
    spacing = std::min(spacing, per_dim > 1 ? span / (per_dim - 1) : span);
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index rest = c;
    for (int i = 0; i < d; ++i) {
      const Eigen::Index idx = rest % per_dim;
      rest /= per_dim;
      const double t = per_dim > 1 ? static_cast<double>(idx) / (per_dim - 1) : 0.5;
      centers(c, i) = lower(i) + t * (upper(i) - lower(i));
    }
  }
  return BasisFamily::grbf(std::move(centers), Vector::Constant(n, spacing * spacing));
}

}  // namespace nlarhmm
