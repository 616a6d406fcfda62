#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "nlarhmm/core.hpp"

namespace nlarhmm {

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;
using Matrix3 = Eigen::Matrix3d;

inline constexpr double kUnitNormTol = 1e-9;

// Quaternion q_r + q_i i + q_j j + q_k k stored as vec(q) = [q_r, q_i, q_j, q_k].
class UnitQuaternion {
 public:
  UnitQuaternion() : v_(1.0, 0.0, 0.0, 0.0) {}

  UnitQuaternion(double r, double i, double j, double k) : UnitQuaternion(Vector4(r, i, j, k)) {}

  explicit UnitQuaternion(const Vector4& v) : v_(v) {
    if (!v_.allFinite() || std::abs(v_.norm() - 1.0) > kUnitNormTol) {
      throw DataError("UnitQuaternion: norm " + std::to_string(v_.norm()) + " is not 1");
    }
  }

  // Scales a non-zero 4-vector onto the sphere.
  static UnitQuaternion normalized(const Vector4& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DataError("UnitQuaternion: cannot normalize a zero vector");
    return UnitQuaternion(Vector4(v / n));
  }

  static UnitQuaternion identity() { return {}; }

  const Vector4& vec() const { return v_; }
  double r() const { return v_(0); }
  double i() const { return v_(1); }
  double j() const { return v_(2); }
  double k() const { return v_(3); }

  UnitQuaternion operator-() const { return UnitQuaternion(Vector4(-v_)); }

 private:
  Vector4 v_;
};

// Matrix of right multiplication: vec(p * q) = right_mul_matrix(q) vec(p).
inline Matrix4 right_mul_matrix(const Vector4& q) {
  const double a = q(0), b = q(1), c = q(2), d = q(3);
  Matrix4 m;
  // clang-format off
  m << a, -b, -c, -d,
       b,  a,  d, -c,
       c, -d,  a,  b,
       d,  c, -b,  a;
  // clang-format on
  return m;
}

// Hamilton product on raw 4-vectors.
inline Vector4 hamilton(const Vector4& p, const Vector4& q) {
  return {p(0) * q(0) - p(1) * q(1) - p(2) * q(2) - p(3) * q(3),
          p(0) * q(1) + p(1) * q(0) + p(2) * q(3) - p(3) * q(2),
          p(0) * q(2) - p(1) * q(3) + p(2) * q(0) + p(3) * q(1),
          p(0) * q(3) + p(1) * q(2) - p(2) * q(1) + p(3) * q(0)};
}

inline UnitQuaternion quat_mul(const UnitQuaternion& p, const UnitQuaternion& q) {
  return UnitQuaternion(hamilton(p.vec(), q.vec()));
}

namespace detail {

inline constexpr double kSeriesThreshold = 1e-8;

// sin(θ)/θ
inline double sinc(double theta) {
  if (theta < kSeriesThreshold) return 1.0 - theta * theta / 6.0;
  return std::sin(theta) / theta;
}

// (θ cos θ - sin θ) / θ³, the derivative of sinc divided by θ.
inline double sinc_derivative_over_theta(double theta) {
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    return -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0;
  }
  return (theta * std::cos(theta) - std::sin(theta)) / (theta * theta * theta);
}

}  // namespace detail

// Exp(0 + a i + b j + c k) as a raw 4-vector.
inline Vector4 exp_pure(double a, double b, double c) {
  const double theta = std::sqrt(a * a + b * b + c * c);
  const double s = detail::sinc(theta);
  return {std::cos(theta), s * a, s * b, s * c};
}

inline UnitQuaternion quat_exp(double a, double b, double c) {
  Vector4 v = exp_pure(a, b, c);
  // cos² + sinc²θ² can drift from 1 by an ulp or two; keep the invariant tight.
  v /= v.norm();
  return UnitQuaternion(v);
}

// 4 × 3 Jacobian of exp_pure with respect to (a, b, c).
inline Eigen::Matrix<double, 4, 3> exp_pure_jacobian(double a, double b, double c) {
  const Eigen::Vector3d r(a, b, c);
  const double theta = r.norm();
  const double s = detail::sinc(theta);
  const double ds = detail::sinc_derivative_over_theta(theta);
  Eigen::Matrix<double, 4, 3> jac;
  jac.row(0) = -s * r.transpose();  // d cos θ / d r = -sin θ · r / θ
  jac.bottomRows<3>() = s * Matrix3::Identity() + ds * r * r.transpose();
  return jac;
}

// Robust rotation-matrix to unit-quaternion conversion (branch on the largest
// of the trace and diagonal entries).
inline UnitQuaternion from_rotation_matrix(const Matrix3& R) {
  const double tr = R.trace();
  Vector4 q;
  if (tr >= R(0, 0) && tr >= R(1, 1) && tr >= R(2, 2)) {
    const double r = 0.5 * std::sqrt(std::max(0.0, 1.0 + tr));
    const double f = 0.25 / r;
    q << r, (R(2, 1) - R(1, 2)) * f, (R(0, 2) - R(2, 0)) * f, (R(1, 0) - R(0, 1)) * f;
  } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
    const double i = 0.5 * std::sqrt(std::max(0.0, 1.0 + R(0, 0) - R(1, 1) - R(2, 2)));
    const double f = 0.25 / i;
    q << (R(2, 1) - R(1, 2)) * f, i, (R(0, 1) + R(1, 0)) * f, (R(0, 2) + R(2, 0)) * f;
  } else if (R(1, 1) >= R(2, 2)) {
    const double j = 0.5 * std::sqrt(std::max(0.0, 1.0 - R(0, 0) + R(1, 1) - R(2, 2)));
    const double f = 0.25 / j;
    q << (R(0, 2) - R(2, 0)) * f, (R(0, 1) + R(1, 0)) * f, j, (R(1, 2) + R(2, 1)) * f;
  } else {
    const double k = 0.5 * std::sqrt(std::max(0.0, 1.0 - R(0, 0) - R(1, 1) + R(2, 2)));
    const double f = 0.25 / k;
    q << (R(1, 0) - R(0, 1)) * f, (R(0, 2) + R(2, 0)) * f, (R(1, 2) + R(2, 1)) * f, k;
  }
  return UnitQuaternion::normalized(q);
}

inline Matrix3 to_rotation_matrix(const UnitQuaternion& q) {
  const double r = q.r(), i = q.i(), j = q.j(), k = q.k();
  Matrix3 R;
  // clang-format off
  R << 1 - 2 * (j * j + k * k), 2 * (i * j - k * r),     2 * (i * k + j * r),
       2 * (i * j + k * r),     1 - 2 * (i * i + k * k), 2 * (j * k - i * r),
       2 * (i * k - j * r),     2 * (j * k + i * r),     1 - 2 * (i * i + j * j);
  // clang-format on
  return R;
}

// Flips signs in place so that consecutive rows (each a vec(q)) have a
// non-negative dot product. `rows` is T × 4.
inline void sign_continuize(Eigen::Ref<Matrix> rows) {
  for (Eigen::Index t = 1; t < rows.rows(); ++t) {
    if (rows.row(t).dot(rows.row(t - 1)) < 0.0) rows.row(t) *= -1.0;
  }
}

}  // namespace nlarhmm
