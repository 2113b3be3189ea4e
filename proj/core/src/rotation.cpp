#include "repcycle/rotation.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "repcycle/error.hpp"

namespace repcycle {
namespace {

// Coefficients of R = I + a K + b K^2 with K = skew(theta) and t = |theta|,
// together with c = a'(t)/t and d = b'(t)/t. c and d lose all precision to
// cancellation for small t, so they switch to their series well above
// kSmallAngle.
struct RodriguesCoefficients {
  double a;
  double b;
  double c;
  double d;
};

constexpr double kDerivativeSeriesAngle = 1e-2;

RodriguesCoefficients coefficients(double t) {
  RodriguesCoefficients k{};
  const double t2 = t * t;
  if (t < kSmallAngle) {
    k.a = 1.0 - t2 / 6.0;
    k.b = 0.5 - t2 / 24.0;
  } else {
    const double half = std::sin(0.5 * t);
    k.a = std::sin(t) / t;
    k.b = 2.0 * half * half / t2;
  }
  if (t < kDerivativeSeriesAngle) {
    const double t4 = t2 * t2;
    k.c = -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0;
    k.d = -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0;
  } else {
    const double s = std::sin(t);
    const double co = std::cos(t);
    k.c = (t * co - s) / (t2 * t);
    k.d = (t * s - 2.0 * (1.0 - co)) / (t2 * t2);
  }
  return k;
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle) {
  const auto k = coefficients(axis_angle.norm());
  const Eigen::Matrix3d kk = skew(axis_angle);
  return Eigen::Matrix3d::Identity() + k.a * kk + k.b * kk * kk;
}

std::array<Eigen::Matrix3d, 3> rodrigues_jacobian(const Eigen::Vector3d& axis_angle) {
  const auto k = coefficients(axis_angle.norm());
  const Eigen::Matrix3d kk = skew(axis_angle);
  const Eigen::Matrix3d kk2 = kk * kk;
  std::array<Eigen::Matrix3d, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix3d e = skew(Eigen::Vector3d::Unit(i));
    out[i] = axis_angle[i] * (k.c * kk + k.d * kk2) + k.a * e + k.b * (e * kk + kk * e);
  }
  return out;
}

Eigen::Vector3d rodrigues_vjp(const Eigen::Vector3d& axis_angle, const Eigen::Matrix3d& grad_rotation) {
  const auto jac = rodrigues_jacobian(axis_angle);
  return {(jac[0].cwiseProduct(grad_rotation)).sum(), (jac[1].cwiseProduct(grad_rotation)).sum(),
          (jac[2].cwiseProduct(grad_rotation)).sum()};
}

Eigen::Vector3d canonicalize_axis_angle(const Eigen::Vector3d& axis_angle) {
  const double t = axis_angle.norm();
  if (t <= std::numbers::pi) {
    return axis_angle;
  }
  const Eigen::Vector3d axis = axis_angle / t;
  double wrapped = std::fmod(t, 2.0 * std::numbers::pi);
  if (wrapped > std::numbers::pi) {
    wrapped -= 2.0 * std::numbers::pi;
  }
  return axis * wrapped;
}

Eigen::Vector3d rotation_to_axis_angle(const Eigen::Matrix3d& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.axis() * aa.angle();
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  require(m.allFinite(), ErrorCode::kInvalidInput, "orthonormalize: non-finite input");
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  require(sigma(0) > 0.0 && sigma(1) > 1e-12 * sigma(0), ErrorCode::kDegenerateProjection,
          "orthonormalize: input rank < 2");
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return u * d.asDiagonal() * v.transpose();
}

}  // namespace repcycle
