#pragma once

#include <array>

#include <Eigen/Core>

namespace repcycle {

// Axis-angle below this norm uses the truncated series for R(theta).
inline constexpr double kSmallAngle = 1e-8;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// Rodrigues formula; exact identity-plus-skew series for tiny angles.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle);

// dR/d(theta_k) for k = 0, 1, 2.
std::array<Eigen::Matrix3d, 3> rodrigues_jacobian(const Eigen::Vector3d& axis_angle);

// Contracts an upstream gradient dL/dR into dL/dtheta.
Eigen::Vector3d rodrigues_vjp(const Eigen::Vector3d& axis_angle, const Eigen::Matrix3d& grad_rotation);

// Wraps the angle into [0, pi] while keeping the same rotation.
Eigen::Vector3d canonicalize_axis_angle(const Eigen::Vector3d& axis_angle);

Eigen::Vector3d rotation_to_axis_angle(const Eigen::Matrix3d& rotation);

// Nearest rotation in Frobenius norm (orthogonal polar factor with the
// reflection folded onto the smallest singular direction).
// Throws kDegenerateProjection when rank < 2.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m);

}  // namespace repcycle
