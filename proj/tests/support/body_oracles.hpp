#pragma once

// Central-difference oracle for the reverse-mode derivative of pose_body.

#include <algorithm>
#include <vector>

#include "generators.hpp"
#include "repcycle/body_model.hpp"

namespace repcycle::testing {

inline double lbs_scalar_loss(const body::BodyTemplate& t, const body::ShapeParams& beta, const body::PoseParams& pose,
                              const body::Points& cv, const body::Points& cj) {
  const auto mesh = body::pose_body(t, beta, pose);
  return (mesh.vertices.array() * cv.array()).sum() + (mesh.joints.array() * cj.array()).sum();
}

// |analytic - numeric| / |numeric| over all of (beta, theta, translation) for
// one random configuration and random upstream gradients.
inline double lbs_gradient_relative_error(const body::BodyTemplate& t, Rng& rng) {
  const auto beta = random_shape(rng, t.shape_count(), 1.5);
  const auto pose = random_pose(rng, t.joint_count(), 1.2, 1.0);
  const body::Points cv = random_points(rng, t.vertex_count(), 1.0);
  const body::Points cj = random_points(rng, t.joint_count(), 1.0);
  const auto g = body::pose_body_vjp(t, beta, pose, cv, cj);

  const double h = 1e-4;
  std::vector<double> analytic, numeric;
  auto central = [&](const body::ShapeParams& bp, const body::PoseParams& pp, const body::ShapeParams& bm,
                     const body::PoseParams& pm) {
    return (lbs_scalar_loss(t, bp, pp, cv, cj) - lbs_scalar_loss(t, bm, pm, cv, cj)) / (2 * h);
  };
  for (int i = 0; i < beta.size(); ++i) {
    auto bp = beta, bm = beta;
    bp.beta[i] += h;
    bm.beta[i] -= h;
    numeric.push_back(central(bp, pose, bm, pose));
    analytic.push_back(g.beta[i]);
  }
  for (int j = 0; j < pose.joint_count(); ++j) {
    for (int k = 0; k < 3; ++k) {
      auto pp = pose, pm = pose;
      pp.axis_angles(j, k) += h;
      pm.axis_angles(j, k) -= h;
      numeric.push_back(central(beta, pp, beta, pm));
      analytic.push_back(g.axis_angles(j, k));
    }
  }
  for (int k = 0; k < 3; ++k) {
    auto pp = pose, pm = pose;
    pp.translation[k] += h;
    pm.translation[k] -= h;
    numeric.push_back(central(beta, pp, beta, pm));
    analytic.push_back(g.translation[k]);
  }
  const Eigen::Map<Eigen::VectorXd> a(analytic.data(), static_cast<Eigen::Index>(analytic.size()));
  const Eigen::Map<Eigen::VectorXd> n(numeric.data(), static_cast<Eigen::Index>(numeric.size()));
  return (a - n).norm() / std::max(n.norm(), 1e-12);
}

}  // namespace repcycle::testing
