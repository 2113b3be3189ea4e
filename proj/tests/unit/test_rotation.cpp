#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "generators.hpp"
#include "repcycle/error.hpp"
#include "repcycle/rotation.hpp"

namespace repcycle {
namespace {

TEST(Rodrigues, MatchesEigenAngleAxis) {
  Rng rng = derive_rng(1);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d aa = testing::random_vector(rng, 3.0);
    const Eigen::Matrix3d expected = Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
    EXPECT_LT((rodrigues(aa) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rodrigues, ZeroIsIdentityAndTinyAnglesAreFinite) {
  EXPECT_EQ(rodrigues(Eigen::Vector3d::Zero()), Eigen::Matrix3d::Identity());
  const Eigen::Vector3d tiny(1e-10, -2e-10, 5e-11);
  const Eigen::Matrix3d r = rodrigues(tiny);
  EXPECT_TRUE(r.allFinite());
  EXPECT_LT((r - (Eigen::Matrix3d::Identity() + skew(tiny))).cwiseAbs().maxCoeff(), 1e-18);
  for (const auto& d : rodrigues_jacobian(tiny)) EXPECT_TRUE(d.allFinite());
}

TEST(Rodrigues, JacobianMatchesFiniteDifferencesAcrossScales) {
  Rng rng = derive_rng(2);
  for (double scale : {1e-6, 1e-3, 5e-3, 0.02, 0.5, 2.0, 3.0}) {
    for (int i = 0; i < 20; ++i) {
      Eigen::Vector3d aa = testing::random_vector(rng, 1.0).normalized() * scale * uniform(rng, 0.5, 1.0);
      const auto jac = rodrigues_jacobian(aa);
      const double h = 1e-6;
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d p = aa, m = aa;
        p[k] += h;
        m[k] -= h;
        const Eigen::Matrix3d fd = (rodrigues(p) - rodrigues(m)) / (2 * h);
        EXPECT_LT((fd - jac[k]).cwiseAbs().maxCoeff(), 1e-7) << "scale " << scale;
      }
    }
  }
}

TEST(Rodrigues, VjpContractsJacobian) {
  Rng rng = derive_rng(3);
  const Eigen::Vector3d aa = testing::random_vector(rng, 2.0);
  Eigen::Matrix3d g;
  for (int i = 0; i < 9; ++i) g(i / 3, i % 3) = standard_normal(rng);
  const auto jac = rodrigues_jacobian(aa);
  const Eigen::Vector3d v = rodrigues_vjp(aa, g);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(v[k], (jac[k].array() * g.array()).sum(), 1e-12);
}

TEST(AxisAngle, CanonicalizeKeepsRotation) {
  Rng rng = derive_rng(4);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d aa = testing::random_vector(rng, 3.0).normalized() * uniform(rng, 0.0, 12.0);
    const Eigen::Vector3d c = canonicalize_axis_angle(aa);
    EXPECT_LE(c.norm(), std::numbers::pi + 1e-12);
    EXPECT_LT((rodrigues(c) - rodrigues(aa)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(AxisAngle, RotationRoundTrip) {
  Rng rng = derive_rng(5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d r = testing::random_rotation(rng);
    EXPECT_LT((rodrigues(rotation_to_axis_angle(r)) - r).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Orthonormalize, ProducesProperRotations) {
  Rng rng = derive_rng(6);
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix3d m;
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = standard_normal(rng);
    const Eigen::Matrix3d r = orthonormalize(m);
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(Orthonormalize, FixedPointOnRotations) {
  Rng rng = derive_rng(7);
  const Eigen::Matrix3d r = testing::random_rotation(rng);
  EXPECT_LT((orthonormalize(r) - r).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((orthonormalize(2.5 * r) - r).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Orthonormalize, IsFrobeniusNearestAmongSampledRotations) {
  Rng rng = derive_rng(8);
  Eigen::Matrix3d m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = standard_normal(rng);
  const double best = (orthonormalize(m) - m).norm();
  for (int i = 0; i < 2000; ++i) EXPECT_LE(best, (testing::random_rotation(rng) - m).norm() + 1e-12);
}

TEST(Orthonormalize, RankOneIsDegenerate) {
  const Eigen::Vector3d a(1, 2, 3), b(0.5, -1, 2);
  try {
    orthonormalize(a * b.transpose());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateProjection);
  }
}

}  // namespace
}  // namespace repcycle
