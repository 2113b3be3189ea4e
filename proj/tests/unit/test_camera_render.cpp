#include <gtest/gtest.h>

#include <limits>

#include "generators.hpp"
#include "repcycle/body_model.hpp"
#include "repcycle/camera_render.hpp"
#include "repcycle/error.hpp"
#include "repcycle/png_io.hpp"

namespace repcycle::render {
namespace {

const body::BodyTemplate& toy() {
  static const auto t = body::height_normalize(body::build_toy_template(16, 2, 0));
  return t;
}

body::PosedMesh toy_at(double depth) {
  auto p = body::PoseParams::identity(16);
  p.translation = {0.0, 0.05, depth};
  return body::pose_body(toy(), body::ShapeParams::zeros(10), p);
}

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const auto cam = Camera::centered(64, 48, 60.0);
  for (double z : {0.01, 1.0, 7.5, 1000.0}) {
    const auto uv = project(cam, Eigen::Vector3d(0, 0, z));
    EXPECT_DOUBLE_EQ(uv.x(), 24.0);
    EXPECT_DOUBLE_EQ(uv.y(), 32.0);
  }
}

TEST(Project, JacobianMatchesFiniteDifferences) {
  const auto cam = Camera::centered(64, 64, 64.0);
  Rng rng = derive_rng(1);
  for (int i = 0; i < 50; ++i) {
    Eigen::Vector3d p = testing::random_vector(rng, 1.0);
    p.z() = uniform(rng, 0.5, 4.0);
    const auto j = projection_jacobian(cam, p);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d a = p, b = p;
      a[k] += h;
      b[k] -= h;
      const Eigen::Vector2d fd = (project(cam, a) - project(cam, b)) / (2 * h);
      EXPECT_LT((fd - j.col(k)).norm() / std::max(1.0, fd.norm()), 1e-6);
    }
  }
}

TEST(Project, BehindNearPlaneIsClipped) {
  const auto cam = Camera::centered(64, 64, 64.0);
  try {
    project(cam, Eigen::Vector3d(0, 0, -1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClippedGeometry);
  }
  EXPECT_THROW(project(cam, Eigen::Vector3d(0, 0, 1e-3)), Error);
}

TEST(Camera, ValidationRejectsBadIntrinsics) {
  auto cam = Camera::centered(64, 64, 64.0);
  cam.focal = 0.0;
  EXPECT_THROW(cam.validate(), Error);
  cam = Camera::centered(64, 64, 64.0);
  cam.principal_point = {70.0, 10.0};
  EXPECT_THROW(cam.validate(), Error);
}

int bbox_height(const LabelMap& labels) {
  int top = labels.height(), bottom = -1;
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x)
      if (labels(y, x) > 0) {
        top = std::min(top, y);
        bottom = std::max(bottom, y);
      }
  return bottom < 0 ? 0 : bottom - top + 1;
}

TEST(Rasterize, DoublingDepthHalvesHeight) {
  const auto cam = Camera::centered(64, 64, 64.0);
  const int near_h = bbox_height(rasterize(cam, toy_at(1.2)).first);
  const int far_h = bbox_height(rasterize(cam, toy_at(2.4)).first);
  EXPECT_NEAR(static_cast<double>(far_h), 0.5 * near_h, 1.0);
}

TEST(Rasterize, BehindCameraIsEmpty) {
  const auto cam = Camera::centered(32, 32, 32.0);
  const auto [labels, depth] = rasterize(cam, toy_at(-3.0));
  for (auto v : labels.data()) EXPECT_EQ(v, 0);
  for (auto d : depth.data()) EXPECT_EQ(d, std::numeric_limits<double>::infinity());
}

TEST(Rasterize, FrontTriangleWinsOverlap) {
  // Two large triangles covering the image center at depths 2 (label 5) and
  // 1 (label 9); the nearer one must own every overlapping pixel.
  body::PosedMesh mesh;
  mesh.vertices.resize(6, 3);
  mesh.vertices << -1, -1, 2, 1, -1, 2, 0, 1, 2,   //
      -0.5, -0.5, 1, 0.5, -0.5, 1, 0, 0.5, 1;
  mesh.faces.resize(2, 3);
  mesh.faces << 0, 1, 2, 3, 4, 5;
  mesh.part_labels = {5, 9};
  const auto cam = Camera::centered(32, 32, 32.0);
  const auto r = rasterize_faces(cam, mesh);
  int overlap = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (r.face_index(y, x) == 1) {
        ++overlap;
        EXPECT_EQ(r.labels(y, x), 9);
        EXPECT_NEAR(r.depth(y, x), 1.0, 1e-12);
      } else if (r.face_index(y, x) == 0) {
        EXPECT_EQ(r.labels(y, x), 5);
        EXPECT_NEAR(r.depth(y, x), 2.0, 1e-12);
      }
    }
  }
  EXPECT_GT(overlap, 20);
  // Reversing face order leaves the result unchanged.
  mesh.faces << 3, 4, 5, 0, 1, 2;
  mesh.part_labels = {9, 5};
  const auto s = rasterize_faces(cam, mesh);
  EXPECT_EQ(s.labels, r.labels);
}

TEST(Rasterize, Deterministic) {
  const auto cam = Camera::centered(64, 64, 64.0);
  const auto a = rasterize(cam, toy_at(1.7));
  const auto b = rasterize(cam, toy_at(1.7));
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Rasterize, MovingNearerNeverShrinksMask) {
  const auto cam = Camera::centered(64, 64, 64.0);
  Rng rng = derive_rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = testing::random_pose(rng, 16, 0.4, 0.0);
    p.translation = {0.0, 0.0, 2.0};
    const auto far = body::pose_body(toy(), body::ShapeParams::zeros(10), p);
    body::PosedMesh nearer = far;
    nearer.vertices.col(2).array() -= 0.4;
    int far_count = 0, near_count = 0;
    for (auto v : rasterize(cam, far).first.data()) far_count += v > 0;
    for (auto v : rasterize(cam, nearer).first.data()) near_count += v > 0;
    EXPECT_GE(near_count, far_count);
  }
}

TEST(Palette, WellSeparatedAndDistinct) {
  const auto p = Palette::standard();
  EXPECT_GE(p.min_pairwise_distance(), 60.0);
  EXPECT_THROW(p.color(0), Error);
  EXPECT_THROW(p.color(15), Error);
}

TEST(Composite, AllBackgroundAndAllOne) {
  Rng rng = derive_rng(2);
  const auto bg = testing::random_image(rng, 5, 7);
  const auto p = Palette::standard();
  const auto zero = composite(LabelMap(5, 7), p, bg);
  EXPECT_EQ(zero.rgb, bg);
  for (auto v : zero.mask.data()) EXPECT_EQ(v, 0);
  const auto ones = composite(LabelMap(5, 7, 1, 1), p, bg);
  const auto c = p.unit_color(1);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      EXPECT_EQ(ones.mask(y, x), 1);
      for (int k = 0; k < 3; ++k) EXPECT_EQ(ones.rgb(y, x, k), c[k]);
    }
}

TEST(Composite, MatchesPixelwiseOracle) {
  Rng rng = derive_rng(3);
  const auto p = Palette::standard();
  for (int trial = 0; trial < 20; ++trial) {
    const auto labels = testing::random_labels(rng, 3, 3, 14);
    const auto bg = testing::random_image(rng, 3, 3);
    const auto b = composite(labels, p, bg);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        const int l = labels(y, x);
        for (int k = 0; k < 3; ++k) {
          const double expected = l == 0 ? bg(y, x, k) : p.color(l)[k] / 255.0;
          EXPECT_EQ(b.rgb(y, x, k), expected);
        }
        EXPECT_EQ(b.mask(y, x), l > 0 ? 1 : 0);
      }
    b.check_invariants(p);
  }
}

TEST(Composite, RejectsInvalidLabelAndShape) {
  const auto p = Palette::standard();
  LabelMap bad(2, 2);
  bad(1, 1) = 15;
  try {
    composite(bad, p, RgbImage(2, 2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidLabel);
  }
  try {
    composite(LabelMap(2, 2), p, RgbImage(3, 2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

Raster<double> soft_mask(const Mask& m) {
  Raster<double> out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out(y, x) = m(y, x);
  return out;
}

TEST(LabelsFromColors, RoundTripsComposite) {
  Rng rng = derive_rng(4);
  const auto p = Palette::standard();
  for (int trial = 0; trial < 50; ++trial) {
    const auto labels = testing::random_labels(rng, 9, 11, 14);
    const auto b = composite(labels, p, testing::random_image(rng, 9, 11));
    EXPECT_EQ(labels_from_colors(b.rgb, soft_mask(b.mask), p), labels);
  }
}

TEST(LabelsFromColors, TieGoesToLowestIndex) {
  const auto p = Palette::standard();
  RgbImage rgb(1, 1, 3);
  const auto a = p.unit_color(2), b = p.unit_color(5);
  for (int k = 0; k < 3; ++k) rgb(0, 0, k) = 0.5 * (a[k] + b[k]);
  Raster<double> mask(1, 1, 1, 1.0);
  // Only meaningful if 2 and 5 really are the two nearest; check by brute force.
  double d2 = (a - Eigen::Vector3d(rgb(0, 0, 0), rgb(0, 0, 1), rgb(0, 0, 2))).squaredNorm();
  bool nearer_exists = false;
  for (int l = 1; l <= 14; ++l) {
    const double d = (p.unit_color(l) - Eigen::Vector3d(rgb(0, 0, 0), rgb(0, 0, 1), rgb(0, 0, 2))).squaredNorm();
    if (d < d2 - 1e-15) nearer_exists = true;
  }
  if (!nearer_exists) EXPECT_EQ(labels_from_colors(rgb, mask, p)(0, 0), 2);
  // A synthetic palette where the tie is guaranteed.
  std::array<Palette::Color, 14> colors{};
  for (int i = 0; i < 14; ++i) colors[i] = {static_cast<std::uint8_t>(10 * i), 200, 200};
  colors[1] = {0, 0, 0};
  colors[4] = {0, 0, 100};
  const Palette synthetic(colors);
  RgbImage mid(1, 1, 3);
  mid(0, 0, 2) = 50.0 / 255.0;
  EXPECT_EQ(labels_from_colors(mid, mask, synthetic)(0, 0), 2);
}

TEST(LabelsFromColors, BoundedNoiseRecoversLabels) {
  Rng rng = derive_rng(5);
  const auto p = Palette::standard();
  const double bound = 0.5 * p.min_pairwise_distance() / 255.0 / std::sqrt(3.0) * 0.99;
  for (int trial = 0; trial < 20; ++trial) {
    const auto labels = testing::random_labels(rng, 8, 8, 14);
    auto b = composite(labels, p, testing::random_image(rng, 8, 8));
    for (auto& v : b.rgb.data()) v += uniform(rng, -bound, bound);
    EXPECT_EQ(labels_from_colors(b.rgb, soft_mask(b.mask), p), labels);
  }
}

TEST(PngIo, RoundTripsQuantizedImagesAndLabels) {
  const auto dir = std::filesystem::temp_directory_path() / "repcycle_png";
  std::filesystem::create_directories(dir);
  Rng rng = derive_rng(6);
  RgbImage img(7, 5, 3);
  for (auto& v : img.data()) v = static_cast<double>(rng() % 256) / 255.0;
  io::write_png(dir / "a.png", img);
  EXPECT_EQ(io::read_png_rgb(dir / "a.png"), img);
  const auto labels = testing::random_labels(rng, 7, 5, 14);
  io::write_png_gray(dir / "l.png", labels);
  EXPECT_EQ(io::read_png_gray(dir / "l.png"), labels);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace repcycle::render
