#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include <Eigen/Core>

#include "repcycle/body_model.hpp"
#include "repcycle/raster.hpp"

namespace repcycle::render {

using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

// Pinhole camera at the origin looking down +z. World y is up, so image rows
// grow as y decreases: u = cx + f x / z, v = cy - f y / z. Pixel (row, col)
// has its center at (col + 0.5, row + 0.5).
struct Camera {
  double focal = 64.0;
  Eigen::Vector2d principal_point{32.0, 32.0};
  int height = 64;
  int width = 64;
  double near = 1e-3;

  static Camera centered(int height, int width, double focal);
  void validate() const;
};

// Throws kClippedGeometry when any depth <= near.
Points2 project(const Camera& camera, const body::Points& points);
Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& point);
// d(u, v)/d(x, y, z).
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& camera, const Eigen::Vector3d& point);

// Fourteen part colors, 8-bit. Label 0 (background) has no color.
class Palette {
 public:
  using Color = std::array<std::uint8_t, 3>;

  // Hues equally spaced around the HSV circle at full saturation and value.
  static Palette standard();
  explicit Palette(const std::array<Color, body::kPartCount>& colors);

  const Color& color(int label) const;
  Eigen::Vector3d unit_color(int label) const;
  double min_pairwise_distance() const;
  std::uint64_t checksum() const;

  bool operator==(const Palette&) const = default;

 private:
  std::array<Color, body::kPartCount> colors_{};
};

// Factored domain-B image: rgb holds the background where mask == 0 and the
// exact palette color of labels(p) where mask == 1.
struct DomainBImage {
  RgbImage rgb;
  Mask mask;
  LabelMap labels;

  int height() const { return labels.height(); }
  int width() const { return labels.width(); }
  // Throws kInvalidInput if the mask/label/palette invariant is violated.
  void check_invariants(const Palette& palette) const;
};

struct Rasterization {
  LabelMap labels;
  DepthMap depth;
  Raster<std::int32_t> face_index;  // -1 where uncovered
};

// Z-buffer rasterization; nearest face wins, earlier face wins exact ties.
// Faces with a vertex at or behind the near plane are skipped.
Rasterization rasterize_faces(const Camera& camera, const body::PosedMesh& mesh);
std::pair<LabelMap, DepthMap> rasterize(const Camera& camera, const body::PosedMesh& mesh);

// Throws kInvalidLabel for labels > 14, kShapeMismatch on extent mismatch.
DomainBImage composite(const LabelMap& labels, const Palette& palette, const RgbImage& background);

// Nearest palette color (ties -> lowest part index) where mask > 0.5, else 0.
LabelMap labels_from_colors(const RgbImage& rgb, const Raster<double>& mask, const Palette& palette);

// 0/1 mask of labels >= 1.
Mask foreground_mask(const LabelMap& labels);

}  // namespace repcycle::render
