#include "repcycle/camera_render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "repcycle/error.hpp"
#include "repcycle/hash.hpp"

namespace repcycle::render {

Camera Camera::centered(int height, int width, double focal) {
  Camera c;
  c.height = height;
  c.width = width;
  c.focal = focal;
  c.principal_point = {0.5 * width, 0.5 * height};
  return c;
}

void Camera::validate() const {
  require(focal > 0.0, ErrorCode::kInvalidConfiguration, "camera focal must be positive");
  require(height > 0 && width > 0, ErrorCode::kInvalidConfiguration, "camera image size must be positive");
  require(principal_point.x() >= 0.0 && principal_point.x() <= width && principal_point.y() >= 0.0 &&
              principal_point.y() <= height,
          ErrorCode::kInvalidConfiguration, "principal point outside image");
  require(near > 0.0, ErrorCode::kInvalidConfiguration, "near plane must be positive");
}

Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& p) {
  require(p.z() > camera.near, ErrorCode::kClippedGeometry, "point at or behind the near plane");
  return {camera.principal_point.x() + camera.focal * p.x() / p.z(),
          camera.principal_point.y() - camera.focal * p.y() / p.z()};
}

Points2 project(const Camera& camera, const body::Points& points) {
  Points2 out(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.row(i) = project(camera, Eigen::Vector3d(points.row(i).transpose())).transpose();
  }
  return out;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& camera, const Eigen::Vector3d& p) {
  require(p.z() > camera.near, ErrorCode::kClippedGeometry, "point at or behind the near plane");
  const double f = camera.focal;
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> j;
  j << f * iz, 0.0, -f * p.x() * iz * iz,
       0.0, -f * iz, f * p.y() * iz * iz;
  return j;
}

// ---------------------------------------------------------------------------

Palette Palette::standard() {
  std::array<Color, body::kPartCount> colors{};
  for (int i = 0; i < body::kPartCount; ++i) {
    const double h = 6.0 * i / body::kPartCount;  // sextant coordinate
    const int sector = static_cast<int>(std::floor(h)) % 6;
    const double f = h - std::floor(h);
    const double rising = f;
    const double falling = 1.0 - f;
    double r = 0, g = 0, b = 0;
    switch (sector) {
      case 0: r = 1; g = rising; b = 0; break;
      case 1: r = falling; g = 1; b = 0; break;
      case 2: r = 0; g = 1; b = rising; break;
      case 3: r = 0; g = falling; b = 1; break;
      case 4: r = rising; g = 0; b = 1; break;
      default: r = 1; g = 0; b = falling; break;
    }
    auto to8 = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
    colors[i] = {to8(r), to8(g), to8(b)};
  }
  return Palette(colors);
}

Palette::Palette(const std::array<Color, body::kPartCount>& colors) : colors_(colors) {}

const Palette::Color& Palette::color(int label) const {
  require(label >= 1 && label <= body::kPartCount, ErrorCode::kInvalidLabel,
          "palette lookup for label " + std::to_string(label));
  return colors_[label - 1];
}

Eigen::Vector3d Palette::unit_color(int label) const {
  const auto& c = color(label);
  return {c[0] / 255.0, c[1] / 255.0, c[2] / 255.0};
}

double Palette::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < body::kPartCount; ++a) {
    for (int b = a + 1; b < body::kPartCount; ++b) {
      double d2 = 0;
      for (int k = 0; k < 3; ++k) {
        const double d = static_cast<double>(colors_[a][k]) - colors_[b][k];
        d2 += d * d;
      }
      best = std::min(best, std::sqrt(d2));
    }
  }
  return best;
}

std::uint64_t Palette::checksum() const {
  Fnv1a h;
  for (const auto& c : colors_) h.update(std::as_bytes(std::span(c)));
  return h.value();
}

void DomainBImage::check_invariants(const Palette& palette) const {
  require(rgb.channels() == 3 && rgb.same_extent(labels) && mask.same_extent(labels), ErrorCode::kInvalidInput,
          "DomainBImage planes disagree in shape");
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(y, x);
      require(l <= body::kPartCount, ErrorCode::kInvalidInput, "label out of range");
      require((mask(y, x) == 1) == (l >= 1) && mask(y, x) <= 1, ErrorCode::kInvalidInput, "mask/label mismatch");
      if (l >= 1) {
        const auto c = palette.unit_color(l);
        require(rgb(y, x, 0) == c[0] && rgb(y, x, 1) == c[1] && rgb(y, x, 2) == c[2], ErrorCode::kInvalidInput,
                "foreground pixel is not its palette color");
      }
    }
  }
}

// ---------------------------------------------------------------------------

Rasterization rasterize_faces(const Camera& camera, const body::PosedMesh& mesh) {
  camera.validate();
  const int h = camera.height;
  const int w = camera.width;
  Rasterization out{LabelMap(h, w), DepthMap(h, w, 1, std::numeric_limits<double>::infinity()),
                    Raster<std::int32_t>(h, w, 1, -1)};

  const auto n = mesh.vertices.rows();
  Points2 uv(n, 2);
  std::vector<bool> visible(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = mesh.vertices(i, 2);
    visible[i] = z > camera.near;
    if (visible[i]) {
      uv(i, 0) = camera.principal_point.x() + camera.focal * mesh.vertices(i, 0) / z;
      uv(i, 1) = camera.principal_point.y() - camera.focal * mesh.vertices(i, 1) / z;
    }
  }

  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    if (!visible[a] || !visible[b] || !visible[c]) continue;
    const Eigen::Vector2d pa = uv.row(a).transpose(), pb = uv.row(b).transpose(), pc = uv.row(c).transpose();
    const double area = (pb.x() - pa.x()) * (pc.y() - pa.y()) - (pb.y() - pa.y()) * (pc.x() - pa.x());
    if (std::abs(area) < 1e-12) continue;
    const double inv_area = 1.0 / area;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({pa.x(), pb.x(), pc.x()}) - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({pa.x(), pb.x(), pc.x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({pa.y(), pb.y(), pc.y()}) - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({pa.y(), pb.y(), pc.y()}) - 0.5)));
    const double iza = 1.0 / mesh.vertices(a, 2), izb = 1.0 / mesh.vertices(b, 2), izc = 1.0 / mesh.vertices(c, 2);
    const auto label = static_cast<std::uint8_t>(mesh.part_labels[f]);
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double wa = ((pb.x() - px) * (pc.y() - py) - (pb.y() - py) * (pc.x() - px)) * inv_area;
        const double wb = ((pc.x() - px) * (pa.y() - py) - (pc.y() - py) * (pa.x() - px)) * inv_area;
        const double wc = 1.0 - wa - wb;
        if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
        const double depth = 1.0 / (wa * iza + wb * izb + wc * izc);
        if (depth < out.depth(y, x)) {
          out.depth(y, x) = depth;
          out.labels(y, x) = label;
          out.face_index(y, x) = static_cast<std::int32_t>(f);
        }
      }
    }
  }
  return out;
}

std::pair<LabelMap, DepthMap> rasterize(const Camera& camera, const body::PosedMesh& mesh) {
  auto r = rasterize_faces(camera, mesh);
  return {std::move(r.labels), std::move(r.depth)};
}

DomainBImage composite(const LabelMap& labels, const Palette& palette, const RgbImage& background) {
  require(background.channels() == 3 && background.same_extent(labels), ErrorCode::kShapeMismatch,
          "composite: background and labels differ in shape");
  DomainBImage out{background, Mask(labels.height(), labels.width()), labels};
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(y, x);
      require(l <= body::kPartCount, ErrorCode::kInvalidLabel, "composite: label " + std::to_string(l) + " > 14");
      if (l == 0) continue;
      const auto c = palette.unit_color(l);
      for (int k = 0; k < 3; ++k) out.rgb(y, x, k) = c[k];
      out.mask(y, x) = 1;
    }
  }
  return out;
}

LabelMap labels_from_colors(const RgbImage& rgb, const Raster<double>& mask, const Palette& palette) {
  require(rgb.channels() == 3 && rgb.same_extent(mask), ErrorCode::kShapeMismatch,
          "labels_from_colors: rgb and mask differ in shape");
  std::array<Eigen::Vector3d, body::kPartCount> colors;
  for (int l = 1; l <= body::kPartCount; ++l) colors[l - 1] = palette.unit_color(l);
  LabelMap out(rgb.height(), rgb.width());
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      if (!(mask(y, x) > 0.5)) continue;
      int best = 1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int l = 1; l <= body::kPartCount; ++l) {
        double d = 0;
        for (int k = 0; k < 3; ++k) {
          const double e = rgb(y, x, k) - colors[l - 1][k];
          d += e * e;
        }
        if (d < best_d) {
          best_d = d;
          best = l;
        }
      }
      out(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

Mask foreground_mask(const LabelMap& labels) {
  Mask m(labels.height(), labels.width());
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) m(y, x) = labels(y, x) >= 1 ? 1 : 0;
  return m;
}

}  // namespace repcycle::render
