#include "repcycle/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include <Eigen/Geometry>

#include "repcycle/error.hpp"
#include "repcycle/png_io.hpp"

namespace repcycle::data {

using body::PoseParams;
using body::ShapeParams;
using Eigen::Vector3d;

namespace {

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

int pick_index(const Eigen::VectorXd& weights, double u) {
  double acc = 0.0;
  for (Eigen::Index m = 0; m < weights.size(); ++m) {
    acc += weights[m];
    if (u < acc) return static_cast<int>(m);
  }
  return static_cast<int>(weights.size()) - 1;
}

Eigen::Matrix3d axis_rotation(int axis, double angle) {
  return Eigen::AngleAxisd(angle, Vector3d::Unit(axis)).toRotationMatrix();
}

}  // namespace

void PosePrior::validate() const {
  require(joint_count >= body::kMinJointCount, ErrorCode::kInvalidConfiguration, "prior joint count too small");
  require(weights.size() > 0, ErrorCode::kInvalidConfiguration, "prior has no components");
  require(means.rows() == weights.size() && variances.rows() == weights.size() &&
              means.cols() == 3 * (joint_count - 1) && variances.cols() == means.cols(),
          ErrorCode::kInvalidConfiguration, "prior arrays disagree in shape");
  require((weights.array() >= 0.0).all() && std::abs(weights.sum() - 1.0) < 1e-9, ErrorCode::kInvalidConfiguration,
          "prior weights must be non-negative and sum to one");
  require((variances.array() >= 0.0).all() && variances.allFinite() && means.allFinite(),
          ErrorCode::kInvalidConfiguration, "prior variances must be finite and non-negative");
  require(yaw_min <= yaw_max && tilt >= 0.0 && lateral >= 0.0, ErrorCode::kInvalidConfiguration,
          "prior ranges are inverted");
  require(depth_min > 0.0 && depth_min <= depth_max, ErrorCode::kInvalidConfiguration, "prior depth range invalid");
}

PriorSample sample_pose_with_component(const PosePrior& prior, Rng& rng) {
  const int m = pick_index(prior.weights, uniform(rng, 0.0, 1.0));
  PriorSample out{PoseParams::identity(prior.joint_count), m};
  for (int j = 1; j < prior.joint_count; ++j) {
    for (int k = 0; k < 3; ++k) {
      const int d = 3 * (j - 1) + k;
      out.pose.axis_angles(j, k) = prior.means(m, d) + std::sqrt(prior.variances(m, d)) * standard_normal(rng);
    }
  }
  const double yaw = uniform(rng, prior.yaw_min, prior.yaw_max);
  const double pitch = uniform(rng, -prior.tilt, prior.tilt);
  const double roll = uniform(rng, -prior.tilt, prior.tilt);
  const Eigen::Matrix3d root = axis_rotation(1, yaw) * axis_rotation(0, pitch) * axis_rotation(2, roll);
  const Eigen::AngleAxisd aa(root);
  out.pose.axis_angles.row(0) = (aa.angle() * aa.axis()).transpose();

  const double depth = uniform(rng, prior.depth_min, prior.depth_max);
  const double x = uniform(rng, -prior.lateral, prior.lateral) * depth;
  const double y = uniform(rng, -prior.lateral, prior.lateral) * depth + prior.vertical_offset;
  out.pose.translation = Vector3d(x, y, depth);
  return out;
}

PoseParams sample_pose(const PosePrior& prior, Rng& rng) { return sample_pose_with_component(prior, rng).pose; }

ShapeParams sample_shape(int count, double stddev, Rng& rng) {
  ShapeParams s = ShapeParams::zeros(count);
  for (int i = 0; i < count; ++i) s.beta[i] = stddev * standard_normal(rng);
  return s;
}

// ---------------------------------------------------------------------------

namespace {

// Rotation offsets keyed by joint name, in the joint's local frame.
using Archetype = std::map<std::string, Vector3d>;

std::vector<Archetype> archetypes(double phase) {
  const double s = std::sin(phase);
  std::vector<Archetype> out;
  // Relaxed stand: arms lowered toward the body.
  out.push_back({{"left_shoulder", {0, 0, -0.3}}, {"right_shoulder", {0, 0, 0.3}}});
  // T-pose.
  out.push_back({{"left_shoulder", {0, 0, 1.05}}, {"right_shoulder", {0, 0, -1.05}}});
  // Arms raised overhead.
  out.push_back({{"left_shoulder", {0, 0, 2.3}}, {"right_shoulder", {0, 0, -2.3}}});
  // Arms reaching forward.
  out.push_back({{"left_shoulder", {-1.3, 0, -0.5}}, {"right_shoulder", {-1.3, 0, 0.5}}});
  // Walking stride.
  out.push_back({{"left_hip", {-0.5 * s, 0, 0}},
                 {"right_hip", {0.5 * s, 0, 0}},
                 {"left_knee", {0.6 * std::max(0.0, -s) + 0.1, 0, 0}},
                 {"right_knee", {0.6 * std::max(0.0, s) + 0.1, 0, 0}},
                 {"left_shoulder", {0.4 * s, 0, -0.35}},
                 {"right_shoulder", {-0.4 * s, 0, 0.35}},
                 {"left_elbow", {-0.3, 0, 0}},
                 {"right_elbow", {-0.3, 0, 0}}});
  // Squat.
  out.push_back({{"left_hip", {-1.4, 0, 0}},
                 {"right_hip", {-1.4, 0, 0}},
                 {"left_knee", {1.8, 0, 0}},
                 {"right_knee", {1.8, 0, 0}},
                 {"left_ankle", {-0.4, 0, 0}},
                 {"right_ankle", {-0.4, 0, 0}},
                 {"spine_1", {0.3, 0, 0}},
                 {"left_shoulder", {-1.2, 0, -0.5}},
                 {"right_shoulder", {-1.2, 0, 0.5}}});
  // Seated.
  out.push_back({{"left_hip", {-1.5, 0, 0.05}},
                 {"right_hip", {-1.5, 0, -0.05}},
                 {"left_knee", {1.5, 0, 0}},
                 {"right_knee", {1.5, 0, 0}},
                 {"left_shoulder", {-0.5, 0, -0.4}},
                 {"right_shoulder", {-0.5, 0, 0.4}},
                 {"left_elbow", {-0.8, 0, 0}},
                 {"right_elbow", {-0.8, 0, 0}}});
  // Lunge.
  out.push_back({{"left_hip", {-0.9, 0, 0}},
                 {"left_knee", {0.9, 0, 0}},
                 {"right_hip", {0.4, 0, 0}},
                 {"right_knee", {0.3, 0, 0}},
                 {"left_shoulder", {0, 0, 0.4}},
                 {"right_shoulder", {0, 0, -0.4}}});
  // Bending forward.
  out.push_back({{"spine_1", {0.5, 0, 0}},
                 {"spine_2", {0.4, 0, 0}},
                 {"neck", {0.2, 0, 0}},
                 {"left_shoulder", {-0.6, 0, -0.3}},
                 {"right_shoulder", {-0.6, 0, 0.3}}});
  // Waving with the right arm.
  out.push_back({{"right_shoulder", {0, 0, -2.0}},
                 {"right_elbow", {0, 0, -1.0}},
                 {"left_shoulder", {0, 0, -0.3}}});
  // Reaching up with the left arm.
  out.push_back({{"left_shoulder", {0, 0, 2.4}},
                 {"left_elbow", {0, 0, 0.3}},
                 {"right_shoulder", {0, 0, 0.2}},
                 {"spine_1", {0, 0, -0.15}}});
  // Kick.
  out.push_back({{"left_hip", {-1.2, 0, 0}},
                 {"left_knee", {0.2, 0, 0}},
                 {"left_shoulder", {0, 0, 0.8}},
                 {"right_shoulder", {0, 0, -0.8}}});
  // Torso twist and head turn.
  out.push_back({{"spine_1", {0, 0.5 * s, 0}},
                 {"neck", {0, 0.6 * s, 0}},
                 {"left_shoulder", {-0.4, 0, -0.2}},
                 {"right_shoulder", {0.4, 0, 0.2}},
                 {"left_elbow", {-1.0, 0, 0}},
                 {"right_elbow", {-1.0, 0, 0}}});
  // Side bend.
  out.push_back({{"spine_1", {0, 0, 0.3 * s}},
                 {"neck", {0, 0, 0.15 * s}},
                 {"left_shoulder", {0, 0, 0.6}},
                 {"right_shoulder", {0, 0, -0.6}},
                 {"left_hip", {0, 0, 0.15}},
                 {"right_hip", {0, 0, -0.15}}});
  return out;
}

Eigen::VectorXd archetype_vector(const body::BodyTemplate& tmpl, const Archetype& a) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * tmpl.joint_count());
  for (const auto& [name, rot] : a) {
    const int j = tmpl.joint_index(name);
    if (j > 0) v.segment<3>(3 * j) = rot;
  }
  return v;
}

}  // namespace

std::vector<PoseParams> builtin_pose_bank(const body::BodyTemplate& tmpl, int count, std::uint64_t seed) {
  require(count >= 1, ErrorCode::kInvalidConfiguration, "pose bank size must be positive");
  Rng rng = derive_rng(seed, {0x706f7365});
  const int j = tmpl.joint_count();
  std::vector<PoseParams> bank;
  bank.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double phase = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const auto types = archetypes(phase);
    const int n = static_cast<int>(types.size());
    const int a = i % n;
    const int b = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const double t = uniform(rng, 0.0, 0.3);
    Eigen::VectorXd v = (1.0 - t) * archetype_vector(tmpl, types[a]) + t * archetype_vector(tmpl, types[b]);
    PoseParams p = PoseParams::identity(j);
    for (int q = 1; q < j; ++q) {
      for (int k = 0; k < 3; ++k) p.axis_angles(q, k) = v[3 * q + k] + 0.08 * standard_normal(rng);
    }
    bank.push_back(std::move(p));
  }
  return bank;
}

PosePrior fit_pose_prior(const std::vector<PoseParams>& bank, int components, std::uint64_t seed) {
  require(!bank.empty(), ErrorCode::kNoData, "empty pose bank");
  require(components >= 1 && components <= static_cast<int>(bank.size()), ErrorCode::kInvalidConfiguration,
          "component count must lie in [1, bank size]");
  const int joints = bank.front().joint_count();
  const int d = 3 * (joints - 1);
  const int n = static_cast<int>(bank.size());
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    require(bank[i].joint_count() == joints, ErrorCode::kShapeMismatch, "pose bank joint counts differ");
    for (int q = 1; q < joints; ++q) x.block<1, 3>(i, 3 * (q - 1)) = bank[i].axis_angles.row(q);
  }

  constexpr double kVarianceFloor = 1e-3;
  Rng rng = derive_rng(seed, {0x656d});
  // k-means++ seeding.
  Eigen::MatrixXd means(components, d);
  means.row(0) = x.row(static_cast<int>(rng() % static_cast<std::uint64_t>(n)));
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (int m = 1; m < components; ++m) {
    for (int i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], (x.row(i) - means.row(m - 1)).squaredNorm());
    const double total = nearest.sum();
    int chosen = 0;
    if (total > 0.0) {
      chosen = pick_index(nearest / total, uniform(rng, 0.0, 1.0));
    }
    means.row(m) = x.row(chosen);
  }

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((x.rowwise() - global_mean).array().square().colwise().mean()).max(kVarianceFloor).matrix();
  Eigen::MatrixXd variances = global_var.replicate(components, 1);
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(components, 1.0 / components);

  Eigen::MatrixXd resp(n, components);
  for (int iter = 0; iter < 60; ++iter) {
    for (int i = 0; i < n; ++i) {
      for (int m = 0; m < components; ++m) {
        const auto diff = (x.row(i) - means.row(m)).array();
        const double maha = (diff.square() / variances.row(m).array()).sum();
        const double logdet = variances.row(m).array().log().sum();
        resp(i, m) = std::log(std::max(weights[m], 1e-300)) - 0.5 * (maha + logdet);
      }
      const double top = resp.row(i).maxCoeff();
      resp.row(i) = (resp.row(i).array() - top).exp();
      resp.row(i) /= resp.row(i).sum();
    }
    for (int m = 0; m < components; ++m) {
      const double nk = resp.col(m).sum();
      if (nk < 1e-8) {
        // Dead component: restart it on the worst-explained point.
        int worst = 0;
        resp.rowwise().maxCoeff().minCoeff(&worst);
        means.row(m) = x.row(worst);
        variances.row(m) = global_var;
        weights[m] = 1.0 / n;
        continue;
      }
      weights[m] = nk / n;
      means.row(m) = (resp.col(m).transpose() * x) / nk;
      const Eigen::MatrixXd centered = x.rowwise() - means.row(m);
      variances.row(m) =
          ((resp.col(m).transpose() * centered.array().square().matrix()) / nk).array().max(kVarianceFloor).matrix();
    }
    weights /= weights.sum();
  }

  PosePrior prior;
  prior.joint_count = joints;
  prior.weights = weights;
  prior.means = means;
  prior.variances = variances;
  return prior;
}

PosePrior default_pose_prior(const body::BodyTemplate& tmpl, const render::Camera& camera,
                             const PriorOptions& options) {
  camera.validate();
  require(options.min_height_fraction > 0.0 && options.min_height_fraction <= options.max_height_fraction,
          ErrorCode::kInvalidConfiguration, "height fraction range invalid");
  const auto bank = builtin_pose_bank(tmpl, options.bank_size, options.seed);
  PosePrior prior = fit_pose_prior(bank, options.components, options.seed);
  const double top = tmpl.vertices.col(1).maxCoeff();
  const double bottom = tmpl.vertices.col(1).minCoeff();
  const double height = top - bottom;
  require(height > 0.0, ErrorCode::kDegenerateGeometry, "template has no vertical extent");
  // Projected height = focal * height / depth.
  prior.depth_min = camera.focal * height / (options.max_height_fraction * camera.height);
  prior.depth_max = camera.focal * height / (options.min_height_fraction * camera.height);
  prior.vertical_offset = -0.5 * (top + bottom);
  prior.validate();
  return prior;
}

// ---------------------------------------------------------------------------

SampleRecord::SampleRecord(RgbImage image, LabelMap gt_labels, std::optional<BodyParams> gt_body, int sequence_id)
    : image_(std::move(image)), gt_labels_(std::move(gt_labels)), gt_body_(std::move(gt_body)), sequence_id_(sequence_id) {
  require(image_.channels() == 3 && image_.same_extent(gt_labels_), ErrorCode::kShapeMismatch,
          "record image and labels differ in shape");
}

void SampleRecord::check_access(GroundTruthAccess access) const {
  if (!access.evaluation_mode() && !supervised_) {
    fail(ErrorCode::kUnpairedDiscipline, "training access to ground truth of an unsupervised record");
  }
}

const LabelMap& SampleRecord::gt_labels(GroundTruthAccess access) const {
  check_access(access);
  return gt_labels_;
}

const BodyParams& SampleRecord::gt_body(GroundTruthAccess access) const {
  check_access(access);
  require(gt_body_.has_value(), ErrorCode::kNoData, "record carries no 3D ground truth");
  return *gt_body_;
}

SampleRecord SampleRecord::transformed(const std::function<RgbImage(const RgbImage&)>& image_fn,
                                       const std::function<LabelMap(const LabelMap&)>& label_fn,
                                       bool keep_body) const {
  SampleRecord out(image_fn(image_), label_fn(gt_labels_), keep_body ? gt_body_ : std::nullopt, sequence_id_);
  out.side_ = side_;
  out.supervised_ = supervised_;
  return out;
}

// ---------------------------------------------------------------------------

double value_noise(double x, double y, std::uint64_t seed) {
  auto lattice = [seed](std::int64_t i, std::int64_t j) {
    std::uint64_t h = seed ^ (static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull) ^
                      (static_cast<std::uint64_t>(j) * 0xC2B2AE3D27D4EB4Full);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ull;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) / static_cast<double>(1ull << 53);
  };
  const double fx = std::floor(x), fy = std::floor(y);
  const auto i = static_cast<std::int64_t>(fx), j = static_cast<std::int64_t>(fy);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double tx = smooth(x - fx), ty = smooth(y - fy);
  const double a = lattice(i, j) + tx * (lattice(i + 1, j) - lattice(i, j));
  const double b = lattice(i, j + 1) + tx * (lattice(i + 1, j + 1) - lattice(i, j + 1));
  return a + ty * (b - a);
}

namespace {

Vector3d random_color(Rng& rng) { return {uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)}; }

}  // namespace

RgbImage make_background(BackgroundKind kind, int height, int width, Rng& rng) {
  require(height > 0 && width > 0, ErrorCode::kInvalidConfiguration, "background size must be positive");
  RgbImage img(height, width, 3);
  const Vector3d c0 = random_color(rng);
  const Vector3d c1 = random_color(rng);
  const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double cell = uniform(rng, 4.0, 16.0);
  const std::uint64_t noise_seed = rng();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double t = 0.0;
      if (kind == BackgroundKind::kGradient) {
        const double u = (x + 0.5) / width - 0.5, v = (y + 0.5) / height - 0.5;
        t = std::clamp(0.5 + u * std::cos(angle) + v * std::sin(angle), 0.0, 1.0);
      } else if (kind == BackgroundKind::kNoise) {
        t = 0.65 * value_noise(x / cell, y / cell, noise_seed) +
            0.35 * value_noise(2.0 * x / cell, 2.0 * y / cell, noise_seed + 1);
      }
      for (int k = 0; k < 3; ++k) img(y, x, k) = quantize(c0[k] + t * (c1[k] - c0[k]));
    }
  }
  return img;
}

RgbImage make_background(int height, int width, Rng& rng) {
  const auto kind = static_cast<BackgroundKind>(rng() % 3);
  return make_background(kind, height, width, rng);
}

RgbImage resize_bilinear(const RgbImage& image, int height, int width) {
  require(!image.empty() && height > 0 && width > 0, ErrorCode::kInvalidInput, "resize of empty image");
  if (image.height() == height && image.width() == width) return image;
  RgbImage out(height, width, image.channels());
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double tx = fx - x0;
      for (int k = 0; k < image.channels(); ++k) {
        const double a = image(y0, x0, k) + tx * (image(y0, x1, k) - image(y0, x0, k));
        const double b = image(y1, x0, k) + tx * (image(y1, x1, k) - image(y1, x0, k));
        out(y, x, k) = a + ty * (b - a);
      }
    }
  }
  return out;
}

std::vector<RgbImage> load_backgrounds(const std::filesystem::path& dir, int height, int width) {
  require(std::filesystem::is_directory(dir), ErrorCode::kIo, "background directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RgbImage> out;
  for (const auto& f : files) {
    auto img = resize_bilinear(io::read_png_rgb(f), height, width);
    for (auto& v : img.data()) v = quantize(v);
    out.push_back(std::move(img));
  }
  require(!out.empty(), ErrorCode::kNoData, "no PNG backgrounds in " + dir.string());
  return out;
}

// ---------------------------------------------------------------------------

Appearance Appearance::from_seed(std::uint64_t seed) {
  Rng rng = derive_rng(seed, {0x61707065});
  static const std::array<Vector3d, 5> kSkin = {Vector3d(0.96, 0.80, 0.69), Vector3d(0.87, 0.67, 0.52),
                                                Vector3d(0.74, 0.53, 0.38), Vector3d(0.55, 0.37, 0.25),
                                                Vector3d(0.36, 0.23, 0.15)};
  Appearance a;
  a.skin = kSkin[rng() % kSkin.size()];
  for (int k = 0; k < 3; ++k) a.skin[k] = std::clamp(a.skin[k] + uniform(rng, -0.04, 0.04), 0.0, 1.0);
  a.top = random_color(rng);
  a.bottom = random_color(rng) * 0.8;
  a.shoes = random_color(rng) * 0.35;
  a.long_sleeves = uniform(rng, 0, 1) < 0.5;
  a.long_pants = uniform(rng, 0, 1) < 0.7;
  a.stripe_frequency = uniform(rng, 0, 1) < 0.5 ? uniform(rng, 0.08, 0.3) : 0.0;
  a.stripe_angle = uniform(rng, 0.0, std::numbers::pi);
  a.stripe_amplitude = uniform(rng, 0.1, 0.35);
  a.noise_amplitude = uniform(rng, 0.0, 0.12);
  a.noise_seed = rng();
  return a;
}

namespace {

enum class Cloth { kSkin, kTop, kBottom, kShoes };

Cloth cloth_for(int label, const Appearance& a) {
  switch (label) {
    case body::kHead:
    case body::kLeftHand:
    case body::kRightHand:
      return Cloth::kSkin;
    case body::kTorso:
    case body::kLeftUpperArm:
    case body::kRightUpperArm:
      return Cloth::kTop;
    case body::kLeftLowerArm:
    case body::kRightLowerArm:
      return a.long_sleeves ? Cloth::kTop : Cloth::kSkin;
    case body::kLeftUpperLeg:
    case body::kRightUpperLeg:
      return Cloth::kBottom;
    case body::kLeftLowerLeg:
    case body::kRightLowerLeg:
      return a.long_pants ? Cloth::kBottom : Cloth::kSkin;
    default:
      return Cloth::kShoes;
  }
}

}  // namespace

SampleRecord make_person_image(const body::BodyTemplate& tmpl, const render::Camera& camera,
                               const PoseParams& pose, const ShapeParams& beta, std::uint64_t appearance_seed,
                               const RgbImage& background, int sequence_id) {
  require(background.channels() == 3 && background.height() == camera.height && background.width() == camera.width,
          ErrorCode::kShapeMismatch, "background does not match the camera resolution");
  const auto mesh = body::pose_body(tmpl, beta, pose);
  const auto raster = render::rasterize_faces(camera, mesh);
  const Appearance look = Appearance::from_seed(appearance_seed);
  const Vector3d light = Vector3d(0.3, 0.5, -1.0).normalized();

  RgbImage img = background;
  bool any = false;
  const double ca = std::cos(look.stripe_angle), sa = std::sin(look.stripe_angle);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const int f = raster.face_index(y, x);
      if (f < 0) continue;
      any = true;
      const int label = raster.labels(y, x);
      const Vector3d a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
      const Vector3d b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
      const Vector3d c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
      const Vector3d n = (b - a).cross(c - a).normalized();
      const double shade = 0.45 + 0.55 * std::abs(n.dot(light));

      const Cloth cloth = cloth_for(label, look);
      Vector3d base = cloth == Cloth::kSkin ? look.skin
                      : cloth == Cloth::kTop ? look.top
                      : cloth == Cloth::kBottom ? look.bottom
                                                : look.shoes;
      double pattern = 1.0;
      if (cloth == Cloth::kTop && look.stripe_frequency > 0.0) {
        pattern += look.stripe_amplitude *
                   std::sin(2.0 * std::numbers::pi * look.stripe_frequency * (x * ca + y * sa));
      }
      if (cloth != Cloth::kSkin) {
        pattern += look.noise_amplitude * (2.0 * value_noise(x / 3.0, y / 3.0, look.noise_seed) - 1.0);
      }
      for (int k = 0; k < 3; ++k) img(y, x, k) = quantize(base[k] * shade * pattern);
    }
  }
  if (!any) fail(ErrorCode::kOutOfFrame, "body lands entirely outside the image");
  return SampleRecord(std::move(img), raster.labels, BodyParams{pose, beta}, sequence_id);
}

// ---------------------------------------------------------------------------

UnpairedSplit split_unpaired(std::vector<SampleRecord> records, Rng& rng, double a_fraction) {
  require(a_fraction > 0.0 && a_fraction < 1.0, ErrorCode::kInvalidConfiguration, "A-side fraction must be in (0, 1)");
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.sequence_id());
  require(ids.size() >= 2, ErrorCode::kCannotSplit, "need at least two sequences to split");
  std::vector<int> order(ids.begin(), ids.end());
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const int n = static_cast<int>(order.size());
  const int n_a = std::clamp(static_cast<int>(std::lround(a_fraction * n)), 1, n - 1);
  UnpairedSplit out;
  out.a_sequences.assign(order.begin(), order.begin() + n_a);
  out.b_sequences.assign(order.begin() + n_a, order.end());
  std::sort(out.a_sequences.begin(), out.a_sequences.end());
  std::sort(out.b_sequences.begin(), out.b_sequences.end());
  const std::set<int> a_set(out.a_sequences.begin(), out.a_sequences.end());
  for (auto& r : records) {
    if (a_set.count(r.sequence_id())) {
      r.set_side(Side::kA);
      out.a_records.push_back(std::move(r));
    } else {
      r.set_side(Side::kB);
      if (r.has_gt_body()) out.b_bodies.push_back(r.gt_body(GroundTruthAccess::evaluation()));
      out.b_records.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

AugmentTransform random_transform(Rng& rng, const AugmentRanges& ranges) {
  AugmentTransform t;
  t.angle = uniform(rng, -ranges.max_angle, ranges.max_angle);
  t.scale = uniform(rng, ranges.min_scale, ranges.max_scale);
  t.mirror = uniform(rng, 0.0, 1.0) < ranges.mirror_probability;
  return t;
}

namespace {

bool pure_mirror(const AugmentTransform& t) { return t.mirror && t.angle == 0.0 && t.scale == 1.0; }

// Source position (continuous pixel coordinates) of output pixel center.
Eigen::Vector2d source_of(const AugmentTransform& t, int y, int x, int height, int width) {
  const Eigen::Vector2d c(0.5 * width, 0.5 * height);
  const Eigen::Vector2d q(x + 0.5, y + 0.5);
  const double ca = std::cos(-t.angle), sa = std::sin(-t.angle);
  const Eigen::Vector2d d = q - c;
  Eigen::Vector2d p(ca * d.x() - sa * d.y(), sa * d.x() + ca * d.y());
  p /= t.scale;
  if (t.mirror) p.x() = -p.x();
  return c + p;
}

}  // namespace

RgbImage warp_image(const RgbImage& image, const AugmentTransform& t) {
  if (t.is_identity()) return image;
  const int h = image.height(), w = image.width(), ch = image.channels();
  RgbImage out(h, w, ch);
  if (pure_mirror(t)) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int k = 0; k < ch; ++k) out(y, x, k) = image(y, w - 1 - x, k);
    return out;
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto s = source_of(t, y, x, h, w);
      const double fx = std::clamp(s.x() - 0.5, 0.0, w - 1.0);
      const double fy = std::clamp(s.y() - 0.5, 0.0, h - 1.0);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double tx = fx - x0, ty = fy - y0;
      for (int k = 0; k < ch; ++k) {
        const double a = image(y0, x0, k) + tx * (image(y0, x1, k) - image(y0, x0, k));
        const double b = image(y1, x0, k) + tx * (image(y1, x1, k) - image(y1, x0, k));
        out(y, x, k) = a + ty * (b - a);
      }
    }
  }
  return out;
}

LabelMap warp_labels(const LabelMap& labels, const AugmentTransform& t) {
  if (t.is_identity()) return labels;
  const int h = labels.height(), w = labels.width();
  LabelMap out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sx = w - 1 - x, sy = y;
      if (!pure_mirror(t)) {
        const auto s = source_of(t, y, x, h, w);
        sx = static_cast<int>(std::floor(s.x()));
        sy = static_cast<int>(std::floor(s.y()));
        if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
      }
      const int l = labels(sy, sx);
      out(y, x) = static_cast<std::uint8_t>(t.mirror ? body::mirror_part(l) : l);
    }
  }
  return out;
}

SampleRecord augment(const SampleRecord& record, const AugmentTransform& transform) {
  if (transform.is_identity()) return record;
  return record.transformed([&](const RgbImage& img) { return warp_image(img, transform); },
                            [&](const LabelMap& lab) { return warp_labels(lab, transform); }, false);
}

SampleRecord augment(const SampleRecord& record, Rng& rng, const AugmentRanges& ranges) {
  return augment(record, random_transform(rng, ranges));
}

SampleRecord paste_augment(const SampleRecord& record, const RgbImage& background, GroundTruthAccess access) {
  const LabelMap& labels = record.gt_labels(access);
  require(background.channels() == 3 && background.same_extent(labels), ErrorCode::kShapeMismatch,
          "paste background differs in shape");
  return record.transformed(
      [&](const RgbImage& img) {
        RgbImage out = background;
        for (int y = 0; y < img.height(); ++y)
          for (int x = 0; x < img.width(); ++x)
            if (labels(y, x) >= 1)
              for (int k = 0; k < 3; ++k) out(y, x, k) = img(y, x, k);
        return out;
      },
      [](const LabelMap& lab) { return lab; }, true);
}

void mark_supervised(std::vector<SampleRecord>& records, int k) {
  require(k >= 1, ErrorCode::kInvalidConfiguration, "supervision interval must be >= 1");
  for (std::size_t i = 0; i < records.size(); ++i) records[i].set_supervised(i % static_cast<std::size_t>(k) == 0);
}

void clear_supervised(std::vector<SampleRecord>& records) {
  for (auto& r : records) r.set_supervised(false);
}

// ---------------------------------------------------------------------------

std::vector<SampleRecord> generate_dataset(const DatasetConfig& config, const body::BodyTemplate& tmpl,
                                           const render::Camera& camera, const PosePrior& prior,
                                           const std::vector<RgbImage>& backgrounds) {
  require(config.samples >= 1 && config.sequences >= 1 && config.sequences <= config.samples,
          ErrorCode::kInvalidConfiguration, "dataset needs 1 <= sequences <= samples");
  require(config.beta_stddev >= 0.0 && config.motion_amount >= 0.0, ErrorCode::kInvalidConfiguration,
          "negative dataset spread");
  prior.validate();
  require(prior.joint_count == tmpl.joint_count(), ErrorCode::kShapeMismatch, "prior and template joint counts differ");
  camera.validate();

  std::vector<SampleRecord> records;
  records.reserve(config.samples);
  int index = 0;
  for (int s = 0; s < config.sequences; ++s) {
    const int frames = config.samples / config.sequences + (s < config.samples % config.sequences ? 1 : 0);
    Rng seq_rng = derive_rng(config.seed, {0x73657175, static_cast<std::uint64_t>(s)});
    const PoseParams start = sample_pose(prior, seq_rng);
    const PoseParams end = sample_pose(prior, seq_rng);
    const ShapeParams beta = sample_shape(tmpl.shape_count(), config.beta_stddev, seq_rng);
    const std::uint64_t appearance_seed = seq_rng();
    const RgbImage background =
        backgrounds.empty() ? make_background(camera.height, camera.width, seq_rng)
                            : backgrounds[seq_rng() % backgrounds.size()];

    for (int f = 0; f < frames; ++f, ++index) {
      Rng rec_rng = derive_rng(config.seed, {0x72656364, static_cast<std::uint64_t>(index)});
      const double t = frames > 1 ? config.motion_amount * f / (frames - 1) : 0.0;
      PoseParams pose = start;
      for (int j = 1; j < pose.joint_count(); ++j) {
        for (int k = 0; k < 3; ++k) {
          pose.axis_angles(j, k) += t * (end.axis_angles(j, k) - start.axis_angles(j, k)) + 0.02 * standard_normal(rec_rng);
        }
      }
      pose.translation += t * (end.translation - start.translation);
      try {
        records.push_back(make_person_image(tmpl, camera, pose, beta, appearance_seed, background, s));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kOutOfFrame) throw;
        pose.translation.x() = 0.0;
        pose.translation.y() = prior.vertical_offset;
        records.push_back(make_person_image(tmpl, camera, pose, beta, appearance_seed, background, s));
      }
    }
  }
  return records;
}

}  // namespace repcycle::data
