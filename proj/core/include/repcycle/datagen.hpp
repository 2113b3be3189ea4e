#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "repcycle/body_model.hpp"
#include "repcycle/camera_render.hpp"
#include "repcycle/raster.hpp"
#include "repcycle/rng.hpp"

namespace repcycle::data {

// Mixture of diagonal Gaussians over the flattened non-root joint rotations
// (3 (J - 1) values), plus independent uniform ranges for the root rotation
// and the placement of the body in front of the camera.
struct PosePrior {
  int joint_count = 0;
  Eigen::VectorXd weights;    // M
  Eigen::MatrixXd means;      // M x 3(J-1)
  Eigen::MatrixXd variances;  // M x 3(J-1)
  double yaw_min = -3.141592653589793;
  double yaw_max = 3.141592653589793;
  double tilt = 0.15;             // root pitch and roll in [-tilt, tilt]
  double lateral = 0.08;          // x, y offsets in [-lateral, lateral] * depth
  double vertical_offset = 0.0;   // added to y so the body is centered
  double depth_min = 1.2;
  double depth_max = 2.4;

  int component_count() const { return static_cast<int>(weights.size()); }
  int dimension() const { return static_cast<int>(means.cols()); }
  void validate() const;
};

struct PriorSample {
  body::PoseParams pose;
  int component = 0;
};

PriorSample sample_pose_with_component(const PosePrior& prior, Rng& rng);
body::PoseParams sample_pose(const PosePrior& prior, Rng& rng);
body::ShapeParams sample_shape(int count, double stddev, Rng& rng);

// Deterministic bank of plausible poses (standing, walking, reaching,
// squatting, ...) with per-pose jitter, keyed by joint name so any template
// following the toy naming works.
std::vector<body::PoseParams> builtin_pose_bank(const body::BodyTemplate& tmpl, int count, std::uint64_t seed);

// EM fit of a diagonal mixture on the non-root joints of the bank.
PosePrior fit_pose_prior(const std::vector<body::PoseParams>& bank, int components, std::uint64_t seed);

struct PriorOptions {
  int components = 8;
  int bank_size = 200;
  std::uint64_t seed = 0;
  double min_height_fraction = 0.4;
  double max_height_fraction = 0.9;
};

// Mixture fit on the built-in bank, with depth chosen so a unit-height body
// spans [min, max] height fraction of the image.
PosePrior default_pose_prior(const body::BodyTemplate& tmpl, const render::Camera& camera,
                             const PriorOptions& options = {});

// ---------------------------------------------------------------------------

enum class Side { kUnassigned, kA, kB };

// Token proving why ground truth is being read. Training code holds only
// training() tokens, which are refused for records without the supervised
// flag.
class GroundTruthAccess {
 public:
  static GroundTruthAccess evaluation() { return GroundTruthAccess(true); }
  static GroundTruthAccess training() { return GroundTruthAccess(false); }
  bool evaluation_mode() const { return evaluation_; }

 private:
  explicit GroundTruthAccess(bool evaluation) : evaluation_(evaluation) {}
  bool evaluation_;
};

struct BodyParams {
  body::PoseParams pose;
  body::ShapeParams beta;
};

class SampleRecord {
 public:
  SampleRecord() = default;
  SampleRecord(RgbImage image, LabelMap gt_labels, std::optional<BodyParams> gt_body, int sequence_id);

  const RgbImage& image() const { return image_; }
  int sequence_id() const { return sequence_id_; }
  Side side() const { return side_; }
  void set_side(Side side) { side_ = side; }
  bool supervised() const { return supervised_; }
  void set_supervised(bool flag) { supervised_ = flag; }
  bool has_gt_body() const { return gt_body_.has_value(); }

  // Throw kUnpairedDiscipline for training access to an unflagged record.
  const LabelMap& gt_labels(GroundTruthAccess access) const;
  const BodyParams& gt_body(GroundTruthAccess access) const;

  // Applies pixel-space transforms to the image and the label plane together
  // without exposing the labels. 3D ground truth is dropped unless keep_body.
  SampleRecord transformed(const std::function<RgbImage(const RgbImage&)>& image_fn,
                           const std::function<LabelMap(const LabelMap&)>& label_fn, bool keep_body) const;

 private:
  void check_access(GroundTruthAccess access) const;

  RgbImage image_;
  LabelMap gt_labels_;
  std::optional<BodyParams> gt_body_;
  int sequence_id_ = 0;
  Side side_ = Side::kUnassigned;
  bool supervised_ = false;
};

// ---------------------------------------------------------------------------

enum class BackgroundKind { kFlat, kGradient, kNoise };

RgbImage make_background(BackgroundKind kind, int height, int width, Rng& rng);
// Random kind.
RgbImage make_background(int height, int width, Rng& rng);
// Every PNG in dir, resampled to height x width.
std::vector<RgbImage> load_backgrounds(const std::filesystem::path& dir, int height, int width);
RgbImage resize_bilinear(const RgbImage& image, int height, int width);

// Smooth lattice noise in [0, 1].
double value_noise(double x, double y, std::uint64_t seed);

// Procedural clothing, derived from the appearance seed.
struct Appearance {
  Eigen::Vector3d skin;
  Eigen::Vector3d top;
  Eigen::Vector3d bottom;
  Eigen::Vector3d shoes;
  bool long_sleeves = false;
  bool long_pants = true;
  double stripe_frequency = 0.0;  // cycles per pixel
  double stripe_angle = 0.0;
  double stripe_amplitude = 0.0;
  double noise_amplitude = 0.0;
  std::uint64_t noise_seed = 0;

  static Appearance from_seed(std::uint64_t seed);
};

// Renders the posed body with a procedural appearance over the background.
// Ground-truth labels come from the same rasterization. Throws kOutOfFrame
// when no pixel of the body lands in the image.
SampleRecord make_person_image(const body::BodyTemplate& tmpl, const render::Camera& camera,
                               const body::PoseParams& pose, const body::ShapeParams& beta,
                               std::uint64_t appearance_seed, const RgbImage& background, int sequence_id = 0);

// ---------------------------------------------------------------------------

struct UnpairedSplit {
  std::vector<SampleRecord> a_records;  // images for domain A
  std::vector<SampleRecord> b_records;  // held out from A training
  std::vector<BodyParams> b_bodies;     // the only thing domain B takes from them
  std::vector<int> a_sequences;
  std::vector<int> b_sequences;
};

// Partition by sequence id. Throws kCannotSplit with fewer than two sequences.
UnpairedSplit split_unpaired(std::vector<SampleRecord> records, Rng& rng, double a_fraction = 0.5);

struct AugmentTransform {
  double angle = 0.0;  // radians, about the image center
  double scale = 1.0;
  bool mirror = false;

  bool is_identity() const { return angle == 0.0 && scale == 1.0 && !mirror; }
};

struct AugmentRanges {
  double max_angle = 0.26;
  double min_scale = 0.9;
  double max_scale = 1.1;
  double mirror_probability = 0.5;
};

AugmentTransform random_transform(Rng& rng, const AugmentRanges& ranges = {});
// Same warp on image (bilinear) and labels (nearest); mirroring also swaps
// left/right part labels.
SampleRecord augment(const SampleRecord& record, const AugmentTransform& transform);
SampleRecord augment(const SampleRecord& record, Rng& rng, const AugmentRanges& ranges = {});
LabelMap warp_labels(const LabelMap& labels, const AugmentTransform& transform);
RgbImage warp_image(const RgbImage& image, const AugmentTransform& transform);

// Copies the labeled person onto a new background.
SampleRecord paste_augment(const SampleRecord& record, const RgbImage& background, GroundTruthAccess access);

// Flags indices 0, k, 2k, ... and clears the rest. Requires k >= 1.
void mark_supervised(std::vector<SampleRecord>& records, int k);
void clear_supervised(std::vector<SampleRecord>& records);

// ---------------------------------------------------------------------------

struct DatasetConfig {
  int samples = 2000;
  int sequences = 20;
  double beta_stddev = 1.0;
  double motion_amount = 1.0;  // fraction of the way between two prior poses covered by a sequence
  std::uint64_t seed = 0;
};

// Pure function of (config, template, camera, prior, backgrounds). Record i
// uses randomness derived only from (seed, sequence) and (seed, i).
// backgrounds may be empty, in which case procedural ones are drawn.
std::vector<SampleRecord> generate_dataset(const DatasetConfig& config, const body::BodyTemplate& tmpl,
                                           const render::Camera& camera, const PosePrior& prior,
                                           const std::vector<RgbImage>& backgrounds = {});

}  // namespace repcycle::data
