#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "repcycle/body_model.hpp"
#include "repcycle/camera_render.hpp"
#include "repcycle/datagen.hpp"
#include "repcycle/raster.hpp"

namespace repcycle::metrics {

inline constexpr double kNominalHeightMm = 1700.0;

enum class Grouping { k14 = 14, k4 = 4, k1 = 1 };
enum class Averaging { kMicro, kMacro };

// Class index of a part label under a grouping; 0 stays background.
// 4 groups: 1 arms, 2 legs, 3 upper body (torso), 4 head.
int group_label(int label, Grouping grouping);
int class_count(Grouping grouping);

// Dataset-level IoU over foreground classes. Micro accumulates confusion
// counts across images; macro averages per-image IoU. Classes with empty
// union are left out of the mean.
class IouAccumulator {
 public:
  explicit IouAccumulator(Grouping grouping, Averaging averaging = Averaging::kMicro);

  void add(const LabelMap& pred, const LabelMap& gt);
  // Associative, order-independent combination of partial accumulators.
  void merge(const IouAccumulator& other);
  // Throws kNoData when nothing was added.
  double value() const;
  long long image_count() const { return images_; }
  // counts[gt][pred] over grouped classes (background is class 0).
  const std::vector<long long>& confusion() const { return confusion_; }

 private:
  Grouping grouping_;
  Averaging averaging_;
  int classes_;
  std::vector<long long> confusion_;
  double macro_sum_ = 0.0;
  long long macro_images_ = 0;
  long long images_ = 0;
};

double iou(const LabelMap& pred, const LabelMap& gt, Grouping grouping);

struct RmseTriple {
  double rmse = 0.0;
  double t_rmse = 0.0;
  double tr_rmse = 0.0;
};

// Joint sets are J x 3 in normalized units; results are scaled to mm.
// Throws kDegenerateAlignment when gt is (near) collinear.
RmseTriple rmse_family(const body::Points& pred, const body::Points& gt, double nominal_height_mm = kNominalHeightMm);

// Rotation R (det +1) and translation t minimizing |R pred + t - gt|.
struct RigidAlignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};
RigidAlignment kabsch(const body::Points& pred, const body::Points& gt);

double mpjpe_root_relative(const body::Points& pred, const body::Points& gt, int root_index = 0,
                           double nominal_height_mm = kNominalHeightMm);

// ---------------------------------------------------------------------------

enum class SwapVariant { kIdentity = 0, kArms = 1, kLegs = 2, kBoth = 3 };

LabelMap swap_labels(const LabelMap& labels, SwapVariant variant);

// Maps a segment image over the neutral background to body parameters.
using FitFunction = std::function<data::BodyParams(const render::DomainBImage&)>;

struct BestOfFour {
  SwapVariant winner = SwapVariant::kIdentity;  // smallest rmse; ties keep the earlier variant
  data::BodyParams winner_fit;
  RmseTriple winner_metrics;
  std::array<RmseTriple, 4> variants;
  RmseTriple best;  // per-metric minimum over the variants
};

// Neutral background used when handing segments to the fitter.
RgbImage neutral_background(int height, int width);

BestOfFour best_of_4(const LabelMap& labels, const render::Palette& palette, const FitFunction& fit,
                     const body::BodyTemplate& tmpl, const body::Points& gt_joints,
                     double nominal_height_mm = kNominalHeightMm);

// ---------------------------------------------------------------------------

struct MetricReport {
  double iou_14 = 0.0;
  double iou_4 = 0.0;
  double iou_1 = 0.0;
  double rmse = 0.0;
  double t_rmse = 0.0;
  double tr_rmse = 0.0;
  double mpjpe = 0.0;
  double best4_rmse = 0.0;
  double best4_t_rmse = 0.0;
  double best4_tr_rmse = 0.0;
  long long samples = 0;
  bool has_3d = false;
};

// Running means of the 3D metrics.
class Metric3dAccumulator {
 public:
  void add(const RmseTriple& normal, double mpjpe, const RmseTriple& best4);
  void merge(const Metric3dAccumulator& other);
  long long count() const { return count_; }
  void fill(MetricReport& report) const;

 private:
  long long count_ = 0;
  std::array<double, 7> sums_{};
};

// report.json: rows are metrics, columns are supervision regimes.
std::string report_json(const std::vector<std::pair<std::string, MetricReport>>& columns);

}  // namespace repcycle::metrics
