#include "repcycle/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "repcycle/error.hpp"

namespace repcycle::metrics {

int class_count(Grouping grouping) { return static_cast<int>(grouping); }

int group_label(int label, Grouping grouping) {
  require(label >= 0 && label <= body::kPartCount, ErrorCode::kInvalidLabel, "label out of range");
  if (label == 0) return 0;
  switch (grouping) {
    case Grouping::k14:
      return label;
    case Grouping::k1:
      return 1;
    case Grouping::k4:
      if (body::is_arm_part(label)) return 1;
      if (body::is_leg_part(label)) return 2;
      if (label == body::kTorso) return 3;
      return 4;
  }
  return 0;
}

namespace {

// Mean IoU over foreground classes with non-empty union, or NaN if none.
double mean_iou(const std::vector<long long>& confusion, int classes) {
  const int n = classes + 1;
  double sum = 0.0;
  int counted = 0;
  for (int c = 1; c <= classes; ++c) {
    long long tp = confusion[c * n + c];
    long long gt_total = 0, pred_total = 0;
    for (int k = 0; k < n; ++k) {
      gt_total += confusion[c * n + k];
      pred_total += confusion[k * n + c];
    }
    const long long uni = gt_total + pred_total - tp;
    if (uni == 0) continue;
    sum += static_cast<double>(tp) / static_cast<double>(uni);
    ++counted;
  }
  return counted == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / counted;
}

}  // namespace

IouAccumulator::IouAccumulator(Grouping grouping, Averaging averaging)
    : grouping_(grouping),
      averaging_(averaging),
      classes_(class_count(grouping)),
      confusion_(static_cast<std::size_t>((classes_ + 1) * (classes_ + 1)), 0) {}

void IouAccumulator::add(const LabelMap& pred, const LabelMap& gt) {
  require(pred.same_extent(gt) && pred.channels() == 1 && gt.channels() == 1, ErrorCode::kShapeMismatch,
          "IoU: prediction and ground truth differ in shape");
  const int n = classes_ + 1;
  std::vector<long long> local(confusion_.size(), 0);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      ++local[group_label(gt(y, x), grouping_) * n + group_label(pred(y, x), grouping_)];
    }
  }
  for (std::size_t i = 0; i < local.size(); ++i) confusion_[i] += local[i];
  const double v = mean_iou(local, classes_);
  if (!std::isnan(v)) {
    macro_sum_ += v;
    ++macro_images_;
  }
  ++images_;
}

void IouAccumulator::merge(const IouAccumulator& other) {
  require(other.grouping_ == grouping_ && other.averaging_ == averaging_, ErrorCode::kInvalidInput,
          "IoU: merging accumulators with different settings");
  for (std::size_t i = 0; i < confusion_.size(); ++i) confusion_[i] += other.confusion_[i];
  macro_sum_ += other.macro_sum_;
  macro_images_ += other.macro_images_;
  images_ += other.images_;
}

double IouAccumulator::value() const {
  require(images_ > 0, ErrorCode::kNoData, "IoU: nothing accumulated");
  if (averaging_ == Averaging::kMacro) {
    return macro_images_ == 0 ? 0.0 : macro_sum_ / static_cast<double>(macro_images_);
  }
  const double v = mean_iou(confusion_, classes_);
  return std::isnan(v) ? 0.0 : v;
}

double iou(const LabelMap& pred, const LabelMap& gt, Grouping grouping) {
  IouAccumulator acc(grouping);
  acc.add(pred, gt);
  return acc.value();
}

// ---------------------------------------------------------------------------

namespace {

void check_joint_sets(const body::Points& pred, const body::Points& gt) {
  require(pred.rows() == gt.rows(), ErrorCode::kShapeMismatch, "joint sets differ in size");
  require(gt.rows() >= 3, ErrorCode::kInvalidInput, "need at least three joints");
  require(pred.allFinite() && gt.allFinite(), ErrorCode::kInvalidInput, "non-finite joint positions");
}

double root_mean_square(const body::Points& a, const body::Points& b) {
  return std::sqrt((a - b).rowwise().squaredNorm().mean());
}

}  // namespace

RigidAlignment kabsch(const body::Points& pred, const body::Points& gt) {
  check_joint_sets(pred, gt);
  const Eigen::RowVector3d mp = pred.colwise().mean();
  const Eigen::RowVector3d mg = gt.colwise().mean();
  const Eigen::MatrixXd p = pred.rowwise() - mp;
  const Eigen::MatrixXd g = gt.rowwise() - mg;

  Eigen::JacobiSVD<Eigen::MatrixXd> spread(g);
  const auto& sv = spread.singularValues();
  require(sv[0] > 0.0 && sv[1] > 1e-9 * sv[0], ErrorCode::kDegenerateAlignment,
          "ground-truth joints are collinear; rotation is not determined");

  const Eigen::Matrix3d h = p.transpose() * g;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidAlignment out;
  out.rotation = v * d * u.transpose();
  out.translation = mg.transpose() - out.rotation * mp.transpose();
  return out;
}

RmseTriple rmse_family(const body::Points& pred, const body::Points& gt, double nominal_height_mm) {
  check_joint_sets(pred, gt);
  RmseTriple out;
  out.rmse = root_mean_square(pred, gt) * nominal_height_mm;
  const body::Points shifted = pred.rowwise() + (gt.colwise().mean() - pred.colwise().mean());
  out.t_rmse = root_mean_square(shifted, gt) * nominal_height_mm;
  const auto align = kabsch(pred, gt);
  body::Points moved = (pred * align.rotation.transpose()).rowwise() + align.translation.transpose();
  out.tr_rmse = root_mean_square(moved, gt) * nominal_height_mm;
  return out;
}

double mpjpe_root_relative(const body::Points& pred, const body::Points& gt, int root_index,
                           double nominal_height_mm) {
  require(pred.rows() == gt.rows() && pred.rows() > 0, ErrorCode::kShapeMismatch, "joint sets differ in size");
  require(root_index >= 0 && root_index < gt.rows(), ErrorCode::kInvalidInput, "root index out of range");
  const body::Points p = pred.rowwise() - pred.row(root_index);
  const body::Points g = gt.rowwise() - gt.row(root_index);
  return (p - g).rowwise().norm().mean() * nominal_height_mm;
}

// ---------------------------------------------------------------------------

LabelMap swap_labels(const LabelMap& labels, SwapVariant variant) {
  const bool arms = variant == SwapVariant::kArms || variant == SwapVariant::kBoth;
  const bool legs = variant == SwapVariant::kLegs || variant == SwapVariant::kBoth;
  LabelMap out = labels;
  for (auto& l : out.data()) {
    if ((arms && body::is_arm_part(l)) || (legs && body::is_leg_part(l))) {
      l = static_cast<std::uint8_t>(body::mirror_part(l));
    }
  }
  return out;
}

RgbImage neutral_background(int height, int width) { return RgbImage(height, width, 3, 0.5); }

BestOfFour best_of_4(const LabelMap& labels, const render::Palette& palette, const FitFunction& fit,
                     const body::BodyTemplate& tmpl, const body::Points& gt_joints, double nominal_height_mm) {
  BestOfFour out;
  const RgbImage bg = neutral_background(labels.height(), labels.width());
  bool have = false;
  for (int v = 0; v < 4; ++v) {
    const auto variant = static_cast<SwapVariant>(v);
    const auto b = render::composite(swap_labels(labels, variant), palette, bg);
    data::BodyParams params = fit(b);
    const auto joints = body::pose_body(tmpl, params.beta, params.pose).joints;
    const RmseTriple m = rmse_family(joints, gt_joints, nominal_height_mm);
    out.variants[v] = m;
    if (!have || m.rmse < out.winner_metrics.rmse) {
      out.winner = variant;
      out.winner_fit = std::move(params);
      out.winner_metrics = m;
    }
    if (!have) {
      out.best = m;
    } else {
      out.best.rmse = std::min(out.best.rmse, m.rmse);
      out.best.t_rmse = std::min(out.best.t_rmse, m.t_rmse);
      out.best.tr_rmse = std::min(out.best.tr_rmse, m.tr_rmse);
    }
    have = true;
  }
  return out;
}

// ---------------------------------------------------------------------------

void Metric3dAccumulator::add(const RmseTriple& normal, double mpjpe, const RmseTriple& best4) {
  const std::array<double, 7> v = {normal.rmse,  normal.t_rmse,  normal.tr_rmse, mpjpe,
                                    best4.rmse, best4.t_rmse, best4.tr_rmse};
  for (std::size_t i = 0; i < v.size(); ++i) sums_[i] += v[i];
  ++count_;
}

void Metric3dAccumulator::merge(const Metric3dAccumulator& other) {
  for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
  count_ += other.count_;
}

void Metric3dAccumulator::fill(MetricReport& report) const {
  require(count_ > 0, ErrorCode::kNoData, "no 3D samples accumulated");
  const double n = static_cast<double>(count_);
  report.rmse = sums_[0] / n;
  report.t_rmse = sums_[1] / n;
  report.tr_rmse = sums_[2] / n;
  report.mpjpe = sums_[3] / n;
  report.best4_rmse = sums_[4] / n;
  report.best4_t_rmse = sums_[5] / n;
  report.best4_tr_rmse = sums_[6] / n;
  report.has_3d = true;
}

std::string report_json(const std::vector<std::pair<std::string, MetricReport>>& columns) {
  using nlohmann::ordered_json;
  ordered_json regimes = ordered_json::array();
  ordered_json seg = ordered_json::object(), normal = ordered_json::object(), best = ordered_json::object();
  for (const auto& name : {"iou_14", "iou_4", "iou_1"}) seg[name] = ordered_json::object();
  for (const auto& name : {"rmse", "t_rmse", "tr_rmse", "mpjpe"}) normal[name] = ordered_json::object();
  for (const auto& name : {"rmse", "t_rmse", "tr_rmse"}) best[name] = ordered_json::object();
  ordered_json samples = ordered_json::object();
  for (const auto& [regime, r] : columns) {
    regimes.push_back(regime);
    seg["iou_14"][regime] = r.iou_14;
    seg["iou_4"][regime] = r.iou_4;
    seg["iou_1"][regime] = r.iou_1;
    samples[regime] = r.samples;
    if (r.has_3d) {
      normal["rmse"][regime] = r.rmse;
      normal["t_rmse"][regime] = r.t_rmse;
      normal["tr_rmse"][regime] = r.tr_rmse;
      normal["mpjpe"][regime] = r.mpjpe;
      best["rmse"][regime] = r.best4_rmse;
      best["t_rmse"][regime] = r.best4_t_rmse;
      best["tr_rmse"][regime] = r.best4_tr_rmse;
    }
  }
  ordered_json out = {{"regimes", regimes},
                      {"segmentation", seg},
                      {"3d_normal_mm", normal},
                      {"3d_best_of_4_mm", best},
                      {"samples", samples}};
  return out.dump(2);
}

}  // namespace repcycle::metrics
