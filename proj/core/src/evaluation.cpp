#include "repcycle/evaluation.hpp"

#include "repcycle/error.hpp"
#include "repcycle/tensor_utils.hpp"

namespace repcycle::eval {

metrics::MetricReport evaluate_predictions(const train::RenderContext& ctx,
                                           const std::vector<data::SampleRecord>& records,
                                           const SegmentFunction& segment, const metrics::FitFunction& fit,
                                           const EvalOptions& options) {
  require(!records.empty(), ErrorCode::kNoData, "nothing to evaluate");
  const auto access = data::GroundTruthAccess::evaluation();
  metrics::IouAccumulator iou14(metrics::Grouping::k14, options.averaging);
  metrics::IouAccumulator iou4(metrics::Grouping::k4, options.averaging);
  metrics::IouAccumulator iou1(metrics::Grouping::k1, options.averaging);
  metrics::Metric3dAccumulator acc3d;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    const auto& record = records[i];
    const auto labels = segment(i, record.image());
    const auto& gt = record.gt_labels(access);
    iou14.add(labels, gt);
    iou4.add(labels, gt);
    iou1.add(labels, gt);
    if (!options.three_d || !record.has_gt_body()) continue;
    const auto& body = record.gt_body(access);
    const auto gt_joints = body::pose_body(ctx.tmpl, body.beta, body.pose).joints;
    const auto b4 = metrics::best_of_4(labels, ctx.palette, fit, ctx.tmpl, gt_joints, options.nominal_height_mm);
    // The identity variant is the normal prediction.
    const auto normal_fit = b4.winner == metrics::SwapVariant::kIdentity
                                ? b4.winner_fit
                                : fit(render::composite(labels, ctx.palette,
                                                        metrics::neutral_background(labels.height(), labels.width())));
    const auto pred_joints = body::pose_body(ctx.tmpl, normal_fit.beta, normal_fit.pose).joints;
    acc3d.add(b4.variants[0], metrics::mpjpe_root_relative(pred_joints, gt_joints, 0, options.nominal_height_mm),
              b4.best);
  }
  metrics::MetricReport report;
  report.iou_14 = iou14.value();
  report.iou_4 = iou4.value();
  report.iou_1 = iou1.value();
  report.samples = static_cast<long long>(records.size());
  if (acc3d.count() > 0) acc3d.fill(report);
  return report;
}

std::vector<render::DomainBImage> predict_segments(train::Models& models, const render::Palette& palette,
                                                   const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  const auto raw = models.g_ab->forward(images).raw;
  const auto flooded = nn::flood_tensor(raw, nn::palette_tensor(palette));
  std::vector<render::DomainBImage> out;
  for (std::int64_t i = 0; i < raw.size(0); ++i) {
    // Re-composite so foreground pixels hold the exact palette values.
    const auto background = nn::tensor_to_image(raw[i].slice(0, 0, 3));
    out.push_back(render::composite(nn::tensor_to_labels(flooded.labels[i]), palette, background));
  }
  return out;
}

data::BodyParams fit_segments(train::Models& models, const render::Palette& palette, const render::DomainBImage& b) {
  torch::NoGradGuard no_grad;
  const auto neutral = render::composite(b.labels, palette, metrics::neutral_background(b.height(), b.width()));
  const auto out = nn::fit(models.fitter, nn::image_to_tensor(neutral.rgb).unsqueeze(0));
  return nn::to_body_params(out, 0);
}

metrics::MetricReport evaluate(train::Models& models, const train::RenderContext& ctx,
                               const std::vector<data::SampleRecord>& records, const EvalOptions& options) {
  require(!records.empty(), ErrorCode::kNoData, "nothing to evaluate");
  std::vector<LabelMap> predictions;
  for (std::size_t s = 0; s < records.size(); s += static_cast<std::size_t>(options.batch)) {
    const auto e = std::min(records.size(), s + static_cast<std::size_t>(options.batch));
    std::vector<torch::Tensor> images;
    for (std::size_t i = s; i < e; ++i) images.push_back(nn::image_to_tensor(records[i].image()));
    for (auto& b : predict_segments(models, ctx.palette, torch::stack(images))) predictions.push_back(std::move(b.labels));
  }
  const metrics::FitFunction fit = [&](const render::DomainBImage& b) { return fit_segments(models, ctx.palette, b); };
  return evaluate_predictions(
      ctx, records, [&](int index, const RgbImage&) { return predictions[index]; }, fit, options);
}

std::vector<data::SampleRecord> make_test_set(const TrainConfig& config, const train::RenderContext& ctx) {
  auto ds = config.dataset;
  ds.samples = config.eval_samples;
  ds.sequences = std::max(2, std::min(config.dataset.sequences, config.eval_samples));
  ds.seed = config.dataset.seed ^ 0x7465737473657400ULL;
  return data::generate_dataset(ds, ctx.tmpl, ctx.camera, ctx.prior);
}

EvalOptions options_from(const TrainConfig& config) {
  EvalOptions o;
  o.nominal_height_mm = config.nominal_height_mm;
  o.averaging = config.iou_averaging;
  return o;
}

}  // namespace repcycle::eval
