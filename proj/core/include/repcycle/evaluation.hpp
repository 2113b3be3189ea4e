#pragma once

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "repcycle/datagen.hpp"
#include "repcycle/metrics.hpp"
#include "repcycle/training.hpp"

namespace repcycle::eval {

struct EvalOptions {
  double nominal_height_mm = metrics::kNominalHeightMm;
  metrics::Averaging averaging = metrics::Averaging::kMicro;
  bool three_d = true;
  int batch = 32;
};

// Per record: predicted labels for IoU. Receives the record index.
using SegmentFunction = std::function<LabelMap(int index, const RgbImage& image)>;

// Generic protocol: IoU at 14/4/1 on every record, and for records with 3D
// ground truth the normal (identity variant) and best-of-4 RMSE family plus
// root-relative MPJPE of the identity fit. Ground truth is read with an
// evaluation token.
metrics::MetricReport evaluate_predictions(const train::RenderContext& ctx,
                                           const std::vector<data::SampleRecord>& records,
                                           const SegmentFunction& segment, const metrics::FitFunction& fit,
                                           const EvalOptions& options);

// Encoder + flooding on a batch of images (N x 3 x H x W), as factored
// domain-B images. Background pixels carry the predicted background.
std::vector<render::DomainBImage> predict_segments(train::Models& models, const render::Palette& palette,
                                                   const torch::Tensor& images);
// Fitter on the segments over the neutral background.
data::BodyParams fit_segments(train::Models& models, const render::Palette& palette, const render::DomainBImage& b);

metrics::MetricReport evaluate(train::Models& models, const train::RenderContext& ctx,
                               const std::vector<data::SampleRecord>& records, const EvalOptions& options);

// Held-out test set: same generator, disjoint seed stream.
std::vector<data::SampleRecord> make_test_set(const TrainConfig& config, const train::RenderContext& ctx);

EvalOptions options_from(const TrainConfig& config);

}  // namespace repcycle::eval
