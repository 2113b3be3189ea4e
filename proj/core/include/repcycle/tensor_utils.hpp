#pragma once

#include <vector>

#include <torch/torch.h>

#include "repcycle/camera_render.hpp"
#include "repcycle/raster.hpp"
#include "repcycle/rng.hpp"

namespace repcycle::nn {

// Images cross the library boundary as CHW float32 tensors in [0, 1].
torch::Tensor image_to_tensor(const RgbImage& image);
RgbImage tensor_to_image(const torch::Tensor& chw);
// H x W int64 labels.
torch::Tensor labels_to_tensor(const LabelMap& labels);
LabelMap tensor_to_labels(const torch::Tensor& hw);
// 4 x H x W: composited rgb then the mask.
torch::Tensor domain_b_to_tensor(const render::DomainBImage& b);
// 14 x 3 unit-interval palette colors, row l-1 for label l.
torch::Tensor palette_tensor(const render::Palette& palette);

// Standard-normal tensor drawn from a repcycle Rng, so sampling does not
// depend on torch's global generator.
torch::Tensor normal_tensor(Rng& rng, at::IntArrayRef shape);

double scalar(const torch::Tensor& t);

}  // namespace repcycle::nn
