#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "repcycle/camera_render.hpp"
#include "repcycle/raster.hpp"
#include "repcycle/rng.hpp"

namespace repcycle::nn {

// Domain-B tensors are N x 4 x H x W: channels 0-2 composited rgb, channel 3
// the foreground mask. This order is written into every checkpoint.
inline constexpr int kDomainBChannels = 4;
inline constexpr const char* kDomainBChannelOrder = "r,g,b,mask";
// Discriminator output is (H / 8) x (W / 8).
inline constexpr int kPatchStride = 8;
inline constexpr double kMaskThreshold = 0.5;

struct NetConfig {
  int height = 64;
  int width = 64;
  int base_channels = 32;
  int res_blocks = 4;
  int code_dim = 16;
  int disc_channels = 32;

  void validate() const;
};

struct A2BOutput {
  torch::Tensor raw;     // N x 4 x H x W, all channels in (0, 1)
  torch::Tensor mean;    // N x Z
  torch::Tensor logvar;  // N x Z
};

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_;
};
TORCH_MODULE(ResidualBlock);

// Image -> (segments/background/mask, appearance code).
class GenA2BImpl : public torch::nn::Module {
 public:
  explicit GenA2BImpl(const NetConfig& config);
  A2BOutput forward(const torch::Tensor& image);
  const NetConfig& config() const { return config_; }

 private:
  NetConfig config_;
  torch::nn::Sequential encoder_;
  torch::nn::Sequential decoder_;
  torch::nn::Linear code_head_{nullptr};
};
TORCH_MODULE(GenA2B);

// (segments + mask, z) -> image; the person is synthesized from the segments
// and fused over the background channel of the input with the hard mask.
class GenB2AImpl : public torch::nn::Module {
 public:
  explicit GenB2AImpl(const NetConfig& config);
  // Hard fusion: exactly the input background where mask <= 0.5. Gradients
  // reach the soft mask through a straight-through estimator.
  torch::Tensor forward(const torch::Tensor& b, const torch::Tensor& z);
  // The synthesized person before fusion.
  torch::Tensor synthesize(const torch::Tensor& b, const torch::Tensor& z);
  const NetConfig& config() const { return config_; }

 private:
  NetConfig config_;
  torch::nn::Sequential encoder_;
  torch::nn::Sequential fuse_;
  torch::nn::Sequential decoder_;
};
TORCH_MODULE(GenB2A);

// Least-squares patch classifier: four strided convolutions.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(int in_channels, int base_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential net_;
};
TORCH_MODULE(PatchDiscriminator);

// z = mean + exp(logvar / 2) * eps with eps drawn from rng.
torch::Tensor sample_code(const torch::Tensor& mean, const torch::Tensor& logvar, Rng& rng);
// Mean over the batch of KL(N(mean, exp(logvar)) || N(0, I)).
torch::Tensor kl_divergence(const torch::Tensor& mean, const torch::Tensor& logvar);

// Hard mask threshold with identity gradient onto the soft mask.
torch::Tensor straight_through_mask(const torch::Tensor& soft);

// Identity in the forward pass. The backward pass rescales each sample's
// gradient (dim 0) to L2 norm at most max_norm; max_norm <= 0 passes it
// through unchanged.
torch::Tensor clip_gradient(const torch::Tensor& x, double max_norm);

// Batched flooding of raw N x 4 x H x W predictions: inside the hard mask
// every pixel becomes its nearest palette color, outside the rgb passes
// through. Returns the flooded N x 4 tensor (mask channel straight-through)
// and the N x H x W int64 labels (0 outside the mask).
struct Flooded {
  torch::Tensor b;
  torch::Tensor labels;
};
Flooded flood_tensor(const torch::Tensor& raw, const torch::Tensor& palette);

// Same operation on a single prediction in image form.
render::DomainBImage flood_segments(const RgbImage& rgb, const Raster<double>& soft_mask,
                                    const render::Palette& palette);

// Replaces everything outside the mask with the neutral gray the fitter
// is trained on.
torch::Tensor neutralize(const torch::Tensor& b);

}  // namespace repcycle::nn
