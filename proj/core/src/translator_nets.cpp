#include "repcycle/translator_nets.hpp"

#include "repcycle/error.hpp"
#include "repcycle/tensor_utils.hpp"

namespace repcycle::nn {

namespace tnn = torch::nn;

void NetConfig::validate() const {
  require(height > 0 && width > 0 && height % kPatchStride == 0 && width % kPatchStride == 0,
          ErrorCode::kInvalidConfiguration, "net resolution must be a positive multiple of 8");
  require(base_channels > 0 && disc_channels > 0 && code_dim > 0 && res_blocks >= 0, ErrorCode::kInvalidConfiguration,
          "net widths must be positive");
}

namespace {

tnn::Conv2dOptions conv(int in, int out, int k, int stride = 1, int pad = -1) {
  return tnn::Conv2dOptions(in, out, k).stride(stride).padding(pad < 0 ? k / 2 : pad);
}

tnn::InstanceNorm2d norm(int c) { return tnn::InstanceNorm2d(tnn::InstanceNorm2dOptions(c).affine(true)); }

void add_down_path(tnn::Sequential& s, int in, int c) {
  s->push_back(tnn::ReflectionPad2d(3));
  s->push_back(tnn::Conv2d(conv(in, c, 7, 1, 0)));
  s->push_back(norm(c));
  s->push_back(tnn::ReLU());
  s->push_back(tnn::Conv2d(conv(c, 2 * c, 3, 2, 1)));
  s->push_back(norm(2 * c));
  s->push_back(tnn::ReLU());
  s->push_back(tnn::Conv2d(conv(2 * c, 4 * c, 3, 2, 1)));
  s->push_back(norm(4 * c));
  s->push_back(tnn::ReLU());
}

void add_up_path(tnn::Sequential& s, int c, int out) {
  for (int f : {4, 2}) {
    s->push_back(tnn::ConvTranspose2d(
        tnn::ConvTranspose2dOptions(f * c, f * c / 2, 3).stride(2).padding(1).output_padding(1)));
    s->push_back(norm(f * c / 2));
    s->push_back(tnn::ReLU());
  }
  s->push_back(tnn::ReflectionPad2d(3));
  s->push_back(tnn::Conv2d(conv(c, out, 7, 1, 0)));
  s->push_back(tnn::Sigmoid());
}

void check_input(const torch::Tensor& x, int channels, const NetConfig& cfg) {
  require(x.dim() == 4 && x.size(1) == channels && x.size(2) == cfg.height && x.size(3) == cfg.width,
          ErrorCode::kShapeMismatch,
          "expected N x " + std::to_string(channels) + " x " + std::to_string(cfg.height) + " x " +
              std::to_string(cfg.width) + " input");
}

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  body_ = register_module("body", tnn::Sequential(tnn::ReflectionPad2d(1), tnn::Conv2d(conv(channels, channels, 3, 1, 0)),
                                                  norm(channels), tnn::ReLU(), tnn::ReflectionPad2d(1),
                                                  tnn::Conv2d(conv(channels, channels, 3, 1, 0)), norm(channels)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body_->forward(x); }

GenA2BImpl::GenA2BImpl(const NetConfig& config) : config_(config) {
  config_.validate();
  const int c = config_.base_channels;
  tnn::Sequential enc;
  add_down_path(enc, 3, c);
  for (int i = 0; i < config_.res_blocks; ++i) enc->push_back(ResidualBlock(4 * c));
  encoder_ = register_module("encoder", enc);
  tnn::Sequential dec;
  add_up_path(dec, c, kDomainBChannels);
  decoder_ = register_module("decoder", dec);
  code_head_ = register_module("code_head", tnn::Linear(4 * c, 2 * config_.code_dim));
}

A2BOutput GenA2BImpl::forward(const torch::Tensor& image) {
  check_input(image, 3, config_);
  const auto features = encoder_->forward(image);
  const auto pooled = features.mean({2, 3});
  const auto code = code_head_->forward(pooled);
  const int z = config_.code_dim;
  return {decoder_->forward(features), code.slice(1, 0, z), code.slice(1, z, 2 * z)};
}

GenB2AImpl::GenB2AImpl(const NetConfig& config) : config_(config) {
  config_.validate();
  const int c = config_.base_channels;
  tnn::Sequential enc;
  add_down_path(enc, kDomainBChannels, c);
  encoder_ = register_module("encoder", enc);
  tnn::Sequential fuse(tnn::Conv2d(conv(4 * c + config_.code_dim, 4 * c, 1, 1, 0)), norm(4 * c), tnn::ReLU());
  for (int i = 0; i < config_.res_blocks; ++i) fuse->push_back(ResidualBlock(4 * c));
  fuse_ = register_module("fuse", fuse);
  tnn::Sequential dec;
  add_up_path(dec, c, 3);
  decoder_ = register_module("decoder", dec);
}

torch::Tensor GenB2AImpl::synthesize(const torch::Tensor& b, const torch::Tensor& z) {
  check_input(b, kDomainBChannels, config_);
  require(z.dim() == 2 && z.size(0) == b.size(0) && z.size(1) == config_.code_dim, ErrorCode::kShapeMismatch,
          "appearance code must be N x " + std::to_string(config_.code_dim));
  const auto features = encoder_->forward(b);
  const auto tiled = z.view({z.size(0), z.size(1), 1, 1}).expand({-1, -1, features.size(2), features.size(3)});
  return decoder_->forward(fuse_->forward(torch::cat({features, tiled}, 1)));
}

torch::Tensor GenB2AImpl::forward(const torch::Tensor& b, const torch::Tensor& z) {
  const auto person = synthesize(b, z);
  const auto mask = straight_through_mask(b.slice(1, 3, 4));
  const auto background = b.slice(1, 0, 3);
  return torch::where(mask > 0.5, person, background) + (mask - mask.detach()) * (person - background).detach();
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int in_channels, int c) {
  net_ = register_module(
      "net", tnn::Sequential(tnn::Conv2d(conv(in_channels, c, 4, 2, 1)), tnn::LeakyReLU(tnn::LeakyReLUOptions().negative_slope(0.2)),
                             tnn::Conv2d(conv(c, 2 * c, 4, 2, 1)), norm(2 * c),
                             tnn::LeakyReLU(tnn::LeakyReLUOptions().negative_slope(0.2)),
                             tnn::Conv2d(conv(2 * c, 4 * c, 4, 2, 1)), norm(4 * c),
                             tnn::LeakyReLU(tnn::LeakyReLUOptions().negative_slope(0.2)),
                             tnn::Conv2d(conv(4 * c, 1, 3, 1, 1))));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) { return net_->forward(x); }

// ---------------------------------------------------------------------------

torch::Tensor sample_code(const torch::Tensor& mean, const torch::Tensor& logvar, Rng& rng) {
  require(mean.sizes() == logvar.sizes(), ErrorCode::kShapeMismatch, "mean and logvar differ in shape");
  const auto eps = normal_tensor(rng, mean.sizes()).to(mean.options());
  return mean + torch::exp(0.5 * logvar) * eps;
}

torch::Tensor kl_divergence(const torch::Tensor& mean, const torch::Tensor& logvar) {
  return (0.5 * (mean.pow(2) + logvar.exp() - 1.0 - logvar)).sum(1).mean();
}

namespace {

class ClipGradientFunction : public torch::autograd::Function<ClipGradientFunction> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x, double max_norm) {
    ctx->saved_data["max_norm"] = max_norm;
    return x.view_as(x);
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grads) {
    const double max_norm = ctx->saved_data["max_norm"].toDouble();
    auto g = grads[0];
    if (max_norm > 0.0) {
      const auto norms = g.flatten(1).norm(2, 1).clamp_min(1e-30);
      auto shape = std::vector<std::int64_t>(g.dim(), 1);
      shape[0] = g.size(0);
      g = g * (max_norm / norms).clamp_max(1.0).view(shape);
    }
    return {g, torch::Tensor()};
  }
};

}  // namespace

torch::Tensor clip_gradient(const torch::Tensor& x, double max_norm) {
  require(x.dim() >= 1, ErrorCode::kShapeMismatch, "clip_gradient needs a batch dimension");
  return ClipGradientFunction::apply(x, max_norm);
}

torch::Tensor straight_through_mask(const torch::Tensor& soft) {
  const auto hard = (soft > kMaskThreshold).to(soft.dtype());
  return hard + (soft - soft.detach());
}

Flooded flood_tensor(const torch::Tensor& raw, const torch::Tensor& palette) {
  require(raw.dim() == 4 && raw.size(1) == kDomainBChannels, ErrorCode::kShapeMismatch,
          "flooding expects N x 4 x H x W");
  const auto rgb = raw.slice(1, 0, 3);
  const auto mask = straight_through_mask(raw.slice(1, 3, 4));
  torch::Tensor labels;
  torch::Tensor colors;
  {
    torch::NoGradGuard no_grad;
    // Squared distances N x 14 x H x W; argmin returns the first minimum,
    // which keeps the lowest-index tie rule.
    const auto pal = palette.to(rgb.options()).view({1, -1, 3, 1, 1});
    const auto d = (rgb.detach().unsqueeze(1) - pal).pow(2).sum(2);
    const auto nearest = d.argmin(1);
    colors = palette.to(rgb.options()).index_select(0, nearest.flatten()).view(
        {rgb.size(0), rgb.size(2), rgb.size(3), 3}).permute({0, 3, 1, 2});
    labels = torch::where(mask.detach().squeeze(1) > 0.5, nearest + 1, torch::zeros_like(nearest));
  }
  const auto flooded_rgb =
      torch::where(mask > 0.5, colors, rgb) + (mask - mask.detach()) * (colors - rgb).detach();
  return {torch::cat({flooded_rgb, mask}, 1), labels};
}

render::DomainBImage flood_segments(const RgbImage& rgb, const Raster<double>& soft_mask,
                                    const render::Palette& palette) {
  require(rgb.channels() == 3 && rgb.same_extent(soft_mask), ErrorCode::kShapeMismatch,
          "flood_segments: rgb and mask differ in shape");
  const LabelMap labels = render::labels_from_colors(rgb, soft_mask, palette);
  RgbImage background = rgb;
  return render::composite(labels, palette, background);
}

torch::Tensor neutralize(const torch::Tensor& b) {
  const auto mask = b.slice(1, 3, 4);
  const auto rgb = b.slice(1, 0, 3);
  const auto gray = torch::full_like(rgb, 0.5);
  const auto out = torch::where(mask > 0.5, rgb, gray) + (mask - mask.detach()) * (rgb - gray).detach();
  return torch::cat({out, mask}, 1);
}

}  // namespace repcycle::nn
