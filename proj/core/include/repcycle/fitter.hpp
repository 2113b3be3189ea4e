#pragma once

#include <vector>

#include <Eigen/Core>
#include <torch/torch.h>

#include "repcycle/body_model.hpp"
#include "repcycle/camera_render.hpp"
#include "repcycle/datagen.hpp"
#include "repcycle/rng.hpp"

namespace repcycle::nn {

struct FitterConfig {
  int height = 64;
  int width = 64;
  int base_channels = 16;
  int res_blocks = 2;
  int hidden = 256;
  int joint_count = 16;  // including the root
  int shape_count = body::kDefaultShapeCount;
  // Added to the predicted translation so an untrained net starts at the
  // middle of the sampling range.
  Eigen::Vector3d translation_offset{0.0, 0.0, 1.8};

  // 9 per rotation (root included), 3 translation, S shape.
  int raw_dim() const { return 9 * joint_count + 3 + shape_count; }
  void validate() const;
};

// Batched body parameters. rotations: N x J x 3 x 3 (index 0 = root),
// translation: N x 3, beta: N x S.
struct FitOutput {
  torch::Tensor rotations;
  torch::Tensor translation;
  torch::Tensor beta;
  torch::Tensor raw;  // N x raw_dim, before orthonormalization (undefined for targets)
};

// Nearest proper rotation per 3 x 3 block of a (..., 3, 3) tensor, with an
// analytic backward pass. Throws kDegenerateProjection for rank < 2 blocks.
torch::Tensor orthonormalize_tensor(const torch::Tensor& m);

class FitterNetImpl : public torch::nn::Module {
 public:
  explicit FitterNetImpl(const FitterConfig& config);
  // N x 3 x H x W neutralized segment image -> N x raw_dim.
  torch::Tensor forward(const torch::Tensor& image);
  const FitterConfig& config() const { return config_; }

 private:
  FitterConfig config_;
  torch::nn::Sequential features_;
  torch::nn::Sequential head_;
};
TORCH_MODULE(FitterNet);

FitOutput fit(FitterNet& net, const torch::Tensor& neutral_image);
FitOutput decode_raw(const torch::Tensor& raw, const FitterConfig& config);

// Stacks ground-truth parameters into a target (rotations from axis-angle).
FitOutput fit_target(const std::vector<data::BodyParams>& bodies);
data::BodyParams to_body_params(const FitOutput& out, int index);

struct ParameterLossWeights {
  double rotation = 1.0;
  double translation = 1.0;
  double beta = 0.1;
};

// Batch mean of sum_j |R_j - R*_j|_F^2 + |t - t*|^2 + |beta - beta*|^2
// (weighted).
torch::Tensor parameter_loss(const FitOutput& pred, const FitOutput& target, const ParameterLossWeights& w = {});

struct PretrainSet {
  torch::Tensor inputs;  // N x 3 x H x W neutral renders
  FitOutput targets;
  std::vector<data::BodyParams> bodies;
};

// Renders noise-free segment images over the neutral background for sampled
// bodies. Out-of-frame samples are redrawn.
PretrainSet pretrain_pairs(const body::BodyTemplate& tmpl, const data::PosePrior& prior, const render::Camera& camera,
                           const render::Palette& palette, int n, Rng& rng, double beta_stddev = 1.0);

// Neutral render of one body.
torch::Tensor render_neutral(const body::BodyTemplate& tmpl, const render::Camera& camera,
                             const render::Palette& palette, const data::BodyParams& body);

}  // namespace repcycle::nn
