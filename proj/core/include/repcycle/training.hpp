#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "repcycle/adam.hpp"
#include "repcycle/checkpoint.hpp"
#include "repcycle/datagen.hpp"
#include "repcycle/fitter.hpp"
#include "repcycle/train_config.hpp"
#include "repcycle/translator_nets.hpp"

namespace repcycle::train {

// Everything needed to turn body parameters into domain-B images.
struct RenderContext {
  body::BodyTemplate tmpl;
  render::Camera camera;
  render::Palette palette;
  data::PosePrior prior;
};

RenderContext make_render_context(const TrainConfig& config);

struct Models {
  nn::GenA2B g_ab{nullptr};
  nn::GenB2A g_ba{nullptr};
  nn::PatchDiscriminator d_a{nullptr};
  nn::PatchDiscriminator d_b{nullptr};
  nn::FitterNet fitter{nullptr};

  Models(const TrainConfig& config, const nn::FitterConfig& fitter_config);
  std::vector<std::pair<std::string, torch::Tensor>> generator_parameters() const;
  std::vector<std::pair<std::string, torch::Tensor>> discriminator_parameters() const;
  std::vector<std::pair<std::string, torch::Tensor>> fitter_parameters() const;
  void export_to(std::map<std::string, torch::Tensor>& out) const;
  void import_from(const std::map<std::string, torch::Tensor>& in);
};

// Mean absolute difference.
torch::Tensor loss_cycle(const torch::Tensor& x, const torch::Tensor& reconstructed);
// Least squares against 1 (real) or 0 (fake).
torch::Tensor loss_adversarial(const torch::Tensor& scores, bool is_real);

// Named scalar losses of one step, plus the weighted total with graph.
struct Losses {
  std::map<std::string, torch::Tensor> terms;
  torch::Tensor total;
  void add(const std::string& name, const torch::Tensor& value, double weight);
};

struct AbaResult {
  Losses losses;
  torch::Tensor raw_b;        // encoder output
  torch::Tensor rec_raw;      // decode of raw_b
  torch::Tensor rec_flooded;  // decode of the flooded raw_b
  torch::Tensor mean;         // appearance code means
};

// A -> B -> A with both reconstruction paths, adversarial loss on raw_b and
// KL on the code.
AbaResult step_cycle_aba(Models& models, const torch::Tensor& batch_a, const render::Palette& palette,
                         const LossWeights& weights, Rng& rng);

struct ChainResult {
  Losses losses;
  torch::Tensor real_b;  // rendered from the bodies
  torch::Tensor fake_a;  // decoded image, the point where 3D gradients stop
  torch::Tensor rec_b;   // encoder output on fake_a (cycle path)
  torch::Tensor rec3d;   // unweighted parameter loss
  nn::FitOutput fit;
};

// Renders bodies over backgrounds into N x 4 x H x W domain-B tensors.
torch::Tensor render_domain_b(const RenderContext& ctx, const std::vector<data::BodyParams>& bodies,
                              const std::vector<RgbImage>& backgrounds);

// C -> B -> A -> B -> C. z holds the donor appearance codes (one row per
// body). The 3D reconstruction loss sees the generated image only through a
// detached copy.
ChainResult step_chain_cbabc(Models& models, const RenderContext& ctx, const std::vector<data::BodyParams>& bodies,
                             const torch::Tensor& z, const std::vector<RgbImage>& backgrounds,
                             const LossWeights& weights);

// Squared error between the encoder output and the labels composited over
// the input image, averaged over all 4 channels. Reads labels with a
// training token, so unflagged records throw kUnpairedDiscipline.
torch::Tensor step_supervised_seg(Models& models, const std::vector<data::SampleRecord>& batch,
                                  const render::Palette& palette);
torch::Tensor supervised_seg_loss(const torch::Tensor& raw_b, const torch::Tensor& target);

enum class Stage { kPretrainB2C, kUnsupervised, kSemiSupervised };
std::string stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

// Training inputs after the unpaired split. Only a_records images (and the
// labels of flagged ones) and the b_bodies parameters are ever read.
struct TrainingData {
  std::vector<data::SampleRecord> a_records;
  std::vector<data::BodyParams> b_bodies;
  std::vector<RgbImage> backgrounds;  // empty: procedural
};

struct StepReport {
  Stage stage = Stage::kUnsupervised;
  long long step = 0;
  std::map<std::string, double> values;
};

class Trainer {
 public:
  Trainer(TrainConfig config, TrainingData data);

  const TrainConfig& config() const { return config_; }
  const RenderContext& context() const { return ctx_; }
  Models& models() { return models_; }
  const TrainingData& data() const { return data_; }
  Stage stage() const { return stage_; }
  long long step() const { return step_; }

  // Switches stage and resets the step counter. Entering the semi-supervised
  // stage flags every k-th A record; other stages clear all flags.
  void begin_stage(Stage stage);

  // One optimizer step of the current stage. Throws kNonFiniteLoss after
  // dumping the batch to the diagnostics directory when any loss is NaN/inf.
  StepReport run_step();
  // Parameter loss of the fitter over the whole pretraining set.
  double pretrain_set_loss();

  // Deep copy; later steps do not change it.
  nn::Checkpoint checkpoint() const;
  // Models, optimizer moments and counters; the stage is taken from the
  // checkpoint.
  void restore(const nn::Checkpoint& checkpoint);

  void set_diagnostics_dir(std::filesystem::path dir) { diagnostics_dir_ = std::move(dir); }

 private:
  StepReport pretrain_step();
  StepReport cycle_step();
  const nn::PretrainSet& pretrain_set();
  std::vector<RgbImage> draw_backgrounds(int n, Rng& rng) const;
  torch::Tensor a_batch(const std::vector<int>& indices, Rng& rng) const;
  void check_finite(const Losses& losses, const torch::Tensor& batch) const;

  TrainConfig config_;
  RenderContext ctx_;
  TrainingData data_;
  Models models_;
  nn::Adam gen_opt_;
  nn::Adam disc_opt_;
  nn::Adam fit_opt_;
  Stage stage_ = Stage::kPretrainB2C;
  long long step_ = 0;
  std::vector<int> supervised_indices_;
  std::optional<nn::PretrainSet> pretrain_set_;
  std::filesystem::path diagnostics_dir_ = "diagnostics";
};

// Runs `steps` steps of `stage`, logging JSON lines to out_dir/log.jsonl and
// writing out_dir/checkpoint.bin at the end (and every checkpoint_interval
// steps). A semi-supervised run must start from an unsupervised or
// semi-supervised checkpoint.
using StepCallback = std::function<void(const StepReport&)>;
void run_stage(Trainer& trainer, Stage stage, int steps, const std::filesystem::path& out_dir,
               const std::optional<nn::Checkpoint>& init = std::nullopt, const StepCallback& callback = {});

// The sequence split used for training, derived from the config seed.
data::UnpairedSplit unpaired_split(const TrainConfig& config, const std::vector<data::SampleRecord>& records);

// Builds the training side from a dataset: split by sequence with a
// seed-derived rng, A records keep their images, B records contribute
// only body parameters.
TrainingData make_training_data(const TrainConfig& config, const std::vector<data::SampleRecord>& records);

}  // namespace repcycle::train
