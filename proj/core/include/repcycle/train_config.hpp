#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "repcycle/body_model.hpp"
#include "repcycle/camera_render.hpp"
#include "repcycle/datagen.hpp"
#include "repcycle/fitter.hpp"
#include "repcycle/metrics.hpp"
#include "repcycle/translator_nets.hpp"

namespace repcycle {

struct LossWeights {
  double adv_a = 1.0;
  double adv_b = 1.0;
  double cyc_aba = 10.0;
  double cyc_bab = 10.0;
  double kl = 0.01;
  double rec3d = 1.0;
  double sup_seg = 10.0;
  // Per-sample L2 cap on the 3D gradient entering the encoder output. A
  // collapsed (empty) mask feeds the fitter a flat image, where its instance
  // norms amplify the input gradient to ~1e5. A supervised batch delivers
  // ~1e-2 at the same point. 0 disables the cap.
  double rec3d_encoder_clip = 1e-3;
};

struct StepCounts {
  int pretrain_b2c = 500;
  int unsupervised = 1000;
  int semi_supervised = 1000;
};

struct TemplateSpec {
  int joint_count = 16;
  int detail = 2;
  std::uint64_t seed = 0;
  std::string path;  // a saved template; overrides the toy build when set
};

// Every scalar the pipeline reads. Loaded from train.json; keys absent from
// the file keep these defaults, unknown keys are rejected.
struct TrainConfig {
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;
  double focal = 64.0;
  TemplateSpec body;
  data::PriorOptions prior;
  nn::NetConfig nets{64, 64, 16, 2, 16, 32};
  int fitter_base_channels = 16;
  int fitter_res_blocks = 2;
  int fitter_hidden = 256;
  double lr = 2e-4;
  double fitter_lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 4;
  LossWeights weights;
  // Every k-th training record carries labels; nullopt is fully unsupervised.
  std::optional<int> supervision_interval;
  // A chain C-B-A-B-C pass is added to every n-th A-B-A step.
  int chain_interval = 1;
  StepCounts steps;
  int pretrain_pairs = 512;
  int pretrain_batch = 8;
  data::DatasetConfig dataset;
  int eval_samples = 200;
  bool augment = true;
  bool paste = false;
  std::string background_dir;
  int log_interval = 10;
  int checkpoint_interval = 0;  // 0: only at the end of a stage
  double nominal_height_mm = metrics::kNominalHeightMm;
  metrics::Averaging iou_averaging = metrics::Averaging::kMicro;

  void validate() const;
  render::Camera camera() const;
  nn::FitterConfig fitter_config(const body::BodyTemplate& tmpl, const data::PosePrior& prior) const;
  // Supervised mini-batches are interleaved once every ceil(k / batch) steps.
  std::optional<int> supervised_step_period() const;
};

nlohmann::ordered_json to_json(const TrainConfig& config);
// Starts from defaults and applies the keys present in j.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const TrainConfig& config);

body::BodyTemplate make_template(const TrainConfig& config);

}  // namespace repcycle
