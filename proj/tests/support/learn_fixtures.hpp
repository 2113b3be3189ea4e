#pragma once

// Small configurations that keep learning-side tests within seconds.

#include "repcycle/datagen.hpp"
#include "repcycle/train_config.hpp"
#include "repcycle/training.hpp"

namespace repcycle::testing {

inline TrainConfig tiny_config() {
  TrainConfig c;
  c.height = 32;
  c.width = 32;
  c.focal = 32.0;
  c.body.detail = 1;
  c.prior.bank_size = 60;
  c.prior.components = 3;
  c.nets = {32, 32, 8, 1, 8, 8};
  c.fitter_base_channels = 8;
  c.fitter_res_blocks = 0;
  c.fitter_hidden = 64;
  c.batch_size = 2;
  c.pretrain_pairs = 16;
  c.pretrain_batch = 4;
  c.dataset.samples = 24;
  c.dataset.sequences = 4;
  c.eval_samples = 6;
  c.log_interval = 1;
  return c;
}

inline std::vector<data::SampleRecord> tiny_records(const TrainConfig& c, const train::RenderContext& ctx) {
  return data::generate_dataset(c.dataset, ctx.tmpl, ctx.camera, ctx.prior);
}

inline train::TrainingData tiny_data(const TrainConfig& c) {
  const auto ctx = train::make_render_context(c);
  return train::make_training_data(c, tiny_records(c, ctx));
}

}  // namespace repcycle::testing
