#include "repcycle/training.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "repcycle/error.hpp"
#include "repcycle/png_io.hpp"
#include "repcycle/template_io.hpp"
#include "repcycle/tensor_utils.hpp"

namespace repcycle::train {

namespace {

// Tags for derive_rng streams.
constexpr std::uint64_t kStepStream = 0x73746570;
constexpr std::uint64_t kPretrainStream = 0x70726574;
constexpr std::uint64_t kSplitStream = 0x73706c74;

// Both cycle stages share one stream so a semi-supervised run without
// flagged records replays the unsupervised batches exactly.
std::uint64_t stage_tag(Stage s) { return s == Stage::kPretrainB2C ? 1 : 2; }

int pick(Rng& rng, int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

std::vector<std::pair<std::string, torch::Tensor>> named(const torch::nn::Module& m, const std::string& prefix) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : m.named_parameters()) out.emplace_back(prefix + "." + p.key(), p.value());
  return out;
}

nn::Adam::Options adam_options(const TrainConfig& c, double lr) { return {lr, c.beta1, c.beta2, 1e-8}; }

}  // namespace

RenderContext make_render_context(const TrainConfig& config) {
  RenderContext ctx{make_template(config), config.camera(), render::Palette::standard(), {}};
  ctx.prior = data::default_pose_prior(ctx.tmpl, ctx.camera, config.prior);
  return ctx;
}

Models::Models(const TrainConfig& config, const nn::FitterConfig& fitter_config) {
  // Initialization draws from torch's global generator; seed it so a config
  // fully determines the initial weights.
  torch::manual_seed(config.seed);
  g_ab = nn::GenA2B(config.nets);
  g_ba = nn::GenB2A(config.nets);
  d_a = nn::PatchDiscriminator(3, config.nets.disc_channels);
  d_b = nn::PatchDiscriminator(nn::kDomainBChannels, config.nets.disc_channels);
  fitter = nn::FitterNet(fitter_config);
}

std::vector<std::pair<std::string, torch::Tensor>> Models::generator_parameters() const {
  auto out = named(*g_ab, "g_ab");
  const auto b = named(*g_ba, "g_ba");
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> Models::discriminator_parameters() const {
  auto out = named(*d_a, "d_a");
  const auto b = named(*d_b, "d_b");
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> Models::fitter_parameters() const { return named(*fitter, "fitter"); }

void Models::export_to(std::map<std::string, torch::Tensor>& out) const {
  nn::export_module("g_ab", *g_ab, out);
  nn::export_module("g_ba", *g_ba, out);
  nn::export_module("d_a", *d_a, out);
  nn::export_module("d_b", *d_b, out);
  nn::export_module("fitter", *fitter, out);
}

void Models::import_from(const std::map<std::string, torch::Tensor>& in) {
  nn::import_module("g_ab", *g_ab, in);
  nn::import_module("g_ba", *g_ba, in);
  nn::import_module("d_a", *d_a, in);
  nn::import_module("d_b", *d_b, in);
  nn::import_module("fitter", *fitter, in);
}

// ---------------------------------------------------------------------------

torch::Tensor loss_cycle(const torch::Tensor& x, const torch::Tensor& reconstructed) {
  require(x.sizes() == reconstructed.sizes(), ErrorCode::kShapeMismatch, "cycle loss operands differ in shape");
  return (x - reconstructed).abs().mean();
}

torch::Tensor loss_adversarial(const torch::Tensor& scores, bool is_real) {
  return (scores - (is_real ? 1.0 : 0.0)).pow(2).mean();
}

void Losses::add(const std::string& name, const torch::Tensor& value, double weight) {
  terms[name] = value;
  const auto weighted = weight * value;
  total = total.defined() ? total + weighted : weighted;
}

AbaResult step_cycle_aba(Models& models, const torch::Tensor& batch_a, const render::Palette& palette,
                         const LossWeights& w, Rng& rng) {
  AbaResult r;
  const auto out = models.g_ab->forward(batch_a);
  r.raw_b = out.raw;
  r.mean = out.mean;
  const auto z = nn::sample_code(out.mean, out.logvar, rng);
  r.rec_raw = models.g_ba->forward(out.raw, z);
  const auto flooded = nn::flood_tensor(out.raw, nn::palette_tensor(palette));
  r.rec_flooded = models.g_ba->forward(flooded.b, z);
  r.losses.add("cyc_aba_raw", loss_cycle(batch_a, r.rec_raw), w.cyc_aba);
  r.losses.add("cyc_aba_flooded", loss_cycle(batch_a, r.rec_flooded), w.cyc_aba);
  r.losses.add("adv_b", loss_adversarial(models.d_b->forward(out.raw), true), w.adv_b);
  r.losses.add("kl", nn::kl_divergence(out.mean, out.logvar), w.kl);
  return r;
}

torch::Tensor render_domain_b(const RenderContext& ctx, const std::vector<data::BodyParams>& bodies,
                              const std::vector<RgbImage>& backgrounds) {
  require(!bodies.empty() && bodies.size() == backgrounds.size(), ErrorCode::kShapeMismatch,
          "need one background per body");
  std::vector<torch::Tensor> out;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const auto labels = render::rasterize(ctx.camera, body::pose_body(ctx.tmpl, bodies[i].beta, bodies[i].pose)).first;
    out.push_back(nn::domain_b_to_tensor(render::composite(labels, ctx.palette, backgrounds[i])));
  }
  return torch::stack(out);
}

ChainResult step_chain_cbabc(Models& models, const RenderContext& ctx, const std::vector<data::BodyParams>& bodies,
                             const torch::Tensor& z, const std::vector<RgbImage>& backgrounds, const LossWeights& w) {
  require(z.dim() == 2 && z.size(0) == static_cast<std::int64_t>(bodies.size()), ErrorCode::kShapeMismatch,
          "one donor code per body required");
  ChainResult r;
  r.real_b = render_domain_b(ctx, bodies, backgrounds);
  r.fake_a = models.g_ba->forward(r.real_b, z);
  r.losses.add("adv_a", loss_adversarial(models.d_a->forward(r.fake_a), true), w.adv_a);
  r.rec_b = models.g_ab->forward(r.fake_a).raw;
  r.losses.add("cyc_bab", loss_cycle(r.real_b, r.rec_b), w.cyc_bab);

  // 3D branch: the generated image enters as a constant.
  const auto raw = nn::clip_gradient(models.g_ab->forward(r.fake_a.detach()).raw, w.rec3d_encoder_clip);
  const auto flooded = nn::flood_tensor(raw, nn::palette_tensor(ctx.palette));
  const auto neutral = nn::neutralize(flooded.b).slice(1, 0, 3);
  r.fit = nn::fit(models.fitter, neutral);
  r.rec3d = nn::parameter_loss(r.fit, nn::fit_target(bodies));
  r.losses.add("rec3d", r.rec3d, w.rec3d);
  return r;
}

torch::Tensor supervised_seg_loss(const torch::Tensor& raw_b, const torch::Tensor& target) {
  require(raw_b.sizes() == target.sizes(), ErrorCode::kShapeMismatch, "segmentation target differs in shape");
  return (raw_b - target).pow(2).mean();
}

torch::Tensor step_supervised_seg(Models& models, const std::vector<data::SampleRecord>& batch,
                                  const render::Palette& palette) {
  require(!batch.empty(), ErrorCode::kNoData, "empty supervised batch");
  const auto access = data::GroundTruthAccess::training();
  std::vector<torch::Tensor> images, targets;
  for (const auto& record : batch) {
    const auto& labels = record.gt_labels(access);
    images.push_back(nn::image_to_tensor(record.image()));
    targets.push_back(nn::domain_b_to_tensor(render::composite(labels, palette, record.image())));
  }
  const auto raw = models.g_ab->forward(torch::stack(images)).raw;
  return supervised_seg_loss(raw, torch::stack(targets));
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kPretrainB2C: return "pretrain_b2c";
    case Stage::kUnsupervised: return "unsupervised";
    case Stage::kSemiSupervised: return "semi_supervised";
  }
  return "unknown";
}

Stage stage_from_name(const std::string& name) {
  if (name == "pretrain_b2c") return Stage::kPretrainB2C;
  if (name == "unsupervised") return Stage::kUnsupervised;
  if (name == "semi_supervised") return Stage::kSemiSupervised;
  fail(ErrorCode::kInvalidConfiguration, "unknown stage '" + name + "'");
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig config, TrainingData data)
    : config_(std::move(config)),
      ctx_(make_render_context(config_)),
      data_(std::move(data)),
      models_(config_, config_.fitter_config(ctx_.tmpl, ctx_.prior)),
      gen_opt_(models_.generator_parameters(), adam_options(config_, config_.lr)),
      disc_opt_(models_.discriminator_parameters(), adam_options(config_, config_.lr)),
      fit_opt_(models_.fitter_parameters(), adam_options(config_, config_.fitter_lr)) {
  config_.validate();
}

void Trainer::begin_stage(Stage stage) {
  stage_ = stage;
  step_ = 0;
  supervised_indices_.clear();
  if (stage == Stage::kSemiSupervised && config_.supervision_interval) {
    data::mark_supervised(data_.a_records, *config_.supervision_interval);
    for (int i = 0; i < static_cast<int>(data_.a_records.size()); ++i)
      if (data_.a_records[i].supervised()) supervised_indices_.push_back(i);
  } else {
    data::clear_supervised(data_.a_records);
  }
}

StepReport Trainer::run_step() {
  return stage_ == Stage::kPretrainB2C ? pretrain_step() : cycle_step();
}

const nn::PretrainSet& Trainer::pretrain_set() {
  if (!pretrain_set_) {
    Rng rng = derive_rng(config_.seed, {kPretrainStream});
    pretrain_set_ = nn::pretrain_pairs(ctx_.tmpl, ctx_.prior, ctx_.camera, ctx_.palette, config_.pretrain_pairs, rng,
                                       config_.dataset.beta_stddev);
  }
  return *pretrain_set_;
}

double Trainer::pretrain_set_loss() {
  torch::NoGradGuard no_grad;
  const auto& set = pretrain_set();
  const auto n = set.inputs.size(0);
  double sum = 0.0;
  for (std::int64_t s = 0; s < n; s += 64) {
    const auto e = std::min<std::int64_t>(n, s + 64);
    const auto pred = nn::fit(models_.fitter, set.inputs.slice(0, s, e));
    nn::FitOutput target{set.targets.rotations.slice(0, s, e), set.targets.translation.slice(0, s, e),
                         set.targets.beta.slice(0, s, e), {}};
    sum += nn::scalar(nn::parameter_loss(pred, target)) * static_cast<double>(e - s);
  }
  return sum / static_cast<double>(n);
}

StepReport Trainer::pretrain_step() {
  const auto& set = pretrain_set();
  Rng rng = derive_rng(config_.seed, {kStepStream, stage_tag(stage_), static_cast<std::uint64_t>(step_)});
  std::vector<std::int64_t> idx;
  for (int i = 0; i < config_.pretrain_batch; ++i) idx.push_back(pick(rng, static_cast<int>(set.inputs.size(0))));
  const auto index = torch::tensor(idx, torch::kInt64);
  const auto inputs = set.inputs.index_select(0, index);
  const nn::FitOutput target{set.targets.rotations.index_select(0, index), set.targets.translation.index_select(0, index),
                             set.targets.beta.index_select(0, index), {}};
  Losses losses;
  losses.add("param", nn::parameter_loss(nn::fit(models_.fitter, inputs), target), 1.0);
  check_finite(losses, inputs);
  fit_opt_.zero_grad();
  losses.total.backward();
  fit_opt_.step();
  StepReport report{stage_, step_, {{"param", nn::scalar(losses.terms["param"])}}};
  ++step_;
  return report;
}

std::vector<RgbImage> Trainer::draw_backgrounds(int n, Rng& rng) const {
  std::vector<RgbImage> out;
  for (int i = 0; i < n; ++i) {
    if (data_.backgrounds.empty()) {
      out.push_back(data::make_background(config_.height, config_.width, rng));
    } else {
      out.push_back(data_.backgrounds[pick(rng, static_cast<int>(data_.backgrounds.size()))]);
    }
  }
  return out;
}

torch::Tensor Trainer::a_batch(const std::vector<int>& indices, Rng& rng) const {
  std::vector<torch::Tensor> images;
  for (int i : indices) {
    const auto& record = data_.a_records[i];
    images.push_back(nn::image_to_tensor(config_.augment ? data::augment(record, rng).image() : record.image()));
  }
  return torch::stack(images);
}

void Trainer::check_finite(const Losses& losses, const torch::Tensor& batch) const {
  std::string bad;
  for (const auto& [name, value] : losses.terms)
    if (!std::isfinite(nn::scalar(value))) bad += (bad.empty() ? "" : ", ") + name;
  if (bad.empty()) return;
  const auto dir = diagnostics_dir_ / ("nonfinite_" + stage_name(stage_) + "_" + std::to_string(step_));
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["stage"] = stage_name(stage_);
  j["step"] = step_;
  for (const auto& [name, value] : losses.terms) {
    const double v = nn::scalar(value);
    j["losses"][name] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(std::to_string(v));
  }
  std::ofstream(dir / "losses.json") << j.dump(2) << '\n';
  for (std::int64_t i = 0; i < batch.size(0); ++i) {
    auto img = nn::tensor_to_image(batch[i].nan_to_num(0.0).clamp(0.0, 1.0));
    io::write_png(dir / ("batch_" + std::to_string(i) + ".png"), img);
  }
  fail(ErrorCode::kNonFiniteLoss, "non-finite loss (" + bad + ") at " + stage_name(stage_) + " step " +
                                      std::to_string(step_) + "; batch dumped to " + dir.string());
}

StepReport Trainer::cycle_step() {
  require(!data_.a_records.empty(), ErrorCode::kNoData, "no domain-A records to train on");
  const int n = config_.batch_size;
  Rng rng = derive_rng(config_.seed, {kStepStream, stage_tag(stage_), static_cast<std::uint64_t>(step_)});
  std::vector<int> indices;
  for (int i = 0; i < n; ++i) indices.push_back(pick(rng, static_cast<int>(data_.a_records.size())));
  const auto batch = a_batch(indices, rng);

  auto aba = step_cycle_aba(models_, batch, ctx_.palette, config_.weights, rng);
  Losses losses = aba.losses;

  std::vector<data::BodyParams> bodies;
  for (int i = 0; i < n; ++i) {
    if (data_.b_bodies.empty()) {
      bodies.push_back({data::sample_pose(ctx_.prior, rng),
                        data::sample_shape(ctx_.tmpl.shape_count(), config_.dataset.beta_stddev, rng)});
    } else {
      bodies.push_back(data_.b_bodies[pick(rng, static_cast<int>(data_.b_bodies.size()))]);
    }
  }
  const auto backgrounds = draw_backgrounds(n, rng);
  const bool chain = step_ % config_.chain_interval == 0;
  std::optional<ChainResult> chain_result;
  torch::Tensor real_b;
  if (chain) {
    // Donor codes come from other images of the batch.
    const auto shift = n > 1 ? 1 + pick(rng, n - 1) : 0;
    const auto z = aba.mean.detach().roll(shift, 0);
    chain_result = step_chain_cbabc(models_, ctx_, bodies, z, backgrounds, config_.weights);
    for (const auto& [name, value] : chain_result->losses.terms) losses.terms[name] = value;
    losses.total = losses.total + chain_result->losses.total;
    real_b = chain_result->real_b;
  } else {
    real_b = render_domain_b(ctx_, bodies, backgrounds);
  }

  const auto period = config_.supervised_step_period();
  if (stage_ == Stage::kSemiSupervised && period && step_ % *period == 0 && !supervised_indices_.empty()) {
    std::vector<data::SampleRecord> sup;
    for (int i = 0; i < n; ++i) {
      auto record = data_.a_records[supervised_indices_[pick(rng, static_cast<int>(supervised_indices_.size()))]];
      if (config_.augment) record = data::augment(record, rng);
      if (config_.paste && uniform(rng, 0.0, 1.0) < 0.5) {
        record = data::paste_augment(record, draw_backgrounds(1, rng).front(), data::GroundTruthAccess::training());
      }
      sup.push_back(std::move(record));
    }
    losses.add("sup_seg", step_supervised_seg(models_, sup, ctx_.palette), config_.weights.sup_seg);
  }
  check_finite(losses, batch);

  gen_opt_.zero_grad();
  fit_opt_.zero_grad();
  losses.total.backward();
  gen_opt_.step();
  if (chain) fit_opt_.step();

  // Discriminators: least squares, halved, on detached fakes.
  disc_opt_.zero_grad();
  auto disc_b = 0.5 * (loss_adversarial(models_.d_b->forward(real_b), true) +
                       loss_adversarial(models_.d_b->forward(aba.raw_b.detach()), false));
  auto disc_total = disc_b;
  torch::Tensor disc_a;
  if (chain) {
    disc_a = 0.5 * (loss_adversarial(models_.d_a->forward(batch), true) +
                    loss_adversarial(models_.d_a->forward(chain_result->fake_a.detach()), false));
    disc_total = disc_total + disc_a;
  }
  Losses disc_losses;
  disc_losses.add("disc_b", disc_b, 1.0);
  if (chain) disc_losses.add("disc_a", disc_a, 1.0);
  check_finite(disc_losses, batch);
  disc_total.backward();
  disc_opt_.step();

  StepReport report{stage_, step_, {}};
  for (const auto& [name, value] : losses.terms) report.values[name] = nn::scalar(value);
  for (const auto& [name, value] : disc_losses.terms) report.values[name] = nn::scalar(value);
  report.values["total"] = nn::scalar(losses.total);
  ++step_;
  return report;
}

nn::Checkpoint Trainer::checkpoint() const {
  nn::Checkpoint ck;
  ck.stage = stage_name(stage_);
  ck.step = step_;
  ck.config = to_json(config_);
  ck.channel_order = nn::kDomainBChannelOrder;
  ck.palette_checksum = ctx_.palette.checksum();
  ck.template_checksum = body::template_checksum(ctx_.tmpl);
  models_.export_to(ck.tensors);
  for (const auto& [prefix, opt] : {std::pair{"opt.gen.", &gen_opt_}, std::pair{"opt.disc.", &disc_opt_},
                                    std::pair{"opt.fit.", &fit_opt_}}) {
    for (const auto& [k, v] : opt->state()) ck.tensors[prefix + k] = v;
    ck.tensors[std::string(prefix) + "steps"] = torch::tensor({static_cast<std::int64_t>(opt->steps())}, torch::kInt64);
  }
  // Snapshot: parameters and moments are updated in place by later steps.
  for (auto& [k, v] : ck.tensors) v = v.detach().clone();
  return ck;
}

void Trainer::restore(const nn::Checkpoint& ck) {
  nn::check_compatible(ck, ctx_.palette, ctx_.tmpl);
  models_.import_from(ck.tensors);
  for (const auto& [prefix, opt] : {std::pair{std::string("opt.gen."), &gen_opt_},
                                    std::pair{std::string("opt.disc."), &disc_opt_},
                                    std::pair{std::string("opt.fit."), &fit_opt_}}) {
    std::map<std::string, torch::Tensor> state;
    for (const auto& [k, v] : ck.tensors)
      if (k.rfind(prefix, 0) == 0) state[k.substr(prefix.size())] = v;
    const auto steps = state.find("steps");
    require(steps != state.end(), ErrorCode::kIo, "checkpoint lacks " + prefix + "steps");
    opt->load_state(state, steps->second.item<std::int64_t>());
  }
  begin_stage(stage_from_name(ck.stage));
  step_ = ck.step;
}

// ---------------------------------------------------------------------------

void run_stage(Trainer& trainer, Stage stage, int steps, const std::filesystem::path& out_dir,
               const std::optional<nn::Checkpoint>& init, const StepCallback& callback) {
  std::filesystem::create_directories(out_dir);
  bool resume = false;
  if (init) {
    trainer.restore(*init);
    resume = trainer.stage() == stage;
  }
  if (stage == Stage::kSemiSupervised) {
    require(init && (trainer.stage() == Stage::kUnsupervised || trainer.stage() == Stage::kSemiSupervised),
            ErrorCode::kInvalidConfiguration,
            "the semi-supervised stage starts from an unsupervised checkpoint (pass --checkpoint)");
  }
  if (!resume) trainer.begin_stage(stage);
  trainer.set_diagnostics_dir(out_dir / "diagnostics");
  save_config(out_dir / "config.json", trainer.config());

  std::ofstream log(out_dir / "log.jsonl", resume ? std::ios::app : std::ios::trunc);
  require(log.good(), ErrorCode::kIo, "cannot write " + (out_dir / "log.jsonl").string());
  const auto& cfg = trainer.config();
  while (trainer.step() < steps) {
    const auto report = trainer.run_step();
    const bool last = trainer.step() == steps;
    if (report.step % cfg.log_interval == 0 || last) {
      nlohmann::ordered_json j;
      j["stage"] = stage_name(report.stage);
      j["step"] = report.step;
      for (const auto& [k, v] : report.values) j[k] = v;
      log << j.dump() << '\n' << std::flush;
    }
    if (cfg.checkpoint_interval > 0 && trainer.step() % cfg.checkpoint_interval == 0 && !last) {
      nn::save_checkpoint(out_dir / ("checkpoint_" + std::to_string(trainer.step()) + ".bin"), trainer.checkpoint());
    }
    if (callback) callback(report);
  }
  nn::save_checkpoint(out_dir / "checkpoint.bin", trainer.checkpoint());
}

data::UnpairedSplit unpaired_split(const TrainConfig& config, const std::vector<data::SampleRecord>& records) {
  Rng rng = derive_rng(config.seed, {kSplitStream});
  return data::split_unpaired(records, rng);
}

TrainingData make_training_data(const TrainConfig& config, const std::vector<data::SampleRecord>& records) {
  auto split = unpaired_split(config, records);
  TrainingData out;
  out.a_records = std::move(split.a_records);
  out.b_bodies = std::move(split.b_bodies);
  if (!config.background_dir.empty()) {
    out.backgrounds = data::load_backgrounds(config.background_dir, config.height, config.width);
  }
  return out;
}

}  // namespace repcycle::train
