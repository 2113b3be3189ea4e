#include "repcycle/train_config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "repcycle/error.hpp"
#include "repcycle/template_io.hpp"

namespace repcycle {

using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  require(height > 0 && width > 0 && focal > 0, ErrorCode::kInvalidConfiguration, "resolution and focal must be positive");
  require(nets.height == height && nets.width == width, ErrorCode::kInvalidConfiguration,
          "net resolution differs from the image resolution");
  nets.validate();
  const auto& w = weights;
  for (double v : {w.adv_a, w.adv_b, w.cyc_aba, w.cyc_bab, w.kl, w.rec3d, w.sup_seg, w.rec3d_encoder_clip}) {
    require(v >= 0.0, ErrorCode::kInvalidConfiguration, "loss weights must be >= 0");
  }
  require(!supervision_interval || *supervision_interval >= 1, ErrorCode::kInvalidConfiguration,
          "supervision interval must be >= 1");
  require(batch_size >= 1 && chain_interval >= 1, ErrorCode::kInvalidConfiguration, "batch size and chain interval must be >= 1");
  require(lr > 0 && fitter_lr > 0 && beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorCode::kInvalidConfiguration,
          "optimizer settings out of range");
  require(steps.pretrain_b2c >= 0 && steps.unsupervised >= 0 && steps.semi_supervised >= 0,
          ErrorCode::kInvalidConfiguration, "step counts must be >= 0");
  require(pretrain_pairs >= 1 && pretrain_batch >= 1 && eval_samples >= 1, ErrorCode::kInvalidConfiguration, "sample counts must be positive");
  require(dataset.samples >= 2 && dataset.sequences >= 2, ErrorCode::kInvalidConfiguration,
          "the dataset needs at least two sequences to split");
  require(nominal_height_mm > 0, ErrorCode::kInvalidConfiguration, "nominal height must be positive");
  require(log_interval >= 1 && checkpoint_interval >= 0, ErrorCode::kInvalidConfiguration, "intervals out of range");
}

render::Camera TrainConfig::camera() const { return render::Camera::centered(height, width, focal); }

nn::FitterConfig TrainConfig::fitter_config(const body::BodyTemplate& tmpl, const data::PosePrior& prior) const {
  nn::FitterConfig f;
  f.height = height;
  f.width = width;
  f.base_channels = fitter_base_channels;
  f.res_blocks = fitter_res_blocks;
  f.hidden = fitter_hidden;
  f.joint_count = tmpl.joint_count();
  f.shape_count = tmpl.shape_count();
  f.translation_offset = {0.0, prior.vertical_offset, 0.5 * (prior.depth_min + prior.depth_max)};
  return f;
}

std::optional<int> TrainConfig::supervised_step_period() const {
  if (!supervision_interval) return std::nullopt;
  return (*supervision_interval + batch_size - 1) / batch_size;
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["height"] = c.height;
  j["width"] = c.width;
  j["focal"] = c.focal;
  j["template"] = {{"joint_count", c.body.joint_count}, {"detail", c.body.detail}, {"seed", c.body.seed},
                   {"path", c.body.path}};
  j["prior"] = {{"components", c.prior.components},
                {"bank_size", c.prior.bank_size},
                {"seed", c.prior.seed},
                {"min_height_fraction", c.prior.min_height_fraction},
                {"max_height_fraction", c.prior.max_height_fraction}};
  j["nets"] = {{"base_channels", c.nets.base_channels},
               {"res_blocks", c.nets.res_blocks},
               {"code_dim", c.nets.code_dim},
               {"disc_channels", c.nets.disc_channels}};
  j["fitter"] = {{"base_channels", c.fitter_base_channels}, {"res_blocks", c.fitter_res_blocks},
                 {"hidden", c.fitter_hidden}};
  j["optimizer"] = {{"lr", c.lr}, {"fitter_lr", c.fitter_lr}, {"beta1", c.beta1}, {"beta2", c.beta2}};
  j["batch_size"] = c.batch_size;
  const auto& w = c.weights;
  j["weights"] = {{"adv_a", w.adv_a}, {"adv_b", w.adv_b}, {"cyc_aba", w.cyc_aba}, {"cyc_bab", w.cyc_bab},
                  {"kl", w.kl},       {"rec3d", w.rec3d}, {"sup_seg", w.sup_seg},
                  {"rec3d_encoder_clip", w.rec3d_encoder_clip}};
  j["supervision_interval"] = c.supervision_interval ? ordered_json(*c.supervision_interval) : ordered_json(nullptr);
  j["chain_interval"] = c.chain_interval;
  j["steps"] = {{"pretrain_b2c", c.steps.pretrain_b2c},
                {"unsupervised", c.steps.unsupervised},
                {"semi_supervised", c.steps.semi_supervised}};
  j["pretrain_pairs"] = c.pretrain_pairs;
  j["pretrain_batch"] = c.pretrain_batch;
  j["dataset"] = {{"samples", c.dataset.samples},
                  {"sequences", c.dataset.sequences},
                  {"beta_stddev", c.dataset.beta_stddev},
                  {"motion_amount", c.dataset.motion_amount},
                  {"seed", c.dataset.seed}};
  j["eval_samples"] = c.eval_samples;
  j["augment"] = c.augment;
  j["paste"] = c.paste;
  j["background_dir"] = c.background_dir;
  j["log_interval"] = c.log_interval;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["nominal_height_mm"] = c.nominal_height_mm;
  j["iou_averaging"] = c.iou_averaging == metrics::Averaging::kMicro ? "micro" : "macro";
  return j;
}

namespace {

// Rejects keys of `j` that the defaults do not have, recursively.
void check_keys(const json& j, const json& reference, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    require(reference.contains(it.key()), ErrorCode::kInvalidConfiguration,
            "unknown config key '" + where + it.key() + "'");
    const auto& ref = reference.at(it.key());
    if (it->is_object() && ref.is_object()) check_keys(*it, ref, where + it.key() + ".");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidConfiguration, std::string("config key '") + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  return j.contains(key) ? j.at(key) : empty;
}

}  // namespace

TrainConfig config_from_json(const json& j) {
  require(j.is_object(), ErrorCode::kInvalidConfiguration, "config must be a JSON object");
  TrainConfig c;
  check_keys(j, json::parse(to_json(c).dump()), "");
  read(j, "seed", c.seed);
  read(j, "height", c.height);
  read(j, "width", c.width);
  read(j, "focal", c.focal);
  const auto& t = section(j, "template");
  read(t, "joint_count", c.body.joint_count);
  read(t, "detail", c.body.detail);
  read(t, "seed", c.body.seed);
  read(t, "path", c.body.path);
  const auto& p = section(j, "prior");
  read(p, "components", c.prior.components);
  read(p, "bank_size", c.prior.bank_size);
  read(p, "seed", c.prior.seed);
  read(p, "min_height_fraction", c.prior.min_height_fraction);
  read(p, "max_height_fraction", c.prior.max_height_fraction);
  const auto& n = section(j, "nets");
  read(n, "base_channels", c.nets.base_channels);
  read(n, "res_blocks", c.nets.res_blocks);
  read(n, "code_dim", c.nets.code_dim);
  read(n, "disc_channels", c.nets.disc_channels);
  c.nets.height = c.height;
  c.nets.width = c.width;
  const auto& f = section(j, "fitter");
  read(f, "base_channels", c.fitter_base_channels);
  read(f, "res_blocks", c.fitter_res_blocks);
  read(f, "hidden", c.fitter_hidden);
  const auto& o = section(j, "optimizer");
  read(o, "lr", c.lr);
  read(o, "fitter_lr", c.fitter_lr);
  read(o, "beta1", c.beta1);
  read(o, "beta2", c.beta2);
  read(j, "batch_size", c.batch_size);
  const auto& w = section(j, "weights");
  read(w, "adv_a", c.weights.adv_a);
  read(w, "adv_b", c.weights.adv_b);
  read(w, "cyc_aba", c.weights.cyc_aba);
  read(w, "cyc_bab", c.weights.cyc_bab);
  read(w, "kl", c.weights.kl);
  read(w, "rec3d", c.weights.rec3d);
  read(w, "sup_seg", c.weights.sup_seg);
  read(w, "rec3d_encoder_clip", c.weights.rec3d_encoder_clip);
  if (j.contains("supervision_interval")) {
    const auto& k = j.at("supervision_interval");
    if (k.is_null() || (k.is_string() && k.get<std::string>() == "none")) {
      c.supervision_interval.reset();
    } else {
      int v = 0;
      read(j, "supervision_interval", v);
      c.supervision_interval = v;
    }
  }
  read(j, "chain_interval", c.chain_interval);
  const auto& s = section(j, "steps");
  read(s, "pretrain_b2c", c.steps.pretrain_b2c);
  read(s, "unsupervised", c.steps.unsupervised);
  read(s, "semi_supervised", c.steps.semi_supervised);
  read(j, "pretrain_pairs", c.pretrain_pairs);
  read(j, "pretrain_batch", c.pretrain_batch);
  const auto& d = section(j, "dataset");
  read(d, "samples", c.dataset.samples);
  read(d, "sequences", c.dataset.sequences);
  read(d, "beta_stddev", c.dataset.beta_stddev);
  read(d, "motion_amount", c.dataset.motion_amount);
  read(d, "seed", c.dataset.seed);
  read(j, "eval_samples", c.eval_samples);
  read(j, "augment", c.augment);
  read(j, "paste", c.paste);
  read(j, "background_dir", c.background_dir);
  read(j, "log_interval", c.log_interval);
  read(j, "checkpoint_interval", c.checkpoint_interval);
  read(j, "nominal_height_mm", c.nominal_height_mm);
  if (j.contains("iou_averaging")) {
    std::string a;
    read(j, "iou_averaging", a);
    require(a == "micro" || a == "macro", ErrorCode::kInvalidConfiguration, "iou_averaging must be micro or macro");
    c.iou_averaging = a == "micro" ? metrics::Averaging::kMicro : metrics::Averaging::kMacro;
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidConfiguration, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const TrainConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

body::BodyTemplate make_template(const TrainConfig& config) {
  if (!config.body.path.empty()) return body::load_template(config.body.path);
  return body::height_normalize(body::build_toy_template(config.body.joint_count, config.body.detail, config.body.seed));
}

}  // namespace repcycle
