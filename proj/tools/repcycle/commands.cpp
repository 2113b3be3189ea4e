#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "plot.hpp"
#include "repcycle/checkpoint.hpp"
#include "repcycle/dataset_io.hpp"
#include "repcycle/error.hpp"
#include "repcycle/evaluation.hpp"
#include "repcycle/png_io.hpp"
#include "repcycle/rotation.hpp"
#include "repcycle/tensor_utils.hpp"
#include "repcycle/training.hpp"

namespace repcycle::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Stream tags for command-level randomness.
constexpr std::uint64_t kSampleStream = 0x73616d706c65;
constexpr std::uint64_t kTransferStream = 0x7472616e73;

void prepare_out(const CommonOptions& common, const TrainConfig& config) {
  fs::create_directories(common.out);
  save_config(common.out / "config.json", config);
}

// A trained model and the context it was trained in.
struct LoadedModel {
  TrainConfig config;
  train::RenderContext ctx;
  std::unique_ptr<train::Models> models;
};

LoadedModel load_model(const CommonOptions& common) {
  require(!common.checkpoint.empty(), ErrorCode::kInvalidConfiguration, "--checkpoint is required");
  const auto ck = nn::load_checkpoint(common.checkpoint);
  auto config = resolve_config(common, config_from_json(ck.config));
  LoadedModel m{config, train::make_render_context(config), nullptr};
  nn::check_compatible(ck, m.ctx.palette, m.ctx.tmpl);
  m.models = std::make_unique<train::Models>(m.config, m.config.fitter_config(m.ctx.tmpl, m.ctx.prior));
  m.models->import_from(ck.tensors);
  return m;
}

RgbImage read_input(const fs::path& path, const render::Camera& camera, bool resize) {
  auto image = io::read_png_rgb(path);
  if (image.height() != camera.height || image.width() != camera.width) {
    require(resize, ErrorCode::kShapeMismatch,
            path.string() + " is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                ", the model expects " + std::to_string(camera.width) + "x" + std::to_string(camera.height) +
                " (pass --resize to resample)");
    image = data::resize_bilinear(image, camera.height, camera.width);
  }
  return image;
}

void write_mask(const fs::path& path, const Mask& mask) {
  Raster<std::uint8_t> out(mask.height(), mask.width());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) out(y, x) = mask(y, x) ? 255 : 0;
  io::write_png_gray(path, out);
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

std::vector<data::SampleRecord> training_records(const TrainConfig& config, const train::RenderContext& ctx,
                                                 const fs::path& data_dir) {
  if (!data_dir.empty()) return data::load_dataset(data_dir).records;
  std::vector<RgbImage> backgrounds;
  if (!config.background_dir.empty())
    backgrounds = data::load_backgrounds(config.background_dir, config.height, config.width);
  return data::generate_dataset(config.dataset, ctx.tmpl, ctx.camera, ctx.prior, backgrounds);
}

void run_training(const CommonOptions& common, TrainConfig config, train::Stage stage, int steps,
                  const fs::path& data_dir, const std::optional<nn::Checkpoint>& init) {
  const auto ctx = train::make_render_context(config);
  if (init) nn::check_compatible(*init, ctx.palette, ctx.tmpl);
  auto data = train::make_training_data(config, training_records(config, ctx, data_dir));
  train::Trainer trainer(config, std::move(data));
  std::printf("%s: %d steps -> %s\n", train::stage_name(stage).c_str(), steps, common.out.string().c_str());
  train::run_stage(trainer, stage, steps, common.out, init, [&](const train::StepReport& r) {
    if (r.step % config.log_interval != 0) return;
    std::printf("  step %lld", r.step);
    for (const auto& [k, v] : r.values) std::printf("  %s %.4g", k.c_str(), v);
    std::printf("\n");
  });
  std::printf("checkpoint: %s\n", (common.out / "checkpoint.bin").string().c_str());
}

ordered_json fit_json(const data::BodyParams& body, const body::Points& joints, const nn::FitOutput& out) {
  ordered_json rotations = ordered_json::array();
  const auto r = out.rotations[0].to(torch::kFloat64).contiguous();
  for (std::int64_t j = 0; j < r.size(0); ++j) {
    ordered_json m = ordered_json::array();
    for (int a = 0; a < 3; ++a) m.push_back({r[j][a][0].item<double>(), r[j][a][1].item<double>(), r[j][a][2].item<double>()});
    rotations.push_back(m);
  }
  ordered_json theta = ordered_json::array(), joint_list = ordered_json::array();
  for (int j = 0; j < body.pose.joint_count(); ++j)
    theta.push_back({body.pose.axis_angles(j, 0), body.pose.axis_angles(j, 1), body.pose.axis_angles(j, 2)});
  for (Eigen::Index j = 0; j < joints.rows(); ++j) joint_list.push_back({joints(j, 0), joints(j, 1), joints(j, 2)});
  const auto& t = body.pose.translation;
  return {{"rotations", rotations},
          {"theta", theta},
          {"translation", {t.x(), t.y(), t.z()}},
          {"beta", std::vector<double>(body.beta.beta.data(), body.beta.beta.data() + body.beta.size())},
          {"joints", joint_list}};
}

// Images side by side with a white gutter, nearest-neighbor upscaled.
RgbImage panel(const std::vector<RgbImage>& images, int scale) {
  const int gutter = 4;
  const int h = images.front().height() * scale;
  int w = -gutter;
  for (const auto& im : images) w += im.width() * scale + gutter;
  RgbImage out(h, w, 3, 1.0);
  int x0 = 0;
  for (const auto& im : images) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < im.width() * scale; ++x)
        for (int k = 0; k < 3; ++k) out(y, x0 + x, k) = im(y / scale, x / scale, k);
    x0 += im.width() * scale + gutter;
  }
  return out;
}

std::vector<RgbImage> maybe_backgrounds(const TrainConfig& config) {
  if (config.background_dir.empty()) return {};
  return data::load_backgrounds(config.background_dir, config.height, config.width);
}

}  // namespace

TrainConfig resolve_config(const CommonOptions& common, const std::optional<TrainConfig>& fallback) {
  TrainConfig config = !common.config.empty() ? load_config(common.config) : fallback.value_or(TrainConfig{});
  if (common.seed) config.seed = *common.seed;
  config.validate();
  return config;
}

void cmd_datagen(const CommonOptions& common, const DatagenOptions& options) {
  auto config = resolve_config(common);
  if (common.seed) config.dataset.seed = *common.seed;
  prepare_out(common, config);
  const auto ctx = train::make_render_context(config);
  data::Dataset ds;
  ds.camera = ctx.camera;
  if (options.test_split) {
    ds.records = eval::make_test_set(config, ctx);
    ds.config = config.dataset;
    ds.config.samples = static_cast<int>(ds.records.size());
  } else {
    ds.records = data::generate_dataset(config.dataset, ctx.tmpl, ctx.camera, ctx.prior, maybe_backgrounds(config));
    ds.config = config.dataset;
    // Record which sequences land on each side of the unpaired split.
    const auto split = train::unpaired_split(config, ds.records);
    ds.a_sequences = split.a_sequences;
    ds.b_sequences = split.b_sequences;
  }
  data::save_dataset(common.out, ds);
  std::printf("wrote %zu records to %s\n", ds.records.size(), common.out.string().c_str());
}

void cmd_pretrain_b2c(const CommonOptions& common, const TrainOptions& options) {
  std::optional<nn::Checkpoint> init;
  if (!common.checkpoint.empty()) init = nn::load_checkpoint(common.checkpoint);
  const auto config = resolve_config(common, init ? std::optional(config_from_json(init->config)) : std::nullopt);
  prepare_out(common, config);
  run_training(common, config, train::Stage::kPretrainB2C, options.steps.value_or(config.steps.pretrain_b2c),
               options.data, init);
}

void cmd_train(const CommonOptions& common, const TrainOptions& options) {
  std::optional<nn::Checkpoint> init;
  if (!common.checkpoint.empty()) init = nn::load_checkpoint(common.checkpoint);
  auto config = resolve_config(common, init ? std::optional(config_from_json(init->config)) : std::nullopt);
  std::string stage_name = options.stage;
  std::replace(stage_name.begin(), stage_name.end(), '-', '_');
  const auto stage = train::stage_from_name(stage_name);
  require(stage != train::Stage::kPretrainB2C, ErrorCode::kInvalidConfiguration,
          "use the pretrain-b2c command for the pretraining stage");
  if (options.supervision) {
    if (*options.supervision == "none") {
      config.supervision_interval.reset();
    } else {
      try {
        config.supervision_interval = std::stoi(*options.supervision);
      } catch (const std::exception&) {
        fail(ErrorCode::kInvalidConfiguration, "--supervision takes an integer k or 'none'");
      }
    }
    config.validate();
  }
  if (!init) std::fprintf(stderr, "warning: training without a pretrained fitter checkpoint\n");
  prepare_out(common, config);
  const int steps = options.steps.value_or(stage == train::Stage::kUnsupervised ? config.steps.unsupervised
                                                                                  : config.steps.semi_supervised);
  run_training(common, config, stage, steps, options.data, init);
}

void cmd_eval(const CommonOptions& common, const EvalOptions& options) {
  std::vector<fs::path> checkpoints{common.checkpoint};
  checkpoints.insert(checkpoints.end(), options.compare.begin(), options.compare.end());
  std::vector<std::pair<std::string, metrics::MetricReport>> columns;
  std::optional<std::vector<data::SampleRecord>> records;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    auto c = common;
    c.checkpoint = checkpoints[i];
    auto model = load_model(c);
    if (i == 0) prepare_out(common, model.config);
    if (!records) {
      records = options.data.empty() ? eval::make_test_set(model.config, model.ctx)
                                     : data::load_dataset(options.data).records;
    }
    auto opts = eval::options_from(model.config);
    opts.three_d = !options.skip_3d;
    const auto report = eval::evaluate(*model.models, model.ctx, *records, opts);
    const std::string tag = i == 0 && !options.tag.empty() ? options.tag : checkpoints[i].parent_path().filename().string() + "/" + checkpoints[i].stem().string();
    columns.emplace_back(tag, report);
    std::printf("%-32s iou14 %.4f  iou4 %.4f  iou1 %.4f", tag.c_str(), report.iou_14, report.iou_4, report.iou_1);
    if (report.has_3d) std::printf("  rmse %.1f  best4 %.1f mm", report.rmse, report.best4_rmse);
    std::printf("\n");
  }
  std::ofstream(common.out / "report.json") << metrics::report_json(columns) << '\n';
}

void cmd_infer(const CommonOptions& common, const InferOptions& options) {
  require(!options.image.empty(), ErrorCode::kInvalidConfiguration, "--image is required");
  auto model = load_model(common);
  prepare_out(common, model.config);
  const auto image = read_input(options.image, model.ctx.camera, options.resize);
  const auto segments =
      eval::predict_segments(*model.models, model.ctx.palette, nn::image_to_tensor(image).unsqueeze(0)).front();
  const auto fit_body = eval::fit_segments(*model.models, model.ctx.palette, segments);
  nn::FitOutput raw_fit;
  {
    torch::NoGradGuard no_grad;
    const auto neutral = render::composite(segments.labels, model.ctx.palette,
                                           metrics::neutral_background(segments.height(), segments.width()));
    raw_fit = nn::fit(model.models->fitter, nn::image_to_tensor(neutral.rgb).unsqueeze(0));
  }
  const auto posed = body::pose_body(model.ctx.tmpl, fit_body.beta, fit_body.pose);
  const auto refit = render::composite(render::rasterize(model.ctx.camera, posed).first, model.ctx.palette, image);

  io::write_png(common.out / "segments.png", segments.rgb);
  io::write_png_gray(common.out / "labels.png", segments.labels);
  write_mask(common.out / "mask.png", segments.mask);
  write_json(common.out / "fit.json", fit_json(fit_body, posed.joints, raw_fit));
  io::write_png(common.out / "panel.png", panel({image, segments.rgb, refit.rgb}, options.panel_scale));
  std::printf("wrote segments.png labels.png mask.png fit.json panel.png to %s\n", common.out.string().c_str());
}

void cmd_transfer(const CommonOptions& common, const TransferOptions& options) {
  require(!options.source.empty(), ErrorCode::kInvalidConfiguration, "--source is required");
  require(options.target_image.empty() != options.target_params.empty(), ErrorCode::kInvalidConfiguration,
          "give exactly one of --target-image or --target-params");
  auto model = load_model(common);
  prepare_out(common, model.config);
  auto& m = *model.models;
  const auto& cam = model.ctx.camera;
  torch::NoGradGuard no_grad;
  const auto source = nn::image_to_tensor(read_input(options.source, cam, false)).unsqueeze(0);
  const auto z = m.g_ab->forward(source).mean;

  torch::Tensor target_b;
  if (!options.target_image.empty()) {
    const auto target = nn::image_to_tensor(read_input(options.target_image, cam, false)).unsqueeze(0);
    target_b = nn::flood_tensor(m.g_ab->forward(target).raw, nn::palette_tensor(model.ctx.palette)).b;
  } else {
    const auto body = data::read_body_params(options.target_params);
    RgbImage bg;
    if (!options.background.empty()) {
      bg = read_input(options.background, cam, true);
    } else {
      auto rng = derive_rng(model.config.seed, {kTransferStream});
      bg = data::make_background(cam.height, cam.width, rng);
    }
    target_b = train::render_domain_b(model.ctx, {body}, {bg});
  }
  const auto out = m.g_ba->forward(target_b, z);
  io::write_png(common.out / "target_segments.png", nn::tensor_to_image(target_b[0].slice(0, 0, 3)));
  io::write_png(common.out / "transfer.png", nn::tensor_to_image(out[0]));
  std::printf("wrote transfer.png to %s\n", common.out.string().c_str());
}

void cmd_sample(const CommonOptions& common, const SampleOptions& options) {
  require(options.count >= 1, ErrorCode::kInvalidConfiguration, "--n must be at least 1");
  auto model = load_model(common);
  prepare_out(common, model.config);
  const auto& ctx = model.ctx;
  auto rng = derive_rng(model.config.seed, {kSampleStream});
  const auto library = maybe_backgrounds(model.config);
  std::vector<data::BodyParams> bodies;
  std::vector<RgbImage> backgrounds;
  for (int i = 0; i < options.count; ++i) {
    if (i == 0 || !options.fixed_pose) {
      bodies.push_back({data::sample_pose(ctx.prior, rng), data::sample_shape(ctx.tmpl.shape_count(), 1.0, rng)});
    } else {
      bodies.push_back(bodies.front());
    }
    backgrounds.push_back(library.empty() ? data::make_background(ctx.camera.height, ctx.camera.width, rng)
                                          : library[rng() % library.size()]);
  }
  const auto z = nn::normal_tensor(rng, {options.count, model.config.nets.code_dim});
  torch::NoGradGuard no_grad;
  const auto b = train::render_domain_b(ctx, bodies, backgrounds);
  const auto a = model.models->g_ba->forward(b, z);
  for (int i = 0; i < options.count; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%03d", i);
    const auto labels = render::rasterize(ctx.camera, body::pose_body(ctx.tmpl, bodies[i].beta, bodies[i].pose)).first;
    io::write_png(common.out / ("sample_" + std::string(stem) + ".png"), nn::tensor_to_image(a[i]));
    io::write_png_gray(common.out / ("labels_" + std::string(stem) + ".png"), labels);
    write_mask(common.out / ("mask_" + std::string(stem) + ".png"), render::foreground_mask(labels));
    data::write_body_params(common.out / ("params_" + std::string(stem) + ".json"), bodies[i], ctx.camera);
  }
  std::printf("wrote %d samples to %s\n", options.count, common.out.string().c_str());
}

void cmd_plot(const CommonOptions& common, const PlotOptions& options) {
  require(!options.logs.empty() || !options.reports.empty(), ErrorCode::kInvalidConfiguration,
          "give at least one --log or --report");
  fs::create_directories(common.out);

  for (const auto& path : options.logs) {
    std::ifstream f(path);
    require(f.good(), ErrorCode::kIo, "cannot read " + path.string());
    std::map<std::string, plot::Series> by_name;
    std::string line, stage;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      stage = j.value("stage", stage);
      const double step = j.at("step").get<double>();
      for (const auto& [k, v] : j.items()) {
        if (k == "step" || k == "stage" || !v.is_number()) continue;
        auto& s = by_name[k];
        s.name = k;
        s.x.push_back(step);
        s.y.push_back(v.get<double>());
      }
    }
    std::vector<plot::Series> series;
    for (auto& [k, s] : by_name) series.push_back(std::move(s));
    plot::ChartSpec spec;
    spec.title = "losses " + stage;
    spec.x_label = "step";
    spec.y_label = "loss (log)";
    spec.log_y = true;
    const auto name = path.parent_path().filename().string();
    const auto out = common.out / ((name.empty() ? path.stem().string() : name) + "_losses.png");
    io::write_png(out, plot::line_chart(series, spec));
    std::printf("wrote %s\n", out.string().c_str());
  }

  if (!options.reports.empty()) {
    // Columns of every report in order form the x axis.
    std::vector<std::string> regimes;
    std::map<std::string, std::vector<double>> seg, rmse;
    for (const auto& path : options.reports) {
      std::ifstream f(path);
      require(f.good(), ErrorCode::kIo, "cannot read " + path.string());
      const auto j = json::parse(f);
      for (const auto& regime : j.at("regimes")) {
        const auto r = regime.get<std::string>();
        regimes.push_back(r);
        for (const auto& [metric, values] : j.at("segmentation").items()) seg[metric].push_back(values.at(r).get<double>());
        for (const auto& [kind, block] : {std::pair{"normal", j.at("3d_normal_mm")}, std::pair{"best4", j.at("3d_best_of_4_mm")}}) {
          if (!block.contains("rmse")) continue;
          const auto& v = block.at("rmse");
          rmse[std::string(kind) + " rmse"].push_back(v.contains(r) ? v.at(r).get<double>() : std::nan(""));
        }
      }
    }
    std::vector<double> xs(regimes.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
    auto chart = [&](std::map<std::string, std::vector<double>>& values, const std::string& title,
                     const std::string& y_label, const fs::path& out) {
      std::vector<plot::Series> series;
      for (auto& [k, v] : values) {
        v.resize(xs.size(), std::nan(""));
        series.push_back({k, xs, v});
      }
      plot::ChartSpec spec;
      spec.title = title;
      spec.x_label = "supervision";
      spec.y_label = y_label;
      spec.x_ticks = regimes;
      io::write_png(out, plot::line_chart(series, spec));
      std::printf("wrote %s\n", out.string().c_str());
    };
    chart(seg, "segmentation iou vs supervision", "iou", common.out / "supervision_iou.png");
    if (!rmse.empty()) chart(rmse, "3d error vs supervision", "rmse (mm)", common.out / "supervision_rmse.png");
  }
}

}  // namespace repcycle::cli
