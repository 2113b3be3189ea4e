#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "commands.hpp"
#include "repcycle/error.hpp"

namespace {

using namespace repcycle::cli;

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config, "TrainConfig JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "Master seed; overrides the config");
  cmd->add_option("--out", common.out, "Output directory")->capture_default_str();
  cmd->add_option("--checkpoint", common.checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
}

constexpr const char* kStepsHelp = "Total steps of the stage; a resumed run continues up to this count";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"repcycle: images <-> part segments <-> 3D body parameters"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonOptions common;
  DatagenOptions datagen;
  TrainOptions pretrain, train;
  EvalOptions eval;
  InferOptions infer;
  TransferOptions transfer;
  SampleOptions sample;
  PlotOptions plot;

  auto* c_datagen = app.add_subcommand("datagen", "Generate the synthetic toy dataset");
  add_common(c_datagen, common);
  c_datagen->add_flag("--test", datagen.test_split, "Write the held-out evaluation set instead");

  auto* c_pretrain = app.add_subcommand("pretrain-b2c", "Pretrain the segments-to-body fitter on rendered pairs");
  add_common(c_pretrain, common);
  c_pretrain->add_option("--steps", pretrain.steps, kStepsHelp)->check(CLI::PositiveNumber);
  c_pretrain->add_option("--data", pretrain.data, "Dataset directory (default: generate from config)")
      ->check(CLI::ExistingDirectory);

  auto* c_train = app.add_subcommand("train", "Unsupervised or semi-supervised cycle training");
  add_common(c_train, common);
  c_train->add_option("--steps", train.steps, kStepsHelp)->check(CLI::PositiveNumber);
  c_train->add_option("--data", train.data, "Dataset directory (default: generate from config)")
      ->check(CLI::ExistingDirectory);
  c_train->add_option("--stage", train.stage, "unsupervised | semi-supervised")
      ->check(CLI::IsMember({"unsupervised", "semi-supervised"}))
      ->capture_default_str();
  c_train->add_option("--supervision", train.supervision, "Label every k-th record (k, or 'none')");

  auto* c_eval = app.add_subcommand("eval", "Segmentation and 3D metrics on a labeled set");
  add_common(c_eval, common);
  c_eval->add_option("--data", eval.data, "Dataset directory (default: generated test set)")
      ->check(CLI::ExistingDirectory);
  c_eval->add_option("--tag", eval.tag, "Report column name for --checkpoint");
  c_eval->add_option("--compare", eval.compare, "Further checkpoints, one column each")->check(CLI::ExistingFile);
  c_eval->add_flag("--no-3d", eval.skip_3d, "Segmentation metrics only");

  auto* c_infer = app.add_subcommand("infer", "Segments and fitted body for one image");
  add_common(c_infer, common);
  c_infer->add_option("--image", infer.image, "Input PNG")->required()->check(CLI::ExistingFile);
  c_infer->add_flag("--resize", infer.resize, "Resample inputs whose size differs from the model");
  c_infer->add_option("--panel-scale", infer.panel_scale, "Upscale factor of panel.png")
      ->check(CLI::Range(1, 16))
      ->capture_default_str();

  auto* c_transfer = app.add_subcommand("transfer", "Move the appearance of one image onto another body");
  add_common(c_transfer, common);
  c_transfer->add_option("--source", transfer.source, "Appearance source PNG")->required()->check(CLI::ExistingFile);
  auto* ti = c_transfer->add_option("--target-image", transfer.target_image, "Target person PNG")
                 ->check(CLI::ExistingFile);
  auto* tp = c_transfer->add_option("--target-params", transfer.target_params, "Target body parameters JSON")
                 ->check(CLI::ExistingFile);
  ti->excludes(tp);
  c_transfer->add_option("--background", transfer.background, "Background PNG for --target-params")
      ->check(CLI::ExistingFile);

  auto* c_sample = app.add_subcommand("sample", "Images from random bodies and appearance codes");
  add_common(c_sample, common);
  c_sample->add_option("--n", sample.count, "Number of samples")->check(CLI::PositiveNumber)->capture_default_str();
  c_sample->add_flag("--fixed-pose", sample.fixed_pose, "Share one body across samples; vary only appearance");

  auto* c_plot = app.add_subcommand("plot", "PNG loss curves and supervision trend charts");
  add_common(c_plot, common);
  c_plot->add_option("--log", plot.logs, "Training log.jsonl files")->check(CLI::ExistingFile);
  c_plot->add_option("--report", plot.reports, "eval report.json files, in x-axis order")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  torch::set_num_threads(1);

  try {
    if (*c_datagen) cmd_datagen(common, datagen);
    if (*c_pretrain) cmd_pretrain_b2c(common, pretrain);
    if (*c_train) cmd_train(common, train);
    if (*c_eval) cmd_eval(common, eval);
    if (*c_infer) cmd_infer(common, infer);
    if (*c_transfer) cmd_transfer(common, transfer);
    if (*c_sample) cmd_sample(common, sample);
    if (*c_plot) cmd_plot(common, plot);
  } catch (const repcycle::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
