#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "learn_fixtures.hpp"
#include "plot.hpp"
#include "repcycle/checkpoint.hpp"
#include "repcycle/dataset_io.hpp"
#include "repcycle/error.hpp"
#include "repcycle/png_io.hpp"

namespace repcycle {
namespace {

namespace fs = std::filesystem;

// One pretrain + unsupervised run shared by the command tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("repcycle_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    save_config(root_ / "tiny.json", testing::tiny_config());

    cli::CommonOptions pre = common(root_ / "pre");
    cli::TrainOptions steps;
    steps.steps = 2;
    cli::cmd_pretrain_b2c(pre, steps);

    cli::CommonOptions unsup = common(root_ / "unsup");
    unsup.checkpoint = root_ / "pre" / "checkpoint.bin";
    cli::cmd_train(unsup, steps);

    cli::CommonOptions gen = common(root_ / "data");
    cli::cmd_datagen(gen, {});
  }

  static void TearDownTestSuite() { fs::remove_all(root_); }

  static cli::CommonOptions common(const fs::path& out) {
    cli::CommonOptions c;
    c.config = root_ / "tiny.json";
    c.out = out;
    return c;
  }

  static cli::CommonOptions with_model(const fs::path& out) {
    auto c = common(out);
    c.config.clear();  // model config comes from the checkpoint
    c.checkpoint = root_ / "unsup" / "checkpoint.bin";
    return c;
  }

  static std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
  }

  static fs::path root_;
};

fs::path CliTest::root_;

TEST_F(CliTest, TrainingCommandsWriteConfigLogAndCheckpoint) {
  for (const auto* dir : {"pre", "unsup"}) {
    EXPECT_TRUE(fs::exists(root_ / dir / "config.json"));
    EXPECT_TRUE(fs::exists(root_ / dir / "log.jsonl"));
    EXPECT_TRUE(fs::exists(root_ / dir / "checkpoint.bin"));
  }
  EXPECT_EQ(nn::load_checkpoint(root_ / "unsup" / "checkpoint.bin").stage, "unsupervised");
}

TEST_F(CliTest, SeedFlagOverridesConfigAndIsEchoed) {
  auto c = common(root_ / "seeded");
  c.seed = 99;
  EXPECT_EQ(cli::resolve_config(c).seed, 99u);
  cli::TrainOptions steps;
  steps.steps = 1;
  cli::cmd_pretrain_b2c(c, steps);
  EXPECT_EQ(load_config(root_ / "seeded" / "config.json").seed, 99u);
}

TEST_F(CliTest, DatagenRoundTrips) {
  const auto ds = data::load_dataset(root_ / "data");
  EXPECT_EQ(ds.records.size(), 24u);
  EXPECT_FALSE(ds.a_sequences.empty());
  EXPECT_FALSE(ds.b_sequences.empty());
}

TEST_F(CliTest, InferEmitsAllOutputsDeterministically) {
  cli::InferOptions opt;
  opt.image = root_ / "data" / "img_00000.png";
  cli::cmd_infer(with_model(root_ / "infer1"), opt);
  cli::cmd_infer(with_model(root_ / "infer2"), opt);
  for (const auto* f : {"segments.png", "labels.png", "mask.png", "fit.json", "panel.png"}) {
    ASSERT_TRUE(fs::exists(root_ / "infer1" / f)) << f;
    EXPECT_EQ(read_file(root_ / "infer1" / f), read_file(root_ / "infer2" / f)) << f;
  }
  const auto fit = nlohmann::json::parse(read_file(root_ / "infer1" / "fit.json"));
  EXPECT_EQ(fit.at("rotations").size(), 16u);
  EXPECT_EQ(fit.at("translation").size(), 3u);
}

TEST_F(CliTest, InferRejectsMismatchedResolutionUnlessResizing) {
  io::write_png(root_ / "big.png", RgbImage(48, 40, 3, 0.5));
  cli::InferOptions opt;
  opt.image = root_ / "big.png";
  try {
    cli::cmd_infer(with_model(root_ / "infer_big"), opt);
    FAIL() << "expected a shape mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
  opt.resize = true;
  cli::cmd_infer(with_model(root_ / "infer_big"), opt);
  EXPECT_TRUE(fs::exists(root_ / "infer_big" / "panel.png"));
}

TEST_F(CliTest, SampleIsDeterministicPerSeedAndMasksMatchLabels) {
  cli::SampleOptions opt;
  opt.count = 3;
  cli::cmd_sample(with_model(root_ / "s1"), opt);
  cli::cmd_sample(with_model(root_ / "s2"), opt);
  for (int i = 0; i < 3; ++i) {
    const std::string n = "00" + std::to_string(i);
    EXPECT_EQ(read_file(root_ / "s1" / ("sample_" + n + ".png")), read_file(root_ / "s2" / ("sample_" + n + ".png")));
    const auto labels = io::read_png_gray(root_ / "s1" / ("labels_" + n + ".png"));
    const auto mask = io::read_png_gray(root_ / "s1" / ("mask_" + n + ".png"));
    for (int y = 0; y < labels.height(); ++y)
      for (int x = 0; x < labels.width(); ++x) ASSERT_EQ(mask(y, x) == 255, labels(y, x) > 0);
  }
  auto other = with_model(root_ / "s3");
  other.seed = 7;
  cli::cmd_sample(other, opt);
  EXPECT_NE(read_file(root_ / "s1" / "sample_000.png"), read_file(root_ / "s3" / "sample_000.png"));
}

TEST_F(CliTest, FixedPoseSamplesShareSilhouettes) {
  cli::SampleOptions opt;
  opt.count = 3;
  opt.fixed_pose = true;
  cli::cmd_sample(with_model(root_ / "fixed"), opt);
  const auto first = read_file(root_ / "fixed" / "mask_000.png");
  EXPECT_EQ(read_file(root_ / "fixed" / "mask_001.png"), first);
  EXPECT_EQ(read_file(root_ / "fixed" / "mask_002.png"), first);
}

TEST_F(CliTest, TransferToParamsKeepsBackgroundOutsideMask) {
  cli::TransferOptions opt;
  opt.source = root_ / "data" / "img_00001.png";
  opt.target_params = root_ / "data" / "params_00002.json";
  io::write_png(root_ / "bg.png", RgbImage(32, 32, 3, 0.25));
  opt.background = root_ / "bg.png";
  cli::cmd_transfer(with_model(root_ / "transfer"), opt);
  const auto out = io::read_png_rgb(root_ / "transfer" / "transfer.png");
  const auto body = data::read_body_params(opt.target_params);
  const auto cfg = testing::tiny_config();
  const auto ctx = train::make_render_context(cfg);
  const auto labels = render::rasterize(ctx.camera, body::pose_body(ctx.tmpl, body.beta, body.pose)).first;
  int checked = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (labels(y, x) != 0) continue;
      for (int k = 0; k < 3; ++k) ASSERT_NEAR(out(y, x, k), 64.0 / 255.0, 1e-9);
      ++checked;
    }
  EXPECT_GT(checked, 0);
}

TEST_F(CliTest, TransferRequiresExactlyOneTarget) {
  cli::TransferOptions opt;
  opt.source = root_ / "data" / "img_00001.png";
  EXPECT_THROW(cli::cmd_transfer(with_model(root_ / "t_none"), opt), Error);
  opt.target_image = opt.source;
  cli::cmd_transfer(with_model(root_ / "t_img"), opt);
  EXPECT_TRUE(fs::exists(root_ / "t_img" / "transfer.png"));
}

TEST_F(CliTest, EvalWritesComparableReport) {
  cli::EvalOptions opt;
  opt.data = root_ / "data";
  opt.tag = "unsup";
  opt.compare = {root_ / "pre" / "checkpoint.bin"};
  cli::cmd_eval(with_model(root_ / "eval1"), opt);
  cli::cmd_eval(with_model(root_ / "eval2"), opt);
  const auto a = read_file(root_ / "eval1" / "report.json");
  EXPECT_EQ(a, read_file(root_ / "eval2" / "report.json"));
  const auto j = nlohmann::json::parse(a);
  ASSERT_EQ(j.at("regimes").size(), 2u);
  EXPECT_EQ(j.at("regimes")[0], "unsup");
  for (const auto& [regime, best] : j.at("3d_best_of_4_mm").at("rmse").items())
    EXPECT_LE(best.get<double>(), j.at("3d_normal_mm").at("rmse").at(regime).get<double>());
}

TEST_F(CliTest, PlotWritesCharts) {
  cli::EvalOptions e;
  e.data = root_ / "data";
  cli::cmd_eval(with_model(root_ / "eval_plot"), e);
  cli::PlotOptions opt;
  opt.logs = {root_ / "unsup" / "log.jsonl"};
  opt.reports = {root_ / "eval_plot" / "report.json"};
  cli::cmd_plot(common(root_ / "plots"), opt);
  EXPECT_TRUE(fs::exists(root_ / "plots" / "unsup_losses.png"));
  EXPECT_TRUE(fs::exists(root_ / "plots" / "supervision_iou.png"));
  EXPECT_TRUE(fs::exists(root_ / "plots" / "supervision_rmse.png"));
}

TEST(Plot, ChartDrawsSeriesInsidePlotArea) {
  plot::ChartSpec spec;
  spec.height = 200;
  spec.width = 300;
  const auto img = plot::line_chart({{"a", {0, 1, 2}, {1, 2, 3}}}, spec);
  ASSERT_EQ(img.height(), 200);
  ASSERT_EQ(img.width(), 300);
  int colored = 0;
  for (int y = 0; y < 200; ++y)
    for (int x = 0; x < 300; ++x) colored += img(y, x, 0) != img(y, x, 2);
  EXPECT_GT(colored, 100);
}

TEST(Plot, LogAxisSkipsNonPositiveValues) {
  plot::ChartSpec spec;
  spec.log_y = true;
  EXPECT_NO_THROW(plot::line_chart({{"a", {0, 1, 2}, {0.0, -1.0, 10.0}}}, spec));
}

TEST(Plot, TextWidthMatchesGlyphAdvance) {
  EXPECT_EQ(plot::text_width("ab", 2), 14);
  RgbImage img(10, 20, 3, 1.0);
  plot::draw_text(img, 0, 0, "1", 1, {0, 0, 0});
  EXPECT_EQ(img(0, 1, 0), 0.0);  // the 1 glyph's top row is 010
  EXPECT_EQ(img(0, 0, 0), 1.0);
}

}  // namespace
}  // namespace repcycle
