#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "repcycle/train_config.hpp"

namespace repcycle::cli {

// Flags every command accepts. An explicit --seed wins over the config file.
struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = ".";
  std::filesystem::path checkpoint;
};

struct DatagenOptions {
  bool test_split = false;  // held-out evaluation set instead of the training set
};

struct TrainOptions {
  std::optional<int> steps;                 // default: the stage's count from the config
  std::filesystem::path data;               // dataset directory; empty generates in memory
  std::string stage = "unsupervised";       // or "semi-supervised"
  std::optional<std::string> supervision;   // k, or "none"
};

struct EvalOptions {
  std::filesystem::path data;  // empty: generated test set
  std::string tag;             // report column; default checkpoint file stem
  std::vector<std::filesystem::path> compare;
  bool skip_3d = false;
};

struct InferOptions {
  std::filesystem::path image;
  bool resize = false;  // resample mismatched inputs instead of failing
  int panel_scale = 4;
};

struct TransferOptions {
  std::filesystem::path source;
  std::filesystem::path target_image;
  std::filesystem::path target_params;
  std::filesystem::path background;  // for parameter targets; default procedural
};

struct SampleOptions {
  int count = 8;
  bool fixed_pose = false;  // one body for all samples, only z varies
};

struct PlotOptions {
  std::vector<std::filesystem::path> logs;
  std::vector<std::filesystem::path> reports;
};

// Config file (or `fallback`, or defaults) with the shared flags applied.
TrainConfig resolve_config(const CommonOptions& common, const std::optional<TrainConfig>& fallback = std::nullopt);

void cmd_datagen(const CommonOptions& common, const DatagenOptions& options);
void cmd_pretrain_b2c(const CommonOptions& common, const TrainOptions& options);
void cmd_train(const CommonOptions& common, const TrainOptions& options);
void cmd_eval(const CommonOptions& common, const EvalOptions& options);
void cmd_infer(const CommonOptions& common, const InferOptions& options);
void cmd_transfer(const CommonOptions& common, const TransferOptions& options);
void cmd_sample(const CommonOptions& common, const SampleOptions& options);
void cmd_plot(const CommonOptions& common, const PlotOptions& options);

}  // namespace repcycle::cli
