#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "repcycle/body_model.hpp"
#include "repcycle/camera_render.hpp"

namespace repcycle::nn {

// Versioned single-file container:
//   8 bytes   magic "RCYCKPT\0"
//   u32 LE    format version (1)
//   u64 LE    header length L
//   L bytes   JSON header: meta object and a tensor table
//             [{name, dtype: "f32"|"i64", shape, offset, bytes}]
//   ...       tensor payload, little-endian, row-major, in table order
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string stage;
  long long step = 0;
  nlohmann::ordered_json config;  // echo of the effective TrainConfig
  std::string channel_order;
  std::uint64_t palette_checksum = 0;
  std::uint64_t template_checksum = 0;
  std::map<std::string, torch::Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws kChecksumMismatch if the checkpoint was trained with a different
// palette, template or domain-B channel layout.
void check_compatible(const Checkpoint& checkpoint, const render::Palette& palette, const body::BodyTemplate& tmpl);

// Parameters and buffers of a module under "<prefix>.<name>".
void export_module(const std::string& prefix, const torch::nn::Module& module, std::map<std::string, torch::Tensor>& out);
// Copies every tensor of the module from the map; missing or mis-shaped
// entries throw kShapeMismatch.
void import_module(const std::string& prefix, torch::nn::Module& module, const std::map<std::string, torch::Tensor>& in);

}  // namespace repcycle::nn
