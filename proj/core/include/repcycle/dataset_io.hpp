#pragma once

#include <filesystem>
#include <vector>

#include "repcycle/camera_render.hpp"
#include "repcycle/datagen.hpp"

namespace repcycle::data {

// On-disk dataset:
//   manifest.json   records (index, sequence_id, side, supervised, files),
//                   splits (a_sequences, b_sequences), camera, config echo
//   img_NNNNN.png   domain-A image, 8-bit RGB
//   lab_NNNNN.png   ground-truth part labels, 8-bit gray
//   params_NNNNN.json  theta (J x 3), beta, translation, camera
struct Dataset {
  std::vector<SampleRecord> records;
  render::Camera camera;
  DatasetConfig config;
  std::vector<int> a_sequences;
  std::vector<int> b_sequences;
};

// One params_*.json file: theta, beta, translation and the camera.
void write_body_params(const std::filesystem::path& path, const BodyParams& body, const render::Camera& camera);
BodyParams read_body_params(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace repcycle::data
