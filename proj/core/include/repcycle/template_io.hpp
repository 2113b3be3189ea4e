#pragma once

#include <cstdint>
#include <filesystem>

#include "repcycle/body_model.hpp"

namespace repcycle::body {

// Template container: <stem>.json describes every array (name, shape, byte
// offset) stored in <stem>.bin as little-endian float64, row-major. Integer
// arrays (faces, parents, part_labels) are stored as exact float64 values.
//
//   {
//     "format": "repcycle-template", "version": 1,
//     "vertex_count": V, "face_count": F, "joint_count": J, "shape_count": S,
//     "joint_names": [...], "part_names": [...], "binary": "<stem>.bin",
//     "arrays": [{"name": "vertices", "shape": [V, 3], "offset": 0}, ...]
//   }
//
// Arrays: vertices (V,3), faces (F,3), parents (J), rest_joints (J,3),
// skin_weights (V,J), shape_basis (3V,S), part_labels (F),
// joint_regressor (J,V).
void save_template(const BodyTemplate& tmpl, const std::filesystem::path& json_path);
BodyTemplate load_template(const std::filesystem::path& json_path);

// FNV-1a over the template's numeric content; stored in checkpoints so a
// model is never silently paired with a different body.
std::uint64_t template_checksum(const BodyTemplate& tmpl);

}  // namespace repcycle::body
