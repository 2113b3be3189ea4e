#include "repcycle/dataset_io.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "repcycle/error.hpp"
#include "repcycle/png_io.hpp"

namespace repcycle::data {

namespace {

using nlohmann::json;

std::string numbered(const char* prefix, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05d.%s", prefix, index, ext);
  return buf;
}

json camera_json(const render::Camera& c) {
  return {{"focal", c.focal},
          {"cx", c.principal_point.x()},
          {"cy", c.principal_point.y()},
          {"height", c.height},
          {"width", c.width},
          {"near", c.near}};
}

render::Camera camera_from(const json& j) {
  render::Camera c;
  c.focal = j.at("focal").get<double>();
  c.principal_point = {j.at("cx").get<double>(), j.at("cy").get<double>()};
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.near = j.value("near", 1e-3);
  c.validate();
  return c;
}

const char* side_name(Side s) {
  switch (s) {
    case Side::kA: return "A";
    case Side::kB: return "B";
    default: return "unassigned";
  }
}

Side side_from(const std::string& s) {
  if (s == "A") return Side::kA;
  if (s == "B") return Side::kB;
  return Side::kUnassigned;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

}  // namespace

void write_body_params(const std::filesystem::path& path, const BodyParams& b, const render::Camera& camera) {
  json theta = json::array();
  for (int j = 0; j < b.pose.joint_count(); ++j) {
    theta.push_back({b.pose.axis_angles(j, 0), b.pose.axis_angles(j, 1), b.pose.axis_angles(j, 2)});
  }
  json params = {{"theta", theta},
                 {"beta", std::vector<double>(b.beta.beta.data(), b.beta.beta.data() + b.beta.size())},
                 {"translation", {b.pose.translation.x(), b.pose.translation.y(), b.pose.translation.z()}},
                 {"camera", camera_json(camera)}};
  write_json(path, params);
}

BodyParams read_body_params(const std::filesystem::path& path) {
  const json p = read_json(path);
  try {
    const auto& theta = p.at("theta");
    BodyParams b{body::PoseParams::identity(static_cast<int>(theta.size())), {}};
    for (std::size_t j = 0; j < theta.size(); ++j)
      for (int k = 0; k < 3; ++k) b.pose.axis_angles(static_cast<Eigen::Index>(j), k) = theta[j][k].get<double>();
    const auto beta = p.at("beta").get<std::vector<double>>();
    b.beta.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    const auto t = p.at("translation").get<std::vector<double>>();
    require(t.size() == 3, ErrorCode::kIo, "translation must have three entries");
    b.pose.translation = {t[0], t[1], t[2]};
    return b;
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, "malformed body parameters in " + path.string() + ": " + e.what());
  }
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  const auto eval = GroundTruthAccess::evaluation();
  json records = json::array();
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    const int idx = static_cast<int>(i);
    json rec = {{"index", idx},
                {"sequence_id", r.sequence_id()},
                {"side", side_name(r.side())},
                {"supervised", r.supervised()},
                {"image", numbered("img", idx, "png")},
                {"labels", numbered("lab", idx, "png")}};
    io::write_png(dir / numbered("img", idx, "png"), r.image());
    io::write_png_gray(dir / numbered("lab", idx, "png"), r.gt_labels(eval));
    if (r.has_gt_body()) {
      write_body_params(dir / numbered("params", idx, "json"), r.gt_body(eval), dataset.camera);
      rec["params"] = numbered("params", idx, "json");
    }
    records.push_back(std::move(rec));
  }
  const auto& c = dataset.config;
  json manifest = {{"format", "repcycle-dataset"},
                   {"version", 1},
                   {"camera", camera_json(dataset.camera)},
                   {"config",
                    {{"samples", c.samples},
                     {"sequences", c.sequences},
                     {"beta_stddev", c.beta_stddev},
                     {"motion_amount", c.motion_amount},
                     {"seed", c.seed}}},
                   {"splits", {{"a_sequences", dataset.a_sequences}, {"b_sequences", dataset.b_sequences}}},
                   {"records", records}};
  write_json(dir / "manifest.json", manifest);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  require(manifest.value("format", "") == "repcycle-dataset", ErrorCode::kIo, "not a dataset manifest");
  Dataset out;
  try {
    out.camera = camera_from(manifest.at("camera"));
    const auto& c = manifest.at("config");
    out.config.samples = c.at("samples").get<int>();
    out.config.sequences = c.at("sequences").get<int>();
    out.config.beta_stddev = c.at("beta_stddev").get<double>();
    out.config.motion_amount = c.at("motion_amount").get<double>();
    out.config.seed = c.at("seed").get<std::uint64_t>();
    out.a_sequences = manifest.at("splits").at("a_sequences").get<std::vector<int>>();
    out.b_sequences = manifest.at("splits").at("b_sequences").get<std::vector<int>>();
    for (const auto& rec : manifest.at("records")) {
      RgbImage image = io::read_png_rgb(dir / rec.at("image").get<std::string>());
      LabelMap labels = io::read_png_gray(dir / rec.at("labels").get<std::string>());
      std::optional<BodyParams> body;
      if (rec.contains("params")) {
        body = read_body_params(dir / rec.at("params").get<std::string>());
      }
      SampleRecord r(std::move(image), std::move(labels), std::move(body), rec.at("sequence_id").get<int>());
      r.set_side(side_from(rec.value("side", "unassigned")));
      r.set_supervised(rec.value("supervised", false));
      out.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, std::string("malformed dataset manifest: ") + e.what());
  }
  return out;
}

}  // namespace repcycle::data
