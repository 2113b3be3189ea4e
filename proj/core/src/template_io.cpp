#include "repcycle/template_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "repcycle/error.hpp"
#include "repcycle/hash.hpp"

namespace repcycle::body {
namespace {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "template container assumes a little-endian host");

struct ArrayView {
  std::string name;
  std::vector<Eigen::Index> shape;
  std::vector<double> values;
};

template <typename Derived>
ArrayView flatten(std::string name, const Eigen::MatrixBase<Derived>& m) {
  ArrayView a{std::move(name), {m.rows(), m.cols()}, {}};
  a.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.values.push_back(static_cast<double>(m(r, c)));
  return a;
}

ArrayView flatten(std::string name, const std::vector<int>& v) {
  ArrayView a{std::move(name), {static_cast<Eigen::Index>(v.size())}, {}};
  a.values.assign(v.begin(), v.end());
  return a;
}

std::vector<ArrayView> arrays_of(const BodyTemplate& t) {
  std::vector<ArrayView> out;
  out.push_back(flatten("vertices", t.vertices));
  out.push_back(flatten("faces", t.faces));
  out.push_back(flatten("parents", t.parents));
  out.push_back(flatten("rest_joints", t.rest_joints));
  out.push_back(flatten("skin_weights", t.skin_weights));
  out.push_back(flatten("shape_basis", t.shape_basis));
  out.push_back(flatten("part_labels", t.part_labels));
  out.push_back(flatten("joint_regressor", t.joint_regressor));
  return out;
}

template <typename Matrix>
Matrix unflatten(const ArrayView& a) {
  require(a.shape.size() == 2, ErrorCode::kIo, "template array " + a.name + " must be 2-D");
  Matrix m(a.shape[0], a.shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<typename Matrix::Scalar>(a.values[k++]);
  return m;
}

std::vector<int> unflatten_ints(const ArrayView& a) { return {a.values.begin(), a.values.end()}; }

}  // namespace

void save_template(const BodyTemplate& tmpl, const std::filesystem::path& json_path) {
  tmpl.validate();
  auto bin_path = json_path;
  bin_path.replace_extension(".bin");
  const auto arrays = arrays_of(tmpl);

  json header;
  header["format"] = "repcycle-template";
  header["version"] = 1;
  header["vertex_count"] = tmpl.vertex_count();
  header["face_count"] = tmpl.face_count();
  header["joint_count"] = tmpl.joint_count();
  header["shape_count"] = tmpl.shape_count();
  header["joint_names"] = tmpl.joint_names;
  std::vector<std::string> parts;
  for (int p = 1; p <= kPartCount; ++p) parts.emplace_back(part_name(p));
  header["part_names"] = parts;
  header["binary"] = bin_path.filename().string();
  header["dtype"] = "float64-le";
  header["checksum"] = template_checksum(tmpl);

  std::ofstream bin(bin_path, std::ios::binary);
  require(bin.good(), ErrorCode::kIo, "cannot write " + bin_path.string());
  std::size_t offset = 0;
  for (const auto& a : arrays) {
    header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    bin.write(reinterpret_cast<const char*>(a.values.data()), static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    offset += a.values.size() * sizeof(double);
  }
  std::ofstream js(json_path);
  require(js.good(), ErrorCode::kIo, "cannot write " + json_path.string());
  js << header.dump(2) << '\n';
}

BodyTemplate load_template(const std::filesystem::path& json_path) {
  std::ifstream js(json_path);
  require(js.good(), ErrorCode::kIo, "cannot read " + json_path.string());
  json header;
  try {
    js >> header;
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, "malformed template header " + json_path.string() + ": " + e.what());
  }
  require(header.value("format", "") == "repcycle-template", ErrorCode::kIo, "not a template container");
  const auto bin_path = json_path.parent_path() / header.at("binary").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  require(bin.good(), ErrorCode::kIo, "cannot read " + bin_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  std::map<std::string, ArrayView> arrays;
  for (const auto& entry : header.at("arrays")) {
    ArrayView a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    std::size_t count = 1;
    for (auto s : a.shape) count *= static_cast<std::size_t>(s);
    const auto offset = entry.at("offset").get<std::size_t>();
    require(offset + count * sizeof(double) <= bytes.size(), ErrorCode::kIo, "template array " + a.name + " truncated");
    a.values.resize(count);
    std::memcpy(a.values.data(), bytes.data() + offset, count * sizeof(double));
    arrays[a.name] = std::move(a);
  }
  auto get = [&](const std::string& name) -> const ArrayView& {
    auto it = arrays.find(name);
    require(it != arrays.end(), ErrorCode::kIo, "template missing array " + name);
    return it->second;
  };

  BodyTemplate t;
  t.vertices = unflatten<Points>(get("vertices"));
  t.faces = unflatten<Faces>(get("faces"));
  t.parents = unflatten_ints(get("parents"));
  t.rest_joints = unflatten<Points>(get("rest_joints"));
  t.skin_weights = unflatten<Eigen::MatrixXd>(get("skin_weights"));
  t.shape_basis = unflatten<Eigen::MatrixXd>(get("shape_basis"));
  t.part_labels = unflatten_ints(get("part_labels"));
  t.joint_regressor = unflatten<Eigen::MatrixXd>(get("joint_regressor"));
  t.joint_names = header.value("joint_names", std::vector<std::string>{});
  t.validate();
  return t;
}

std::uint64_t template_checksum(const BodyTemplate& tmpl) {
  Fnv1a hash;
  for (const auto& a : arrays_of(tmpl)) {
    hash.update(a.name);
    hash.update(std::as_bytes(std::span(a.values)));
  }
  for (const auto& n : tmpl.joint_names) hash.update(n);
  return hash.value();
}

}  // namespace repcycle::body
