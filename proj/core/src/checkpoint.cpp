#include "repcycle/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "repcycle/error.hpp"
#include "repcycle/template_io.hpp"
#include "repcycle/translator_nets.hpp"

namespace repcycle::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'C', 'Y', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), ErrorCode::kIo, "truncated checkpoint");
  return v;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t unhex(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::ordered_json header;
  header["format"] = "repcycle-checkpoint";
  header["stage"] = ck.stage;
  header["step"] = ck.step;
  header["channel_order"] = ck.channel_order;
  header["palette_checksum"] = hex(ck.palette_checksum);
  header["template_checksum"] = hex(ck.template_checksum);
  header["config"] = ck.config;
  auto table = nlohmann::ordered_json::array();
  std::vector<torch::Tensor> payload;
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ck.tensors) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    require(c.scalar_type() == torch::kFloat32 || c.scalar_type() == torch::kInt64, ErrorCode::kInvalidInput,
            "checkpoint tensor '" + name + "' must be float32 or int64");
    const std::uint64_t bytes = c.numel() * c.element_size();
    table.push_back({{"name", name},
                     {"dtype", c.scalar_type() == torch::kFloat32 ? "f32" : "i64"},
                     {"shape", c.sizes().vec()},
                     {"offset", offset},
                     {"bytes", bytes}});
    offset += bytes;
    payload.push_back(c);
  }
  header["tensors"] = table;
  const std::string text = header.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& c : payload) {
      out.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(c.numel() * c.element_size()));
    }
    require(out.good(), ErrorCode::kIo, "failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot read checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorCode::kIo,
          path.string() + " is not a repcycle checkpoint");
  const auto version = get<std::uint32_t>(in);
  require(version == kCheckpointVersion, ErrorCode::kIo, "unsupported checkpoint version " + std::to_string(version));
  const auto length = get<std::uint64_t>(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  require(in.good(), ErrorCode::kIo, "truncated checkpoint header");

  Checkpoint ck;
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(text);
    ck.stage = header.at("stage").get<std::string>();
    ck.step = header.at("step").get<long long>();
    ck.channel_order = header.at("channel_order").get<std::string>();
    ck.palette_checksum = unhex(header.at("palette_checksum").get<std::string>());
    ck.template_checksum = unhex(header.at("template_checksum").get<std::string>());
    ck.config = header.at("config");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, "bad checkpoint header: " + std::string(e.what()));
  }
  const auto base = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto dtype = entry.at("dtype").get<std::string>() == "f32" ? torch::kFloat32 : torch::kInt64;
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    const auto bytes = entry.at("bytes").get<std::uint64_t>();
    require(bytes == static_cast<std::uint64_t>(t.numel() * t.element_size()), ErrorCode::kIo,
            "tensor '" + name + "' size disagrees with its shape");
    in.seekg(base + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    require(in.good(), ErrorCode::kIo, "truncated tensor '" + name + "'");
    ck.tensors.emplace(name, t);
  }
  return ck;
}

void check_compatible(const Checkpoint& ck, const render::Palette& palette, const body::BodyTemplate& tmpl) {
  require(ck.palette_checksum == palette.checksum(), ErrorCode::kChecksumMismatch,
          "checkpoint was trained with a different palette");
  require(ck.template_checksum == body::template_checksum(tmpl), ErrorCode::kChecksumMismatch,
          "checkpoint was trained with a different body template");
  require(ck.channel_order == kDomainBChannelOrder, ErrorCode::kChecksumMismatch,
          "checkpoint uses domain-B channel order '" + ck.channel_order + "'");
}

void export_module(const std::string& prefix, const torch::nn::Module& module,
                   std::map<std::string, torch::Tensor>& out) {
  for (const auto& p : module.named_parameters()) out[prefix + "." + p.key()] = p.value();
  for (const auto& b : module.named_buffers()) out[prefix + "." + b.key()] = b.value();
}

void import_module(const std::string& prefix, torch::nn::Module& module,
                   const std::map<std::string, torch::Tensor>& in) {
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& key, torch::Tensor& dst) {
    const auto it = in.find(prefix + "." + key);
    require(it != in.end(), ErrorCode::kShapeMismatch, "checkpoint lacks '" + prefix + "." + key + "'");
    require(it->second.sizes() == dst.sizes(), ErrorCode::kShapeMismatch,
            "checkpoint tensor '" + prefix + "." + key + "' has the wrong shape");
    dst.copy_(it->second);
  };
  for (auto& p : module.named_parameters()) copy(p.key(), p.value());
  for (auto& b : module.named_buffers()) copy(b.key(), b.value());
}

}  // namespace repcycle::nn
