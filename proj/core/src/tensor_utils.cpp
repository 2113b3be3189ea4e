#include "repcycle/tensor_utils.hpp"

#include "repcycle/error.hpp"

namespace repcycle::nn {

torch::Tensor image_to_tensor(const RgbImage& image) {
  require(image.channels() == 3, ErrorCode::kShapeMismatch, "expected a 3-channel image");
  const int h = image.height(), w = image.width();
  auto t = torch::empty({3, h, w}, torch::kFloat32);
  auto a = t.accessor<float, 3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < 3; ++k) a[k][y][x] = static_cast<float>(image(y, x, k));
  return t;
}

RgbImage tensor_to_image(const torch::Tensor& chw) {
  require(chw.dim() == 3 && chw.size(0) >= 3, ErrorCode::kShapeMismatch, "expected a C x H x W tensor");
  const auto t = chw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  auto a = t.accessor<float, 3>();
  const int h = static_cast<int>(t.size(1)), w = static_cast<int>(t.size(2));
  RgbImage img(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < 3; ++k) img(y, x, k) = a[k][y][x];
  return img;
}

torch::Tensor labels_to_tensor(const LabelMap& labels) {
  auto t = torch::empty({labels.height(), labels.width()}, torch::kInt64);
  auto a = t.accessor<std::int64_t, 2>();
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) a[y][x] = labels(y, x);
  return t;
}

LabelMap tensor_to_labels(const torch::Tensor& hw) {
  require(hw.dim() == 2, ErrorCode::kShapeMismatch, "expected an H x W label tensor");
  const auto t = hw.detach().to(torch::kCPU, torch::kInt64).contiguous();
  auto a = t.accessor<std::int64_t, 2>();
  LabelMap out(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)));
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(y, x) = static_cast<std::uint8_t>(a[y][x]);
  return out;
}

torch::Tensor domain_b_to_tensor(const render::DomainBImage& b) {
  auto rgb = image_to_tensor(b.rgb);
  auto mask = torch::empty({1, b.height(), b.width()}, torch::kFloat32);
  auto m = mask.accessor<float, 3>();
  for (int y = 0; y < b.height(); ++y)
    for (int x = 0; x < b.width(); ++x) m[0][y][x] = b.mask(y, x);
  return torch::cat({rgb, mask}, 0);
}

torch::Tensor palette_tensor(const render::Palette& palette) {
  auto t = torch::empty({body::kPartCount, 3}, torch::kFloat32);
  for (int l = 1; l <= body::kPartCount; ++l) {
    const auto c = palette.color(l);
    for (int k = 0; k < 3; ++k) t[l - 1][k] = static_cast<float>(c[k] / 255.0);
  }
  return t;
}

torch::Tensor normal_tensor(Rng& rng, at::IntArrayRef shape) {
  auto t = torch::empty(shape, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<float>(standard_normal(rng));
  return t;
}

double scalar(const torch::Tensor& t) { return t.detach().to(torch::kCPU, torch::kDouble).item<double>(); }

}  // namespace repcycle::nn
