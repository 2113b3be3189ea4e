#include "repcycle/fitter.hpp"

#include "repcycle/error.hpp"
#include "repcycle/metrics.hpp"
#include "repcycle/rotation.hpp"
#include "repcycle/tensor_utils.hpp"
#include "repcycle/translator_nets.hpp"

namespace repcycle::nn {

namespace tnn = torch::nn;
using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

void FitterConfig::validate() const {
  require(height > 0 && width > 0 && height % 16 == 0 && width % 16 == 0, ErrorCode::kInvalidConfiguration,
          "fitter resolution must be a positive multiple of 16");
  require(base_channels > 0 && hidden > 0 && res_blocks >= 0, ErrorCode::kInvalidConfiguration,
          "fitter widths must be positive");
  require(joint_count >= 1 && shape_count >= 0, ErrorCode::kInvalidConfiguration, "fitter output sizes invalid");
}

namespace {

class OrthonormalizeFunction : public torch::autograd::Function<OrthonormalizeFunction> {
 public:
  static torch::Tensor forward(AutogradContext* ctx, const torch::Tensor& m) {
    require(torch::isfinite(m).all().item<bool>(), ErrorCode::kInvalidInput, "orthonormalize: non-finite input");
    const auto shape = m.sizes().vec();
    const auto flat = m.reshape({-1, 3, 3});
    auto [u, s, vh] = torch::linalg_svd(flat, false);
    require((s.select(1, 1) > 1e-12 * s.select(1, 0)).all().item<bool>() && (s.select(1, 0) > 0).all().item<bool>(),
            ErrorCode::kDegenerateProjection, "orthonormalize: rank < 2 block");
    const auto d = torch::sign(torch::linalg_det(torch::matmul(u, vh)));
    auto signs = torch::ones_like(s);
    signs.select(1, 2).copy_(d);
    const auto r = torch::matmul(u * signs.unsqueeze(1), vh);
    ctx->save_for_backward({r, vh, s * signs});
    return r.reshape(shape);
  }

  static tensor_list backward(AutogradContext* ctx, tensor_list grads) {
    const auto saved = ctx->get_saved_variables();
    const auto& r = saved[0];
    const auto v = saved[1].transpose(1, 2);
    const auto sp = saved[2];  // signed singular values
    const auto g = grads[0].reshape({-1, 3, 3});
    const auto b = torch::matmul(torch::matmul(v.transpose(1, 2), r.transpose(1, 2)), torch::matmul(g, v));
    auto k = sp.unsqueeze(2) + sp.unsqueeze(1);
    const auto floor = 1e-12 * sp.abs().amax(1, true).unsqueeze(2);
    k = torch::where(k.abs() < floor, torch::where(k < 0, -floor, floor).expand_as(k), k);
    const auto c = (b - b.transpose(1, 2)) / k;
    const auto grad = torch::matmul(torch::matmul(r, v), torch::matmul(c, v.transpose(1, 2)));
    return {grad.reshape(grads[0].sizes())};
  }
};

tnn::Conv2dOptions conv(int in, int out, int k, int stride, int pad) {
  return tnn::Conv2dOptions(in, out, k).stride(stride).padding(pad);
}

}  // namespace

torch::Tensor orthonormalize_tensor(const torch::Tensor& m) {
  require(m.dim() >= 2 && m.size(-1) == 3 && m.size(-2) == 3, ErrorCode::kShapeMismatch,
          "orthonormalize expects (..., 3, 3)");
  return OrthonormalizeFunction::apply(m);
}

FitterNetImpl::FitterNetImpl(const FitterConfig& config) : config_(config) {
  config_.validate();
  const int c = config_.base_channels;
  tnn::Sequential f(tnn::ReflectionPad2d(3), tnn::Conv2d(conv(3, c, 7, 1, 0)),
                    tnn::InstanceNorm2d(tnn::InstanceNorm2dOptions(c).affine(true)), tnn::ReLU(),
                    tnn::Conv2d(conv(c, 2 * c, 3, 2, 1)),
                    tnn::InstanceNorm2d(tnn::InstanceNorm2dOptions(2 * c).affine(true)), tnn::ReLU(),
                    tnn::Conv2d(conv(2 * c, 4 * c, 3, 2, 1)),
                    tnn::InstanceNorm2d(tnn::InstanceNorm2dOptions(4 * c).affine(true)), tnn::ReLU());
  for (int i = 0; i < config_.res_blocks; ++i) f->push_back(ResidualBlock(4 * c));
  f->push_back(tnn::Conv2d(conv(4 * c, 8 * c, 3, 2, 1)));
  f->push_back(tnn::ReLU());
  f->push_back(tnn::Conv2d(conv(8 * c, 8 * c, 3, 2, 1)));
  f->push_back(tnn::ReLU());
  features_ = register_module("features", f);
  const int flat = 8 * c * (config_.height / 16) * (config_.width / 16);
  auto out = tnn::Linear(config_.hidden, config_.raw_dim());
  {
    torch::NoGradGuard no_grad;
    out->weight.mul_(0.1);
    out->bias.zero_();
  }
  head_ = register_module("head", tnn::Sequential(tnn::Flatten(), tnn::Linear(flat, config_.hidden), tnn::ReLU(), out));
}

torch::Tensor FitterNetImpl::forward(const torch::Tensor& image) {
  require(image.dim() == 4 && image.size(1) == 3 && image.size(2) == config_.height && image.size(3) == config_.width,
          ErrorCode::kShapeMismatch, "fitter expects N x 3 x H x W input at the configured resolution");
  return head_->forward(features_->forward(image));
}

FitOutput decode_raw(const torch::Tensor& raw, const FitterConfig& config) {
  require(raw.dim() == 2 && raw.size(1) == config.raw_dim(), ErrorCode::kShapeMismatch, "raw fitter output has wrong size");
  const int j = config.joint_count;
  const auto n = raw.size(0);
  const auto eye = torch::eye(3, raw.options()).view({1, 1, 3, 3});
  const auto m = raw.slice(1, 0, 9 * j).view({n, j, 3, 3}) + eye;
  const auto offset = torch::tensor({config.translation_offset.x(), config.translation_offset.y(),
                                     config.translation_offset.z()},
                                    raw.options());
  FitOutput out;
  out.rotations = orthonormalize_tensor(m);
  out.translation = raw.slice(1, 9 * j, 9 * j + 3) + offset;
  out.beta = raw.slice(1, 9 * j + 3, 9 * j + 3 + config.shape_count);
  out.raw = raw;
  return out;
}

FitOutput fit(FitterNet& net, const torch::Tensor& neutral_image) {
  return decode_raw(net->forward(neutral_image), net->config());
}

FitOutput fit_target(const std::vector<data::BodyParams>& bodies) {
  require(!bodies.empty(), ErrorCode::kNoData, "no bodies to stack");
  const int n = static_cast<int>(bodies.size());
  const int j = bodies.front().pose.joint_count();
  const int s = bodies.front().beta.size();
  FitOutput out;
  out.rotations = torch::empty({n, j, 3, 3}, torch::kFloat32);
  out.translation = torch::empty({n, 3}, torch::kFloat32);
  out.beta = torch::empty({n, s}, torch::kFloat32);
  auto r = out.rotations.accessor<float, 4>();
  auto t = out.translation.accessor<float, 2>();
  auto b = out.beta.accessor<float, 2>();
  for (int i = 0; i < n; ++i) {
    const auto& body = bodies[i];
    require(body.pose.joint_count() == j && body.beta.size() == s, ErrorCode::kShapeMismatch,
            "bodies differ in joint or shape count");
    for (int q = 0; q < j; ++q) {
      const Eigen::Matrix3d rot = rodrigues(body.pose.axis_angles.row(q).transpose());
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c) r[i][q][a][c] = static_cast<float>(rot(a, c));
    }
    for (int k = 0; k < 3; ++k) t[i][k] = static_cast<float>(body.pose.translation[k]);
    for (int k = 0; k < s; ++k) b[i][k] = static_cast<float>(body.beta.beta[k]);
  }
  return out;
}

data::BodyParams to_body_params(const FitOutput& out, int index) {
  const auto r = out.rotations[index].detach().to(torch::kCPU, torch::kDouble).contiguous();
  const auto t = out.translation[index].detach().to(torch::kCPU, torch::kDouble).contiguous();
  const auto b = out.beta[index].detach().to(torch::kCPU, torch::kDouble).contiguous();
  const int j = static_cast<int>(r.size(0));
  data::BodyParams body{body::PoseParams::identity(j), body::ShapeParams::zeros(static_cast<int>(b.size(0)))};
  const auto ra = r.accessor<double, 3>();
  for (int q = 0; q < j; ++q) {
    Eigen::Matrix3d m;
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 3; ++c) m(a, c) = ra[q][a][c];
    body.pose.axis_angles.row(q) = rotation_to_axis_angle(m).transpose();
  }
  for (int k = 0; k < 3; ++k) body.pose.translation[k] = t[k].item<double>();
  for (int k = 0; k < b.size(0); ++k) body.beta.beta[k] = b[k].item<double>();
  return body;
}

torch::Tensor parameter_loss(const FitOutput& pred, const FitOutput& target, const ParameterLossWeights& w) {
  require(pred.rotations.sizes() == target.rotations.sizes() && pred.beta.sizes() == target.beta.sizes(),
          ErrorCode::kShapeMismatch, "prediction and target differ in shape");
  const auto rot = (pred.rotations - target.rotations).pow(2).sum({1, 2, 3});
  const auto trans = (pred.translation - target.translation).pow(2).sum(1);
  const auto beta = (pred.beta - target.beta).pow(2).sum(1);
  return (w.rotation * rot + w.translation * trans + w.beta * beta).mean();
}

torch::Tensor render_neutral(const body::BodyTemplate& tmpl, const render::Camera& camera,
                             const render::Palette& palette, const data::BodyParams& body) {
  const auto labels = render::rasterize(camera, body::pose_body(tmpl, body.beta, body.pose)).first;
  const auto b = render::composite(labels, palette, metrics::neutral_background(camera.height, camera.width));
  return image_to_tensor(b.rgb);
}

PretrainSet pretrain_pairs(const body::BodyTemplate& tmpl, const data::PosePrior& prior, const render::Camera& camera,
                           const render::Palette& palette, int n, Rng& rng, double beta_stddev) {
  require(n >= 1, ErrorCode::kInvalidConfiguration, "pair count must be positive");
  PretrainSet set;
  std::vector<torch::Tensor> images;
  while (static_cast<int>(set.bodies.size()) < n) {
    data::BodyParams body{data::sample_pose(prior, rng), data::sample_shape(tmpl.shape_count(), beta_stddev, rng)};
    const auto labels = render::rasterize(camera, body::pose_body(tmpl, body.beta, body.pose)).first;
    bool any = false;
    for (auto v : labels.data()) any = any || v > 0;
    if (!any) continue;
    const auto b = render::composite(labels, palette, metrics::neutral_background(camera.height, camera.width));
    images.push_back(image_to_tensor(b.rgb));
    set.bodies.push_back(std::move(body));
  }
  set.inputs = torch::stack(images);
  set.targets = fit_target(set.bodies);
  return set;
}

}  // namespace repcycle::nn
