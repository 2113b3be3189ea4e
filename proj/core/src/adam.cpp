#include "repcycle/adam.hpp"

#include <cmath>

#include "repcycle/error.hpp"

namespace repcycle::nn {

Adam::Adam(std::vector<std::pair<std::string, torch::Tensor>> params, Options options)
    : params_(std::move(params)), options_(options) {
  for (const auto& [name, p] : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  // Reset to undefined so parameters outside this step's graph are skipped.
  for (auto& [name, p] : params_) p.mutable_grad() = torch::Tensor();
}

void Adam::step() {
  torch::NoGradGuard no_grad;
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const double step_size = options_.lr / bc1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    if (!p.grad().defined()) continue;
    const auto& g = p.grad();
    m_[i].mul_(options_.beta1).add_(g, 1.0 - options_.beta1);
    v_[i].mul_(options_.beta2).addcmul_(g, g, 1.0 - options_.beta2);
    const auto denom = (v_[i] / bc2).sqrt_().add_(options_.eps);
    p.addcdiv_(m_[i], denom, -step_size);
  }
}

std::map<std::string, torch::Tensor> Adam::state() const {
  std::map<std::string, torch::Tensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out[params_[i].first + ".m"] = m_[i];
    out[params_[i].first + ".v"] = v_[i];
  }
  return out;
}

void Adam::load_state(const std::map<std::string, torch::Tensor>& state, long long steps) {
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto [suffix, target] : {std::pair{".m", &m_[i]}, std::pair{".v", &v_[i]}}) {
      const auto it = state.find(params_[i].first + suffix);
      require(it != state.end(), ErrorCode::kIo, "optimizer state missing " + params_[i].first + suffix);
      require(it->second.sizes() == target->sizes(), ErrorCode::kShapeMismatch,
              "optimizer state shape mismatch for " + params_[i].first);
      target->copy_(it->second);
    }
  }
  steps_ = steps;
}

}  // namespace repcycle::nn
