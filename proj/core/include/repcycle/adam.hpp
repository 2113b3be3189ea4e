#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace repcycle::nn {

// Adam whose entire state (moments and step count) is exposed as named
// tensors so checkpoints resume bit-exactly.
class Adam {
 public:
  struct Options {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<std::pair<std::string, torch::Tensor>> params, Options options);

  // Clears gradients to undefined.
  void zero_grad();
  // Parameters without a gradient are skipped (their moments stay put).
  void step();
  long long steps() const { return steps_; }
  const Options& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

  // Keys "<param>.m" and "<param>.v".
  std::map<std::string, torch::Tensor> state() const;
  void load_state(const std::map<std::string, torch::Tensor>& state, long long steps);

 private:
  std::vector<std::pair<std::string, torch::Tensor>> params_;
  std::vector<torch::Tensor> m_;
  std::vector<torch::Tensor> v_;
  Options options_;
  long long steps_ = 0;
};

}  // namespace repcycle::nn
