#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "varinf/mlp.hpp"

namespace varinf {

enum class OptimizerKind { kSgd, kMomentum, kAdam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order update rules:
//   sgd:      w -= lr * g
//   momentum: v = mu * v + g;  w -= lr * v
//   adam:     bias-corrected first/second moments (Kingma & Ba)
// Each optimizer owns its state; one instance per network.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::size_t param_count);

  void step(ParamVector& params, std::span<const double> grads);
  void step(std::span<double> params, std::span<const double> grads);

  const OptimizerConfig& config() const { return config_; }
  std::size_t steps() const { return steps_; }
  std::size_t size() const { return first_.size(); }

 private:
  OptimizerConfig config_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::size_t steps_ = 0;
};

}  // namespace varinf
