#include "varinf/optim.hpp"

#include <cmath>

#include "varinf/errors.hpp"

namespace varinf {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kMomentum:
      return "sgd-momentum";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "adam";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "sgd-momentum" || name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerConfig config, std::size_t param_count)
    : config_(config), first_(param_count, 0.0), second_(param_count, 0.0) {
  if (!(config_.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
}

void Optimizer::step(ParamVector& params, std::span<const double> grads) {
  step(std::span<double>(params.values), grads);
}

void Optimizer::step(std::span<double> w, std::span<const double> g) {
  if (w.size() != first_.size() || g.size() != first_.size()) {
    throw ContractError("optimizer: expected " + std::to_string(first_.size()) +
                        " parameters, got " + std::to_string(w.size()) + " params / " +
                        std::to_string(g.size()) + " grads");
  }
  ++steps_;
  const double lr = config_.learning_rate;
  switch (config_.kind) {
    case OptimizerKind::kSgd:
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
      break;
    case OptimizerKind::kMomentum:
      for (std::size_t i = 0; i < w.size(); ++i) {
        first_[i] = config_.momentum * first_[i] + g[i];
        w[i] -= lr * first_[i];
      }
      break;
    case OptimizerKind::kAdam: {
      const double b1 = config_.beta1, b2 = config_.beta2;
      const double t = static_cast<double>(steps_);
      const double c1 = 1.0 - std::pow(b1, t);
      const double c2 = 1.0 - std::pow(b2, t);
      for (std::size_t i = 0; i < w.size(); ++i) {
        first_[i] = b1 * first_[i] + (1.0 - b1) * g[i];
        second_[i] = b2 * second_[i] + (1.0 - b2) * g[i] * g[i];
        const double m_hat = first_[i] / c1;
        const double v_hat = second_[i] / c2;
        w[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
      break;
    }
  }
}

}  // namespace varinf
