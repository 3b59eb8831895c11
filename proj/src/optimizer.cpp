#include "cct/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "cct/error.hpp"

namespace cct {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  if (name == "sgd") return OptimizerKind::sgd;
  fail(ErrorCode::invalid_spec, "unknown optimizer '" + name + "'");
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
  case OptimizerKind::adam: return "adam";
  case OptimizerKind::rmsprop: return "rmsprop";
  case OptimizerKind::sgd: return "sgd";
  }
  return "adam";
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorCode::invalid_spec, "learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::invalid_spec, "optimizer betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail(ErrorCode::invalid_spec, "optimizer epsilon must be positive");
  if (!(weight_decay >= 0.0)) fail(ErrorCode::invalid_spec, "weight decay must be non-negative");
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config, const ParameterSet<T>& params,
                        std::size_t total_steps)
    : config_(config), total_steps_(total_steps) {
  config_.validate();
  for (const auto& p : params) {
    first_.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
    second_.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
  }
}

template <typename T>
double Optimizer<T>::current_learning_rate() const {
  if (!config_.cosine_decay || total_steps_ == 0) return config_.learning_rate;
  const double progress = std::min(1.0, static_cast<double>(step_) / static_cast<double>(total_steps_));
  return 0.5 * config_.learning_rate * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
void Optimizer<T>::step(ParameterSet<T>& params) {
  if (params.size() != first_.size()) {
    fail(ErrorCode::internal, "optimizer bound to a different parameter set");
  }
  const double lr = current_learning_rate();
  ++step_;
  const T lr_t = static_cast<T>(lr);
  const T eps = static_cast<T>(config_.epsilon);
  const T decay = static_cast<T>(1.0 - lr * config_.weight_decay);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (config_.weight_decay > 0.0) p.value *= decay;
    switch (config_.kind) {
    case OptimizerKind::adam: {
      const T b1 = static_cast<T>(config_.beta1);
      const T b2 = static_cast<T>(config_.beta2);
      const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, static_cast<double>(step_)));
      const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, static_cast<double>(step_)));
      first_[i] = b1 * first_[i] + (T(1) - b1) * p.grad;
      second_[i] = b2 * second_[i] + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          lr_t * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
      break;
    }
    case OptimizerKind::rmsprop: {
      const T rho = static_cast<T>(config_.beta2);
      second_[i] = rho * second_[i] + (T(1) - rho) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr_t * p.grad.array() / (second_[i].array().sqrt() + eps);
      break;
    }
    case OptimizerKind::sgd: {
      first_[i] = static_cast<T>(config_.momentum) * first_[i] + p.grad;
      p.value -= lr_t * first_[i];
      break;
    }
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

} // namespace cct
