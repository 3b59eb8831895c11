#ifndef CCT_OPTIMIZER_HPP_
#define CCT_OPTIMIZER_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "cct/backbone.hpp"

namespace cct {

enum class OptimizerKind { adam, rmsprop, sgd };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 5e-4;
  double beta1 = 0.9;         // adam
  double beta2 = 0.999;       // adam; squared-gradient decay for rmsprop
  double epsilon = 1e-8;
  double momentum = 0.9;      // sgd
  double weight_decay = 0.0;  // decoupled
  bool cosine_decay = true;

  void validate() const;
};

// Holds per-parameter state for one ParameterSet. The learning rate follows
// 0.5 * lr * (1 + cos(pi * step / total_steps)) when cosine decay is on.
template <typename T>
class Optimizer {
public:
  Optimizer(OptimizerConfig config, const ParameterSet<T>& params, std::size_t total_steps);

  void step(ParameterSet<T>& params);
  double current_learning_rate() const;
  std::size_t steps_taken() const { return step_; }

private:
  OptimizerConfig config_;
  std::size_t total_steps_;
  std::size_t step_ = 0;
  std::vector<Mat<T>> first_;
  std::vector<Mat<T>> second_;
};

} // namespace cct

#endif // CCT_OPTIMIZER_HPP_
