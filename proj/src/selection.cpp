#include "cct/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cct/error.hpp"

namespace cct {

void ScheduleConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) fail(ErrorCode::invalid_spec, "schedule tau must lie in [0, 1]");
  if (warmup_epochs < 1) fail(ErrorCode::invalid_spec, "warmup_epochs must be positive");
}

std::size_t remember_count(int epoch, std::size_t batch_size, const ScheduleConfig& schedule) {
  if (epoch < 0) fail(ErrorCode::invalid_input, "epoch must be non-negative");
  if (batch_size == 0) return 0;
  const double progress =
      schedule.ramp ? std::min(static_cast<double>(epoch) / schedule.warmup_epochs, 1.0) : 1.0;
  const double kept = static_cast<double>(batch_size) * (1.0 - schedule.tau * progress);
  // Guard against kept = 64.00000000001 style rounding before the ceiling.
  const double r = std::ceil(kept - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, batch_size);
}

std::vector<std::size_t> select_small_loss(std::span<const double> losses, std::size_t remember) {
  if (remember < 1 || remember > losses.size()) {
    fail(ErrorCode::invalid_input, "remember count " + std::to_string(remember) +
                                       " outside [1, " + std::to_string(losses.size()) + "]");
  }
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) {
      fail(ErrorCode::numeric_failure, "non-finite loss at batch index " + std::to_string(i));
    }
  }
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    return losses[a] < losses[b] || (losses[a] == losses[b] && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(remember) - 1,
                   order.end(), less);
  order.resize(remember);
  std::sort(order.begin(), order.end());
  return order;
}

SelectionResult cross_exchange(std::span<const double> losses1, std::span<const double> losses2,
                               std::size_t remember) {
  if (losses1.size() != losses2.size()) {
    fail(ErrorCode::invalid_input, "loss vectors of the two encoders differ in length");
  }
  SelectionResult out;
  out.remember = remember;
  out.first = select_small_loss(losses2, remember);
  out.second = select_small_loss(losses1, remember);
  return out;
}

double selection_precision(std::span<const std::size_t> selected,
                           const std::vector<bool>& corruption_mask) {
  if (selected.empty()) fail(ErrorCode::undefined_metric, "selection precision of an empty set");
  std::size_t clean = 0;
  for (std::size_t i : selected) {
    if (i >= corruption_mask.size()) fail(ErrorCode::invalid_input, "selected index out of range");
    clean += corruption_mask[i] ? 0 : 1;
  }
  return static_cast<double>(clean) / static_cast<double>(selected.size());
}

} // namespace cct
