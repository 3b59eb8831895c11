#ifndef CCT_SELECTION_HPP_
#define CCT_SELECTION_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace cct {

struct ScheduleConfig {
  double tau = 0.0;        // assumed-known noise rate
  int warmup_epochs = 10;  // T_k
  /// When false the kept fraction is 1 - tau from epoch 0.
  bool ramp = true;

  void validate() const;
  double floor_fraction() const { return 1.0 - tau; }
};

struct SelectionResult {
  std::vector<std::size_t> first;   // updates encoder 1, chosen by encoder 2's losses
  std::vector<std::size_t> second;  // updates encoder 2, chosen by encoder 1's losses
  std::size_t remember = 0;
};

/// ceil(K * (1 - tau * min(epoch / T_k, 1))), clamped to [1, K].
std::size_t remember_count(int epoch, std::size_t batch_size, const ScheduleConfig& schedule);

/// Indices of the R smallest losses in ascending index order; ties go to the
/// smaller index.
std::vector<std::size_t> select_small_loss(std::span<const double> losses, std::size_t remember);

SelectionResult cross_exchange(std::span<const double> losses1, std::span<const double> losses2,
                               std::size_t remember);

/// Fraction of selected indices whose label was not corrupted.
double selection_precision(std::span<const std::size_t> selected,
                           const std::vector<bool>& corruption_mask);

} // namespace cct

#endif // CCT_SELECTION_HPP_
