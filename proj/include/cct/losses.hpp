#ifndef CCT_LOSSES_HPP_
#define CCT_LOSSES_HPP_

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cct/tensor.hpp"

namespace cct {

inline constexpr double kProbabilityFloor = 1e-12;

struct LossConfig {
  double temperature = 0.5;  // phi
  double lambda = 1e-4;      // weight of the contrastive term

  void validate() const;
};

/// Row i of first and row i of second are the two encoders' features of the
/// same input image.
template <typename T>
struct ContrastiveBatch {
  Mat<T> first;
  Mat<T> second;

  Eigen::Index size() const { return first.rows(); }
  void validate() const;
};

/// -log(max(p[i][y_i], 1e-12)) for every row.
template <typename T>
std::vector<double> cross_entropy_per_sample(const Mat<T>& probabilities,
                                             std::span<const int> labels);

/// Gradient of sum_{i in selected} CE_i with respect to the logits: rows in
/// the selection get p_i - onehot(y_i), all others zero.
template <typename T>
Mat<T> selected_cross_entropy_logit_grad(const Mat<T>& probabilities, std::span<const int> labels,
                                         std::span<const std::size_t> selected);

struct SelectedLoss {
  double value = 0.0;
  bool empty_selection = false;
};

/// Sum (not mean) of per-sample losses over the selected indices.
SelectedLoss selected_classification_loss(std::span<const double> per_sample_losses,
                                          std::span<const std::size_t> selected);

/// Returns the 2K x d sequence (first[0], second[0], first[1], second[1], ...).
template <typename T>
Mat<T> interleave(const Mat<T>& first, const Mat<T>& second);

template <typename T>
std::pair<Mat<T>, Mat<T>> deinterleave(const Mat<T>& sequence);

// Per-anchor losses. `i` is zero-based. The anchor itself is excluded from the
// denominator; the positive partner is kept in it.
template <typename T>
double contrastive_loss_view1(std::size_t i, const ContrastiveBatch<T>& batch, double temperature);
template <typename T>
double contrastive_loss_view2(std::size_t i, const ContrastiveBatch<T>& batch, double temperature);

/// Sum over all K samples of both per-view losses.
template <typename T>
double contrastive_loss_batch(const ContrastiveBatch<T>& batch, double temperature);

template <typename T>
struct ContrastiveGradient {
  double loss = 0.0;
  Mat<T> d_first;
  Mat<T> d_second;
};

template <typename T>
ContrastiveGradient<T> contrastive_loss_with_grad(const ContrastiveBatch<T>& batch,
                                                  double temperature);

/// L_v = selected CE of encoder v + lambda * contrastive loss.
double combined_loss(double selected_ce, double contrastive, double lambda);

} // namespace cct

#endif // CCT_LOSSES_HPP_
