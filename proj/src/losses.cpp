#include "cct/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cct/error.hpp"
#include "cct/log.hpp"

namespace cct {

void LossConfig::validate() const {
  if (!(temperature > 0.0)) fail(ErrorCode::invalid_spec, "temperature must be positive");
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_spec, "lambda must be non-negative");
}

template <typename T>
void ContrastiveBatch<T>::validate() const {
  if (first.rows() != second.rows() || first.cols() != second.cols()) {
    fail(ErrorCode::invalid_input, "contrastive views must have identical shapes");
  }
  if (first.rows() < 1) fail(ErrorCode::invalid_input, "contrastive batch is empty");
}

namespace {

void check_label(int y, Eigen::Index classes, std::size_t row) {
  if (y < 0 || y >= classes) {
    fail(ErrorCode::invalid_input, "label " + std::to_string(y) + " at row " +
                                       std::to_string(row) + " outside [0, " +
                                       std::to_string(classes) + ")");
  }
}

// Unit-normalised interleaved sequence in double precision.
template <typename T>
MatrixD normalized_sequence(const ContrastiveBatch<T>& batch, Vec<double>* norms = nullptr) {
  batch.validate();
  MatrixD seq = interleave(batch.first, batch.second).template cast<double>();
  Vec<double> n(seq.rows());
  for (Eigen::Index j = 0; j < seq.rows(); ++j) {
    n(j) = seq.row(j).norm();
    if (!(n(j) > 0.0) || !std::isfinite(n(j))) {
      fail(ErrorCode::numeric_failure,
           "feature vector " + std::to_string(j) + " of the interleaved batch has zero or "
           "non-finite norm; cosine similarity undefined");
    }
    seq.row(j) /= n(j);
  }
  if (norms) *norms = std::move(n);
  return seq;
}

// Loss of one anchor row of the interleaved sequence against its partner.
double anchor_loss(const MatrixD& unit, Eigen::Index anchor, Eigen::Index positive,
                   double temperature) {
  Vec<double> sims = unit * unit.row(anchor).transpose() / temperature;
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < sims.size(); ++j) {
    if (j != anchor) mx = std::max(mx, sims(j));
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < sims.size(); ++j) {
    if (j != anchor) acc += std::exp(sims(j) - mx);
  }
  return -(sims(positive) - mx) + std::log(acc);
}

} // namespace

template <typename T>
std::vector<double> cross_entropy_per_sample(const Mat<T>& probabilities,
                                             std::span<const int> labels) {
  if (static_cast<std::size_t>(probabilities.rows()) != labels.size()) {
    fail(ErrorCode::invalid_input, "label count does not match probability rows");
  }
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i], probabilities.cols(), i);
    const double p = static_cast<double>(probabilities(static_cast<Eigen::Index>(i), labels[i]));
    out[i] = -std::log(std::max(p, kProbabilityFloor));
  }
  return out;
}

template <typename T>
Mat<T> selected_cross_entropy_logit_grad(const Mat<T>& probabilities, std::span<const int> labels,
                                         std::span<const std::size_t> selected) {
  if (static_cast<std::size_t>(probabilities.rows()) != labels.size()) {
    fail(ErrorCode::invalid_input, "label count does not match probability rows");
  }
  Mat<T> grad = Mat<T>::Zero(probabilities.rows(), probabilities.cols());
  for (std::size_t i : selected) {
    if (i >= labels.size()) fail(ErrorCode::invalid_input, "selected index out of range");
    const auto r = static_cast<Eigen::Index>(i);
    check_label(labels[i], probabilities.cols(), i);
    grad.row(r) = probabilities.row(r);
    grad(r, labels[i]) -= T(1);
  }
  return grad;
}

SelectedLoss selected_classification_loss(std::span<const double> per_sample_losses,
                                          std::span<const std::size_t> selected) {
  SelectedLoss out;
  if (selected.empty()) {
    out.empty_selection = true;
    log(LogLevel::debug, "selected classification loss over an empty set");
    return out;
  }
  std::vector<std::size_t> sorted(selected.begin(), selected.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail(ErrorCode::invalid_input, "selection contains duplicate indices");
  }
  for (std::size_t i : selected) {
    if (i >= per_sample_losses.size()) fail(ErrorCode::invalid_input, "selected index out of range");
    out.value += per_sample_losses[i];
  }
  return out;
}

template <typename T>
Mat<T> interleave(const Mat<T>& first, const Mat<T>& second) {
  if (first.rows() != second.rows() || first.cols() != second.cols()) {
    fail(ErrorCode::invalid_input, "cannot interleave views of different shapes");
  }
  Mat<T> seq(2 * first.rows(), first.cols());
  for (Eigen::Index k = 0; k < first.rows(); ++k) {
    seq.row(2 * k) = first.row(k);
    seq.row(2 * k + 1) = second.row(k);
  }
  return seq;
}

template <typename T>
std::pair<Mat<T>, Mat<T>> deinterleave(const Mat<T>& sequence) {
  if (sequence.rows() % 2 != 0) fail(ErrorCode::invalid_input, "sequence length must be even");
  const Eigen::Index k = sequence.rows() / 2;
  std::pair<Mat<T>, Mat<T>> out{Mat<T>(k, sequence.cols()), Mat<T>(k, sequence.cols())};
  for (Eigen::Index i = 0; i < k; ++i) {
    out.first.row(i) = sequence.row(2 * i);
    out.second.row(i) = sequence.row(2 * i + 1);
  }
  return out;
}

template <typename T>
double contrastive_loss_view1(std::size_t i, const ContrastiveBatch<T>& batch, double temperature) {
  if (i >= static_cast<std::size_t>(batch.size())) fail(ErrorCode::invalid_input, "anchor index out of range");
  const MatrixD unit = normalized_sequence(batch);
  const auto a = static_cast<Eigen::Index>(2 * i);
  return anchor_loss(unit, a, a + 1, temperature);
}

template <typename T>
double contrastive_loss_view2(std::size_t i, const ContrastiveBatch<T>& batch, double temperature) {
  if (i >= static_cast<std::size_t>(batch.size())) fail(ErrorCode::invalid_input, "anchor index out of range");
  const MatrixD unit = normalized_sequence(batch);
  const auto a = static_cast<Eigen::Index>(2 * i + 1);
  return anchor_loss(unit, a, a - 1, temperature);
}

template <typename T>
double contrastive_loss_batch(const ContrastiveBatch<T>& batch, double temperature) {
  return contrastive_loss_with_grad(batch, temperature).loss;
}

template <typename T>
ContrastiveGradient<T> contrastive_loss_with_grad(const ContrastiveBatch<T>& batch,
                                                  double temperature) {
  if (!(temperature > 0.0)) fail(ErrorCode::invalid_spec, "temperature must be positive");
  Vec<double> norms;
  const MatrixD unit = normalized_sequence(batch, &norms);
  const Eigen::Index n = unit.rows();

  MatrixD logits = unit * unit.transpose() / temperature;
  // g(a, j) = dL/dlogits(a, j): softmax over j != a minus the positive indicator.
  MatrixD g = MatrixD::Zero(n, n);
  double loss = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const Eigen::Index pos = (a % 2 == 0) ? a + 1 : a - 1;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != a) mx = std::max(mx, logits(a, j));
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == a) continue;
      g(a, j) = std::exp(logits(a, j) - mx);
      acc += g(a, j);
    }
    loss += -(logits(a, pos) - mx) + std::log(acc);
    g.row(a) /= acc;
    g(a, pos) -= 1.0;
  }

  // logits = U U^T / phi  =>  dU = (G + G^T) U / phi
  MatrixD d_unit = (g + g.transpose()) * unit / temperature;
  // u = c / |c|  =>  dc = (du - u (u . du)) / |c|
  MatrixD d_seq(n, unit.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const double proj = unit.row(j).dot(d_unit.row(j));
    d_seq.row(j) = (d_unit.row(j) - proj * unit.row(j)) / norms(j);
  }
  auto [d1, d2] = deinterleave(d_seq);
  return {loss, d1.template cast<T>(), d2.template cast<T>()};
}

double combined_loss(double selected_ce, double contrastive, double lambda) {
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_spec, "lambda must be non-negative");
  return selected_ce + lambda * contrastive;
}

#define CCT_INSTANTIATE_LOSSES(T)                                                              \
  template struct ContrastiveBatch<T>;                                                         \
  template std::vector<double> cross_entropy_per_sample(const Mat<T>&, std::span<const int>);  \
  template Mat<T> selected_cross_entropy_logit_grad(const Mat<T>&, std::span<const int>,       \
                                                    std::span<const std::size_t>);             \
  template Mat<T> interleave(const Mat<T>&, const Mat<T>&);                                    \
  template std::pair<Mat<T>, Mat<T>> deinterleave(const Mat<T>&);                              \
  template double contrastive_loss_view1(std::size_t, const ContrastiveBatch<T>&, double);     \
  template double contrastive_loss_view2(std::size_t, const ContrastiveBatch<T>&, double);     \
  template double contrastive_loss_batch(const ContrastiveBatch<T>&, double);                  \
  template ContrastiveGradient<T> contrastive_loss_with_grad(const ContrastiveBatch<T>&, double);

CCT_INSTANTIATE_LOSSES(float)
CCT_INSTANTIATE_LOSSES(double)

#undef CCT_INSTANTIATE_LOSSES

} // namespace cct
