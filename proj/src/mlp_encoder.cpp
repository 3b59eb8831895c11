#include "encoders.hpp"

#include <cmath>

#include "nn_ops.hpp"

namespace cct {

template <typename T>
MlpEncoder<T>::MlpEncoder(BackboneConfig config, std::uint64_t seed)
    : Encoder<T>(std::move(config)) {
  const auto& c = this->config_;
  c.validate();
  auto& p = this->params_;
  fc1_w_ = p.add("fc1.weight", c.input_dim(), c.mlp_hidden);
  fc1_b_ = p.add("fc1.bias", 1, c.mlp_hidden);
  fc2_w_ = p.add("fc2.weight", c.mlp_hidden, c.mlp_hidden);
  fc2_b_ = p.add("fc2.bias", 1, c.mlp_hidden);
  head_w_ = p.add("head.weight", c.mlp_hidden, c.num_classes);
  head_b_ = p.add("head.bias", 1, c.num_classes);
  initialize(seed);
}

template <typename T>
void MlpEncoder<T>::initialize(std::uint64_t seed) {
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike.
  Rng rng(seed);
  auto fill = [&](std::size_t w, std::size_t b) {
    auto& pw = this->params_[w];
    auto& pb = this->params_[b];
    const double bound = 1.0 / std::sqrt(static_cast<double>(pw.value.rows()));
    for (Eigen::Index i = 0; i < pw.value.size(); ++i) {
      pw.value.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    }
    for (Eigen::Index i = 0; i < pb.value.size(); ++i) {
      pb.value.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    }
    pw.grad.setZero();
    pb.grad.setZero();
  };
  fill(fc1_w_, fc1_b_);
  fill(fc2_w_, fc2_b_);
  fill(head_w_, head_b_);
}

template <typename T>
EncoderOutput<T> MlpEncoder<T>::forward(const Mat<T>& images, bool, Rng*) {
  const auto& c = this->config_;
  auto& p = this->params_;
  if (images.cols() != c.input_dim()) {
    fail(ErrorCode::invalid_input, "batch has " + std::to_string(images.cols()) +
                                       " values per image, encoder expects " +
                                       std::to_string(c.input_dim()));
  }
  if (images.rows() == 0) fail(ErrorCode::invalid_input, "empty batch");

  input_ = images;
  z1_ = nn::linear_forward(input_, p[fc1_w_].value, &p[fc1_b_].value);
  a1_ = z1_.cwiseMax(T(0));
  nn::require_finite(a1_, "fc1");
  z2_ = nn::linear_forward(a1_, p[fc2_w_].value, &p[fc2_b_].value);
  a2_ = z2_.cwiseMax(T(0));
  nn::require_finite(a2_, "fc2");

  EncoderOutput<T> out;
  out.features = a2_;
  out.logits = nn::linear_forward(a2_, p[head_w_].value, &p[head_b_].value);
  nn::require_finite(out.logits, "head");
  out.probabilities = out.logits;
  nn::softmax_rows(out.probabilities);
  return out;
}

template <typename T>
void MlpEncoder<T>::backward(const Mat<T>& d_features, const Mat<T>& d_logits) {
  auto& p = this->params_;
  if (d_features.rows() != a2_.rows() || d_logits.rows() != a2_.rows()) {
    fail(ErrorCode::invalid_input, "backward gradient rows do not match the cached batch");
  }
  Mat<T> da2 = d_features;
  da2 += nn::linear_backward(d_logits, a2_, p[head_w_].value, p[head_w_].grad, &p[head_b_].grad);
  Mat<T> dz2 = (z2_.array() > T(0)).select(da2, T(0));
  Mat<T> da1 = nn::linear_backward(dz2, a1_, p[fc2_w_].value, p[fc2_w_].grad, &p[fc2_b_].grad);
  Mat<T> dz1 = (z1_.array() > T(0)).select(da1, T(0));
  p[fc1_w_].grad.noalias() += input_.transpose() * dz1;
  p[fc1_b_].grad.row(0) += dz1.colwise().sum();
}

template class MlpEncoder<float>;
template class MlpEncoder<double>;

} // namespace cct
