#ifndef CCT_NN_OPS_HPP_
#define CCT_NN_OPS_HPP_

// Row-wise building blocks shared by the encoders. Each forward has a matching
// backward that accumulates parameter gradients and returns the input gradient.

#include <cmath>
#include <string>

#include "cct/error.hpp"
#include "cct/tensor.hpp"

#include <unsupported/Eigen/SpecialFunctions>

namespace cct::nn {

template <typename T>
inline constexpr T layer_norm_eps = T(1e-5);

template <typename T>
void softmax_rows(Mat<T>& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

template <typename T>
Mat<T> layer_norm_forward(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta,
                          Mat<T>& xhat, Vec<T>& rstd) {
  const Eigen::Index n = x.rows();
  const T inv_d = T(1) / static_cast<T>(x.cols());
  xhat.resize(x.rows(), x.cols());
  rstd.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T mu = x.row(r).sum() * inv_d;
    auto centered = x.row(r).array() - mu;
    const T var = centered.square().sum() * inv_d;
    rstd(r) = T(1) / std::sqrt(var + layer_norm_eps<T>);
    xhat.row(r) = centered * rstd(r);
  }
  Mat<T> y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const Vec<T>& rstd,
                           const Mat<T>& gamma, Mat<T>& d_gamma, Mat<T>& d_beta) {
  d_gamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  d_beta.row(0) += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * gamma.row(0).array();
  const T inv_d = T(1) / static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T mean_d = dxhat.row(r).sum() * inv_d;
    const T mean_dx = dxhat.row(r).dot(xhat.row(r)) * inv_d;
    dx.row(r) = rstd(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
  }
  return dx;
}

/// y = x W + b
template <typename T>
Mat<T> linear_forward(const Mat<T>& x, const Mat<T>& w, const Mat<T>* b) {
  Mat<T> y(x.rows(), w.cols());
  y.noalias() = x * w;
  if (b) y.rowwise() += b->row(0);
  return y;
}

template <typename T>
Mat<T> linear_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& w, Mat<T>& d_w,
                       Mat<T>* d_b) {
  d_w.noalias() += x.transpose() * dy;
  if (d_b) d_b->row(0) += dy.colwise().sum();
  Mat<T> dx(dy.rows(), w.rows());
  dx.noalias() = dy * w.transpose();
  return dx;
}

/// Exact (erf-based) GELU. Also stores its derivative for the backward pass.
template <typename T>
void gelu_forward(const Mat<T>& u, Mat<T>& out, Mat<T>& derivative) {
  const auto cdf = (T(0.5) * (T(1) + (u.array() * T(0.70710678118654752440)).erf())).eval();
  const auto pdf = (T(0.39894228040143267794) * (T(-0.5) * u.array().square()).exp()).eval();
  out = u.array() * cdf;
  derivative = cdf + u.array() * pdf;
}

template <typename T>
void require_finite(const Mat<T>& x, const std::string& layer) {
  if (!x.allFinite()) {
    fail(ErrorCode::numeric_failure, "non-finite activation in layer '" + layer + "'");
  }
}

} // namespace cct::nn

#endif // CCT_NN_OPS_HPP_
