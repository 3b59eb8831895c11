#include "encoders.hpp"

#include <cmath>
#include <string>

#include "nn_ops.hpp"

namespace cct {

template <typename T>
TransformerEncoder<T>::TransformerEncoder(BackboneConfig config, std::uint64_t seed)
    : Encoder<T>(std::move(config)) {
  const auto& c = this->config_;
  c.validate();
  const int d = c.embed_dim;
  const int hidden = c.mlp_dim();
  auto& p = this->params_;

  patch_w_ = p.add("patch_embed.weight", c.patch_dim(), d);
  patch_b_ = p.add("patch_embed.bias", 1, d);
  pos_ = p.add("pos_embed", c.num_tokens(), d);
  for (int l = 0; l < c.depth; ++l) {
    const std::string pre = "blocks." + std::to_string(l) + ".";
    BlockParams b;
    b.ln1_g = p.add(pre + "norm1.weight", 1, d);
    b.ln1_b = p.add(pre + "norm1.bias", 1, d);
    // No qkv bias: a key bias shifts every score in a row equally and has no
    // effect after the softmax.
    b.qkv_w = p.add(pre + "attn.qkv.weight", d, 3 * d);
    b.proj_w = p.add(pre + "attn.proj.weight", d, d);
    b.proj_b = p.add(pre + "attn.proj.bias", 1, d);
    b.ln2_g = p.add(pre + "norm2.weight", 1, d);
    b.ln2_b = p.add(pre + "norm2.bias", 1, d);
    b.fc1_w = p.add(pre + "mlp.fc1.weight", d, hidden);
    b.fc1_b = p.add(pre + "mlp.fc1.bias", 1, hidden);
    b.fc2_w = p.add(pre + "mlp.fc2.weight", hidden, d);
    b.fc2_b = p.add(pre + "mlp.fc2.bias", 1, d);
    blocks_.push_back(b);
  }
  norm_g_ = p.add("norm.weight", 1, d);
  norm_b_ = p.add("norm.bias", 1, d);
  if (c.pooling == Pooling::sequence_pool) pool_w_ = p.add("attention_pool.weight", d, 1);
  head_w_ = p.add("head.weight", d, c.num_classes);
  head_b_ = p.add("head.bias", 1, c.num_classes);

  initialize(seed);
}

template <typename T>
void TransformerEncoder<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  auto& p = this->params_;
  auto trunc_normal = [&](std::size_t idx, double std) {
    auto& v = p[idx].value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v.data()[i] = static_cast<T>(std * rng.truncated_normal());
    }
  };
  for (auto& param : p) {
    param.value.setZero();
    param.grad.setZero();
  }
  trunc_normal(patch_w_, 0.02);
  trunc_normal(pos_, 0.02);
  for (const auto& b : blocks_) {
    p[b.ln1_g].value.setOnes();
    p[b.ln2_g].value.setOnes();
    trunc_normal(b.qkv_w, 0.02);
    trunc_normal(b.proj_w, 0.02);
    trunc_normal(b.fc1_w, 0.02);
    trunc_normal(b.fc2_w, 0.02);
  }
  p[norm_g_].value.setOnes();
  if (this->config_.pooling == Pooling::sequence_pool) trunc_normal(pool_w_, 0.02);
  trunc_normal(head_w_, 0.02);
}

template <typename T>
Mat<T> TransformerEncoder<T>::patchify(const Mat<T>& images) const {
  const auto& c = this->config_;
  const int ps = c.patch_size;
  const int gh = c.height / ps;
  const int gw = c.width / ps;
  const int tokens = gh * gw;
  Mat<T> out(images.rows() * tokens, c.patch_dim());
  for (Eigen::Index b = 0; b < images.rows(); ++b) {
    const T* img = images.row(b).data();
    for (int ty = 0; ty < gh; ++ty) {
      for (int tx = 0; tx < gw; ++tx) {
        T* dst = out.row(b * tokens + ty * gw + tx).data();
        int k = 0;
        for (int ch = 0; ch < c.channels; ++ch) {
          for (int dy = 0; dy < ps; ++dy) {
            const T* src = img + (ch * c.height + ty * ps + dy) * c.width + tx * ps;
            for (int dx = 0; dx < ps; ++dx) dst[k++] = src[dx];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void TransformerEncoder<T>::apply_dropout(Mat<T>& x, Mat<T>& mask, bool training, Rng* rng) {
  const double rate = this->config_.dropout;
  if (!training || rate <= 0.0) {
    mask.resize(0, 0);
    return;
  }
  if (!rng) fail(ErrorCode::invalid_input, "dropout requires a random stream in training mode");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng->uniform() < rate ? T(0) : keep_scale;
  }
  x.array() *= mask.array();
}

template <typename T>
EncoderOutput<T> TransformerEncoder<T>::forward(const Mat<T>& images, bool training, Rng* rng) {
  const auto& c = this->config_;
  auto& p = this->params_;
  if (images.cols() != c.input_dim()) {
    fail(ErrorCode::invalid_input, "batch has " + std::to_string(images.cols()) +
                                       " values per image, encoder expects " +
                                       std::to_string(c.input_dim()));
  }
  if (images.rows() == 0) fail(ErrorCode::invalid_input, "empty batch");

  const Eigen::Index batch = images.rows();
  const int tokens = c.num_tokens();
  const int d = c.embed_dim;
  const int heads = c.num_heads;
  const int dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  batch_ = batch;

  patches_ = patchify(images);
  Mat<T> x = nn::linear_forward(patches_, p[patch_w_].value, &p[patch_b_].value);
  for (Eigen::Index b = 0; b < batch; ++b) {
    x.middleRows(b * tokens, tokens) += p[pos_].value;
  }
  nn::require_finite(x, "patch_embed");

  caches_.resize(blocks_.size());
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const BlockParams& bp = blocks_[l];
    BlockCache& cache = caches_[l];

    cache.a = nn::layer_norm_forward(x, p[bp.ln1_g].value, p[bp.ln1_b].value, cache.ln1_xhat,
                                     cache.ln1_rstd);
    cache.qkv = nn::linear_forward<T>(cache.a, p[bp.qkv_w].value, nullptr);
    cache.attn.resize(batch * heads * tokens, tokens);
    cache.ctx.resize(batch * tokens, d);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        auto q = cache.qkv.block(b * tokens, h * dh, tokens, dh);
        auto k = cache.qkv.block(b * tokens, d + h * dh, tokens, dh);
        auto v = cache.qkv.block(b * tokens, 2 * d + h * dh, tokens, dh);
        Mat<T> s(tokens, tokens);
        s.noalias() = (q * k.transpose()) * scale;
        nn::softmax_rows(s);
        cache.attn.middleRows((b * heads + h) * tokens, tokens) = s;
        cache.ctx.block(b * tokens, h * dh, tokens, dh).noalias() = s * v;
      }
    }
    Mat<T> attn_out = nn::linear_forward(cache.ctx, p[bp.proj_w].value, &p[bp.proj_b].value);
    apply_dropout(attn_out, cache.drop1, training, rng);
    x += attn_out;

    cache.c = nn::layer_norm_forward(x, p[bp.ln2_g].value, p[bp.ln2_b].value, cache.ln2_xhat,
                                     cache.ln2_rstd);
    cache.u = nn::linear_forward(cache.c, p[bp.fc1_w].value, &p[bp.fc1_b].value);
    nn::gelu_forward(cache.u, cache.g, cache.dgelu);
    Mat<T> mlp_out = nn::linear_forward(cache.g, p[bp.fc2_w].value, &p[bp.fc2_b].value);
    apply_dropout(mlp_out, cache.drop2, training, rng);
    x += mlp_out;
    nn::require_finite(x, "blocks." + std::to_string(l));
  }

  final_ = nn::layer_norm_forward(x, p[norm_g_].value, p[norm_b_].value, final_xhat_, final_rstd_);

  EncoderOutput<T> out;
  out.features.resize(batch, d);
  if (c.pooling == Pooling::sequence_pool) {
    Mat<T> scores = final_ * p[pool_w_].value;  // (B*T) x 1
    pool_weights_.resize(batch, tokens);
    for (Eigen::Index b = 0; b < batch; ++b) {
      pool_weights_.row(b) = scores.middleRows(b * tokens, tokens).transpose();
    }
    nn::softmax_rows(pool_weights_);
    for (Eigen::Index b = 0; b < batch; ++b) {
      out.features.row(b).noalias() =
          pool_weights_.row(b) * final_.middleRows(b * tokens, tokens);
    }
  } else {
    const T inv = T(1) / static_cast<T>(tokens);
    for (Eigen::Index b = 0; b < batch; ++b) {
      out.features.row(b) = final_.middleRows(b * tokens, tokens).colwise().sum() * inv;
    }
  }
  nn::require_finite(out.features, "pool");
  features_ = out.features;

  out.logits = nn::linear_forward(out.features, p[head_w_].value, &p[head_b_].value);
  nn::require_finite(out.logits, "head");
  out.probabilities = out.logits;
  nn::softmax_rows(out.probabilities);
  return out;
}

template <typename T>
void TransformerEncoder<T>::backward(const Mat<T>& d_features, const Mat<T>& d_logits) {
  const auto& c = this->config_;
  auto& p = this->params_;
  const Eigen::Index batch = batch_;
  if (d_features.rows() != batch || d_logits.rows() != batch) {
    fail(ErrorCode::invalid_input, "backward gradient rows do not match the cached batch");
  }
  const int tokens = c.num_tokens();
  const int d = c.embed_dim;
  const int heads = c.num_heads;
  const int dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Mat<T> dh_total = d_features;
  dh_total.noalias() +=
      nn::linear_backward(d_logits, features_, p[head_w_].value, p[head_w_].grad, &p[head_b_].grad);

  Mat<T> d_final(batch * tokens, d);
  if (c.pooling == Pooling::sequence_pool) {
    Mat<T> d_scores(batch * tokens, 1);
    for (Eigen::Index b = 0; b < batch; ++b) {
      auto xf = final_.middleRows(b * tokens, tokens);
      RowVec<T> w = pool_weights_.row(b);
      // h = w^T xf ; dxf = w dh^T ; dw_t = dh . xf_t ; ds = w * (dw - w.dw)
      Vec<T> dw = xf * dh_total.row(b).transpose();
      const T wdw = w.dot(dw.transpose());
      Vec<T> ds = w.transpose().array() * (dw.array() - wdw);
      d_final.middleRows(b * tokens, tokens).noalias() = w.transpose() * dh_total.row(b);
      d_scores.middleRows(b * tokens, tokens) = ds;
    }
    p[pool_w_].grad.noalias() += final_.transpose() * d_scores;
    d_final.noalias() += d_scores * p[pool_w_].value.transpose();
  } else {
    const T inv = T(1) / static_cast<T>(tokens);
    for (Eigen::Index b = 0; b < batch; ++b) {
      d_final.middleRows(b * tokens, tokens).rowwise() = dh_total.row(b) * inv;
    }
  }

  Mat<T> dx = nn::layer_norm_backward(d_final, final_xhat_, final_rstd_, p[norm_g_].value,
                                      p[norm_g_].grad, p[norm_b_].grad);

  for (std::size_t li = blocks_.size(); li-- > 0;) {
    const BlockParams& bp = blocks_[li];
    const BlockCache& cache = caches_[li];

    // MLP branch
    Mat<T> d_mlp = dx;
    if (cache.drop2.size() > 0) d_mlp.array() *= cache.drop2.array();
    Mat<T> dg = nn::linear_backward(d_mlp, cache.g, p[bp.fc2_w].value, p[bp.fc2_w].grad,
                                    &p[bp.fc2_b].grad);
    Mat<T> du = dg.array() * cache.dgelu.array();
    Mat<T> dc = nn::linear_backward(du, cache.c, p[bp.fc1_w].value, p[bp.fc1_w].grad,
                                    &p[bp.fc1_b].grad);
    dx += nn::layer_norm_backward(dc, cache.ln2_xhat, cache.ln2_rstd, p[bp.ln2_g].value,
                                  p[bp.ln2_g].grad, p[bp.ln2_b].grad);

    // attention branch
    Mat<T> d_attn = dx;
    if (cache.drop1.size() > 0) d_attn.array() *= cache.drop1.array();
    Mat<T> d_ctx = nn::linear_backward(d_attn, cache.ctx, p[bp.proj_w].value, p[bp.proj_w].grad,
                                       &p[bp.proj_b].grad);
    Mat<T> d_qkv(batch * tokens, 3 * d);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        auto q = cache.qkv.block(b * tokens, h * dh, tokens, dh);
        auto k = cache.qkv.block(b * tokens, d + h * dh, tokens, dh);
        auto v = cache.qkv.block(b * tokens, 2 * d + h * dh, tokens, dh);
        auto a = cache.attn.middleRows((b * heads + h) * tokens, tokens);
        auto d_o = d_ctx.block(b * tokens, h * dh, tokens, dh);

        Mat<T> da(tokens, tokens);
        da.noalias() = d_o * v.transpose();
        d_qkv.block(b * tokens, 2 * d + h * dh, tokens, dh).noalias() = a.transpose() * d_o;
        Mat<T> ds(tokens, tokens);
        for (int r = 0; r < tokens; ++r) {
          const T dot = a.row(r).dot(da.row(r));
          ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
        }
        ds *= scale;
        d_qkv.block(b * tokens, h * dh, tokens, dh).noalias() = ds * k;
        d_qkv.block(b * tokens, d + h * dh, tokens, dh).noalias() = ds.transpose() * q;
      }
    }
    Mat<T> da_in = nn::linear_backward<T>(d_qkv, cache.a, p[bp.qkv_w].value, p[bp.qkv_w].grad,
                                          nullptr);
    dx += nn::layer_norm_backward(da_in, cache.ln1_xhat, cache.ln1_rstd, p[bp.ln1_g].value,
                                  p[bp.ln1_g].grad, p[bp.ln1_b].grad);
  }

  for (Eigen::Index b = 0; b < batch; ++b) {
    p[pos_].grad += dx.middleRows(b * tokens, tokens);
  }
  p[patch_w_].grad.noalias() += patches_.transpose() * dx;
  p[patch_b_].grad.row(0) += dx.colwise().sum();
}

template class TransformerEncoder<float>;
template class TransformerEncoder<double>;

} // namespace cct
