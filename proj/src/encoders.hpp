#ifndef CCT_ENCODERS_HPP_
#define CCT_ENCODERS_HPP_

#include <vector>

#include "cct/backbone.hpp"
#include "cct/error.hpp"

namespace cct {

// Pre-norm transformer over non-overlapping patches with learned positional
// embeddings, followed by either attention-weighted sequence pooling or mean
// pooling.
template <typename T>
class TransformerEncoder final : public Encoder<T> {
public:
  TransformerEncoder(BackboneConfig config, std::uint64_t seed);

  EncoderOutput<T> forward(const Mat<T>& images, bool training, Rng* rng) override;
  void backward(const Mat<T>& d_features, const Mat<T>& d_logits) override;
  void initialize(std::uint64_t seed) override;

private:
  struct BlockParams {
    std::size_t ln1_g, ln1_b, qkv_w, proj_w, proj_b, ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };
  struct BlockCache {
    Mat<T> ln1_xhat, a, qkv, attn, ctx, drop1;
    Mat<T> ln2_xhat, c, u, g, dgelu, drop2;
    Vec<T> ln1_rstd, ln2_rstd;
  };

  Mat<T> patchify(const Mat<T>& images) const;
  void apply_dropout(Mat<T>& x, Mat<T>& mask, bool training, Rng* rng);

  std::size_t patch_w_ = 0, patch_b_ = 0, pos_ = 0;
  std::vector<BlockParams> blocks_;
  std::size_t norm_g_ = 0, norm_b_ = 0, pool_w_ = 0, head_w_ = 0, head_b_ = 0;

  Eigen::Index batch_ = 0;
  Mat<T> patches_;
  std::vector<BlockCache> caches_;
  Mat<T> final_, final_xhat_, pool_weights_, features_;
  Vec<T> final_rstd_;
};

// Two ReLU hidden layers; the second hidden activation is the feature vector.
template <typename T>
class MlpEncoder final : public Encoder<T> {
public:
  MlpEncoder(BackboneConfig config, std::uint64_t seed);

  EncoderOutput<T> forward(const Mat<T>& images, bool training, Rng* rng) override;
  void backward(const Mat<T>& d_features, const Mat<T>& d_logits) override;
  void initialize(std::uint64_t seed) override;

private:
  std::size_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0, head_w_ = 0, head_b_ = 0;
  Mat<T> input_, z1_, a1_, z2_, a2_;
};

} // namespace cct

#endif // CCT_ENCODERS_HPP_
