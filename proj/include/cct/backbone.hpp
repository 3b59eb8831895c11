#ifndef CCT_BACKBONE_HPP_
#define CCT_BACKBONE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cct/random.hpp"
#include "cct/tensor.hpp"

namespace cct {

enum class BackboneKind { transformer, mlp };
enum class Pooling { sequence_pool, mean_pool };

BackboneKind parse_backbone_kind(const std::string& name);
std::string to_string(BackboneKind kind);
Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling pooling);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::transformer;
  int channels = 1;
  int height = 28;
  int width = 28;
  int patch_size = 4;
  int embed_dim = 128;
  int depth = 4;
  int num_heads = 4;
  double mlp_ratio = 2.0;
  int num_classes = 10;
  Pooling pooling = Pooling::sequence_pool;
  /// Applied to both residual branches while training; zero disables it.
  double dropout = 0.0;
  /// Width of both hidden layers of the MLP backbone.
  int mlp_hidden = 256;

  void validate() const;

  int input_dim() const { return channels * height * width; }
  int num_tokens() const { return (height / patch_size) * (width / patch_size); }
  int patch_dim() const { return channels * patch_size * patch_size; }
  int mlp_dim() const;
  int feature_dim() const { return kind == BackboneKind::mlp ? mlp_hidden : embed_dim; }

  bool operator==(const BackboneConfig&) const = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
};

template <typename T>
class ParameterSet {
public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    params_.push_back({std::move(name), Mat<T>::Zero(rows, cols), Mat<T>::Zero(rows, cols)});
    return params_.size() - 1;
  }

  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  const Parameter<T>* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

private:
  std::vector<Parameter<T>> params_;
};

template <typename T>
struct EncoderOutput {
  Mat<T> features;       // K x d, the pre-head representation
  Mat<T> logits;         // K x M
  Mat<T> probabilities;  // K x M, softmax(logits)
};

/// One encoder f(x; theta) followed by a linear classification head.
///
/// forward() caches the activations needed by backward(); backward() then
/// accumulates parameter gradients from dL/dfeatures and dL/dlogits of that
/// same forward pass. Instances share no mutable state, so two encoders may
/// run on different threads.
template <typename T>
class Encoder {
public:
  explicit Encoder(BackboneConfig config) : config_(std::move(config)) {}
  virtual ~Encoder() = default;
  Encoder(const Encoder&) = delete;
  Encoder& operator=(const Encoder&) = delete;

  const BackboneConfig& config() const { return config_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }

  /// images: K x input_dim, each row a CHW-flattened image. The rng is used
  /// for dropout masks and may be null when training is false.
  virtual EncoderOutput<T> forward(const Mat<T>& images, bool training,
                                   Rng* rng = nullptr) = 0;

  virtual void backward(const Mat<T>& d_features, const Mat<T>& d_logits) = 0;

  virtual void initialize(std::uint64_t seed) = 0;

protected:
  BackboneConfig config_;
  ParameterSet<T> params_;
};

template <typename T>
std::unique_ptr<Encoder<T>> make_encoder(const BackboneConfig& config, std::uint64_t seed);

template <typename T>
struct EncoderPair {
  std::unique_ptr<Encoder<T>> first;
  std::unique_ptr<Encoder<T>> second;
};

/// Same architecture, independent initialisations.
template <typename T>
EncoderPair<T> make_encoder_pair(const BackboneConfig& config, std::uint64_t seed1,
                                 std::uint64_t seed2);

/// Loss as a function of one forward pass. When the gradient pointers are
/// non-null the callee fills them with dL/dfeatures and dL/dlogits.
using OutputLoss = std::function<double(const EncoderOutput<double>&, MatrixD* d_features,
                                        MatrixD* d_logits)>;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares analytic parameter gradients against central differences on up to
/// samples_per_tensor entries of every parameter tensor. Runs in eval mode.
GradientCheckResult gradient_check(Encoder<double>& encoder, const MatrixD& images,
                                   const OutputLoss& loss, double epsilon = 1e-5,
                                   std::size_t samples_per_tensor = 6,
                                   std::uint64_t seed = 0);

// Checkpoint container: magic, a JSON header describing the backbone config
// and every tensor (name, shape, dtype, offset), then raw little-endian data.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Encoder<T>& encoder);

/// Restores parameters in place; the stored config must equal the encoder's.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, Encoder<T>& encoder);

BackboneConfig read_checkpoint_config(const std::filesystem::path& path);

} // namespace cct

#endif // CCT_BACKBONE_HPP_
