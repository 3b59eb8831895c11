#include "cct/backbone.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cct/config_io.hpp"
#include "cct/error.hpp"
#include "encoders.hpp"

namespace cct {

BackboneKind parse_backbone_kind(const std::string& name) {
  if (name == "transformer") return BackboneKind::transformer;
  if (name == "mlp") return BackboneKind::mlp;
  fail(ErrorCode::invalid_spec, "unknown backbone '" + name + "'");
}

std::string to_string(BackboneKind kind) {
  return kind == BackboneKind::mlp ? "mlp" : "transformer";
}

Pooling parse_pooling(const std::string& name) {
  if (name == "sequence_pool") return Pooling::sequence_pool;
  if (name == "mean_pool") return Pooling::mean_pool;
  fail(ErrorCode::invalid_spec, "unknown pooling '" + name + "'");
}

std::string to_string(Pooling pooling) {
  return pooling == Pooling::mean_pool ? "mean_pool" : "sequence_pool";
}

int BackboneConfig::mlp_dim() const {
  return std::max(1, static_cast<int>(std::lround(mlp_ratio * embed_dim)));
}

void BackboneConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::invalid_spec, msg); };
  if (channels <= 0 || height <= 0 || width <= 0) bad("image shape must be positive");
  if (num_classes < 2) bad("num_classes must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (kind == BackboneKind::mlp) {
    if (mlp_hidden <= 0) bad("mlp_hidden must be positive");
    return;
  }
  if (patch_size <= 0) bad("patch_size must be positive");
  if (height % patch_size != 0 || width % patch_size != 0) {
    bad("image height and width must be divisible by patch_size");
  }
  if (embed_dim <= 0 || num_heads <= 0) bad("embed_dim and num_heads must be positive");
  if (embed_dim % num_heads != 0) bad("embed_dim must be divisible by num_heads");
  if (depth < 0) bad("depth must be non-negative");
  if (!(mlp_ratio > 0.0)) bad("mlp_ratio must be positive");
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)},
                     {"image_shape", {c.channels, c.height, c.width}},
                     {"patch_size", c.patch_size},
                     {"embed_dim", c.embed_dim},
                     {"depth", c.depth},
                     {"num_heads", c.num_heads},
                     {"mlp_ratio", c.mlp_ratio},
                     {"num_classes", c.num_classes},
                     {"pooling", to_string(c.pooling)},
                     {"dropout", c.dropout},
                     {"mlp_hidden", c.mlp_hidden}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
  BackboneConfig d;
  c.kind = parse_backbone_kind(j.value("kind", to_string(d.kind)));
  if (j.contains("image_shape")) {
    const auto& s = j.at("image_shape");
    if (!s.is_array() || s.size() != 3) fail(ErrorCode::invalid_spec, "image_shape needs 3 entries");
    c.channels = s[0].get<int>();
    c.height = s[1].get<int>();
    c.width = s[2].get<int>();
  }
  c.patch_size = j.value("patch_size", d.patch_size);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.depth = j.value("depth", d.depth);
  c.num_heads = j.value("num_heads", d.num_heads);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.pooling = parse_pooling(j.value("pooling", to_string(d.pooling)));
  c.dropout = j.value("dropout", d.dropout);
  c.mlp_hidden = j.value("mlp_hidden", d.mlp_hidden);
}

template <typename T>
std::unique_ptr<Encoder<T>> make_encoder(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.kind == BackboneKind::mlp) return std::make_unique<MlpEncoder<T>>(config, seed);
  return std::make_unique<TransformerEncoder<T>>(config, seed);
}

template <typename T>
EncoderPair<T> make_encoder_pair(const BackboneConfig& config, std::uint64_t seed1,
                                 std::uint64_t seed2) {
  if (seed1 == seed2) {
    fail(ErrorCode::invalid_spec, "the two encoders of a pair need distinct init seeds");
  }
  return {make_encoder<T>(config, seed1), make_encoder<T>(config, seed2)};
}

template std::unique_ptr<Encoder<float>> make_encoder(const BackboneConfig&, std::uint64_t);
template std::unique_ptr<Encoder<double>> make_encoder(const BackboneConfig&, std::uint64_t);
template EncoderPair<float> make_encoder_pair(const BackboneConfig&, std::uint64_t, std::uint64_t);
template EncoderPair<double> make_encoder_pair(const BackboneConfig&, std::uint64_t, std::uint64_t);

GradientCheckResult gradient_check(Encoder<double>& encoder, const MatrixD& images,
                                   const OutputLoss& loss, double epsilon,
                                   std::size_t samples_per_tensor, std::uint64_t seed) {
  auto& params = encoder.parameters();
  params.zero_grad();
  {
    EncoderOutput<double> out = encoder.forward(images, false);
    MatrixD d_features = MatrixD::Zero(out.features.rows(), out.features.cols());
    MatrixD d_logits = MatrixD::Zero(out.logits.rows(), out.logits.cols());
    loss(out, &d_features, &d_logits);
    encoder.backward(d_features, d_logits);
  }

  auto evaluate = [&] { return loss(encoder.forward(images, false), nullptr, nullptr); };

  GradientCheckResult result;
  Rng rng(seed);
  for (auto& param : params) {
    const auto count = static_cast<std::size_t>(param.value.size());
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(std::min(count, samples_per_tensor));
    for (std::size_t i : idx) {
      double& w = param.value.data()[i];
      const double saved = w;
      w = saved + epsilon;
      const double up = evaluate();
      w = saved - epsilon;
      const double down = evaluate();
      w = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      const double analytic = param.grad.data()[i];
      const double rel = std::abs(analytic - fd) / (std::abs(analytic) + std::abs(fd) + 1e-12);
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = param.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'C', 'C', 'T', 'C', 'K', 'P', 'T', '1'};

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) fail(ErrorCode::format_error, "checkpoint truncated in header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in native order and assumes little-endian");

nlohmann::json read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    fail(ErrorCode::format_error, path.string() + ": not a checkpoint (bad magic at offset 0)");
  }
  const std::uint64_t len = read_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorCode::format_error, path.string() + ": truncated header at offset 16");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format_error, path.string() + ": bad header json: " + e.what());
  }
}

} // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Encoder<T>& encoder) {
  nlohmann::json header;
  header["config"] = encoder.config();
  header["dtype"] = dtype_name<T>();
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : encoder.parameters()) {
    tensors.push_back({{"name", p.name},
                       {"shape", {p.value.rows(), p.value.cols()}},
                       {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size()) * sizeof(T);
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out.write(kMagic, 8);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : encoder.parameters()) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(T)));
  }
  if (!out) fail(ErrorCode::io_error, "short write to " + path.string());
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, Encoder<T>& encoder) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot read " + path.string());
  const nlohmann::json header = read_header(in, path);
  const std::streamoff data_start = in.tellg();

  if (header.at("config").get<BackboneConfig>() != encoder.config()) {
    fail(ErrorCode::invalid_input, path.string() + ": backbone config differs from the encoder");
  }
  if (header.at("dtype").get<std::string>() != dtype_name<T>()) {
    fail(ErrorCode::invalid_input, path.string() + ": stored dtype differs from the encoder");
  }
  const auto& tensors = header.at("tensors");
  auto& params = encoder.parameters();
  if (tensors.size() != params.size()) {
    fail(ErrorCode::format_error, path.string() + ": tensor count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    auto& p = params[i];
    if (t.at("name").get<std::string>() != p.name ||
        t.at("shape")[0].get<Eigen::Index>() != p.value.rows() ||
        t.at("shape")[1].get<Eigen::Index>() != p.value.cols()) {
      fail(ErrorCode::format_error, path.string() + ": tensor '" + p.name + "' mismatch");
    }
    const auto offset = t.at("offset").get<std::uint64_t>();
    in.seekg(data_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(T)));
    if (!in) {
      fail(ErrorCode::format_error, path.string() + ": truncated payload at byte offset " +
                                        std::to_string(data_start + static_cast<std::streamoff>(offset)));
    }
    p.grad.setZero();
  }
}

template void save_checkpoint(const std::filesystem::path&, const Encoder<float>&);
template void save_checkpoint(const std::filesystem::path&, const Encoder<double>&);
template void load_checkpoint(const std::filesystem::path&, Encoder<float>&);
template void load_checkpoint(const std::filesystem::path&, Encoder<double>&);

BackboneConfig read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot read " + path.string());
  return read_header(in, path).at("config").get<BackboneConfig>();
}

} // namespace cct
