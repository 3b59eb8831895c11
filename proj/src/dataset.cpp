#include "cct/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cct/error.hpp"
#include "cct/random.hpp"

namespace cct {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 1 + 3072;

class Fnv1a {
public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001B3ULL;
    }
  }
  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << hash_;
    return os.str();
  }

private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) {
    fail(ErrorCode::format_error,
         path.string() + ": truncated header at byte offset " + std::to_string(offset));
  }
  return (static_cast<std::uint32_t>(buf[offset]) << 24) |
         (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
         static_cast<std::uint32_t>(buf[offset + 3]);
}

void expect_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    std::ostringstream os;
    os << path.string() << ": bad magic number 0x" << std::hex << std::setw(8)
       << std::setfill('0') << got << " at byte offset 0 (expected 0x" << std::setw(8) << want
       << ")";
    fail(ErrorCode::format_error, os.str());
  }
}

// Scales bytes to [0,1] into rows of `out`.
MatrixF bytes_to_images(const std::vector<std::uint8_t>& pixels, std::size_t count,
                        std::size_t dim) {
  MatrixF out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < count * dim; ++i) {
    out.data()[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  return out;
}

void take_first(MatrixF& images, std::vector<int>& labels, std::size_t limit) {
  if (limit == 0 || limit >= labels.size()) return;
  images.conservativeResize(static_cast<Eigen::Index>(limit), images.cols());
  labels.resize(limit);
}

// Standardise every channel with statistics of the training split.
void standardize(LabeledDataset& ds) {
  const int hw = ds.shape.height * ds.shape.width;
  ds.channel_mean.assign(ds.shape.channels, 0.0);
  ds.channel_std.assign(ds.shape.channels, 1.0);
  for (int c = 0; c < ds.shape.channels; ++c) {
    auto block = ds.train_images.middleCols(c * hw, hw);
    const double n = static_cast<double>(block.size());
    const double mean = block.template cast<double>().sum() / n;
    const double var = (block.template cast<double>().array() - mean).square().sum() / n;
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    ds.channel_mean[c] = mean;
    ds.channel_std[c] = sd;
    auto apply = [&](MatrixF& m) {
      auto b = m.middleCols(c * hw, hw);
      b = ((b.template cast<double>().array() - mean) / sd).template cast<float>().matrix();
    };
    apply(ds.train_images);
    apply(ds.test_images);
  }
}

void finish(LabeledDataset& ds, const DatasetSource& source) {
  take_first(ds.train_images, ds.train_labels, source.train_limit);
  take_first(ds.test_images, ds.test_labels, source.test_limit);
  standardize(ds);
  ds.noisy_labels = ds.train_labels;
  ds.corruption_mask.assign(ds.train_labels.size(), false);
}

LabeledDataset load_mnist(const DatasetSource& source) {
  const auto& dir = source.path;
  LabeledDataset ds;
  ds.name = "mnist";
  ds.num_classes = 10;
  ds.shape = {1, 28, 28};
  Fnv1a hash;

  auto load_split = [&](const char* images_name, const char* labels_name, MatrixF& images,
                        std::vector<int>& labels) {
    RawImages raw = read_idx_images(dir / images_name);
    std::vector<std::uint8_t> lab = read_idx_labels(dir / labels_name);
    if (raw.rows != 28 || raw.cols != 28) {
      fail(ErrorCode::format_error, (dir / images_name).string() + ": expected 28x28 images");
    }
    if (lab.size() != raw.count) {
      fail(ErrorCode::format_error, "image and label counts differ in " + dir.string());
    }
    hash.update(raw.pixels.data(), raw.pixels.size());
    hash.update(lab.data(), lab.size());
    images = bytes_to_images(raw.pixels, raw.count, 784);
    labels.resize(lab.size());
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (lab[i] > 9) {
        fail(ErrorCode::format_error, (dir / labels_name).string() + ": label " +
                                          std::to_string(lab[i]) + " at byte offset " +
                                          std::to_string(8 + i));
      }
      labels[i] = lab[i];
    }
  };
  load_split("train-images-idx3-ubyte", "train-labels-idx1-ubyte", ds.train_images, ds.train_labels);
  load_split("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", ds.test_images, ds.test_labels);
  ds.checksum = hash.hex();
  finish(ds, source);
  return ds;
}

LabeledDataset load_cifar10(const DatasetSource& source) {
  LabeledDataset ds;
  ds.name = "cifar10";
  ds.num_classes = 10;
  ds.shape = {3, 32, 32};
  Fnv1a hash;

  auto append = [&](const std::filesystem::path& file, std::vector<std::uint8_t>& pixels,
                    std::vector<int>& labels) {
    RawCifar raw = read_cifar_batch(file);
    hash.update(raw.labels.data(), raw.labels.size());
    hash.update(raw.pixels.data(), raw.pixels.size());
    pixels.insert(pixels.end(), raw.pixels.begin(), raw.pixels.end());
    labels.insert(labels.end(), raw.labels.begin(), raw.labels.end());
  };
  std::vector<std::uint8_t> train_pixels, test_pixels;
  for (int b = 1; b <= 5; ++b) {
    append(source.path / ("data_batch_" + std::to_string(b) + ".bin"), train_pixels,
           ds.train_labels);
  }
  append(source.path / "test_batch.bin", test_pixels, ds.test_labels);
  ds.train_images = bytes_to_images(train_pixels, ds.train_labels.size(), 3072);
  ds.test_images = bytes_to_images(test_pixels, ds.test_labels.size(), 3072);
  ds.checksum = hash.hex();
  finish(ds, source);
  return ds;
}

LabeledDataset make_blobs(const DatasetSource& s) {
  if (s.num_classes < 2) fail(ErrorCode::invalid_spec, "synthetic blobs need at least 2 classes");
  if (s.samples_per_class < 1 || s.test_samples_per_class < 1 || s.image_size < 1) {
    fail(ErrorCode::invalid_spec, "synthetic blob sizes must be positive");
  }
  if (!(s.feature_noise >= 0.0)) fail(ErrorCode::invalid_spec, "feature noise must be >= 0");

  LabeledDataset ds;
  ds.name = "synthetic";
  ds.num_classes = s.num_classes;
  ds.shape = {1, s.image_size, s.image_size};
  const int dim = ds.shape.size();

  Rng rng(s.seed);
  MatrixF prototypes(s.num_classes, dim);
  for (Eigen::Index i = 0; i < prototypes.size(); ++i) {
    prototypes.data()[i] = static_cast<float>(rng.uniform());
  }
  // Samples are interleaved by class so any prefix stays balanced.
  auto generate = [&](int per_class, MatrixF& images, std::vector<int>& labels) {
    const int n = per_class * s.num_classes;
    images.resize(n, dim);
    labels.resize(n);
    for (int i = 0; i < n; ++i) {
      const int y = i % s.num_classes;
      labels[i] = y;
      for (int j = 0; j < dim; ++j) {
        images(i, j) = prototypes(y, j) + static_cast<float>(s.feature_noise * rng.normal());
      }
    }
  };
  generate(s.samples_per_class, ds.train_images, ds.train_labels);
  generate(s.test_samples_per_class, ds.test_images, ds.test_labels);

  Fnv1a hash;
  hash.update(ds.train_images.data(), sizeof(float) * ds.train_images.size());
  hash.update(ds.train_labels.data(), sizeof(int) * ds.train_labels.size());
  hash.update(ds.test_images.data(), sizeof(float) * ds.test_images.size());
  hash.update(ds.test_labels.data(), sizeof(int) * ds.test_labels.size());
  ds.checksum = hash.hex();
  finish(ds, s);
  return ds;
}

} // namespace

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "mnist" || name == "mnist_idx") return DatasetKind::mnist_idx;
  if (name == "cifar10" || name == "cifar10_binary") return DatasetKind::cifar10_binary;
  if (name == "synthetic" || name == "synthetic_blobs") return DatasetKind::synthetic_blobs;
  fail(ErrorCode::invalid_spec, "unknown dataset '" + name + "'");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
  case DatasetKind::mnist_idx: return "mnist";
  case DatasetKind::cifar10_binary: return "cifar10";
  case DatasetKind::synthetic_blobs: return "synthetic";
  }
  return "synthetic";
}

RawImages read_idx_images(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  expect_magic(read_be32(buf, 0, path), kIdxImagesMagic, path);
  RawImages raw;
  raw.count = read_be32(buf, 4, path);
  raw.rows = read_be32(buf, 8, path);
  raw.cols = read_be32(buf, 12, path);
  const std::size_t need = static_cast<std::size_t>(raw.count) * raw.rows * raw.cols;
  if (buf.size() < 16 + need) {
    fail(ErrorCode::format_error, path.string() + ": truncated pixel data at byte offset " +
                                      std::to_string(buf.size()) + " (expected " +
                                      std::to_string(16 + need) + " bytes)");
  }
  raw.pixels.assign(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return raw;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  expect_magic(read_be32(buf, 0, path), kIdxLabelsMagic, path);
  const std::uint32_t count = read_be32(buf, 4, path);
  if (buf.size() < 8 + static_cast<std::size_t>(count)) {
    fail(ErrorCode::format_error, path.string() + ": truncated label data at byte offset " +
                                      std::to_string(buf.size()) + " (expected " +
                                      std::to_string(8 + static_cast<std::size_t>(count)) +
                                      " bytes)");
  }
  return {buf.begin() + 8, buf.begin() + 8 + count};
}

RawCifar read_cifar_batch(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  if (buf.empty() || buf.size() % kCifarRecord != 0) {
    const std::size_t whole = buf.size() / kCifarRecord;
    fail(ErrorCode::format_error, path.string() + ": truncated record at byte offset " +
                                      std::to_string(whole * kCifarRecord) + " (records are " +
                                      std::to_string(kCifarRecord) + " bytes)");
  }
  const std::size_t n = buf.size() / kCifarRecord;
  RawCifar raw;
  raw.labels.resize(n);
  raw.pixels.resize(n * 3072);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = i * kCifarRecord;
    if (buf[off] > 9) {
      fail(ErrorCode::format_error, path.string() + ": label " + std::to_string(buf[off]) +
                                        " at byte offset " + std::to_string(off));
    }
    raw.labels[i] = buf[off];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(off + 1),
              buf.begin() + static_cast<std::ptrdiff_t>(off + kCifarRecord),
              raw.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3072));
  }
  return raw;
}

LabeledDataset load_dataset(const DatasetSource& requested) {
  DatasetSource source = requested;
  if (source.path.empty()) {
    if (source.kind == DatasetKind::mnist_idx) source.path = default_data_root() / "mnist";
    if (source.kind == DatasetKind::cifar10_binary) source.path = default_data_root() / "cifar10";
  }
  switch (source.kind) {
  case DatasetKind::mnist_idx: return load_mnist(source);
  case DatasetKind::cifar10_binary: return load_cifar10(source);
  case DatasetKind::synthetic_blobs: return make_blobs(source);
  }
  fail(ErrorCode::invalid_spec, "unknown dataset kind");
}

CorruptionRecord inject_noise(LabeledDataset& dataset, const NoiseSpec& spec) {
  NoiseSpec s = spec;
  s.num_classes = dataset.num_classes;
  const TransitionMatrix matrix = build_transition_matrix(s);
  CorruptionRecord rec = apply_noise(dataset.train_labels, matrix, s.seed);
  dataset.noisy_labels = rec.noisy_labels;
  dataset.corruption_mask = rec.corruption_mask;
  return rec;
}

std::filesystem::path default_data_root() {
  if (const char* env = std::getenv("CCT_DATA_DIR"); env && *env) return env;
  return "data";
}

} // namespace cct
