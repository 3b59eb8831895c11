#ifndef CCT_DATASET_HPP_
#define CCT_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cct/noise_model.hpp"
#include "cct/tensor.hpp"

namespace cct {

enum class DatasetKind { mnist_idx, cifar10_binary, synthetic_blobs };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

struct ImageShape {
  int channels = 1;
  int height = 28;
  int width = 28;

  int size() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

struct DatasetSource {
  DatasetKind kind = DatasetKind::synthetic_blobs;
  std::filesystem::path path;  // directory holding the dataset files

  // synthetic_blobs only
  int num_classes = 3;
  int samples_per_class = 100;
  int test_samples_per_class = 50;
  double feature_noise = 0.3;  // sigma of the per-pixel Gaussian around each prototype
  int image_size = 8;          // square, single channel
  std::uint64_t seed = 0;

  // Keep only the first N samples of a split (0 = all).
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
};

/// Images are stored standardised per channel, one CHW-flattened row each.
/// Noisy labels and the corruption mask are filled by inject_noise(); until
/// then they equal the true labels and all-false.
struct LabeledDataset {
  std::string name;
  ImageShape shape;
  int num_classes = 0;

  MatrixF train_images;
  std::vector<int> train_labels;
  std::vector<int> noisy_labels;
  std::vector<bool> corruption_mask;

  MatrixF test_images;
  std::vector<int> test_labels;

  std::vector<double> channel_mean;
  std::vector<double> channel_std;
  std::string checksum;  // fnv1a-64 of the source bytes, hex

  std::size_t train_size() const { return train_labels.size(); }
  std::size_t test_size() const { return test_labels.size(); }
};

LabeledDataset load_dataset(const DatasetSource& source);

/// Corrupts the training labels only; test labels are never touched.
CorruptionRecord inject_noise(LabeledDataset& dataset, const NoiseSpec& spec);

/// Default dataset root: $CCT_DATA_DIR if set, else "data". An empty source
/// path resolves to <root>/mnist or <root>/cifar10.
std::filesystem::path default_data_root();

// Raw readers, exposed for tests. Pixel bytes are returned unscaled.
struct RawImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};
RawImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

struct RawCifar {
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;  // 3072 bytes per record, CHW
};
RawCifar read_cifar_batch(const std::filesystem::path& path);

} // namespace cct

#endif // CCT_DATASET_HPP_
