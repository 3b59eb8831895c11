#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "cct/dataset.hpp"
#include "cct/error.hpp"
#include "test_util.hpp"

using namespace cct;

namespace {

std::string be32(std::uint32_t v) {
  std::string s(4, '\0');
  s[0] = static_cast<char>(v >> 24);
  s[1] = static_cast<char>(v >> 16);
  s[2] = static_cast<char>(v >> 8);
  s[3] = static_cast<char>(v);
  return s;
}

std::string idx_images(std::uint32_t count, std::uint8_t seed) {
  std::string s = be32(0x803) + be32(count) + be32(28) + be32(28);
  for (std::uint32_t i = 0; i < count * 784; ++i) s.push_back(static_cast<char>((i * 7 + seed) % 256));
  return s;
}

std::string idx_labels(const std::vector<int>& labels) {
  std::string s = be32(0x801) + be32(static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) s.push_back(static_cast<char>(y));
  return s;
}

std::string cifar_records(const std::vector<int>& labels, std::uint8_t seed) {
  std::string s;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    s.push_back(static_cast<char>(labels[r]));
    for (int i = 0; i < 3072; ++i) s.push_back(static_cast<char>((i + r * 13 + seed) % 256));
  }
  return s;
}

void write_mnist(const std::filesystem::path& dir) {
  test::write_bytes(dir / "train-images-idx3-ubyte", idx_images(5, 1));
  test::write_bytes(dir / "train-labels-idx1-ubyte", idx_labels({5, 0, 4, 1, 9}));
  test::write_bytes(dir / "t10k-images-idx3-ubyte", idx_images(3, 2));
  test::write_bytes(dir / "t10k-labels-idx1-ubyte", idx_labels({7, 2, 1}));
}

void write_cifar(const std::filesystem::path& dir) {
  for (int b = 1; b <= 5; ++b) {
    test::write_bytes(dir / ("data_batch_" + std::to_string(b) + ".bin"),
                      cifar_records({b % 10, (b + 3) % 10}, static_cast<std::uint8_t>(b)));
  }
  test::write_bytes(dir / "test_batch.bin", cifar_records({3, 8}, 99));
}

ErrorCode code_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return ErrorCode::internal;
}

} // namespace

TEST_SUITE("dataset") {

TEST_CASE("idx readers decode big-endian headers and raw bytes") {
  test::TempDir dir;
  write_mnist(dir.path);
  const auto raw = read_idx_images(dir.path / "train-images-idx3-ubyte");
  CHECK(raw.count == 5);
  CHECK(raw.rows == 28);
  CHECK(raw.cols == 28);
  CHECK(raw.pixels.size() == 5 * 784);
  CHECK(raw.pixels[100] == (100 * 7 + 1) % 256);
  CHECK(read_idx_labels(dir.path / "train-labels-idx1-ubyte") == std::vector<std::uint8_t>{5, 0, 4, 1, 9});
}

TEST_CASE("mnist loader standardises with train statistics") {
  test::TempDir dir;
  write_mnist(dir.path);
  DatasetSource s;
  s.kind = DatasetKind::mnist_idx;
  s.path = dir.path;
  const auto d = load_dataset(s);
  CHECK(d.train_size() == 5);
  CHECK(d.test_size() == 3);
  CHECK(d.shape == ImageShape{1, 28, 28});
  CHECK(d.train_labels == std::vector<int>{5, 0, 4, 1, 9});
  CHECK(d.noisy_labels == d.train_labels);
  CHECK(d.checksum.size() == 16);
  REQUIRE(d.channel_mean.size() == 1);
  const auto raw = read_idx_images(dir.path / "train-images-idx3-ubyte");
  double mean = 0.0;
  for (auto p : raw.pixels) mean += p / 255.0;
  mean /= raw.pixels.size();
  CHECK(d.channel_mean[0] == doctest::Approx(mean).epsilon(1e-6));
  CHECK(std::abs(d.train_images.cast<double>().mean()) < 1e-4);
  const double x = (raw.pixels[10] / 255.0 - d.channel_mean[0]) / d.channel_std[0];
  CHECK(d.train_images(0, 10) == doctest::Approx(x).epsilon(1e-5));
}

TEST_CASE("mnist limits keep a prefix") {
  test::TempDir dir;
  write_mnist(dir.path);
  DatasetSource s;
  s.kind = DatasetKind::mnist_idx;
  s.path = dir.path;
  s.train_limit = 2;
  const auto d = load_dataset(s);
  CHECK(d.train_labels == std::vector<int>{5, 0});
}

TEST_CASE("bad magic is a format error naming the offset") {
  test::TempDir dir;
  std::string bytes = idx_images(1, 0);
  bytes[3] = 0x01;
  test::write_bytes(dir.path / "x", bytes);
  std::string msg;
  CHECK(code_of([&] { read_idx_images(dir.path / "x"); }, &msg) == ErrorCode::format_error);
  CHECK(msg.find("byte offset 0") != std::string::npos);
  test::write_bytes(dir.path / "y", idx_labels({1, 2}));
  CHECK(code_of([&] { read_idx_images(dir.path / "y"); }) == ErrorCode::format_error);
}

TEST_CASE("truncated idx files are format errors naming the offset") {
  test::TempDir dir;
  const std::string full = idx_images(2, 0);
  test::write_bytes(dir.path / "short", full.substr(0, full.size() - 10));
  std::string msg;
  CHECK(code_of([&] { read_idx_images(dir.path / "short"); }, &msg) == ErrorCode::format_error);
  CHECK(msg.find("byte offset " + std::to_string(full.size() - 10)) != std::string::npos);
  test::write_bytes(dir.path / "header", full.substr(0, 6));
  CHECK(code_of([&] { read_idx_images(dir.path / "header"); }, &msg) == ErrorCode::format_error);
  CHECK(msg.find("byte offset 4") != std::string::npos);
  const std::string labels = idx_labels({1, 2, 3});
  test::write_bytes(dir.path / "labels", labels.substr(0, 9));
  CHECK(code_of([&] { read_idx_labels(dir.path / "labels"); }) == ErrorCode::format_error);
}

TEST_CASE("missing files are io errors") {
  CHECK(code_of([] { read_idx_images("/nonexistent/file"); }) == ErrorCode::io_error);
}

TEST_CASE("cifar records are one label byte and 3072 pixels") {
  test::TempDir dir;
  write_cifar(dir.path);
  const auto raw = read_cifar_batch(dir.path / "test_batch.bin");
  CHECK(raw.labels == std::vector<std::uint8_t>{3, 8});
  CHECK(raw.pixels.size() == 2 * 3072);
  CHECK(raw.pixels[3072 + 5] == (5 + 13 + 99) % 256);

  DatasetSource s;
  s.kind = DatasetKind::cifar10_binary;
  s.path = dir.path;
  const auto d = load_dataset(s);
  CHECK(d.train_size() == 10);
  CHECK(d.test_size() == 2);
  CHECK(d.shape == ImageShape{3, 32, 32});
  CHECK(d.channel_mean.size() == 3);
  CHECK(d.train_labels[0] == 1);
  CHECK(d.train_labels[1] == 4);
}

TEST_CASE("truncated cifar record names the offset") {
  test::TempDir dir;
  const std::string bytes = cifar_records({1, 2}, 0);
  test::write_bytes(dir.path / "b.bin", bytes.substr(0, 3073 + 100));
  std::string msg;
  CHECK(code_of([&] { read_cifar_batch(dir.path / "b.bin"); }, &msg) == ErrorCode::format_error);
  CHECK(msg.find("byte offset 3073") != std::string::npos);
  std::string bad = bytes;
  bad[3073] = 12;
  test::write_bytes(dir.path / "c.bin", bad);
  CHECK(code_of([&] { read_cifar_batch(dir.path / "c.bin"); }, &msg) == ErrorCode::format_error);
  CHECK(msg.find("byte offset 3073") != std::string::npos);
}

TEST_CASE("synthetic blobs are deterministic and balanced") {
  DatasetSource s;
  s.num_classes = 4;
  s.samples_per_class = 10;
  s.seed = 3;
  const auto a = load_dataset(s);
  const auto b = load_dataset(s);
  CHECK(a.train_images == b.train_images);
  CHECK(a.checksum == b.checksum);
  CHECK(a.train_size() == 40);
  for (int i = 0; i < 40; ++i) CHECK(a.train_labels[i] == i % 4);
  s.seed = 4;
  CHECK(load_dataset(s).checksum != a.checksum);
}

TEST_CASE("noise touches only training labels") {
  DatasetSource s;
  s.num_classes = 5;
  s.samples_per_class = 200;
  auto d = load_dataset(s);
  const auto test_before = d.test_labels;
  const auto rec = inject_noise(d, NoiseSpec{NoiseKind::symmetric, 0.4, 99, 7});
  CHECK(d.test_labels == test_before);
  CHECK(d.noisy_labels == rec.noisy_labels);
  CHECK(rec.num_corrupted() > 0);
  for (std::size_t i = 0; i < d.train_size(); ++i) {
    CHECK(d.corruption_mask[i] == (d.noisy_labels[i] != d.train_labels[i]));
  }
}

TEST_CASE("data root honours the environment") {
  const char* old = std::getenv("CCT_DATA_DIR");
  const std::string saved = old ? old : "";
  ::setenv("CCT_DATA_DIR", "/tmp/somewhere", 1);
  CHECK(default_data_root() == std::filesystem::path("/tmp/somewhere"));
  ::unsetenv("CCT_DATA_DIR");
  CHECK(default_data_root() == std::filesystem::path("data"));
  if (old) ::setenv("CCT_DATA_DIR", saved.c_str(), 1);
}

TEST_CASE("dataset names") {
  CHECK(parse_dataset_kind("mnist") == DatasetKind::mnist_idx);
  CHECK(parse_dataset_kind("cifar10") == DatasetKind::cifar10_binary);
  CHECK(parse_dataset_kind("synthetic") == DatasetKind::synthetic_blobs);
  CHECK(code_of([] { parse_dataset_kind("svhn"); }) == ErrorCode::invalid_spec);
}

}
