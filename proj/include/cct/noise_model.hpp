#ifndef CCT_NOISE_MODEL_HPP_
#define CCT_NOISE_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cct/tensor.hpp"

namespace cct {

enum class NoiseKind { none, symmetric, pairflip };

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double tau = 0.0;
  int num_classes = 10;
  std::uint64_t seed = 0;
};

// Row-stochastic label corruption matrix: entry (i, j) is P(noisy = j | true = i).
struct TransitionMatrix {
  MatrixD entries;
  int num_classes = 0;

  double operator()(int from, int to) const { return entries(from, to); }
};

struct CorruptionRecord {
  std::vector<int> noisy_labels;
  std::vector<bool> corruption_mask;

  std::size_t num_corrupted() const;
  double corrupted_fraction() const;
};

/// Symmetric noise spreads tau uniformly over the M-1 other classes; pairflip
/// moves tau to class (c+1) mod M. Pairflip with tau >= 0.5 is accepted but
/// logged, since the flipped class then dominates.
TransitionMatrix build_transition_matrix(const NoiseSpec& spec);

/// Draws noisy_labels[i] from row true_labels[i] of the matrix. Draw i uses
/// counter i of a stream keyed by seed, so the result does not depend on
/// iteration order.
CorruptionRecord apply_noise(std::span<const int> true_labels,
                             const TransitionMatrix& matrix, std::uint64_t seed);

/// CSV with header `index,true_label,noisy_label,corrupted`.
void write_corruption_csv(const std::filesystem::path& path,
                          std::span<const int> true_labels,
                          const CorruptionRecord& record);
CorruptionRecord read_corruption_csv(const std::filesystem::path& path,
                                     std::vector<int>* true_labels = nullptr);

} // namespace cct

#endif // CCT_NOISE_MODEL_HPP_
