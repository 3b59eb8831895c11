#ifndef CCT_COTRAINER_HPP_
#define CCT_COTRAINER_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cct/backbone.hpp"
#include "cct/dataset.hpp"
#include "cct/losses.hpp"
#include "cct/optimizer.hpp"
#include "cct/selection.hpp"

namespace cct {

enum class TrainMode { cct, coteaching, ce_single, ce_pair };

TrainMode parse_train_mode(const std::string& name);
std::string to_string(TrainMode mode);

struct TrainSeeds {
  std::uint64_t data_order = 0;
  std::uint64_t init1 = 1;
  std::uint64_t init2 = 2;
  std::uint64_t noise = 3;
  std::uint64_t dropout = 4;

  bool operator==(const TrainSeeds&) const = default;
};

struct TrainConfig {
  TrainMode mode = TrainMode::cct;
  BackboneConfig backbone;
  int epochs = 100;
  std::size_t batch_size = 128;
  std::size_t eval_batch_size = 500;
  OptimizerConfig optimizer;
  LossConfig loss;
  ScheduleConfig schedule;
  TrainSeeds seeds;

  void validate() const;
  /// Contrastive weight actually applied: lambda for cct, zero otherwise.
  double effective_lambda() const;
  bool uses_selection() const { return mode == TrainMode::cct || mode == TrainMode::coteaching; }
  bool trains_second() const { return mode != TrainMode::ce_single; }
};

struct EncoderStep {
  double ce_selected = 0.0;  // sum of per-sample CE over the update set
  double ce_mean = 0.0;      // mean per-sample CE over the whole batch
  double objective = 0.0;    // ce_selected + lambda * contrastive
  std::size_t selected = 0;
  std::size_t selected_clean = 0;
};

struct StepMetrics {
  std::size_t remember = 0;
  double contrastive = std::numeric_limits<double>::quiet_NaN();
  std::vector<EncoderStep> encoders;  // one entry per trained encoder
  SelectionResult selection;
};

struct EncoderMetrics {
  int encoder = 1;
  double ce_selected = 0.0;
  double ce_mean = 0.0;
  double contrastive = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = 0.0;
  double selection_precision = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsRecord {
  int epoch = 0;
  std::vector<EncoderMetrics> encoders;
  double seconds = 0.0;  // wall clock since the start of the run
};

// Owns the encoder pair and one optimizer per encoder.
template <typename T>
class CoTrainer {
public:
  CoTrainer(TrainConfig config, std::size_t total_steps);

  /// One update on a mini-batch. Both encoders see the same images. The mask
  /// (may be empty) marks corrupted labels and only feeds selection precision.
  StepMetrics train_step(const Mat<T>& images, std::span<const int> noisy_labels,
                         const std::vector<bool>& corruption_mask, int epoch);

  Encoder<T>& first() { return *pair_.first; }
  Encoder<T>& second() { return *pair_.second; }
  const TrainConfig& config() const { return config_; }

private:
  TrainConfig config_;
  EncoderPair<T> pair_;
  Optimizer<T> opt1_;
  Optimizer<T> opt2_;
  Rng dropout1_;
  Rng dropout2_;
};

/// Fraction of argmax-correct predictions; ties go to the smaller class index.
template <typename T>
double evaluate(Encoder<T>& encoder, const MatrixF& images, std::span<const int> labels,
                std::size_t batch_size = 500);

using EpochCallback = std::function<void(const MetricsRecord&)>;

struct TrainResult {
  std::unique_ptr<CoTrainer<float>> trainer;
  std::vector<MetricsRecord> metrics;
};

/// Seeded shuffle each epoch, train_step over all batches, clean-label test
/// evaluation of each trained encoder. on_epoch is called after every epoch so
/// callers can persist partial results.
TrainResult train_run(const LabeledDataset& dataset, const TrainConfig& config,
                      const EpochCallback& on_epoch = {});

} // namespace cct

#endif // CCT_COTRAINER_HPP_
