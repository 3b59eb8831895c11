#ifndef CCT_HARNESS_HPP_
#define CCT_HARNESS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cct/cotrainer.hpp"
#include "cct/dataset.hpp"
#include "cct/noise_model.hpp"

namespace cct {

/// Everything needed to reproduce a run. Fields under "resolved" (checksum,
/// standardisation constants, version) are filled in by run_experiment.
struct RunManifest {
  DatasetSource dataset;
  NoiseSpec noise;  // num_classes and seed are filled per run
  TrainConfig train;
  int num_seeds = 1;
  std::uint64_t seed_base = 0;
  int jobs = 1;
  bool record_wall_clock = false;
  bool save_checkpoints = true;

  std::string version;
  std::string dataset_checksum;
  std::vector<double> channel_mean;
  std::vector<double> channel_std;

  void validate() const;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& path);

/// Library version plus the git revision it was built from.
std::string version_stamp();

/// Per-seed seeds: identical across modes for the same seed index, so
/// different modes see the same noisy labels and initialisations.
TrainSeeds seeds_for(const RunManifest& manifest, int seed_index);

inline constexpr const char* kMetricsHeader =
    "epoch,encoder,ce_selected,ce_mean,contrastive,test_acc,selection_precision,seconds";

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records,
                       bool wall_clock);
void append_metrics_csv(const std::filesystem::path& path, const MetricsRecord& record, bool wall_clock);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);
nlohmann::json metrics_to_json(const std::vector<MetricsRecord>& records, bool wall_clock);

/// Mean test accuracy over the trained encoders at the last epoch.
double final_accuracy(const MetricsRecord& record);

struct SeedOutcome {
  int seed_index = 0;
  double final_accuracy = 0.0;
  int final_epoch = 0;
  std::vector<MetricsRecord> metrics;
};

struct ExperimentResult {
  std::vector<SeedOutcome> seeds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

/// Loads the dataset, then for every seed: injects noise into the training
/// labels, trains, and writes seed_<i>/{metrics.csv,metrics.json,
/// corruption.csv,run.log,encoder*.ckpt}. Writes manifest.json and
/// summary.{csv,json} at the top of out_dir.
ExperimentResult run_experiment(const RunManifest& manifest, const std::filesystem::path& out_dir);

struct SummaryRow {
  std::string dataset;
  std::string noise;
  double tau = 0.0;
  std::string mode;
  std::string backbone;
  double mean = 0.0;
  double std = 0.0;
  int n_seeds = 0;
  int final_epoch = 0;
  std::string checksum;
};

/// Each path is either a run directory (holding manifest.json) or a directory
/// of run directories. Rows are grouped by (noise, tau, mode, backbone).
std::vector<SummaryRow> emit_summary(const std::vector<std::filesystem::path>& dirs);
std::string format_summary_table(const std::vector<SummaryRow>& rows);
std::string format_summary_csv(const std::vector<SummaryRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
nlohmann::json summary_to_json(const std::vector<SummaryRow>& rows);

/// Writes accuracy_vs_epoch.svg into every run directory under dir; returns
/// the number of images written.
int plot_runs(const std::filesystem::path& dir);

double mean_of(const std::vector<double>& v);
/// Sample standard deviation; zero for fewer than two values.
double stddev_of(const std::vector<double>& v);

} // namespace cct

#endif // CCT_HARNESS_HPP_
