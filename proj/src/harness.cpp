#include "cct/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "cct/config_io.hpp"
#include "cct/error.hpp"
#include "cct/log.hpp"
#include "cct/random.hpp"

#ifndef CCT_GIT_REV
#define CCT_GIT_REV "unknown"
#endif
#ifndef CCT_VERSION
#define CCT_VERSION "0.0.0"
#endif

namespace cct {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_stamp() { return std::string(CCT_VERSION) + "+" + CCT_GIT_REV; }

void RunManifest::validate() const {
  train.validate();
  if (num_seeds < 1) fail(ErrorCode::invalid_spec, "need at least one seed");
  if (jobs < 1) fail(ErrorCode::invalid_spec, "jobs must be positive");
  if (!(noise.tau >= 0.0 && noise.tau <= 1.0)) fail(ErrorCode::invalid_spec, "tau must lie in [0, 1]");
}

// ---------------------------------------------------------------- manifest io

namespace {

json dataset_to_json(const DatasetSource& s) {
  return {{"kind", to_string(s.kind)},
          {"path", s.path.string()},
          {"num_classes", s.num_classes},
          {"samples_per_class", s.samples_per_class},
          {"test_samples_per_class", s.test_samples_per_class},
          {"feature_noise", s.feature_noise},
          {"image_size", s.image_size},
          {"seed", s.seed},
          {"train_limit", s.train_limit},
          {"test_limit", s.test_limit}};
}

DatasetSource dataset_from_json(const json& j) {
  DatasetSource d;
  d.kind = parse_dataset_kind(j.value("kind", to_string(d.kind)));
  d.path = j.value("path", std::string{});
  d.num_classes = j.value("num_classes", d.num_classes);
  d.samples_per_class = j.value("samples_per_class", d.samples_per_class);
  d.test_samples_per_class = j.value("test_samples_per_class", d.test_samples_per_class);
  d.feature_noise = j.value("feature_noise", d.feature_noise);
  d.image_size = j.value("image_size", d.image_size);
  d.seed = j.value("seed", d.seed);
  d.train_limit = j.value("train_limit", d.train_limit);
  d.test_limit = j.value("test_limit", d.test_limit);
  return d;
}

json train_to_json(const TrainConfig& t) {
  return {{"mode", to_string(t.mode)},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"eval_batch_size", t.eval_batch_size},
          {"backbone", t.backbone},
          {"optimizer",
           {{"kind", to_string(t.optimizer.kind)},
            {"learning_rate", t.optimizer.learning_rate},
            {"beta1", t.optimizer.beta1},
            {"beta2", t.optimizer.beta2},
            {"epsilon", t.optimizer.epsilon},
            {"momentum", t.optimizer.momentum},
            {"weight_decay", t.optimizer.weight_decay},
            {"cosine_decay", t.optimizer.cosine_decay}}},
          {"loss", {{"temperature", t.loss.temperature}, {"lambda", t.loss.lambda}}},
          {"schedule",
           {{"tau", t.schedule.tau},
            {"warmup_epochs", t.schedule.warmup_epochs},
            {"ramp", t.schedule.ramp}}}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.mode = parse_train_mode(j.value("mode", to_string(t.mode)));
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.eval_batch_size = j.value("eval_batch_size", t.eval_batch_size);
  if (j.contains("backbone")) t.backbone = j.at("backbone").get<BackboneConfig>();
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    t.optimizer.kind = parse_optimizer_kind(o.value("kind", to_string(t.optimizer.kind)));
    t.optimizer.learning_rate = o.value("learning_rate", t.optimizer.learning_rate);
    t.optimizer.beta1 = o.value("beta1", t.optimizer.beta1);
    t.optimizer.beta2 = o.value("beta2", t.optimizer.beta2);
    t.optimizer.epsilon = o.value("epsilon", t.optimizer.epsilon);
    t.optimizer.momentum = o.value("momentum", t.optimizer.momentum);
    t.optimizer.weight_decay = o.value("weight_decay", t.optimizer.weight_decay);
    t.optimizer.cosine_decay = o.value("cosine_decay", t.optimizer.cosine_decay);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    t.loss.temperature = l.value("temperature", t.loss.temperature);
    t.loss.lambda = l.value("lambda", t.loss.lambda);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    t.schedule.tau = s.value("tau", t.schedule.tau);
    t.schedule.warmup_epochs = s.value("warmup_epochs", t.schedule.warmup_epochs);
    t.schedule.ramp = s.value("ramp", t.schedule.ramp);
  }
  return t;
}

} // namespace

json manifest_to_json(const RunManifest& m) {
  return {{"dataset", dataset_to_json(m.dataset)},
          {"noise", m.noise},
          {"train", train_to_json(m.train)},
          {"seeds", {{"count", m.num_seeds}, {"base", m.seed_base}}},
          {"jobs", m.jobs},
          {"record_wall_clock", m.record_wall_clock},
          {"save_checkpoints", m.save_checkpoints},
          {"resolved",
           {{"version", m.version},
            {"dataset_checksum", m.dataset_checksum},
            {"channel_mean", m.channel_mean},
            {"channel_std", m.channel_std}}}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    if (j.contains("dataset")) m.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("noise")) m.noise = j.at("noise").get<NoiseSpec>();
    if (j.contains("train")) m.train = train_from_json(j.at("train"));
    if (j.contains("seeds")) {
      m.num_seeds = j.at("seeds").value("count", m.num_seeds);
      m.seed_base = j.at("seeds").value("base", m.seed_base);
    }
    m.jobs = j.value("jobs", m.jobs);
    m.record_wall_clock = j.value("record_wall_clock", m.record_wall_clock);
    m.save_checkpoints = j.value("save_checkpoints", m.save_checkpoints);
    if (j.contains("resolved")) {
      const auto& r = j.at("resolved");
      m.version = r.value("version", std::string{});
      m.dataset_checksum = r.value("dataset_checksum", std::string{});
      m.channel_mean = r.value("channel_mean", std::vector<double>{});
      m.channel_std = r.value("channel_std", std::vector<double>{});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_spec, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const fs::path& path, const RunManifest& manifest) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
}

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::format_error, path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

TrainSeeds seeds_for(const RunManifest& manifest, int seed_index) {
  const std::uint64_t base = manifest.seed_base + static_cast<std::uint64_t>(seed_index);
  TrainSeeds s;
  s.data_order = derive_seed(base, 1);
  s.init1 = derive_seed(base, 2);
  s.init2 = derive_seed(base, 3);
  s.noise = derive_seed(base, 4);
  s.dropout = derive_seed(base, 5);
  return s;
}

// ----------------------------------------------------------------- metrics io

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string metrics_row(const MetricsRecord& r, const EncoderMetrics& e, bool wall_clock) {
  std::ostringstream os;
  os << r.epoch << ',' << e.encoder << ',' << fmt(e.ce_selected) << ',' << fmt(e.ce_mean) << ','
     << fmt(e.contrastive) << ',' << fmt(e.test_accuracy) << ',' << fmt(e.selection_precision)
     << ',' << fmt(wall_clock ? r.seconds : 0.0);
  return os.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRecord>& records,
                       bool wall_clock) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    for (const auto& e : r.encoders) out << metrics_row(r, e, wall_clock) << '\n';
  }
}

void append_metrics_csv(const fs::path& path, const MetricsRecord& record, bool wall_clock) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) fail(ErrorCode::io_error, "cannot append to " + path.string());
  if (fresh) out << kMetricsHeader << '\n';
  for (const auto& e : record.encoders) out << metrics_row(record, e, wall_clock) << '\n';
  out.flush();
}

std::vector<MetricsRecord> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) fail(ErrorCode::format_error, path.string() + ": unexpected metrics header");
  std::vector<MetricsRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) fail(ErrorCode::format_error, path.string() + ": bad row " + std::to_string(row));
    auto num = [](const std::string& s) {
      return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    const int epoch = std::stoi(cells[0]);
    if (out.empty() || out.back().epoch != epoch) {
      if (!out.empty() && epoch <= out.back().epoch) {
        fail(ErrorCode::format_error, path.string() + ": epochs out of order at row " + std::to_string(row));
      }
      out.push_back({epoch, {}, num(cells[7])});
    }
    EncoderMetrics e;
    e.encoder = std::stoi(cells[1]);
    e.ce_selected = num(cells[2]);
    e.ce_mean = num(cells[3]);
    e.contrastive = num(cells[4]);
    e.test_accuracy = num(cells[5]);
    e.selection_precision = num(cells[6]);
    out.back().encoders.push_back(e);
  }
  return out;
}

json metrics_to_json(const std::vector<MetricsRecord>& records, bool wall_clock) {
  json rows = json::array();
  for (const auto& r : records) {
    for (const auto& e : r.encoders) {
      rows.push_back({{"epoch", r.epoch},
                      {"encoder", e.encoder},
                      {"ce_selected", number_or_null(e.ce_selected)},
                      {"ce_mean", number_or_null(e.ce_mean)},
                      {"contrastive", number_or_null(e.contrastive)},
                      {"test_acc", number_or_null(e.test_accuracy)},
                      {"selection_precision", number_or_null(e.selection_precision)},
                      {"seconds", wall_clock ? r.seconds : 0.0}});
    }
  }
  return rows;
}

double final_accuracy(const MetricsRecord& record) {
  if (record.encoders.empty()) fail(ErrorCode::undefined_metric, "metrics record has no encoders");
  double acc = 0.0;
  for (const auto& e : record.encoders) acc += e.test_accuracy;
  return acc / static_cast<double>(record.encoders.size());
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// ----------------------------------------------------------------- experiment

namespace {

class RunLog {
public:
  explicit RunLog(const fs::path& path) : out_(path, std::ios::app) {}
  void line(const std::string& s) {
    out_ << s << '\n';
    out_.flush();
  }

private:
  std::ofstream out_;
};

SeedOutcome run_seed(const RunManifest& manifest, const LabeledDataset& clean, int seed_index,
                     const fs::path& dir) {
  fs::create_directories(dir);
  for (const char* name : {"metrics.csv", "metrics.json", "run.log"}) fs::remove(dir / name);
  RunLog runlog(dir / "run.log");

  TrainConfig config = manifest.train;
  config.seeds = seeds_for(manifest, seed_index);
  config.backbone.channels = clean.shape.channels;
  config.backbone.height = clean.shape.height;
  config.backbone.width = clean.shape.width;
  config.backbone.num_classes = clean.num_classes;

  LabeledDataset data = clean;
  NoiseSpec noise = manifest.noise;
  noise.num_classes = data.num_classes;
  noise.seed = config.seeds.noise;
  const CorruptionRecord record = inject_noise(data, noise);
  write_corruption_csv(dir / "corruption.csv", data.train_labels, record);

  std::ostringstream head;
  head << "seed " << seed_index << " mode=" << to_string(config.mode) << " noise="
       << to_string(noise.kind) << " tau=" << noise.tau << " corrupted="
       << record.corrupted_fraction();
  runlog.line(head.str());

  SeedOutcome outcome;
  outcome.seed_index = seed_index;
  try {
    TrainResult result = train_run(data, config, [&](const MetricsRecord& r) {
      append_metrics_csv(dir / "metrics.csv", r, manifest.record_wall_clock);
      std::ostringstream os;
      os << "epoch " << r.epoch << " seconds=" << std::fixed << std::setprecision(1) << r.seconds;
      for (const auto& e : r.encoders) {
        os << " acc" << e.encoder << '=' << std::setprecision(4) << e.test_accuracy;
      }
      runlog.line(os.str());
    });
    outcome.metrics = std::move(result.metrics);
    if (manifest.save_checkpoints) {
      save_checkpoint(dir / "encoder1.ckpt", result.trainer->first());
      if (config.trains_second()) save_checkpoint(dir / "encoder2.ckpt", result.trainer->second());
    }
  } catch (const std::exception& e) {
    runlog.line(std::string("error: ") + e.what());
    throw;
  }

  std::ofstream(dir / "metrics.json") << metrics_to_json(outcome.metrics, manifest.record_wall_clock).dump(2)
                                      << '\n';
  outcome.final_epoch = outcome.metrics.back().epoch;
  outcome.final_accuracy = final_accuracy(outcome.metrics.back());
  runlog.line("final accuracy " + fmt(outcome.final_accuracy));
  return outcome;
}

fs::path seed_dir(const fs::path& out, int s) { return out / ("seed_" + std::to_string(s)); }

void write_run_summary(const fs::path& out_dir) {
  const auto rows = emit_summary({out_dir});
  write_summary_csv(out_dir / "summary.csv", rows);
  std::ofstream(out_dir / "summary.json") << summary_to_json(rows).dump(2) << '\n';
}

} // namespace

ExperimentResult run_experiment(const RunManifest& input, const fs::path& out_dir) {
  RunManifest manifest = input;
  manifest.train.schedule.tau =
      manifest.train.uses_selection() ? manifest.train.schedule.tau : 0.0;
  manifest.validate();
  fs::create_directories(out_dir);

  LabeledDataset clean = load_dataset(manifest.dataset);
  if (!manifest.dataset_checksum.empty() && manifest.dataset_checksum != clean.checksum) {
    fail(ErrorCode::invalid_data, "dataset checksum " + clean.checksum +
                                      " differs from the manifest's " + manifest.dataset_checksum);
  }
  manifest.dataset_checksum = clean.checksum;
  manifest.channel_mean = clean.channel_mean;
  manifest.channel_std = clean.channel_std;
  manifest.version = version_stamp();
  manifest.train.backbone.channels = clean.shape.channels;
  manifest.train.backbone.height = clean.shape.height;
  manifest.train.backbone.width = clean.shape.width;
  manifest.train.backbone.num_classes = clean.num_classes;
  manifest.train.validate();
  save_manifest(out_dir / "manifest.json", manifest);

  ExperimentResult result;
  if (manifest.jobs <= 1 || manifest.num_seeds == 1) {
    for (int s = 0; s < manifest.num_seeds; ++s) {
      result.seeds.push_back(run_seed(manifest, clean, s, seed_dir(out_dir, s)));
    }
  } else {
    // Independent worker processes; each writes its own seed directory and the
    // parent reads the metrics back.
    std::vector<std::string> failures;
    int next = 0;
    std::map<pid_t, int> running;
    auto reap = [&] {
      int status = 0;
      const pid_t pid = ::wait(&status);
      if (pid <= 0) return;
      const int s = running[pid];
      running.erase(pid);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        failures.push_back("seed " + std::to_string(s) + " failed; see " +
                           (seed_dir(out_dir, s) / "run.log").string());
      }
    };
    while (next < manifest.num_seeds || !running.empty()) {
      if (next < manifest.num_seeds && static_cast<int>(running.size()) < manifest.jobs) {
        const int s = next++;
        std::fflush(nullptr);
        const pid_t pid = ::fork();
        if (pid < 0) fail(ErrorCode::internal, "fork failed");
        if (pid == 0) {
          int code = 0;
          try {
            run_seed(manifest, clean, s, seed_dir(out_dir, s));
          } catch (...) {
            code = 1;
          }
          std::fflush(nullptr);
          ::_exit(code);
        }
        running[pid] = s;
      } else {
        reap();
      }
    }
    if (!failures.empty()) {
      std::string msg;
      for (const auto& f : failures) msg += f + "; ";
      fail(ErrorCode::internal, msg);
    }
    for (int s = 0; s < manifest.num_seeds; ++s) {
      SeedOutcome o;
      o.seed_index = s;
      o.metrics = read_metrics_csv(seed_dir(out_dir, s) / "metrics.csv");
      o.final_epoch = o.metrics.back().epoch;
      o.final_accuracy = final_accuracy(o.metrics.back());
      result.seeds.push_back(std::move(o));
    }
  }

  std::vector<double> finals;
  for (const auto& s : result.seeds) finals.push_back(s.final_accuracy);
  result.mean_accuracy = mean_of(finals);
  result.std_accuracy = stddev_of(finals);
  write_run_summary(out_dir);
  return result;
}

// -------------------------------------------------------------------- summary

namespace {

void collect_runs(const fs::path& dir, std::vector<fs::path>& runs) {
  if (!fs::is_directory(dir)) fail(ErrorCode::io_error, dir.string() + " is not a directory");
  if (fs::exists(dir / "manifest.json")) {
    runs.push_back(dir);
    return;
  }
  std::vector<fs::path> children;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) children.push_back(entry.path());
  }
  std::sort(children.begin(), children.end());
  for (const auto& c : children) {
    if (fs::exists(c / "manifest.json")) runs.push_back(c);
  }
}

std::vector<fs::path> seed_dirs(const fs::path& run) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(run)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind("seed_", 0) == 0 && fs::exists(entry.path() / "metrics.csv")) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

std::vector<SummaryRow> emit_summary(const std::vector<fs::path>& dirs) {
  std::vector<fs::path> runs;
  for (const auto& d : dirs) collect_runs(d, runs);
  if (runs.empty()) fail(ErrorCode::invalid_input, "no runs found");

  struct Group {
    SummaryRow row;
    std::vector<double> finals;
    int final_epoch = 0;
  };
  std::map<std::tuple<std::string, double, std::string, std::string>, Group> groups;
  std::string checksum;
  std::string checksum_source;
  for (const auto& run : runs) {
    const RunManifest m = load_manifest(run / "manifest.json");
    if (checksum.empty()) {
      checksum = m.dataset_checksum;
      checksum_source = run.string();
    } else if (m.dataset_checksum != checksum) {
      fail(ErrorCode::invalid_input, "runs use different datasets: " + checksum_source + " has checksum " +
                                         checksum + ", " + run.string() + " has " + m.dataset_checksum);
    }
    const auto key = std::make_tuple(to_string(m.noise.kind), m.noise.tau, to_string(m.train.mode),
                                     to_string(m.train.backbone.kind));
    Group& g = groups[key];
    g.row.dataset = to_string(m.dataset.kind);
    g.row.noise = std::get<0>(key);
    g.row.tau = m.noise.tau;
    g.row.mode = std::get<2>(key);
    g.row.backbone = std::get<3>(key);
    g.row.checksum = m.dataset_checksum;
    for (const auto& sd : seed_dirs(run)) {
      const auto metrics = read_metrics_csv(sd / "metrics.csv");
      if (metrics.empty()) continue;
      g.finals.push_back(final_accuracy(metrics.back()));
      g.final_epoch = std::max(g.final_epoch, metrics.back().epoch);
    }
  }

  std::vector<SummaryRow> rows;
  for (auto& [key, g] : groups) {
    if (g.finals.empty()) continue;
    g.row.mean = mean_of(g.finals);
    g.row.std = stddev_of(g.finals);
    g.row.n_seeds = static_cast<int>(g.finals.size());
    g.row.final_epoch = g.final_epoch;
    rows.push_back(g.row);
  }
  if (rows.empty()) fail(ErrorCode::invalid_input, "no runs found");
  return rows;
}

std::string format_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "dataset" << std::setw(11) << "noise" << std::setw(7) << "tau"
     << std::setw(12) << "mode" << std::setw(13) << "backbone" << std::setw(18) << "accuracy (%)"
     << std::setw(7) << "seeds" << "final_epoch\n";
  for (const auto& r : rows) {
    std::ostringstream acc;
    acc << std::fixed << std::setprecision(2) << 100.0 * r.mean << " +- " << 100.0 * r.std;
    std::ostringstream tau;
    tau << std::fixed << std::setprecision(2) << r.tau;
    os << std::left << std::setw(10) << r.dataset << std::setw(11) << r.noise << std::setw(7)
       << tau.str() << std::setw(12) << r.mode << std::setw(13) << r.backbone << std::setw(18)
       << acc.str() << std::setw(7) << r.n_seeds << r.final_epoch << '\n';
  }
  return os.str();
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "dataset,noise,tau,mode,backbone,mean,std,n_seeds,final_epoch,checksum\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.noise << ',' << fmt(r.tau) << ',' << r.mode << ',' << r.backbone
        << ',' << fmt(r.mean) << ',' << fmt(r.std) << ',' << r.n_seeds << ',' << r.final_epoch
        << ',' << r.checksum << '\n';
  }
  return out.str();
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out << format_summary_csv(rows);
}

json summary_to_json(const std::vector<SummaryRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"dataset", r.dataset},
                   {"noise", r.noise},
                   {"tau", r.tau},
                   {"mode", r.mode},
                   {"backbone", r.backbone},
                   {"mean", r.mean},
                   {"std", r.std},
                   {"n_seeds", r.n_seeds},
                   {"final_epoch", r.final_epoch},
                   {"checksum", r.checksum}});
  }
  return out;
}

// ----------------------------------------------------------------------- plot

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

void write_accuracy_svg(const fs::path& path, const std::string& title,
                        const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  const double w = 640, h = 400, left = 60, right = 150, top = 40, bottom = 50;
  std::size_t max_len = 1;
  double lo = 1.0, hi = 0.0;
  for (const auto& [name, ys] : series) {
    max_len = std::max(max_len, ys.size());
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  lo = std::max(0.0, std::floor(lo * 10.0) / 10.0);
  hi = std::min(1.0, std::ceil(hi * 10.0) / 10.0);
  if (hi <= lo) hi = lo + 0.1;
  const double pw = w - left - right, ph = h - top - bottom;
  auto px = [&](std::size_t i) {
    return left + (max_len > 1 ? pw * static_cast<double>(i) / static_cast<double>(max_len - 1) : 0.0);
  };
  auto py = [&](double y) { return top + ph * (1.0 - (y - lo) / (hi - lo)); };

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double y = lo + (hi - lo) * t / 5.0;
    out << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">"
        << std::setprecision(0) << 100.0 * y << std::setprecision(2) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">epoch</text>\n";
  out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
      << ")\" text-anchor=\"middle\">test accuracy (%)</text>\n";
  out << "<text x=\"" << left << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">0</text>\n";
  out << "<text x=\"" << left + pw << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
      << max_len - 1 << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, ys] = series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) out << px(i) << ',' << py(ys[i]) << ' ';
    out << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(s);
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly + 4 << "\">" << name << "</text>\n";
  }
  out << "</svg>\n";
}

} // namespace

int plot_runs(const fs::path& dir) {
  std::vector<fs::path> runs;
  collect_runs(dir, runs);
  if (runs.empty()) fail(ErrorCode::invalid_input, "no runs found under " + dir.string());
  int written = 0;
  for (const auto& run : runs) {
    const RunManifest m = load_manifest(run / "manifest.json");
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (const auto& sd : seed_dirs(run)) {
      const auto metrics = read_metrics_csv(sd / "metrics.csv");
      std::map<int, std::vector<double>> per_encoder;
      for (const auto& r : metrics) {
        for (const auto& e : r.encoders) per_encoder[e.encoder].push_back(e.test_accuracy);
      }
      for (auto& [enc, ys] : per_encoder) {
        series.emplace_back(sd.filename().string() + " enc" + std::to_string(enc), std::move(ys));
      }
    }
    if (series.empty()) continue;
    std::ostringstream title;
    title << to_string(m.train.mode) << " / " << to_string(m.train.backbone.kind) << " on "
          << to_string(m.dataset.kind) << ", " << to_string(m.noise.kind) << " tau=" << m.noise.tau;
    write_accuracy_svg(run / "accuracy_vs_epoch.svg", title.str(), series);
    ++written;
  }
  return written;
}

} // namespace cct
