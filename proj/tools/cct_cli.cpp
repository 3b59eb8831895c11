// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cct/cct.h"

namespace {

struct Manifest {
  cct_manifest* m = nullptr;
  ~Manifest() { cct_manifest_free(m); }
};

[[noreturn]] void die(cct_status status, const std::string& context) {
  std::cerr << "cct: " << context << ": " << cct_status_name(status) << ": " << cct_last_error()
            << '\n';
  std::exit(static_cast<int>(status) + 1);
}

void check(cct_status status, const std::string& context) {
  if (status != CCT_OK) die(status, context);
}

void set(cct_manifest* m, const std::string& key, const std::string& value) {
  check(cct_manifest_set(m, key.c_str(), value.c_str()), "setting " + key);
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RunOptions {
  std::string manifest_path;
  std::string out_dir;
  std::optional<std::string> dataset, noise, mode, backbone, pooling, data_dir, optimizer;
  std::optional<double> tau, lambda, phi, lr, dropout, mlp_ratio;
  std::optional<int> epochs, batch_size, tk, seeds, jobs, patch, embed_dim, depth, heads;
  std::optional<std::size_t> train_limit, test_limit;
  std::optional<std::uint64_t> seed_base;
  bool no_ramp = false;
  bool wall_clock = false;
  bool no_checkpoints = false;
  bool dry_run = false;
};

int run(const RunOptions& o) {
  Manifest man;
  if (!o.manifest_path.empty()) {
    check(cct_manifest_load(o.manifest_path.c_str(), &man.m), "loading " + o.manifest_path);
  } else {
    check(cct_manifest_new(&man.m), "creating manifest");
  }
  cct_manifest* m = man.m;
  if (o.dataset) set(m, "dataset.kind", quoted(*o.dataset));
  if (o.data_dir) set(m, "dataset.path", quoted(*o.data_dir));
  if (o.train_limit) set(m, "dataset.train_limit", std::to_string(*o.train_limit));
  if (o.test_limit) set(m, "dataset.test_limit", std::to_string(*o.test_limit));
  if (o.noise) set(m, "noise.kind", quoted(*o.noise));
  if (o.tau) {
    set(m, "noise.tau", num(*o.tau));
    set(m, "train.schedule.tau", num(*o.tau));
  }
  if (o.mode) set(m, "train.mode", quoted(*o.mode));
  if (o.epochs) set(m, "train.epochs", std::to_string(*o.epochs));
  if (o.batch_size) set(m, "train.batch_size", std::to_string(*o.batch_size));
  if (o.lambda) set(m, "train.loss.lambda", num(*o.lambda));
  if (o.phi) set(m, "train.loss.temperature", num(*o.phi));
  if (o.tk) set(m, "train.schedule.warmup_epochs", std::to_string(*o.tk));
  if (o.no_ramp) set(m, "train.schedule.ramp", "false");
  if (o.lr) set(m, "train.optimizer.learning_rate", num(*o.lr));
  if (o.optimizer) set(m, "train.optimizer.kind", quoted(*o.optimizer));
  if (o.backbone) set(m, "train.backbone.kind", quoted(*o.backbone));
  if (o.pooling) set(m, "train.backbone.pooling", quoted(*o.pooling));
  if (o.patch) set(m, "train.backbone.patch_size", std::to_string(*o.patch));
  if (o.embed_dim) set(m, "train.backbone.embed_dim", std::to_string(*o.embed_dim));
  if (o.depth) set(m, "train.backbone.depth", std::to_string(*o.depth));
  if (o.heads) set(m, "train.backbone.num_heads", std::to_string(*o.heads));
  if (o.mlp_ratio) set(m, "train.backbone.mlp_ratio", num(*o.mlp_ratio));
  if (o.dropout) set(m, "train.backbone.dropout", num(*o.dropout));
  if (o.seeds) set(m, "seeds.count", std::to_string(*o.seeds));
  if (o.seed_base) set(m, "seeds.base", std::to_string(*o.seed_base));
  if (o.jobs) set(m, "jobs", std::to_string(*o.jobs));
  if (o.wall_clock) set(m, "record_wall_clock", "true");
  if (o.no_checkpoints) set(m, "save_checkpoints", "false");

  if (o.dry_run) {
    char* text = nullptr;
    check(cct_manifest_to_json(m, &text), "rendering manifest");
    std::cout << text << '\n';
    cct_string_free(text);
    return 0;
  }

  cct_run_summary summary{};
  check(cct_run_experiment(m, o.out_dir.c_str(), &summary), "run");
  std::printf("%d seed(s), final epoch %d: accuracy %.2f +- %.2f %%\n", summary.num_seeds,
              summary.final_epoch, 100.0 * summary.mean_accuracy, 100.0 * summary.std_accuracy);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive co-training for learning with noisy labels"};
  app.set_version_flag("--version", std::string(cct_version()));
  app.require_subcommand(1);

  RunOptions o;
  auto* run_cmd = app.add_subcommand("run", "train one configuration over one or more seeds");
  run_cmd->add_option("--manifest", o.manifest_path, "start from a saved manifest.json")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", o.out_dir, "output directory")->required();
  run_cmd->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10", "synthetic"}));
  run_cmd->add_option("--data-dir", o.data_dir, "dataset directory (default $CCT_DATA_DIR/<dataset>)");
  run_cmd->add_option("--noise", o.noise)->check(CLI::IsMember({"none", "symmetric", "pairflip"}));
  run_cmd->add_option("--tau", o.tau, "noise rate; also the selection drop rate")
      ->check(CLI::Range(0.0, 1.0));
  run_cmd->add_option("--mode", o.mode)->check(CLI::IsMember({"cct", "coteaching", "ce_single", "ce_pair"}));
  run_cmd->add_option("--epochs", o.epochs);
  run_cmd->add_option("--batch-size", o.batch_size);
  run_cmd->add_option("--lambda", o.lambda, "contrastive weight");
  run_cmd->add_option("--phi", o.phi, "contrastive temperature");
  run_cmd->add_option("--tk", o.tk, "epochs over which the drop rate ramps up");
  run_cmd->add_flag("--no-ramp", o.no_ramp, "drop tau from the first epoch");
  run_cmd->add_option("--seeds", o.seeds, "number of seeds");
  run_cmd->add_option("--seed-base", o.seed_base);
  run_cmd->add_option("--jobs", o.jobs, "seeds trained in parallel processes");
  run_cmd->add_option("--lr", o.lr, "initial learning rate");
  run_cmd->add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"adam", "rmsprop", "sgd"}));
  run_cmd->add_option("--backbone", o.backbone)->check(CLI::IsMember({"transformer", "mlp"}));
  run_cmd->add_option("--pooling", o.pooling)->check(CLI::IsMember({"sequence_pool", "mean_pool"}));
  run_cmd->add_option("--patch-size", o.patch);
  run_cmd->add_option("--embed-dim", o.embed_dim);
  run_cmd->add_option("--depth", o.depth);
  run_cmd->add_option("--heads", o.heads);
  run_cmd->add_option("--mlp-ratio", o.mlp_ratio);
  run_cmd->add_option("--dropout", o.dropout);
  run_cmd->add_option("--train-limit", o.train_limit, "keep only the first N training samples");
  run_cmd->add_option("--test-limit", o.test_limit, "keep only the first N test samples");
  run_cmd->add_flag("--wall-clock", o.wall_clock, "record elapsed seconds in the metrics files");
  run_cmd->add_flag("--no-checkpoints", o.no_checkpoints);
  run_cmd->add_flag("--dry-run", o.dry_run, "print the resolved manifest and exit");

  std::vector<std::string> dirs;
  std::string format = "table";
  auto* sum_cmd = app.add_subcommand("summarize", "aggregate final accuracy over seeds");
  sum_cmd->add_option("dirs", dirs, "run directories or directories of runs")->required();
  sum_cmd->add_option("--format", format)->check(CLI::IsMember({"table", "csv", "json"}));

  std::string plot_dir;
  auto* plot_cmd = app.add_subcommand("plot", "write accuracy-vs-epoch SVG files");
  plot_cmd->add_option("dir", plot_dir)->required();

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) return run(o);
  if (*sum_cmd) {
    std::vector<const char*> ptrs;
    for (const auto& d : dirs) ptrs.push_back(d.c_str());
    char* text = nullptr;
    check(cct_summarize(ptrs.data(), ptrs.size(), format.c_str(), &text), "summarize");
    std::cout << text;
    cct_string_free(text);
    return 0;
  }
  if (*plot_cmd) {
    int written = 0;
    check(cct_plot(plot_dir.c_str(), &written), "plot");
    std::cout << "wrote " << written << " plot(s)\n";
    return 0;
  }
  return 0;
}
