#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "cct/error.hpp"
#include "cct/harness.hpp"
#include "test_util.hpp"

using namespace cct;

namespace {

RunManifest tiny_manifest(TrainMode mode) {
  RunManifest m;
  m.dataset.kind = DatasetKind::synthetic_blobs;
  m.dataset.num_classes = 3;
  m.dataset.samples_per_class = 30;
  m.dataset.test_samples_per_class = 20;
  m.noise = {NoiseKind::symmetric, 0.2, 3, 0};
  m.train.mode = mode;
  m.train.epochs = 2;
  m.train.batch_size = 16;
  m.train.schedule.tau = 0.2;
  m.train.schedule.warmup_epochs = 1;
  m.train.backbone.patch_size = 4;
  m.train.backbone.embed_dim = 8;
  m.train.backbone.depth = 1;
  m.train.backbone.num_heads = 2;
  return m;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("manifest json round trip") {
  RunManifest m = tiny_manifest(TrainMode::coteaching);
  m.num_seeds = 4;
  m.seed_base = 17;
  m.train.loss.lambda = 3e-5;
  m.train.optimizer.kind = OptimizerKind::rmsprop;
  m.train.schedule.ramp = false;
  m.dataset_checksum = "abc";
  m.channel_mean = {0.1};
  const RunManifest back = manifest_from_json(manifest_to_json(m));
  CHECK(manifest_to_json(back) == manifest_to_json(m));
  CHECK(back.train.backbone == m.train.backbone);
  CHECK(back.train.loss.lambda == 3e-5);
  CHECK(back.seed_base == 17);
}

TEST_CASE("malformed manifests are rejected") {
  nlohmann::json j = manifest_to_json(RunManifest{});
  j["train"]["mode"] = "bogus";
  CHECK_THROWS_AS(manifest_from_json(j), Error);
  j = manifest_to_json(RunManifest{});
  j["train"]["epochs"] = "ten";
  CHECK_THROWS_AS(manifest_from_json(j), Error);
}

TEST_CASE("per-seed seeds are shared across modes and differ across seeds") {
  const RunManifest a = tiny_manifest(TrainMode::cct);
  const RunManifest b = tiny_manifest(TrainMode::ce_pair);
  CHECK(seeds_for(a, 0) == seeds_for(b, 0));
  CHECK_FALSE(seeds_for(a, 0) == seeds_for(a, 1));
  CHECK(seeds_for(a, 0).init1 != seeds_for(a, 0).init2);
}

TEST_CASE("metrics csv round trip with missing values") {
  test::TempDir dir;
  std::vector<MetricsRecord> recs(2);
  for (int e = 0; e < 2; ++e) {
    recs[e].epoch = e;
    recs[e].seconds = 1.5 * (e + 1);
    recs[e].encoders.push_back({1, 1.25, 0.5, std::numeric_limits<double>::quiet_NaN(), 0.875, 0.75});
  }
  const auto path = dir.path / "m.csv";
  write_metrics_csv(path, recs, false);
  const std::string text = test::read_text(path);
  CHECK(text.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(text.find("0,1,1.25,0.5,nan,0.875,0.75,0\n") != std::string::npos);
  const auto back = read_metrics_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(std::isnan(back[1].encoders[0].contrastive));
  CHECK(back[1].encoders[0].test_accuracy == 0.875);

  const auto j = metrics_to_json(recs, true);
  CHECK(j.size() == 2);
  CHECK(j[0]["contrastive"].is_null());
  CHECK(j[1]["seconds"] == 3.0);
}

TEST_CASE("final accuracy averages the trained encoders") {
  MetricsRecord r;
  r.encoders.push_back({1, 0, 0, 0, 0.8, 0});
  r.encoders.push_back({2, 0, 0, 0, 0.9, 0});
  CHECK(final_accuracy(r) == doctest::Approx(0.85));
  CHECK_THROWS_AS(final_accuracy(MetricsRecord{}), Error);
}

TEST_CASE("mean and sample standard deviation") {
  CHECK(mean_of({1.0, 2.0, 3.0}) == 2.0);
  CHECK(stddev_of({1.0, 2.0, 3.0}) == doctest::Approx(1.0));
  CHECK(stddev_of({4.0}) == 0.0);
}

TEST_CASE("experiment writes every artefact and summarises") {
  test::TempDir dir;
  RunManifest m = tiny_manifest(TrainMode::cct);
  m.num_seeds = 2;
  const auto out = dir.path / "run";
  const auto res = run_experiment(m, out);
  CHECK(res.seeds.size() == 2);
  for (const char* f : {"manifest.json", "summary.csv", "summary.json"}) CHECK(std::filesystem::exists(out / f));
  for (const char* f : {"metrics.csv", "metrics.json", "corruption.csv", "run.log", "encoder1.ckpt", "encoder2.ckpt"}) {
    CHECK(std::filesystem::exists(out / "seed_0" / f));
  }
  const auto saved = load_manifest(out / "manifest.json");
  CHECK_FALSE(saved.dataset_checksum.empty());
  CHECK_FALSE(saved.version.empty());

  const auto rows = emit_summary({out});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_seeds == 2);
  CHECK(rows[0].final_epoch == 1);
  CHECK(rows[0].mode == "cct");
  CHECK(rows[0].mean == doctest::Approx(res.mean_accuracy));
  CHECK(format_summary_table(rows).find("cct") != std::string::npos);
}

TEST_CASE("re-running a saved manifest reproduces metrics byte for byte") {
  test::TempDir dir;
  RunManifest m = tiny_manifest(TrainMode::cct);
  run_experiment(m, dir.path / "a");
  run_experiment(load_manifest(dir.path / "a" / "manifest.json"), dir.path / "b");
  CHECK(test::read_text(dir.path / "a/seed_0/metrics.csv") == test::read_text(dir.path / "b/seed_0/metrics.csv"));
  CHECK(test::read_text(dir.path / "a/seed_0/corruption.csv") ==
        test::read_text(dir.path / "b/seed_0/corruption.csv"));
}

TEST_CASE("parallel seeds match sequential seeds") {
  test::TempDir dir;
  RunManifest m = tiny_manifest(TrainMode::coteaching);
  m.num_seeds = 2;
  run_experiment(m, dir.path / "seq");
  m.jobs = 2;
  run_experiment(m, dir.path / "par");
  for (const char* s : {"seed_0", "seed_1"}) {
    CHECK(test::read_text(dir.path / "seq" / s / "metrics.csv") ==
          test::read_text(dir.path / "par" / s / "metrics.csv"));
  }
}

TEST_CASE("summary groups modes and refuses mixed datasets") {
  test::TempDir dir;
  run_experiment(tiny_manifest(TrainMode::cct), dir.path / "all" / "cct");
  run_experiment(tiny_manifest(TrainMode::ce_single), dir.path / "all" / "ce");
  const auto rows = emit_summary({dir.path / "all"});
  CHECK(rows.size() == 2);

  RunManifest other = tiny_manifest(TrainMode::cct);
  other.dataset.seed = 99;
  run_experiment(other, dir.path / "other");
  try {
    emit_summary({dir.path / "all", dir.path / "other"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("different datasets") != std::string::npos);
  }
}

TEST_CASE("summary of an empty directory") {
  test::TempDir dir;
  try {
    emit_summary({dir.path});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("no runs found") != std::string::npos);
  }
}

TEST_CASE("plots are written per run") {
  test::TempDir dir;
  run_experiment(tiny_manifest(TrainMode::ce_pair), dir.path / "r");
  CHECK(plot_runs(dir.path / "r") == 1);
  const std::string svg = test::read_text(dir.path / "r" / "accuracy_vs_epoch.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("invalid configurations fail before training") {
  test::TempDir dir;
  RunManifest m = tiny_manifest(TrainMode::cct);
  m.train.backbone.num_heads = 3;
  CHECK_THROWS_AS(run_experiment(m, dir.path / "bad"), Error);
}

}
