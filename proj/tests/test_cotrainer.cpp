#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <vector>

#include "cct/cotrainer.hpp"
#include "cct/dataset.hpp"
#include "cct/error.hpp"
#include "cct/log.hpp"

using namespace cct;

namespace {

BackboneConfig small_backbone(int size, int classes) {
  BackboneConfig c;
  c.channels = 1;
  c.height = size;
  c.width = size;
  c.patch_size = 4;
  c.embed_dim = 16;
  c.depth = 1;
  c.num_heads = 2;
  c.num_classes = classes;
  return c;
}

LabeledDataset blobs(int classes, int per_class, std::uint64_t seed = 0) {
  DatasetSource s;
  s.kind = DatasetKind::synthetic_blobs;
  s.num_classes = classes;
  s.samples_per_class = per_class;
  s.test_samples_per_class = 40;
  s.seed = seed;
  return load_dataset(s);
}

TrainConfig config_for(TrainMode mode, const LabeledDataset& d) {
  TrainConfig t;
  t.mode = mode;
  t.backbone = small_backbone(d.shape.height, d.num_classes);
  t.batch_size = 16;
  t.epochs = 3;
  t.schedule.tau = 0.3;
  t.schedule.warmup_epochs = 2;
  return t;
}

bool same_parameters(Encoder<float>& a, Encoder<float>& b) {
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& x = a.parameters()[i].value;
    const auto& y = b.parameters()[i].value;
    if (std::memcmp(x.data(), y.data(), sizeof(float) * x.size()) != 0) return false;
  }
  return true;
}

struct Batch {
  MatrixF images;
  std::vector<int> labels;
  std::vector<bool> mask;
};

Batch take(const LabeledDataset& d, int start, int k) {
  Batch b;
  b.images = d.train_images.middleRows(start, k);
  b.labels.assign(d.noisy_labels.begin() + start, d.noisy_labels.begin() + start + k);
  b.mask.assign(d.corruption_mask.begin() + start, d.corruption_mask.begin() + start + k);
  return b;
}

} // namespace

TEST_SUITE("cotrainer") {

TEST_CASE("mode names") {
  for (auto m : {TrainMode::cct, TrainMode::coteaching, TrainMode::ce_single, TrainMode::ce_pair}) {
    CHECK(parse_train_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_train_mode("jocor"), Error);
}

TEST_CASE("effective lambda and roles per mode") {
  TrainConfig t;
  t.loss.lambda = 0.25;
  t.mode = TrainMode::cct;
  CHECK(t.effective_lambda() == 0.25);
  CHECK(t.uses_selection());
  t.mode = TrainMode::coteaching;
  CHECK(t.effective_lambda() == 0.0);
  CHECK(t.uses_selection());
  t.mode = TrainMode::ce_pair;
  CHECK(t.effective_lambda() == 0.0);
  CHECK_FALSE(t.uses_selection());
  CHECK(t.trains_second());
  t.mode = TrainMode::ce_single;
  CHECK_FALSE(t.trains_second());
}

TEST_CASE("default optimizer settings") {
  TrainConfig t;
  CHECK(t.optimizer.learning_rate == 5e-4);
  CHECK(t.optimizer.cosine_decay);
  CHECK(t.loss.lambda == 1e-4);
  CHECK(t.loss.temperature == 0.5);
}

TEST_CASE("step metrics follow the schedule and selection") {
  auto d = blobs(3, 40);
  NoiseSpec noise{NoiseKind::symmetric, 0.3, 3, 5};
  inject_noise(d, noise);
  TrainConfig t = config_for(TrainMode::cct, d);
  CoTrainer<float> trainer(t, 10);
  const Batch b = take(d, 0, 16);
  const auto m0 = trainer.train_step(b.images, b.labels, b.mask, 0);
  CHECK(m0.remember == 16);
  CHECK(m0.encoders.size() == 2);
  CHECK(std::isfinite(m0.contrastive));
  const auto m2 = trainer.train_step(b.images, b.labels, b.mask, 2);
  CHECK(m2.remember == 12);
  CHECK(m2.selection.first.size() == 12);
  CHECK(m2.encoders[0].selected == 12);
  CHECK(m2.encoders[0].objective ==
        doctest::Approx(m2.encoders[0].ce_selected + 1e-4 * m2.contrastive).epsilon(1e-12));
}

TEST_CASE("ce modes update on the whole batch") {
  auto d = blobs(3, 20);
  for (auto mode : {TrainMode::ce_single, TrainMode::ce_pair}) {
    TrainConfig t = config_for(mode, d);
    CoTrainer<float> trainer(t, 10);
    const Batch b = take(d, 0, 8);
    const auto m = trainer.train_step(b.images, b.labels, b.mask, 5);
    CHECK(m.remember == 8);
    CHECK(m.encoders.size() == (mode == TrainMode::ce_pair ? 2u : 1u));
    CHECK(m.encoders[0].selected == 8);
    CHECK(std::isnan(m.contrastive) == (mode == TrainMode::ce_single));
  }
}

TEST_CASE("cct with lambda zero reproduces co-teaching bit for bit") {
  auto d = blobs(3, 40);
  inject_noise(d, NoiseSpec{NoiseKind::pairflip, 0.3, 3, 9});
  TrainConfig ct = config_for(TrainMode::coteaching, d);
  TrainConfig cc = ct;
  cc.mode = TrainMode::cct;
  cc.loss.lambda = 0.0;
  set_log_sink([](LogLevel, const std::string&) {});
  CoTrainer<float> a(ct, 20), b(cc, 20);
  set_log_sink(nullptr);
  for (int step = 0; step < 6; ++step) {
    const Batch batch = take(d, 16 * step, 16);
    const auto ma = a.train_step(batch.images, batch.labels, batch.mask, step);
    const auto mb = b.train_step(batch.images, batch.labels, batch.mask, step);
    CHECK(ma.selection.first == mb.selection.first);
    CHECK(ma.selection.second == mb.selection.second);
  }
  CHECK(same_parameters(a.first(), b.first()));
  CHECK(same_parameters(a.second(), b.second()));
}

TEST_CASE("unselected samples reach the update only through the contrastive term") {
  auto d = blobs(3, 20);
  TrainConfig base = config_for(TrainMode::coteaching, d);
  base.schedule.tau = 0.5;
  base.schedule.ramp = false;
  const Batch batch = take(d, 0, 8);

  auto run = [&](TrainMode mode, double lambda, const MatrixF& images) {
    TrainConfig t = base;
    t.mode = mode;
    t.loss.lambda = lambda;
    auto trainer = std::make_unique<CoTrainer<float>>(t, 4);
    const auto m = trainer->train_step(images, batch.labels, batch.mask, 0);
    return std::make_pair(std::move(trainer), m.selection);
  };

  auto [probe, sel] = run(TrainMode::coteaching, 0.0, batch.images);
  std::size_t outside = 0;
  while (std::find(sel.first.begin(), sel.first.end(), outside) != sel.first.end()) ++outside;
  MatrixF perturbed = batch.images;
  perturbed.row(static_cast<Eigen::Index>(outside)).array() += 1e-3f;

  auto [ct_a, sel_a] = run(TrainMode::coteaching, 0.0, batch.images);
  auto [ct_b, sel_b] = run(TrainMode::coteaching, 0.0, perturbed);
  REQUIRE(sel_a.first == sel_b.first);
  CHECK(same_parameters(ct_a->first(), ct_b->first()));

  auto [cc_a, sa] = run(TrainMode::cct, 0.5, batch.images);
  auto [cc_b, sb] = run(TrainMode::cct, 0.5, perturbed);
  REQUIRE(sa.first == sb.first);
  CHECK_FALSE(same_parameters(cc_a->first(), cc_b->first()));
}

TEST_CASE("invalid step inputs") {
  auto d = blobs(3, 10);
  CoTrainer<float> trainer(config_for(TrainMode::cct, d), 4);
  const Batch b = take(d, 0, 4);
  CHECK_THROWS_AS(trainer.train_step(MatrixF(0, b.images.cols()), {}, {}, 0), Error);
  const std::vector<int> short_labels = {0, 1};
  CHECK_THROWS_AS(trainer.train_step(b.images, short_labels, {}, 0), Error);
}

TEST_CASE("evaluate breaks argmax ties toward the smaller class") {
  auto d = blobs(3, 10);
  BackboneConfig c = small_backbone(d.shape.height, 3);
  c.kind = BackboneKind::mlp;
  c.mlp_hidden = 4;
  auto enc = make_encoder<float>(c, 1);
  for (auto& p : enc->parameters()) {
    if (p.name.rfind("head.", 0) == 0) p.value.setZero();
  }
  std::size_t zeros = 0;
  for (int y : d.test_labels) zeros += y == 0 ? 1 : 0;
  CHECK(evaluate(*enc, d.test_images, d.test_labels) ==
        doctest::Approx(static_cast<double>(zeros) / d.test_size()));
}

TEST_CASE("evaluate rejects an empty test set") {
  auto enc = make_encoder<float>(small_backbone(8, 3), 1);
  try {
    evaluate(*enc, MatrixF(0, 64), std::vector<int>{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_input);
  }
}

TEST_CASE("training is deterministic") {
  auto d = blobs(3, 30);
  inject_noise(d, NoiseSpec{NoiseKind::symmetric, 0.2, 3, 2});
  const TrainConfig t = config_for(TrainMode::cct, d);
  const auto a = train_run(d, t);
  const auto b = train_run(d, t);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t e = 0; e < a.metrics.size(); ++e) {
    for (std::size_t v = 0; v < 2; ++v) {
      CHECK(a.metrics[e].encoders[v].ce_selected == b.metrics[e].encoders[v].ce_selected);
      CHECK(a.metrics[e].encoders[v].test_accuracy == b.metrics[e].encoders[v].test_accuracy);
    }
  }
  CHECK(same_parameters(a.trainer->first(), b.trainer->first()));
}

TEST_CASE("clean synthetic data is learned by a single encoder") {
  auto d = blobs(4, 100, 3);
  TrainConfig t = config_for(TrainMode::ce_single, d);
  t.epochs = 20;
  t.batch_size = 32;
  t.schedule.tau = 0.0;
  t.optimizer.learning_rate = 1e-3;
  const auto r = train_run(d, t);
  double best = 0.0;
  for (const auto& m : r.metrics) best = std::max(best, m.encoders[0].test_accuracy);
  CHECK(best >= 0.95);
  CHECK(r.metrics.back().encoders.size() == 1);
}

TEST_CASE("selection precision is reported per encoder") {
  auto d = blobs(3, 60);
  inject_noise(d, NoiseSpec{NoiseKind::symmetric, 0.4, 3, 4});
  TrainConfig t = config_for(TrainMode::coteaching, d);
  t.schedule.tau = 0.4;
  const auto r = train_run(d, t);
  for (const auto& e : r.metrics.back().encoders) {
    CHECK(e.selection_precision >= 0.0);
    CHECK(e.selection_precision <= 1.0);
  }
}

TEST_CASE("training rejects a dataset that does not match the backbone") {
  auto d = blobs(3, 10);
  TrainConfig t = config_for(TrainMode::cct, d);
  t.backbone.num_classes = 4;
  CHECK_THROWS_AS(train_run(d, t), Error);
}

TEST_CASE("random initialisation is near chance on MNIST") {
  const auto dir = default_data_root() / "mnist";
  if (!std::filesystem::exists(dir / "t10k-images-idx3-ubyte")) {
    MESSAGE("MNIST not found under " << dir << "; skipped");
    return;
  }
  DatasetSource s;
  s.kind = DatasetKind::mnist_idx;
  s.train_limit = 100;
  const auto d = load_dataset(s);
  BackboneConfig c;
  c.patch_size = 7;
  c.embed_dim = 64;
  c.depth = 2;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto enc = make_encoder<float>(c, seed);
    const double acc = evaluate(*enc, d.test_images, d.test_labels);
    CAPTURE(seed);
    CHECK(std::abs(acc - 0.1) <= 0.03);
  }
}

}
