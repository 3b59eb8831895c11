#include "cct/cotrainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cct/error.hpp"
#include "cct/log.hpp"
#include "cct/random.hpp"

namespace cct {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "cct") return TrainMode::cct;
  if (name == "coteaching") return TrainMode::coteaching;
  if (name == "ce_single") return TrainMode::ce_single;
  if (name == "ce_pair") return TrainMode::ce_pair;
  fail(ErrorCode::invalid_spec, "unknown training mode '" + name + "'");
}

std::string to_string(TrainMode mode) {
  switch (mode) {
  case TrainMode::cct: return "cct";
  case TrainMode::coteaching: return "coteaching";
  case TrainMode::ce_single: return "ce_single";
  case TrainMode::ce_pair: return "ce_pair";
  }
  return "cct";
}

void TrainConfig::validate() const {
  backbone.validate();
  optimizer.validate();
  loss.validate();
  schedule.validate();
  if (epochs < 1) fail(ErrorCode::invalid_spec, "epochs must be positive");
  if (batch_size < 1 || eval_batch_size < 1) fail(ErrorCode::invalid_spec, "batch sizes must be positive");
  if (seeds.init1 == seeds.init2) fail(ErrorCode::invalid_spec, "encoder init seeds must differ");
  if (mode == TrainMode::cct && loss.lambda == 0.0) {
    log(LogLevel::warn, "cct mode with lambda = 0 reduces to co-teaching");
  }
}

double TrainConfig::effective_lambda() const {
  return mode == TrainMode::cct ? loss.lambda : 0.0;
}

template <typename T>
CoTrainer<T>::CoTrainer(TrainConfig config, std::size_t total_steps)
    : config_(std::move(config)),
      pair_(make_encoder_pair<T>(config_.backbone, config_.seeds.init1, config_.seeds.init2)),
      opt1_(config_.optimizer, pair_.first->parameters(), total_steps),
      opt2_(config_.optimizer, pair_.second->parameters(), total_steps),
      dropout1_(derive_seed(config_.seeds.dropout, 1)),
      dropout2_(derive_seed(config_.seeds.dropout, 2)) {
  config_.validate();
}

namespace {

template <typename T>
double batch_mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::size_t count_clean(const std::vector<std::size_t>& idx, const std::vector<bool>& mask) {
  if (mask.empty()) return 0;
  std::size_t clean = 0;
  for (std::size_t i : idx) clean += mask[i] ? 0 : 1;
  return clean;
}

} // namespace

template <typename T>
StepMetrics CoTrainer<T>::train_step(const Mat<T>& images, std::span<const int> noisy_labels,
                                     const std::vector<bool>& corruption_mask, int epoch) {
  const auto k = static_cast<std::size_t>(images.rows());
  if (k == 0) fail(ErrorCode::invalid_input, "empty mini-batch");
  if (noisy_labels.size() != k) fail(ErrorCode::invalid_input, "label count differs from batch size");
  if (!corruption_mask.empty() && corruption_mask.size() != k) {
    fail(ErrorCode::invalid_input, "corruption mask length differs from batch size");
  }

  StepMetrics m;
  const bool pair = config_.trains_second();
  const double lambda = config_.effective_lambda();

  auto out1 = pair_.first->forward(images, true, &dropout1_);
  EncoderOutput<T> out2;
  if (pair) out2 = pair_.second->forward(images, true, &dropout2_);

  const std::vector<double> ce1 = cross_entropy_per_sample(out1.probabilities, noisy_labels);
  std::vector<double> ce2;
  if (pair) ce2 = cross_entropy_per_sample(out2.probabilities, noisy_labels);

  if (config_.uses_selection()) {
    m.remember = remember_count(epoch, k, config_.schedule);
    m.selection = cross_exchange(ce1, ce2, m.remember);
  } else {
    m.remember = k;
    std::vector<std::size_t> all(k);
    std::iota(all.begin(), all.end(), std::size_t{0});
    m.selection = {all, pair ? all : std::vector<std::size_t>{}, k};
  }

  ContrastiveGradient<T> con;
  if (pair) {
    con = contrastive_loss_with_grad(ContrastiveBatch<T>{out1.features, out2.features},
                                     config_.loss.temperature);
    m.contrastive = con.loss;
    if (!std::isfinite(con.loss)) fail(ErrorCode::numeric_failure, "contrastive loss is not finite");
  }

  auto update = [&](Encoder<T>& enc, Optimizer<T>& opt, const EncoderOutput<T>& out,
                    const std::vector<double>& ce, const std::vector<std::size_t>& selected,
                    const Mat<T>& d_con, int index) {
    EncoderStep s;
    s.ce_selected = selected_classification_loss(ce, selected).value;
    s.ce_mean = batch_mean<T>(ce);
    s.objective = combined_loss(s.ce_selected, pair ? m.contrastive : 0.0, lambda);
    s.selected = selected.size();
    s.selected_clean = count_clean(selected, corruption_mask);
    if (!std::isfinite(s.objective)) {
      fail(ErrorCode::numeric_failure, "objective of encoder " + std::to_string(index) + " is not finite");
    }
    Mat<T> d_logits = selected_cross_entropy_logit_grad(out.probabilities, noisy_labels, selected);
    Mat<T> d_features = Mat<T>::Zero(out.features.rows(), out.features.cols());
    if (lambda > 0.0) d_features = static_cast<T>(lambda) * d_con;
    enc.parameters().zero_grad();
    enc.backward(d_features, d_logits);
    opt.step(enc.parameters());
    m.encoders.push_back(s);
  };

  update(*pair_.first, opt1_, out1, ce1, m.selection.first, con.d_first, 1);
  if (pair) update(*pair_.second, opt2_, out2, ce2, m.selection.second, con.d_second, 2);
  return m;
}

template <typename T>
double evaluate(Encoder<T>& encoder, const MatrixF& images, std::span<const int> labels,
                std::size_t batch_size) {
  const auto n = static_cast<std::size_t>(images.rows());
  if (n == 0) fail(ErrorCode::invalid_input, "cannot evaluate on an empty test set");
  if (labels.size() != n) fail(ErrorCode::invalid_input, "test label count differs from image count");
  if (batch_size == 0) batch_size = n;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min(batch_size, n - start);
    Mat<T> chunk = images.middleRows(static_cast<Eigen::Index>(start),
                                     static_cast<Eigen::Index>(len))
                       .template cast<T>();
    const auto out = encoder.forward(chunk, false);
    for (std::size_t i = 0; i < len; ++i) {
      const auto row = out.logits.row(static_cast<Eigen::Index>(i));
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < row.size(); ++c) {
        if (row(c) > row(best)) best = c;
      }
      correct += best == labels[start + i] ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrainResult train_run(const LabeledDataset& dataset, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n = dataset.train_size();
  if (n == 0) fail(ErrorCode::invalid_input, "training split is empty");
  if (dataset.noisy_labels.size() != n || dataset.corruption_mask.size() != n) {
    fail(ErrorCode::invalid_input, "dataset lacks noisy labels for every training sample");
  }
  if (dataset.test_size() == 0) fail(ErrorCode::invalid_input, "test split is empty");
  if (config.backbone.input_dim() != dataset.shape.size() ||
      config.backbone.num_classes != dataset.num_classes) {
    fail(ErrorCode::invalid_spec, "backbone config does not match the dataset shape or classes");
  }

  const std::size_t k = config.batch_size;
  const std::size_t batches = (n + k - 1) / k;
  TrainResult result;
  result.trainer = std::make_unique<CoTrainer<float>>(config, batches * static_cast<std::size_t>(config.epochs));
  auto& trainer = *result.trainer;

  Rng order_rng(config.seeds.data_order);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const int trained = config.trains_second() ? 2 : 1;
  const auto t0 = std::chrono::steady_clock::now();

  MatrixF batch;
  std::vector<int> labels;
  std::vector<bool> mask;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    std::vector<double> ce_sel(trained, 0.0), ce_sum(trained, 0.0), contrastive(trained, 0.0);
    std::vector<std::size_t> selected(trained, 0), clean(trained, 0);
    std::size_t seen = 0;

    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t start = b * k;
      const std::size_t len = std::min(k, n - start);
      batch.resize(static_cast<Eigen::Index>(len), dataset.train_images.cols());
      labels.resize(len);
      mask.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t src = order[start + i];
        batch.row(static_cast<Eigen::Index>(i)) = dataset.train_images.row(static_cast<Eigen::Index>(src));
        labels[i] = dataset.noisy_labels[src];
        mask[i] = dataset.corruption_mask[src];
      }
      StepMetrics sm;
      try {
        sm = trainer.train_step(batch, labels, mask, epoch);
      } catch (const Error& e) {
        std::ostringstream os;
        os << "epoch " << epoch << ", batch " << b << ": " << e.what();
        throw Error(e.code(), os.str());
      }
      for (int v = 0; v < trained; ++v) {
        ce_sel[v] += sm.encoders[v].ce_selected;
        ce_sum[v] += sm.encoders[v].ce_mean * static_cast<double>(len);
        contrastive[v] += sm.contrastive;
        selected[v] += sm.encoders[v].selected;
        clean[v] += sm.encoders[v].selected_clean;
      }
      seen += len;
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    for (int v = 0; v < trained; ++v) {
      EncoderMetrics em;
      em.encoder = v + 1;
      em.ce_selected = ce_sel[v] / static_cast<double>(batches);
      em.ce_mean = ce_sum[v] / static_cast<double>(seen);
      em.contrastive = contrastive[v] / static_cast<double>(batches);
      Encoder<float>& enc = v == 0 ? trainer.first() : trainer.second();
      em.test_accuracy = evaluate(enc, dataset.test_images, dataset.test_labels, config.eval_batch_size);
      em.selection_precision =
          selected[v] > 0 ? static_cast<double>(clean[v]) / static_cast<double>(selected[v])
                          : std::numeric_limits<double>::quiet_NaN();
      rec.encoders.push_back(em);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

template class CoTrainer<float>;
template class CoTrainer<double>;
template double evaluate(Encoder<float>&, const MatrixF&, std::span<const int>, std::size_t);
template double evaluate(Encoder<double>&, const MatrixF&, std::span<const int>, std::size_t);

} // namespace cct
