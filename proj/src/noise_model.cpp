#include "cct/noise_model.hpp"

#include <fstream>
#include <sstream>

#include "cct/config_io.hpp"
#include "cct/error.hpp"
#include "cct/log.hpp"
#include "cct/random.hpp"

namespace cct {

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "none") return NoiseKind::none;
  if (name == "symmetric") return NoiseKind::symmetric;
  if (name == "pairflip") return NoiseKind::pairflip;
  fail(ErrorCode::invalid_spec, "unknown noise kind '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
  case NoiseKind::none: return "none";
  case NoiseKind::symmetric: return "symmetric";
  case NoiseKind::pairflip: return "pairflip";
  }
  return "none";
}

std::size_t CorruptionRecord::num_corrupted() const {
  std::size_t n = 0;
  for (bool b : corruption_mask) n += b ? 1 : 0;
  return n;
}

double CorruptionRecord::corrupted_fraction() const {
  if (corruption_mask.empty()) return 0.0;
  return static_cast<double>(num_corrupted()) / static_cast<double>(corruption_mask.size());
}

TransitionMatrix build_transition_matrix(const NoiseSpec& spec) {
  const int m = spec.num_classes;
  if (m < 2) fail(ErrorCode::invalid_spec, "noise model needs at least 2 classes");
  if (!(spec.tau >= 0.0 && spec.tau <= 1.0)) {
    fail(ErrorCode::invalid_spec, "noise rate must lie in [0, 1]");
  }

  TransitionMatrix t;
  t.num_classes = m;
  t.entries = MatrixD::Identity(m, m);
  const double tau = spec.tau;

  switch (spec.kind) {
  case NoiseKind::none:
    break;
  case NoiseKind::symmetric: {
    const double off = tau / static_cast<double>(m - 1);
    t.entries.setConstant(off);
    t.entries.diagonal().setConstant(1.0 - tau);
    break;
  }
  case NoiseKind::pairflip:
    if (tau >= 0.5) {
      log(LogLevel::warn, "pairflip noise with tau >= 0.5 makes the flipped class the majority");
    }
    t.entries.diagonal().setConstant(1.0 - tau);
    for (int c = 0; c < m; ++c) t.entries(c, (c + 1) % m) = tau;
    break;
  }
  return t;
}

CorruptionRecord apply_noise(std::span<const int> true_labels,
                             const TransitionMatrix& matrix, std::uint64_t seed) {
  const int m = matrix.num_classes;
  CorruptionRecord rec;
  rec.noisy_labels.resize(true_labels.size());
  rec.corruption_mask.resize(true_labels.size());

  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int y = true_labels[i];
    if (y < 0 || y >= m) {
      std::ostringstream os;
      os << "label " << y << " at index " << i << " outside [0, " << m << ")";
      fail(ErrorCode::invalid_data, os.str());
    }
    const double u = counter_uniform(seed, 0x6E6F697365ULL, i);
    // Inverse CDF over the row; falls back to the last class with mass when
    // rounding leaves u above the accumulated total.
    int drawn = -1;
    int last_positive = y;
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      const double p = matrix(y, j);
      if (p <= 0.0) continue;
      last_positive = j;
      acc += p;
      if (u < acc) {
        drawn = j;
        break;
      }
    }
    if (drawn < 0) drawn = last_positive;
    rec.noisy_labels[i] = drawn;
    rec.corruption_mask[i] = drawn != y;
  }
  return rec;
}

void write_corruption_csv(const std::filesystem::path& path,
                          std::span<const int> true_labels,
                          const CorruptionRecord& record) {
  if (true_labels.size() != record.noisy_labels.size()) {
    fail(ErrorCode::invalid_input, "corruption record length does not match labels");
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out << "index,true_label,noisy_label,corrupted\n";
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    out << i << ',' << true_labels[i] << ',' << record.noisy_labels[i] << ','
        << (record.corruption_mask[i] ? 1 : 0) << '\n';
  }
  if (!out) fail(ErrorCode::io_error, "short write to " + path.string());
}

CorruptionRecord read_corruption_csv(const std::filesystem::path& path,
                                     std::vector<int>* true_labels) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "index,true_label,noisy_label,corrupted") {
    fail(ErrorCode::format_error, path.string() + ": unexpected header");
  }
  CorruptionRecord rec;
  if (true_labels) true_labels->clear();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long index = 0;
    int y = 0, noisy = 0, flag = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ls >> index >> c1 >> y >> c2 >> noisy >> c3 >> flag) ||
        index != static_cast<long>(row)) {
      fail(ErrorCode::format_error, path.string() + ": malformed row " + std::to_string(row));
    }
    rec.noisy_labels.push_back(noisy);
    rec.corruption_mask.push_back(flag != 0);
    if (true_labels) true_labels->push_back(y);
    ++row;
  }
  return rec;
}

void to_json(nlohmann::json& j, const NoiseSpec& s) {
  j = {{"kind", to_string(s.kind)}, {"tau", s.tau}, {"num_classes", s.num_classes}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, NoiseSpec& s) {
  s.kind = parse_noise_kind(j.value("kind", to_string(s.kind)));
  s.tau = j.value("tau", s.tau);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.seed = j.value("seed", s.seed);
}

} // namespace cct
