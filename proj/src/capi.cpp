#include "cct/cct.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "cct/dataset.hpp"
#include "cct/error.hpp"
#include "cct/harness.hpp"
#include "cct/log.hpp"
#include "cct/noise_model.hpp"

struct cct_manifest {
  nlohmann::json doc;
};

struct cct_dataset {
  cct::LabeledDataset data;
};

namespace {

thread_local std::string g_last_error;

cct_status record(cct_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

template <typename F>
cct_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return CCT_OK;
  } catch (const cct::Error& e) {
    return record(static_cast<cct_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return record(CCT_ERR_INVALID_SPEC, e.what());
  } catch (const std::bad_alloc&) {
    return record(CCT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(CCT_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(CCT_ERR_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) cct::fail(cct::ErrorCode::invalid_input, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json::json_pointer pointer_for(const char* key) {
  std::string path = "/";
  for (const char* c = key; *c; ++c) path += *c == '.' ? '/' : *c;
  return nlohmann::json::json_pointer(path);
}

cct::RunManifest to_manifest(const cct_manifest* m) { return cct::manifest_from_json(m->doc); }

} // namespace

extern "C" {

const char* cct_version(void) {
  static const std::string v = cct::version_stamp();
  return v.c_str();
}

const char* cct_last_error(void) { return g_last_error.c_str(); }

const char* cct_status_name(cct_status status) {
  if (status == CCT_OK) return "ok";
  return cct::to_string(static_cast<cct::ErrorCode>(status));
}

void cct_string_free(char* s) { std::free(s); }

void cct_set_log_callback(cct_log_fn fn, void* user) {
  if (fn == nullptr) {
    cct::set_log_sink(nullptr);
    return;
  }
  cct::set_log_sink([fn, user](cct::LogLevel level, const std::string& msg) {
    fn(static_cast<int>(level), msg.c_str(), user);
  });
}

cct_status cct_manifest_new(cct_manifest** out) {
  return guarded([&] {
    require(out, "out");
    *out = new cct_manifest{cct::manifest_to_json(cct::RunManifest{})};
  });
}

cct_status cct_manifest_load(const char* path, cct_manifest** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new cct_manifest{cct::manifest_to_json(cct::load_manifest(path))};
  });
}

cct_status cct_manifest_save(const cct_manifest* m, const char* path) {
  return guarded([&] {
    require(m, "manifest");
    require(path, "path");
    cct::save_manifest(path, to_manifest(m));
  });
}

void cct_manifest_free(cct_manifest* m) { delete m; }

cct_status cct_manifest_set(cct_manifest* m, const char* key, const char* value) {
  return guarded([&] {
    require(m, "manifest");
    require(key, "key");
    require(value, "value");
    const auto ptr = pointer_for(key);
    if (!m->doc.contains(ptr)) {
      cct::fail(cct::ErrorCode::invalid_spec, std::string("unknown manifest key '") + key + "'");
    }
    nlohmann::json v = nlohmann::json::parse(value, nullptr, false);
    if (v.is_discarded()) v = std::string(value);
    nlohmann::json updated = m->doc;
    updated[ptr] = v;
    // Round-trip through the typed struct so bad values fail here.
    updated = cct::manifest_to_json(cct::manifest_from_json(updated));
    m->doc = std::move(updated);
  });
}

cct_status cct_manifest_get(const cct_manifest* m, const char* key, char** out) {
  return guarded([&] {
    require(m, "manifest");
    require(key, "key");
    require(out, "out");
    const auto ptr = pointer_for(key);
    if (!m->doc.contains(ptr)) {
      cct::fail(cct::ErrorCode::invalid_spec, std::string("unknown manifest key '") + key + "'");
    }
    const auto& v = m->doc.at(ptr);
    *out = dup_string(v.is_string() ? v.get<std::string>() : v.dump());
  });
}

cct_status cct_manifest_to_json(const cct_manifest* m, char** out) {
  return guarded([&] {
    require(m, "manifest");
    require(out, "out");
    *out = dup_string(m->doc.dump(2));
  });
}

cct_status cct_run_experiment(const cct_manifest* m, const char* out_dir, cct_run_summary* summary) {
  return guarded([&] {
    require(m, "manifest");
    require(out_dir, "out_dir");
    const auto result = cct::run_experiment(to_manifest(m), out_dir);
    if (summary != nullptr) {
      summary->num_seeds = static_cast<int>(result.seeds.size());
      summary->final_epoch = result.seeds.empty() ? 0 : result.seeds.back().final_epoch;
      summary->mean_accuracy = result.mean_accuracy;
      summary->std_accuracy = result.std_accuracy;
    }
  });
}

cct_status cct_summarize(const char* const* dirs, size_t count, const char* format, char** out) {
  return guarded([&] {
    require(out, "out");
    if (count > 0) require(dirs, "dirs");
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < count; ++i) {
      require(dirs[i], "directory");
      paths.emplace_back(dirs[i]);
    }
    if (paths.empty()) cct::fail(cct::ErrorCode::invalid_input, "no runs found");
    const std::string fmt = format ? format : "table";
    const auto rows = cct::emit_summary(paths);
    if (fmt == "table") {
      *out = dup_string(cct::format_summary_table(rows));
    } else if (fmt == "csv") {
      *out = dup_string(cct::format_summary_csv(rows));
    } else if (fmt == "json") {
      *out = dup_string(cct::summary_to_json(rows).dump(2) + "\n");
    } else {
      cct::fail(cct::ErrorCode::invalid_input, "unknown summary format '" + fmt + "'");
    }
  });
}

cct_status cct_plot(const char* dir, int* images_written) {
  return guarded([&] {
    require(dir, "dir");
    const int n = cct::plot_runs(dir);
    if (images_written != nullptr) *images_written = n;
  });
}

cct_status cct_transition_matrix(const char* kind, double tau, int num_classes, double* out) {
  return guarded([&] {
    require(kind, "kind");
    require(out, "out");
    cct::NoiseSpec spec;
    spec.kind = cct::parse_noise_kind(kind);
    spec.tau = tau;
    spec.num_classes = num_classes;
    const auto t = cct::build_transition_matrix(spec);
    for (int r = 0; r < num_classes; ++r) {
      for (int c = 0; c < num_classes; ++c) out[r * num_classes + c] = t(r, c);
    }
  });
}

cct_status cct_apply_noise(const char* kind, double tau, int num_classes, uint64_t seed,
                           const int* labels, size_t count, int* noisy_labels,
                           unsigned char* corrupted) {
  return guarded([&] {
    require(kind, "kind");
    if (count > 0) {
      require(labels, "labels");
      require(noisy_labels, "noisy_labels");
    }
    cct::NoiseSpec spec;
    spec.kind = cct::parse_noise_kind(kind);
    spec.tau = tau;
    spec.num_classes = num_classes;
    const auto t = cct::build_transition_matrix(spec);
    const auto rec = cct::apply_noise(std::span<const int>(labels, count), t, seed);
    for (size_t i = 0; i < count; ++i) {
      noisy_labels[i] = rec.noisy_labels[i];
      if (corrupted != nullptr) corrupted[i] = rec.corruption_mask[i] ? 1 : 0;
    }
  });
}

cct_status cct_dataset_load(const char* kind, const char* path, cct_dataset** out) {
  return guarded([&] {
    require(kind, "kind");
    require(out, "out");
    cct::DatasetSource source;
    source.kind = cct::parse_dataset_kind(kind);
    if (path != nullptr) source.path = path;
    auto* d = new cct_dataset{cct::load_dataset(source)};
    *out = d;
  });
}

cct_status cct_dataset_info_get(const cct_dataset* d, cct_dataset_info* info) {
  return guarded([&] {
    require(d, "dataset");
    require(info, "info");
    info->train_size = d->data.train_size();
    info->test_size = d->data.test_size();
    info->num_classes = d->data.num_classes;
    info->channels = d->data.shape.channels;
    info->height = d->data.shape.height;
    info->width = d->data.shape.width;
    std::memset(info->checksum, 0, sizeof info->checksum);
    std::strncpy(info->checksum, d->data.checksum.c_str(), sizeof info->checksum - 1);
  });
}

cct_status cct_dataset_train_labels(const cct_dataset* d, int* out, size_t capacity) {
  return guarded([&] {
    require(d, "dataset");
    require(out, "out");
    if (capacity < d->data.train_size()) {
      cct::fail(cct::ErrorCode::invalid_input, "label buffer holds " + std::to_string(capacity) +
                                                   " entries, need " +
                                                   std::to_string(d->data.train_size()));
    }
    std::copy(d->data.train_labels.begin(), d->data.train_labels.end(), out);
  });
}

void cct_dataset_free(cct_dataset* d) { delete d; }

} // extern "C"
