#include "cct/error.hpp"
#include "cct/log.hpp"

#include <iostream>
#include <mutex>

namespace cct {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::invalid_spec: return "invalid-spec";
  case ErrorCode::invalid_data: return "invalid-data";
  case ErrorCode::invalid_input: return "invalid-input";
  case ErrorCode::numeric_failure: return "numeric-failure";
  case ErrorCode::undefined_metric: return "undefined-metric";
  case ErrorCode::format_error: return "format-error";
  case ErrorCode::io_error: return "io-error";
  case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void stderr_sink(LogLevel level, const std::string& msg) {
  if (level >= LogLevel::warn) {
    std::cerr << (level == LogLevel::warn ? "warning: " : "error: ") << msg << '\n';
  }
}

LogSink& sink() {
  static LogSink s = stderr_sink;
  return s;
}

} // namespace

void set_log_sink(LogSink s) {
  std::lock_guard lock(sink_mutex());
  sink() = s ? std::move(s) : LogSink(stderr_sink);
}

void log(LogLevel level, const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(level, message);
}

} // namespace cct
