#ifndef CCT_ERROR_HPP_
#define CCT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace cct {

enum class ErrorCode {
  invalid_spec = 1,
  invalid_data,
  invalid_input,
  numeric_failure,
  undefined_metric,
  format_error,
  io_error,
  internal,
};

const char* to_string(ErrorCode code) noexcept;

// All library failures are reported as cct::Error; the code maps 1:1 onto the
// C API status values.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

} // namespace cct

#endif // CCT_ERROR_HPP_
