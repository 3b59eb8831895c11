#ifndef CCT_LOG_HPP_
#define CCT_LOG_HPP_

#include <functional>
#include <string>

namespace cct {

enum class LogLevel { debug, info, warn, error };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Process-wide sink; defaults to stderr for warn and above. An empty sink
// restores the default.
void set_log_sink(LogSink sink);
void log(LogLevel level, const std::string& message);

} // namespace cct

#endif // CCT_LOG_HPP_
