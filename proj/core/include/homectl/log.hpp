#pragma once

#include <functional>
#include <string_view>

namespace homectl {

enum class LogLevel { Debug, Info, Warn, Error };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Default sink writes warnings and errors to stderr. Thread-safe.
void set_log_sink(LogSink sink);
void log(LogLevel level, std::string_view message);

}  // namespace homectl
