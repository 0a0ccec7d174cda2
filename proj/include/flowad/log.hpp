#pragma once

#include <functional>
#include <string>

namespace flowad
{

enum class LogLevel { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kOff = 4 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Installs a sink and returns the previous one. The default sink writes to
/// standard error, filtered by the FLOWAD_LOG environment variable
/// (debug|info|warning|error|off, default warning).
LogSink set_log_sink(LogSink sink);

void log_message(LogLevel level, const std::string& message);

inline void warn(const std::string& message) { log_message(LogLevel::kWarning, message); }
inline void info(const std::string& message) { log_message(LogLevel::kInfo, message); }

}  // namespace flowad
