#include "flowad/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace flowad
{
namespace
{

LogLevel threshold_from_env()
{
  const char* env = std::getenv("FLOWAD_LOG");
  if (env == nullptr) return LogLevel::kWarning;
  const std::string_view v(env);
  if (v == "debug") return LogLevel::kDebug;
  if (v == "info") return LogLevel::kInfo;
  if (v == "error") return LogLevel::kError;
  if (v == "off") return LogLevel::kOff;
  return LogLevel::kWarning;
}

const char* label(LogLevel level)
{
  switch (level)
  {
    case LogLevel::kDebug: return "debug";
    case LogLevel::kInfo: return "info";
    case LogLevel::kWarning: return "warning";
    case LogLevel::kError: return "error";
    case LogLevel::kOff: break;
  }
  return "";
}

std::mutex& sink_mutex()
{
  static std::mutex m;
  return m;
}

LogSink& current_sink()
{
  static LogSink sink = [](LogLevel level, const std::string& message) {
    static const LogLevel threshold = threshold_from_env();
    if (level < threshold) return;
    std::cerr << "flowad " << label(level) << ": " << message << '\n';
  };
  return sink;
}

}  // namespace

LogSink set_log_sink(LogSink sink)
{
  std::lock_guard lock(sink_mutex());
  LogSink previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

void log_message(LogLevel level, const std::string& message)
{
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, message);
}

}  // namespace flowad
