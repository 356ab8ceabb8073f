#pragma once

// stderr logging; verbosity from GNF_LOG_LEVEL (error, warn, info, debug; default warn).

#include <iostream>
#include <mutex>
#include <sstream>

namespace graphnf::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level threshold();
std::mutex& sink_mutex();

template <typename... Args>
void write(Level level, const char* tag, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::ostringstream os;
  os << "[" << tag << "] ";
  (os << ... << args);
  os << '\n';
  std::lock_guard lock(sink_mutex());
  std::cerr << os.str();
}

template <typename... Args>
void error(const Args&... args) { write(Level::Error, "error", args...); }
template <typename... Args>
void warn(const Args&... args) { write(Level::Warn, "warn", args...); }
template <typename... Args>
void info(const Args&... args) { write(Level::Info, "info", args...); }
template <typename... Args>
void debug(const Args&... args) { write(Level::Debug, "debug", args...); }

}  // namespace graphnf::log
