#include "graphnf/log.hpp"

#include <cstdlib>
#include <string>

namespace graphnf::log {

Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("GNF_LOG_LEVEL");
    const std::string v = env ? env : "";
    if (v == "error") return Level::Error;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
  }();
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace graphnf::log
