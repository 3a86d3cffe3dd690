#include "transms/logging.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include "transms/common.hpp"

namespace transms::log {

namespace {
std::atomic<Level> g_level{Level::kInfo};
std::mutex g_mutex;
const char* names[] = {"debug", "info", "warn", "error", "off"};
}  // namespace

Level parse_level(const std::string& name) {
  for (int i = 0; i < 5; ++i)
    if (name == names[i]) return Level(i);
  throw ConfigError("unknown log level '" + name + "'", "log_level");
}

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lvl, const std::string& event, const std::string& fields) {
  if (lvl < g_level.load() || lvl == Level::kOff) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fprintf(stderr, "%s %s%s%s\n", names[int(lvl)], event.c_str(), fields.empty() ? "" : " ", fields.c_str());
}

}  // namespace transms::log
