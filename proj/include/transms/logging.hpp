#pragma once

#include <string>

namespace transms::log {

enum class Level { kDebug, kInfo, kWarn, kError, kOff };

Level parse_level(const std::string& name);
void set_level(Level level);
Level level();

/// One line on stderr: "<level> <event> key=value ...".
void write(Level level, const std::string& event, const std::string& fields = {});
inline void debug(const std::string& e, const std::string& f = {}) { write(Level::kDebug, e, f); }
inline void info(const std::string& e, const std::string& f = {}) { write(Level::kInfo, e, f); }
inline void warn(const std::string& e, const std::string& f = {}) { write(Level::kWarn, e, f); }

}  // namespace transms::log
