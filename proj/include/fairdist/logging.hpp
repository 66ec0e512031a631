#ifndef FAIRDIST_LOGGING_HPP
#define FAIRDIST_LOGGING_HPP

#include <iostream>
#include <sstream>
#include <string>

namespace fairdist::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

Level& threshold();
void set_threshold(Level lv);
Level level_from_string(const std::string& name);

// Messages go to stderr without timestamps so runs stay byte-reproducible.
void emit(Level lv, const std::string& msg);

inline void debug(const std::string& msg) { emit(Level::debug, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void warn(const std::string& msg) { emit(Level::warn, msg); }
inline void error(const std::string& msg) { emit(Level::error, msg); }

} // namespace fairdist::log

#endif
