#include "fairdist/logging.hpp"

#include "fairdist/errors.hpp"

namespace fairdist::log {

Level& threshold() {
    static Level lv = Level::info;
    return lv;
}

void set_threshold(Level lv) { threshold() = lv; }

Level level_from_string(const std::string& name) {
    if (name == "debug") return Level::debug;
    if (name == "info") return Level::info;
    if (name == "warn") return Level::warn;
    if (name == "error") return Level::error;
    if (name == "off") return Level::off;
    throw validation_error("unknown log level: " + name);
}

void emit(Level lv, const std::string& msg) {
    if (lv < threshold()) return;
    const char* tag = "";
    switch (lv) {
        case Level::debug: tag = "[debug] "; break;
        case Level::info: tag = "[info] "; break;
        case Level::warn: tag = "[warn] "; break;
        case Level::error: tag = "[error] "; break;
        case Level::off: return;
    }
    std::cerr << tag << msg << '\n';
}

} // namespace fairdist::log
