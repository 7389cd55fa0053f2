#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace sas {

// Verbosity comes from the SAS_LOG environment variable: unset or empty is
// quiet, "info" prints phase progress, "debug" adds per-step chatter.

enum class LogLevel : int { Off = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("SAS_LOG");
        if (!env) return LogLevel::Off;
        const std::string v = env;
        if (v == "debug" || v == "2") return LogLevel::Debug;
        if (v == "info" || v == "1") return LogLevel::Info;
        return LogLevel::Off;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::Info))
        std::fprintf(stderr, "[sas] %s\n", msg.c_str());
}

inline void log_debug(const std::string& msg) {
    if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::Debug))
        std::fprintf(stderr, "[sas:debug] %s\n", msg.c_str());
}

} // namespace sas
