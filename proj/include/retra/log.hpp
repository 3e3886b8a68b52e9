#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace retra {

enum class log_level { error = 0, info = 1, debug = 2 };

// Level comes from REGIME_TRADER_LOG (error|info|debug); default info.
inline log_level& current_log_level() {
    static log_level lvl = [] {
        const char* env = std::getenv("REGIME_TRADER_LOG");
        if (env == nullptr) return log_level::info;
        if (std::strcmp(env, "error") == 0) return log_level::error;
        if (std::strcmp(env, "debug") == 0) return log_level::debug;
        return log_level::info;
    }();
    return lvl;
}

template <typename... Args>
void log_at(log_level lvl, const char* fmt, Args... args) {
    if (static_cast<int>(lvl) > static_cast<int>(current_log_level())) return;
    const char* tag = lvl == log_level::error ? "error" : lvl == log_level::info ? "info" : "debug";
    std::fprintf(stderr, "[%s] ", tag);
    if constexpr (sizeof...(Args) == 0)
        std::fputs(fmt, stderr);
    else
        std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

template <typename... Args>
void log_error(const char* fmt, Args... args) { log_at(log_level::error, fmt, args...); }
template <typename... Args>
void log_info(const char* fmt, Args... args) { log_at(log_level::info, fmt, args...); }
template <typename... Args>
void log_debug(const char* fmt, Args... args) { log_at(log_level::debug, fmt, args...); }

}
