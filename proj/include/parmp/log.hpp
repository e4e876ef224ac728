#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace parmp {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Log level comes from the PARMP_LOG environment variable
// (error|warn|info|debug); default is warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("PARMP_LOG");
        if (env == nullptr) return LogLevel::Warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_msg(LogLevel level, const char* tag, const char* fmt, va_list args) {
    if (level > log_level()) return;
    std::fprintf(stderr, "[%s] ", tag);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
}

inline void log_error(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    log_msg(LogLevel::Error, "error", fmt, args);
    va_end(args);
}

inline void log_warn(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    log_msg(LogLevel::Warn, "warn", fmt, args);
    va_end(args);
}

inline void log_info(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    log_msg(LogLevel::Info, "info", fmt, args);
    va_end(args);
}

inline void log_debug(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    log_msg(LogLevel::Debug, "debug", fmt, args);
    va_end(args);
}

}  // namespace parmp
