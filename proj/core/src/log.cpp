#include "exitdse/log.hpp"

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "exitdse/csv.hpp"
#include "exitdse/hash.hpp"

namespace exitdse {

static LogLevel parse_level() {
    const char* env = std::getenv("EXITDSE_LOG");
    if (!env) return LogLevel::Warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Warn;
}

LogLevel log_level() {
    static const LogLevel level = parse_level();
    return level;
}

bool log_enabled(LogLevel level) {
    return static_cast<int>(level) <= static_cast<int>(log_level());
}

void logf(LogLevel level, const char* fmt, ...) {
    if (!log_enabled(level)) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] ", names[static_cast<int>(level)]);
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fprintf(stderr, "\n");
}

std::string fnv1a64_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

std::string hash_file(const std::filesystem::path& path) {
    return fnv1a64_hex(read_text_file(path));
}

}  // namespace exitdse
