#pragma once

namespace exitdse {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from the EXITDSE_LOG environment variable
// (error|warn|info|debug), read once. Default: warn.
LogLevel log_level();
bool log_enabled(LogLevel level);
void logf(LogLevel level, const char* fmt, ...);

}  // namespace exitdse
