#ifndef QBM_FORGE_LOGGING_HPP
#define QBM_FORGE_LOGGING_HPP

#include <cstdlib>
#include <iostream>
#include <string>

namespace qbm_forge {

// Log level comes from the QBM_FORGE_LOG environment variable:
// debug | info | warn | error.  Default is info.
enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

inline LogLevel log_level_from_env() {
    const char* env = std::getenv("QBM_FORGE_LOG");
    if (!env) return LogLevel::kInfo;
    const std::string v(env);
    if (v == "debug") return LogLevel::kDebug;
    if (v == "info") return LogLevel::kInfo;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "error") return LogLevel::kError;
    return LogLevel::kInfo;
}

inline LogLevel& log_level() {
    static LogLevel level = log_level_from_env();
    return level;
}

inline void log_at(LogLevel at, const char* tag, const std::string& msg) {
    if (at >= log_level()) std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::kDebug, "debug", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::kInfo, "info", msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::kWarn, "warn", msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::kError, "error", msg); }

} // namespace qbm_forge

#endif
