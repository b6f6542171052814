#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace resolab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitCheck = 4;

inline constexpr int kSchemaVersion = 1;

/// The built-in configuration every user config is merged onto (JSON text).
std::string default_config();

/// Entry point of the `resolab` tool; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace resolab::cli
