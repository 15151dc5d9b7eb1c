#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eav/pipeline.hpp"

namespace eav::cli {

// Exit codes, stable for CI: 0 success, 1 runtime failure, 2 usage/config.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses a config file (strict schema: unknown keys rejected) into a
/// RunSpec. Throws ConfigError with field diagnostics.
RunSpec load_config(const std::filesystem::path& path);

/// FNV-1a 64 hash of the canonical serialized effective config.
std::string config_hash(const RunSpec& spec);

/// Entry point shared by the binary and the tests.
int main(const std::vector<std::string>& args);

}  // namespace eav::cli
