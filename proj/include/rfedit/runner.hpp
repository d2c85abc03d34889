#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "rfedit/common.hpp"

namespace rfedit {

inline constexpr const char* kToolName = "rfedit";
inline constexpr const char* kToolVersion = "0.1.0";

/// Environment variable naming the default output root (fallback: ./runs).
inline constexpr const char* kOutRootEnv = "RFEDIT_OUT_ROOT";

struct RunOptions {
  std::filesystem::path config_path;
  std::optional<std::filesystem::path> out_dir;  // overrides config/run-root resolution
  std::optional<std::uint64_t> seed;             // overrides the config seed
  int threads = 1;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

/// Executes the configured scenario, writing manifest.json plus all CSV/SVG
/// artifacts into a fresh run directory. Returns an ExitCode; diagnostics go
/// to stderr.
int run_experiment(const RunOptions& opts);

/// Same, but throws instead of mapping errors to exit codes; returns the run
/// directory. Used by tests and by run_experiment itself.
std::filesystem::path run_experiment_or_throw(const RunOptions& opts);

}  // namespace rfedit
