#pragma once

#include "fastgan/cli/run_config.hpp"

namespace fastgan::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

// Each command throws ConfigError for usage problems and other errors for
// runtime failures; run() maps them to exit codes.
void cmd_train(const RunConfig& rc);
void cmd_generate(const RunConfig& rc);
void cmd_invert(const RunConfig& rc);
void cmd_stylemix(const RunConfig& rc);
void cmd_probe(const RunConfig& rc);

// Parses argv (subcommand plus flags) and dispatches. Returns the exit code.
int run(int argc, const char* const* argv);

}  // namespace fastgan::cli
