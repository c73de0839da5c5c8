#pragma once

#include "run_config.hpp"

#include <string>
#include <vector>

namespace bsp::cli {

inline const std::vector<std::string> kCommands{"basis",    "fit",      "smooth",     "forecast",
                                                "simulate", "backtest", "check-prop1"};

struct RunOptions {
    std::string config_path;     // empty: defaults only
    std::string config_bytes;
    bool dump_matrices = false;
};

/// Runs one subcommand with a validated configuration; writes outputs and the manifest.
void run_command(const std::string& name, const RunConfig& config, const RunOptions& options);

} // namespace bsp::cli
