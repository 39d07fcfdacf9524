#pragma once

#include "cngcf/config.hpp"

namespace cngcf::commands {

/// Pipeline-stage entry points behind the CLI subcommands. Each writes every
/// output under config.out_dir, starting with the effective (default-echoed)
/// config as config.json, and throws typed errors for the exit-code mapping.

void run_synth(const RunConfig& config);
void run_ingest(const RunConfig& config);
void run_train(const RunConfig& config);
void run_evaluate(const RunConfig& config);
void run_ablate(const RunConfig& config);
void run_sweep(const RunConfig& config);
void run_gridsearch(const RunConfig& config);

}  // namespace cngcf::commands
