#pragma once

#include "pdeid/cli/config.hpp"
#include "pdeid/cli/io.hpp"

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace pdeid::cli {

// Writes clean.csv, noisy.csv (only when noise_delta > 0) and metadata.json
// into cfg.output_dir.
void cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);

// Writes config.json, runs.csv, summary.json and traces/<stage>_<run>.csv
// into cfg.output_dir. Data come from cfg.input_dir when set, otherwise they
// are simulated in-process.
IdentificationOutcome cmd_identify(const ExperimentConfig& cfg, std::ostream& log);

// One row per summary file, in argument order.
void cmd_report(const std::vector<std::filesystem::path>& summaries, ReportFormat format,
                std::ostream& out);

enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitUsage = 2,
    kExitValidation = 3,
    kExitNumeric = 4,
    kExitIo = 5,
};

[[nodiscard]] int exit_code_for(const std::exception& e);

}  // namespace pdeid::cli
