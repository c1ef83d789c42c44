#pragma once

#include "pdeid/field.hpp"
#include "pdeid/identification.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pdeid::cli {

// Shortest decimal string that parses back to the same double.
[[nodiscard]] std::string format_double(double v);

// Header x_cm,t_s,C_mg_per_l; rows ordered by time, then space. Every grid
// entry is written regardless of the mask.
void write_field_csv(std::ostream& out, const Field& field);
void write_field_csv(const std::filesystem::path& path, const Field& field);

// Rebuilds the regular grid. Entries at or below conc_floor are masked out
// (nothing is masked when conc_floor <= 0). Throws IoError on unreadable or
// malformed files.
[[nodiscard]] Field read_field_csv(const std::filesystem::path& path, double conc_floor);

void write_runs_csv(std::ostream& out, const std::vector<RunResult>& runs, const std::string& stage,
                    const std::vector<int>& screened_out);
void write_trace_csv(std::ostream& out, const RunResult& run);

[[nodiscard]] nlohmann::json summary_to_json(const EnsembleSummary& summary);

// What `report` needs from one summary.json.
struct ReportRow {
    std::string source;
    std::string scenario;
    double noise_delta = 0.0;
    std::string library;
    std::vector<std::string> selected;
    std::vector<std::pair<std::string, MeanStd>> coefficients;  // selected terms, physical
    std::vector<std::pair<std::string, MeanStd>> parameters;    // used by selected terms
    std::size_t retained = 0;
};

// Throws IoError naming the file when it cannot be read or parsed.
[[nodiscard]] ReportRow read_summary(const std::filesystem::path& path);

enum class ReportFormat { Text, Csv };

void write_report(std::ostream& out, const std::vector<ReportRow>& rows, ReportFormat format);

}  // namespace pdeid::cli
