#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ctcc {

/// One CSV row per (experiment, stage/attack cell, seed). Wall times go to
/// a separate timings sidecar so the CSV stays byte-reproducible.
struct ReportRow {
    std::string experiment;
    std::string stage;   // "pipeline", "attack", "verify"
    std::string attack;  // "-" for plain pipeline rows
    std::string params;  // "k=v;k=v" cell description
    uint64_t seed = 0;
    double fsr_trigger = 0.0;
    double fsr_neg = 0.0;
    double ppl_benign = 0.0;
};

extern const char* kReportCsvHeader;

std::string format_row(const ReportRow& row);
ReportRow parse_row(const std::string& line);

/// Appends rows, writing the header first when the file is new.
void append_rows(const std::filesystem::path& csv_path, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_rows(const std::filesystem::path& csv_path);

/// Sidecar for wall-clock seconds, keyed like the CSV rows.
void append_timing(const std::filesystem::path& timings_path, const std::string& key, double seconds);

struct AggregateCell {
    std::string attack;
    std::string params;
    int count = 0;
    double mean_fsr_trigger = 0.0, min_fsr_trigger = 0.0, max_fsr_trigger = 0.0;
    double mean_fsr_neg = 0.0;
    double mean_ppl = 0.0;
};

/// Groups rows by (attack, params) and aggregates; deterministic order.
std::vector<AggregateCell> aggregate_rows(const std::vector<ReportRow>& rows);

/// Markdown report: one table per attack family; the merge table is pivoted
/// to one row per alpha and one column per strategy.
std::string render_markdown(const std::vector<ReportRow>& rows);

}  // namespace ctcc
