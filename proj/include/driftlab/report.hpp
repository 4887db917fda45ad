#pragma once

#include "driftlab/protocol.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace driftlab {

inline constexpr std::string_view kToolkitVersion = "0.3.0";
inline constexpr int kReportSchemaVersion = 1;

struct LabelInfo {
    LabelConstruction construction = LabelConstruction::FixedContrast;
    std::string late_context;
    std::string early_context;
    std::optional<std::uint64_t> split_seed;
    std::optional<int> k;
    std::size_t n = 0;
    std::string fingerprint;
};

struct Provenance {
    std::string toolkit_version{kToolkitVersion};
    int schema_version = kReportSchemaVersion;
    std::uint64_t master_seed = 0;
    std::vector<std::pair<std::string, std::string>> config;  // effective configuration, in echo order
    std::map<std::string, std::string> input_fingerprints;    // file name -> sha256
    LabelInfo label;
};

struct RunReport {
    std::vector<EvalRecord> eval_records;
    std::vector<CorrEntry> feature_label_corr;
    std::vector<StabilityDiff> stability_diffs;
    std::vector<ShiftEntry> shift_scores;
    std::vector<ShiftCorrelation> shift_vs_performance;
    std::vector<StabilityEntry> importance_stability;
    Provenance provenance;
    bool partial = false;
};

RunReport make_report(const RunResult& result, Provenance provenance);

std::string report_to_json(const RunReport& report);
RunReport parse_report(std::string_view json);  // throws Schema

// Tab-separated companions; missing values print as NA.
std::string eval_tsv(const RunReport& report);
std::string feature_label_corr_tsv(const RunReport& report);
std::string stability_tsv(const RunReport& report);
std::string shift_score_tsv(const RunReport& report);

inline constexpr const char* kReportTables[] = {"eval.tsv", "feature_label_corr.tsv", "stability.tsv",
                                                "shift_score.tsv"};

/// Writes the JSON report to `path` and the four tables next to it, each
/// atomically. Refuses to replace existing files unless `force`.
void emit(const RunReport& report, const std::filesystem::path& path, bool force = false);

}  // namespace driftlab
