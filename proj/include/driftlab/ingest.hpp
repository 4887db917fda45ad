#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

inline constexpr std::string_view kQuantHeader = "Name\tLength\tEffectiveLength\tTPM\tNumReads";
inline constexpr double kDefaultQcThresholdPct = 50.0;

// One row of a transcript quantification table (Salmon quant.sf layout).
struct QuantRecord {
    std::string transcript_id;
    std::int64_t length = 1;
    double effective_length = 1.0;
    double tpm = 0.0;
    double num_reads = 0.0;

    friend bool operator==(const QuantRecord&, const QuantRecord&) = default;
};

struct SampleMeta {
    std::string context_id;
    std::string cell_line;
    int timepoint_days = 0;
    double percent_mapped = 0.0;

    friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

std::string canonical_context_id(std::string_view cell_line, int timepoint_days);

std::vector<QuantRecord> parse_quant(std::string_view content);
std::vector<QuantRecord> parse_quant_file(const std::filesystem::path& path);
std::string serialize_quant(const std::vector<QuantRecord>& records);

// key=value blocks, one block per sample; blocks are separated by blank
// lines or start at a repeated context_id key. '#' starts a comment line.
std::vector<SampleMeta> parse_sample_meta(std::string_view content);
std::vector<SampleMeta> parse_sample_meta_file(const std::filesystem::path& path);
std::string serialize_sample_meta(const std::vector<SampleMeta>& metas);

bool qc_admit(const SampleMeta& meta, double threshold_pct);

/// Transcript-aligned view over the admitted contexts. Every context holds
/// exactly one record per shared transcript, in shared_transcripts order.
class ContextRegistry {
public:
    const std::map<std::string, std::vector<QuantRecord>>& contexts() const { return contexts_; }
    const std::vector<std::string>& shared_transcripts() const { return shared_; }
    std::vector<std::string> context_ids() const;

    bool contains(std::string_view context_id) const;
    const std::vector<QuantRecord>& records(std::string_view context_id) const;
    const QuantRecord& record(std::string_view context_id, std::string_view transcript_id) const;
    Eigen::VectorXd tpm(std::string_view context_id) const;

private:
    friend ContextRegistry align_contexts(const std::map<std::string, std::vector<QuantRecord>>&);

    std::map<std::string, std::vector<QuantRecord>> contexts_;
    std::vector<std::string> shared_;
};

ContextRegistry align_contexts(const std::map<std::string, std::vector<QuantRecord>>& contexts);

struct AdmissionEntry {
    std::string context_id;
    double percent_mapped = 0.0;
    bool admitted = false;
    std::string reason;  // "ok" or "qc_failed"
};

struct StoredRegistry {
    ContextRegistry registry;
    std::vector<SampleMeta> metas;  // admitted samples only
    std::map<std::string, std::string> fingerprints;  // file name -> sha256
};

// Layout: contexts.meta, admission.tsv, and one <context_id>.quant.sf per
// admitted context, aligned to the shared transcript list.
void save_registry(const std::filesystem::path& dir, const ContextRegistry& registry,
                   const std::vector<SampleMeta>& metas, const std::vector<AdmissionEntry>& log);
StoredRegistry load_registry(const std::filesystem::path& dir);

}  // namespace driftlab
