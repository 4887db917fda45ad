#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

enum class LabelConstruction { FixedContrast, ExternalSplit };

const char* to_string(LabelConstruction c);  // "fixed" | "external"
LabelConstruction parse_label_construction(std::string_view name);

inline constexpr int kDefaultNeighborCount = 25;

/// The single transcript-level supervision vector of a run. Built once and
/// shared read-only by every evaluation setting.
struct WeakLabelVector {
    Eigen::VectorXd values;
    LabelConstruction construction = LabelConstruction::FixedContrast;
    std::string late_context;
    std::string early_context;
    std::optional<std::uint64_t> split_seed;  // ExternalSplit only
    std::optional<int> k;                     // ExternalSplit only

    std::string fingerprint() const;  // sha256 over the raw value bytes
};

WeakLabelVector build_contrast_label(const Eigen::VectorXd& late_logtpm, const Eigen::VectorXd& early_logtpm,
                                     std::string late_context = {}, std::string early_context = {});

// Which half each transcript fell into and which transcripts fed its label.
struct ExternalSplitTrace {
    std::vector<bool> in_first_half;
    std::vector<std::vector<std::size_t>> neighbors;
};

/// Recomputes each transcript's label from the contrast values of its k
/// nearest reference-expression neighbours in the opposite half of a seeded
/// 50/50 partition. Distance ties resolve by transcript id order.
WeakLabelVector build_external_split_label(const Eigen::VectorXd& reference_logtpm, const WeakLabelVector& contrast,
                                           const std::vector<std::string>& transcript_ids, std::uint64_t split_seed,
                                           int k = kDefaultNeighborCount, ExternalSplitTrace* trace = nullptr);

// Seeded partition used by build_external_split_label: true = first half.
std::vector<bool> split_halves(std::size_t n, std::uint64_t seed);

std::string serialize_label(const WeakLabelVector& label, const std::vector<std::string>& transcript_ids);
std::string serialize_label_provenance(const WeakLabelVector& label);

}  // namespace driftlab
