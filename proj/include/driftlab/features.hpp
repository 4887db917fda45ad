#pragma once

#include "driftlab/error.hpp"
#include "driftlab/ranks.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

class ContextRegistry;

enum class FeatureSet { LogTpmOnly, RankOnly, Both };

const char* to_string(FeatureSet set);      // "logtpm" | "rank" | "both"
FeatureSet parse_feature_set(std::string_view name);

inline constexpr std::string_view kLogTpmColumn = "logTPM";
inline constexpr std::string_view kRankColumn = "rank_pct_within_sample";
inline constexpr double kStandardizerEpsilon = 1e-12;

/// Transcript-by-feature matrix for one context. Rows follow transcript_ids;
/// columns follow column_names.
struct ContextMatrix {
    std::string context_id;
    std::vector<std::string> transcript_ids;
    std::vector<std::string> column_names;
    Eigen::MatrixXd values;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    Eigen::Index column_index(std::string_view name) const;  // throws Schema
    Eigen::VectorXd column(std::string_view name) const { return values.col(column_index(name)); }

    // Throws Schema when the shape disagrees with the names.
    void check() const;
};

/// ln(tpm + 1); throws Domain for negative input.
double log_tpm(double tpm);
Eigen::VectorXd log_tpm(const Eigen::VectorXd& tpm);

/// Tie-averaged rank divided by n, so every value lies in (0, 1].
template <typename Derived>
Vector<typename Derived::Scalar> rank_pct_within_sample(const Eigen::MatrixBase<Derived>& values);

ContextMatrix assemble(std::string context_id, std::vector<std::string> transcript_ids,
                       const Eigen::VectorXd& tpm, FeatureSet set);
ContextMatrix assemble(const ContextRegistry& registry, std::string_view context_id, FeatureSet set);

// Appends one indicator column per vocabulary entry, named "ctx=<id>".
ContextMatrix augment_context_onehot(const ContextMatrix& matrix, const std::vector<std::string>& vocabulary);

struct Standardizer {
    std::vector<std::string> column_names;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;              // clamped to kStandardizerEpsilon
    std::vector<bool> degenerate;    // training sd was below epsilon
};

Standardizer fit_standardizer(const ContextMatrix& train);
Standardizer fit_standardizer(const Eigen::MatrixXd& train, std::vector<std::string> column_names);
ContextMatrix apply_standardizer(const Standardizer& s, const ContextMatrix& m);
Eigen::MatrixXd apply_standardizer(const Standardizer& s, const Eigen::MatrixXd& m);

// Tab-separated: header "transcript_id<TAB>col...", one row per transcript.
std::string serialize_context_matrix(const ContextMatrix& m);
ContextMatrix parse_context_matrix(std::string_view content, std::string context_id);

// --- implementation --------------------------------------------------------

template <typename Derived>
Vector<typename Derived::Scalar> rank_pct_within_sample(const Eigen::MatrixBase<Derived>& values) {
    using Scalar = typename Derived::Scalar;
    if (values.size() == 0) fail(ErrorKind::Domain, "rank_pct_within_sample: empty vector");
    return average_ranks(values) / Scalar(values.size());
}

}  // namespace driftlab
