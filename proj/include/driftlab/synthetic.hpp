#pragma once

#include "driftlab/features.hpp"
#include "driftlab/ingest.hpp"
#include "driftlab/models.hpp"
#include "driftlab/protocol.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace driftlab {

struct SyntheticConfig {
    std::size_t n = 1000;
    int d = 5;
    std::vector<int> invariant_set;  // S
    Eigen::VectorXd beta_S;          // one entry per element of S
    Eigen::VectorXd beta_alt;        // length d, or empty for zeros
    double eta_sd = 0.0;
    double sigma = 0.0;
    double g_shape = 0.0;  // a in g(t) = t + a t^3
    double delta = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticContext {
    ContextMatrix matrix;
    Eigen::VectorXd y_star;
    Eigen::VectorXd y_weak;
};

double g_map(double t, double a);

// beta(delta) = (1 - delta) beta_S (embedded in R^d) + delta beta_alt
Eigen::VectorXd context_coefficients(const SyntheticConfig& cfg);

/// x ~ N(0, I_d); y* = beta(delta)'x + eta; y_weak = g(y*) + U[-sigma, sigma].
/// Rows are generated in order, so a smaller n gives a prefix of a larger one,
/// and x never depends on delta.
SyntheticContext generate_context(const SyntheticConfig& cfg, std::string context_id = "SYN");

// tab-separated: transcript_id, y_star, y_weak
std::string serialize_synthetic_labels(const SyntheticContext& ctx);

/// Fraction of sampled pairs (i != j, truth_i != truth_j) on which
/// sign(pred_i - pred_j) == sign(truth_i - truth_j).
double pairwise_agreement(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth, std::size_t n_pairs,
                          std::uint64_t seed);

struct AgreementPoint {
    std::size_t n = 0;
    double agreement = 0.0;
};

struct Theorem1Result {
    std::vector<AgreementPoint> curve;
    bool non_decreasing = false;  // within the tolerance
};

Theorem1Result theorem1_check(const SyntheticConfig& cfg, const ModelSpec& spec, const std::vector<std::size_t>& sizes,
                              std::size_t n_test = 2000, std::size_t n_pairs = 10000, double tolerance = 0.02,
                              unsigned threads = 1, std::vector<SyntheticContext>* generated = nullptr);

struct Theorem2Row {
    double delta = 0.0;
    std::optional<double> rank_rho;
    double transfer_rho = 0.0;   // source model on the drifted context
    double in_domain_rho = 0.0;  // source model on held-out source data
    double shift_magnitude = 0.0;
};

struct Theorem2Result {
    ModelFamily family = ModelFamily::Ridge;
    std::vector<Theorem2Row> rows;
    bool transfer_non_increasing = false;
    bool rank_rho_one_at_zero = false;
    std::optional<double> shift_vs_transfer;  // spearman(shift magnitude, transfer rho)
    std::optional<double> delta_vs_transfer;  // spearman(delta, transfer rho)
};

// `generated`, when given, receives the held-out test set and the largest
// training sample (theorem 1) or the source, held-out and drifted samples
// (theorem 2).
Theorem2Result theorem2_check(const SyntheticConfig& cfg, const ModelSpec& spec, const std::vector<double>& deltas,
                              unsigned threads = 1, std::vector<SyntheticContext>* generated = nullptr);

// Three expression contexts: a source (cell line A, day 2), a cross context
// (cell line B, day 2) and a late context (cell line A, day 7). The contrast
// late - source is the label.
struct PaperPatternConfig {
    std::size_t n = 3000;
    double mu = 5.0;
    double s = 1.2;
    double b = 0.5;
    double delta_cross = 0.5;
    double delta_temporal = 1.0;
    std::uint64_t seed = 0;
};

struct PaperPatternData {
    std::map<std::string, std::vector<QuantRecord>> quant;
    std::vector<SampleMeta> metas;
    std::string source;
    std::string cross;
    std::string late;
};

PaperPatternData generate_paper_pattern(const PaperPatternConfig& cfg);

struct PatternCell {
    ModelFamily family = ModelFamily::Ridge;
    FeatureSet features = FeatureSet::LogTpmOnly;
    std::optional<MetricTriple> in_domain;
    std::optional<MetricTriple> cross_domain;
    std::optional<MetricTriple> temporal;
    bool pass = false;
};

struct PaperPatternResult {
    std::vector<PatternCell> cells;
    bool pass = false;
};

/// Per (family, feature set): R2 ordering in > cross > temporal, temporal
/// R2 <= 0, temporal rho <= max_temporal_rho, and rho(in), rho(cross) above
/// rho(temporal).
PaperPatternResult paper_pattern_check(const RunResult& result, double max_temporal_rho = 0.2);

}  // namespace driftlab
