#pragma once

#include "driftlab/models.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace driftlab {

struct ContextMatrix;
struct WeakLabelVector;

using ContextPair = std::pair<std::string, std::string>;

struct FeatureLabelCorr {
    std::string context_id;
    std::string feature_name;
    double rho = 0.0;
    std::size_t n = 0;
};

// value = |rho(first) - rho(second)|, always in [0, 2]
struct ShiftScore {
    std::string feature_name;
    ContextPair context_pair;
    double value = 0.0;
};

struct ImportanceStability {
    ModelFamily family = ModelFamily::Ridge;
    ContextPair context_pair;
    std::optional<double> rank_rho;  // undefined when a vector has < 2 distinct entries
};

/// Spearman correlation of every feature column with the label. Throws
/// UndefinedMetric if a column (or the label) is constant.
std::vector<FeatureLabelCorr> feature_label_corr(const ContextMatrix& matrix, const WeakLabelVector& y);

ShiftScore shift_score(const FeatureLabelCorr& c, const FeatureLabelCorr& c_prime);

/// Spearman correlation between shift magnitudes and per-pair performance;
/// negative when larger shifts go with worse transfer.
double shift_vs_performance(std::span<const ShiftScore> scores, std::span<const double> performance);

ImportanceStability importance_rank_stability(ModelFamily family, ContextPair pair,
                                              const std::vector<std::string>& names_c, const Eigen::VectorXd& phi_c,
                                              const std::vector<std::string>& names_c_prime,
                                              const Eigen::VectorXd& phi_c_prime);
ImportanceStability importance_rank_stability(const TrainedModel& c, const TrainedModel& c_prime, ContextPair pair);

}  // namespace driftlab
