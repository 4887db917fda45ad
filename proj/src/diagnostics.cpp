#include "driftlab/diagnostics.hpp"

#include "driftlab/error.hpp"
#include "driftlab/features.hpp"
#include "driftlab/labels.hpp"
#include "driftlab/metrics.hpp"

#include <cmath>
#include <set>

namespace driftlab {

std::vector<FeatureLabelCorr> feature_label_corr(const ContextMatrix& matrix, const WeakLabelVector& y) {
    matrix.check();
    if (matrix.rows() != y.values.size())
        fail(ErrorKind::Alignment, "feature_label_corr: context '" + matrix.context_id + "' is not aligned to the label");
    std::vector<FeatureLabelCorr> out;
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
        const auto& name = matrix.column_names[static_cast<std::size_t>(j)];
        double rho = 0.0;
        try {
            rho = spearman(matrix.values.col(j), y.values);
        } catch (const Error& e) {
            throw Error(e.kind(), "feature_label_corr(" + matrix.context_id + ", " + name + "): " + e.what());
        }
        out.push_back(FeatureLabelCorr{matrix.context_id, name, rho, static_cast<std::size_t>(matrix.rows())});
    }
    return out;
}

ShiftScore shift_score(const FeatureLabelCorr& c, const FeatureLabelCorr& c_prime) {
    if (c.feature_name != c_prime.feature_name)
        fail(ErrorKind::Pairing, "shift_score: features differ ('" + c.feature_name + "' vs '" + c_prime.feature_name + "')");
    return ShiftScore{c.feature_name, {c.context_id, c_prime.context_id}, std::abs(c.rho - c_prime.rho)};
}

double shift_vs_performance(std::span<const ShiftScore> scores, std::span<const double> performance) {
    if (scores.size() != performance.size())
        fail(ErrorKind::Pairing, "shift_vs_performance: score and performance lists differ in length");
    if (scores.size() < 3) fail(ErrorKind::Domain, "shift_vs_performance: need at least 3 context pairs");
    Eigen::VectorXd s(static_cast<Eigen::Index>(scores.size()));
    Eigen::VectorXd p(static_cast<Eigen::Index>(scores.size()));
    for (std::size_t i = 0; i < scores.size(); ++i) {
        s(static_cast<Eigen::Index>(i)) = scores[i].value;
        p(static_cast<Eigen::Index>(i)) = performance[i];
    }
    return spearman(s, p);
}

ImportanceStability importance_rank_stability(ModelFamily family, ContextPair pair,
                                              const std::vector<std::string>& names_c, const Eigen::VectorXd& phi_c,
                                              const std::vector<std::string>& names_c_prime,
                                              const Eigen::VectorXd& phi_c_prime) {
    if (names_c != names_c_prime)
        fail(ErrorKind::Pairing, "importance_rank_stability: feature names differ between contexts");
    if (static_cast<std::size_t>(phi_c.size()) != names_c.size() || phi_c.size() != phi_c_prime.size())
        fail(ErrorKind::Pairing, "importance_rank_stability: importance vectors do not match feature names");
    ImportanceStability out{family, std::move(pair), std::nullopt};
    auto distinct = [](const Eigen::VectorXd& v) {
        return std::set<double>(v.data(), v.data() + v.size()).size();
    };
    if (distinct(phi_c) < 2 || distinct(phi_c_prime) < 2) return out;
    out.rank_rho = spearman(phi_c, phi_c_prime);
    return out;
}

ImportanceStability importance_rank_stability(const TrainedModel& c, const TrainedModel& c_prime, ContextPair pair) {
    if (c.family != c_prime.family) fail(ErrorKind::Pairing, "importance_rank_stability: model families differ");
    return importance_rank_stability(c.family, std::move(pair), c.feature_names, c.importance, c_prime.feature_names,
                                     c_prime.importance);
}

}  // namespace driftlab
