#include "driftlab/metrics.hpp"

namespace driftlab {

MetricTriple evaluate(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    MetricTriple m;
    m.n = static_cast<std::size_t>(y.size());
    m.mae = mae(y, yhat);
    try {
        m.r2 = r2(y, yhat);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
    }
    try {
        m.spearman = spearman(y, yhat);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
    }
    return m;
}

}  // namespace driftlab
