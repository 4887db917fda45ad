#pragma once

#include "driftlab/error.hpp"
#include "driftlab/ranks.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace driftlab {

namespace detail {

template <typename A, typename B>
void require_same_length(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                         Eigen::Index min_n, const char* what) {
    if (a.size() != b.size())
        fail(ErrorKind::Domain, std::string(what) + ": length mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    if (a.size() < min_n)
        fail(ErrorKind::Domain, std::string(what) + ": need at least " + std::to_string(min_n) +
                                    " values, got " + std::to_string(a.size()));
}

}  // namespace detail

/// Coefficient of determination 1 - SS_res / SS_tot. Negative when the
/// predictor is worse than the mean of y.
template <typename A, typename B>
typename A::Scalar r2(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
    using Scalar = typename A::Scalar;
    detail::require_same_length(y, yhat, 2, "r2");
    const Scalar mean = y.mean();
    const Scalar ss_tot = (y.array() - mean).square().sum();
    if (!(ss_tot > Scalar(0))) fail(ErrorKind::UndefinedMetric, "r2: y has zero variance");
    const Scalar ss_res = (y - yhat).squaredNorm();
    return Scalar(1) - ss_res / ss_tot;
}

template <typename A, typename B>
typename A::Scalar mae(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
    detail::require_same_length(y, yhat, 1, "mae");
    return (y - yhat).cwiseAbs().mean();
}

template <typename A, typename B>
typename A::Scalar pearson(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    using Scalar = typename A::Scalar;
    detail::require_same_length(a, b, 2, "pearson");
    const auto ac = (a.array() - a.mean()).matrix().eval();
    const auto bc = (b.array() - b.mean()).matrix().eval();
    const Scalar saa = ac.squaredNorm();
    const Scalar sbb = bc.squaredNorm();
    if (!(saa > Scalar(0)) || !(sbb > Scalar(0)))
        fail(ErrorKind::UndefinedMetric, "pearson: constant input");
    const Scalar r = ac.dot(bc) / std::sqrt(saa * sbb);
    return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Spearman rank correlation as the Pearson correlation of tie-averaged
/// ranks. Undefined (throws UndefinedMetric) when either input is constant.
template <typename A, typename B>
typename A::Scalar spearman(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    detail::require_same_length(a, b, 2, "spearman");
    if (is_constant(a) || is_constant(b))
        fail(ErrorKind::UndefinedMetric, "spearman: constant input");
    return pearson(average_ranks(a), average_ranks(b));
}

struct MetricTriple {
    std::optional<double> r2;
    double mae = 0.0;
    std::optional<double> spearman;
    std::size_t n = 0;
};

// Undefined metrics come back as nullopt rather than an exception.
MetricTriple evaluate(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

}  // namespace driftlab
