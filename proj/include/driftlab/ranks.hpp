#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

namespace driftlab {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Ascending 1-based ranks; tied values share the mean of the ranks they span.
template <typename Derived>
Vector<typename Derived::Scalar> average_ranks(const Eigen::DenseBase<Derived>& values) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return values.derived().coeff(a) < values.derived().coeff(b);
    });

    Vector<Scalar> ranks(n);
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index stop = start + 1;
        const Scalar v = values.derived().coeff(order[start]);
        while (stop < n && values.derived().coeff(order[stop]) == v) ++stop;
        // positions start..stop-1 hold ranks start+1..stop
        const Scalar avg = Scalar(start + 1 + stop) / Scalar(2);
        for (Eigen::Index k = start; k < stop; ++k) ranks(order[k]) = avg;
        start = stop;
    }
    return ranks;
}

template <typename Derived>
bool is_constant(const Eigen::DenseBase<Derived>& values) {
    if (values.size() == 0) return true;
    const auto first = values.derived().coeff(0);
    for (Eigen::Index i = 1; i < values.size(); ++i)
        if (values.derived().coeff(i) != first) return false;
    return true;
}

}  // namespace driftlab
