#include "driftlab/labels.hpp"

#include "driftlab/error.hpp"
#include "driftlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace driftlab {

const char* to_string(LabelConstruction c) {
    return c == LabelConstruction::FixedContrast ? "fixed" : "external";
}

LabelConstruction parse_label_construction(std::string_view name) {
    if (name == "fixed") return LabelConstruction::FixedContrast;
    if (name == "external") return LabelConstruction::ExternalSplit;
    fail(ErrorKind::Config, "unknown label mode '" + std::string(name) + "' (fixed|external)");
}

std::string WeakLabelVector::fingerprint() const {
    return io::sha256_hex(std::string_view(reinterpret_cast<const char*>(values.data()),
                                           static_cast<std::size_t>(values.size()) * sizeof(double)));
}

WeakLabelVector build_contrast_label(const Eigen::VectorXd& late_logtpm, const Eigen::VectorXd& early_logtpm,
                                     std::string late_context, std::string early_context) {
    if (late_logtpm.size() != early_logtpm.size())
        fail(ErrorKind::Alignment, "contrast label: late and early vectors differ in length");
    WeakLabelVector y;
    y.values = late_logtpm - early_logtpm;
    if (!y.values.allFinite()) fail(ErrorKind::Domain, "contrast label: non-finite values");
    y.construction = LabelConstruction::FixedContrast;
    y.late_context = std::move(late_context);
    y.early_context = std::move(early_context);
    return y;
}

std::vector<bool> split_halves(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> first(n, false);
    for (std::size_t i = 0; i < n / 2; ++i) first[order[i]] = true;
    return first;
}

namespace {

// One half of the partition, sorted by (reference value, transcript id),
// with boundaries of equal-value runs precomputed.
struct SortedHalf {
    std::vector<std::size_t> members;
    std::vector<double> value;
    std::vector<std::size_t> run_begin;  // run r spans [run_begin[r], run_begin[r+1])
};

SortedHalf sort_half(std::vector<std::size_t> members, const Eigen::VectorXd& ref,
                     const std::vector<std::string>& ids) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        if (ref(a) != ref(b)) return ref(a) < ref(b);
        return ids[a] < ids[b];
    });
    SortedHalf h;
    h.value.reserve(members.size());
    for (auto m : members) h.value.push_back(ref(m));
    for (std::size_t i = 0; i < members.size(); ++i)
        if (i == 0 || h.value[i] != h.value[i - 1]) h.run_begin.push_back(i);
    h.run_begin.push_back(members.size());
    h.members = std::move(members);
    return h;
}

// Appends the k nearest members of `half` to `out`, ordered by
// (|distance|, transcript id).
void nearest(const SortedHalf& half, double v, int k, const std::vector<std::string>& ids,
             std::vector<std::size_t>& out) {
    const auto runs = static_cast<std::ptrdiff_t>(half.run_begin.size()) - 1;
    auto run_value = [&](std::ptrdiff_t r) { return half.value[half.run_begin[static_cast<std::size_t>(r)]]; };
    // first run whose value is >= v
    std::ptrdiff_t lo = 0, hi = runs;
    while (lo < hi) {
        const auto mid = (lo + hi) / 2;
        if (run_value(mid) < v) lo = mid + 1; else hi = mid;
    }
    std::ptrdiff_t left = lo - 1, right = lo;
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto need = static_cast<std::size_t>(k);
    std::vector<std::ptrdiff_t> group;
    std::vector<std::size_t> cursor;
    while (need > 0) {
        const double dl = left >= 0 ? std::abs(v - run_value(left)) : inf;
        const double dr = right < runs ? std::abs(v - run_value(right)) : inf;
        const double d = std::min(dl, dr);
        group.clear();
        while (left >= 0 && std::abs(v - run_value(left)) == d) group.push_back(left--);
        while (right < runs && std::abs(v - run_value(right)) == d) group.push_back(right++);

        // merge the id-sorted runs of this distance level, smallest ids first
        cursor.assign(group.size(), 0);
        while (need > 0) {
            std::size_t best = group.size();
            std::size_t best_pos = 0;
            for (std::size_t g = 0; g < group.size(); ++g) {
                const auto r = static_cast<std::size_t>(group[g]);
                const auto pos = half.run_begin[r] + cursor[g];
                if (pos >= half.run_begin[r + 1]) continue;
                if (best == group.size() || ids[half.members[pos]] < ids[half.members[best_pos]]) {
                    best = g;
                    best_pos = pos;
                }
            }
            if (best == group.size()) break;
            out.push_back(half.members[best_pos]);
            ++cursor[best];
            --need;
        }
    }
}

}  // namespace

WeakLabelVector build_external_split_label(const Eigen::VectorXd& reference_logtpm, const WeakLabelVector& contrast,
                                           const std::vector<std::string>& transcript_ids, std::uint64_t split_seed,
                                           int k, ExternalSplitTrace* trace) {
    const auto n = static_cast<std::size_t>(reference_logtpm.size());
    if (static_cast<std::size_t>(contrast.values.size()) != n || transcript_ids.size() != n)
        fail(ErrorKind::Alignment, "external split label: inputs are not aligned");
    if (k < 1) fail(ErrorKind::Parameter, "external split label: k must be >= 1");
    if (static_cast<std::size_t>(k) > n / 2)
        fail(ErrorKind::Parameter, "external split label: k=" + std::to_string(k) + " exceeds half size " +
                                       std::to_string(n / 2));

    const auto first = split_halves(n, split_seed);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < n; ++i) (first[i] ? a : b).push_back(i);
    const SortedHalf half_a = sort_half(std::move(a), reference_logtpm, transcript_ids);
    const SortedHalf half_b = sort_half(std::move(b), reference_logtpm, transcript_ids);

    WeakLabelVector y;
    y.values.resize(static_cast<Eigen::Index>(n));
    y.construction = LabelConstruction::ExternalSplit;
    y.late_context = contrast.late_context;
    y.early_context = contrast.early_context;
    y.split_seed = split_seed;
    y.k = k;
    if (trace) {
        trace->in_first_half = first;
        trace->neighbors.assign(n, {});
    }

    std::vector<std::size_t> nbrs;
    for (std::size_t i = 0; i < n; ++i) {
        nbrs.clear();
        nearest(first[i] ? half_b : half_a, reference_logtpm(static_cast<Eigen::Index>(i)), k, transcript_ids, nbrs);
        double sum = 0.0;
        for (auto j : nbrs) sum += contrast.values(static_cast<Eigen::Index>(j));
        y.values(static_cast<Eigen::Index>(i)) = sum / static_cast<double>(k);
        if (trace) trace->neighbors[i] = nbrs;
    }
    return y;
}

std::string serialize_label(const WeakLabelVector& label, const std::vector<std::string>& transcript_ids) {
    if (static_cast<std::size_t>(label.values.size()) != transcript_ids.size())
        fail(ErrorKind::Alignment, "serialize_label: label is not aligned to transcript ids");
    std::string out = "transcript_id\ty\n";
    for (std::size_t i = 0; i < transcript_ids.size(); ++i)
        out += transcript_ids[i] + "\t" + io::format_double(label.values(static_cast<Eigen::Index>(i))) + "\n";
    return out;
}

std::string serialize_label_provenance(const WeakLabelVector& label) {
    std::string out;
    out += std::string("construction=") + to_string(label.construction) + "\n";
    out += "late_context=" + label.late_context + "\n";
    out += "early_context=" + label.early_context + "\n";
    if (label.split_seed) out += "split_seed=" + std::to_string(*label.split_seed) + "\n";
    if (label.k) out += "k=" + std::to_string(*label.k) + "\n";
    out += "sha256=" + label.fingerprint() + "\n";
    return out;
}

}  // namespace driftlab
