#include "driftlab/synthetic.hpp"

#include "driftlab/diagnostics.hpp"
#include "driftlab/error.hpp"
#include "driftlab/io.hpp"
#include "driftlab/labels.hpp"
#include "driftlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <tuple>

namespace driftlab {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

WeakLabelVector as_label(const Eigen::VectorXd& y) {
    WeakLabelVector out;
    out.values = y;
    return out;
}

std::string row_id(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i + 1);
    return buf;
}

void check_config(const SyntheticConfig& cfg) {
    if (cfg.n < 2) fail(ErrorKind::Config, "synthetic: n must be at least 2");
    if (cfg.d < 1) fail(ErrorKind::Config, "synthetic: d must be positive");
    if (cfg.invariant_set.empty() && cfg.beta_S.size() > 0)
        fail(ErrorKind::Config, "synthetic: beta_S given for an empty invariant set");
    if (static_cast<Eigen::Index>(cfg.invariant_set.size()) != cfg.beta_S.size())
        fail(ErrorKind::Config, "synthetic: beta_S must have one entry per invariant feature");
    if (static_cast<int>(cfg.invariant_set.size()) > cfg.d)
        fail(ErrorKind::Config, "synthetic: |S| exceeds d");
    std::set<int> seen;
    for (int j : cfg.invariant_set) {
        if (j < 0 || j >= cfg.d) fail(ErrorKind::Config, "synthetic: invariant feature index out of range");
        if (!seen.insert(j).second) fail(ErrorKind::Config, "synthetic: repeated invariant feature index");
    }
    if (cfg.beta_alt.size() != 0 && cfg.beta_alt.size() != cfg.d)
        fail(ErrorKind::Config, "synthetic: beta_alt must have length d");
    if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0)) fail(ErrorKind::Config, "synthetic: delta must lie in [0,1]");
    if (!(cfg.eta_sd >= 0.0) || !(cfg.sigma >= 0.0) || !(cfg.g_shape >= 0.0))
        fail(ErrorKind::Config, "synthetic: eta_sd, sigma and g_shape must be non-negative");
}

}  // namespace

double g_map(double t, double a) { return t + a * t * t * t; }

Eigen::VectorXd context_coefficients(const SyntheticConfig& cfg) {
    check_config(cfg);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(cfg.d);
    for (std::size_t k = 0; k < cfg.invariant_set.size(); ++k)
        beta(cfg.invariant_set[k]) = cfg.beta_S(static_cast<Eigen::Index>(k));
    beta *= 1.0 - cfg.delta;
    if (cfg.beta_alt.size() != 0) beta += cfg.delta * cfg.beta_alt;
    return beta;
}

SyntheticContext generate_context(const SyntheticConfig& cfg, std::string context_id) {
    const Eigen::VectorXd beta = context_coefficients(cfg);
    const auto n = static_cast<Eigen::Index>(cfg.n);

    SyntheticContext out;
    out.matrix.context_id = std::move(context_id);
    out.matrix.column_names = default_feature_names(cfg.d);
    out.matrix.transcript_ids.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) out.matrix.transcript_ids.push_back(row_id("s", i));

    std::mt19937_64 x_rng(derive_seed(cfg.seed, 0));
    std::mt19937_64 noise_rng(derive_seed(cfg.seed, 1));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    out.matrix.values.resize(n, cfg.d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < cfg.d; ++j) out.matrix.values(i, j) = normal(x_rng);

    out.y_star = out.matrix.values * beta;
    out.y_weak.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eta = normal(noise_rng);
        const double eps = unif(noise_rng);
        out.y_star(i) += cfg.eta_sd * eta;
        out.y_weak(i) = g_map(out.y_star(i), cfg.g_shape) + cfg.sigma * eps;
    }
    return out;
}

std::string serialize_synthetic_labels(const SyntheticContext& ctx) {
    std::string out = "transcript_id\ty_star\ty_weak\n";
    for (std::size_t i = 0; i < ctx.matrix.transcript_ids.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out += ctx.matrix.transcript_ids[i] + '\t' + io::format_double(ctx.y_star(k)) + '\t' +
               io::format_double(ctx.y_weak(k)) + '\n';
    }
    return out;
}

double pairwise_agreement(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth, std::size_t n_pairs,
                          std::uint64_t seed) {
    if (pred.size() != truth.size()) fail(ErrorKind::Domain, "pairwise_agreement: length mismatch");
    if (truth.size() < 2 || n_pairs == 0) fail(ErrorKind::Domain, "pairwise_agreement: need 2 rows and 1 pair");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, truth.size() - 1);
    std::size_t agree = 0, used = 0, attempts = 0;
    while (used < n_pairs) {
        if (++attempts > 100 * n_pairs) fail(ErrorKind::UndefinedMetric, "pairwise_agreement: truth is (nearly) constant");
        const auto i = pick(rng);
        const auto j = pick(rng);
        if (i == j || truth(i) == truth(j)) continue;
        ++used;
        const double dp = pred(i) - pred(j);
        const double dt = truth(i) - truth(j);
        if ((dp > 0 && dt > 0) || (dp < 0 && dt < 0)) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(n_pairs);
}

// ---------------------------------------------------------------- theorem 1 ---

Theorem1Result theorem1_check(const SyntheticConfig& cfg, const ModelSpec& spec, const std::vector<std::size_t>& sizes,
                              std::size_t n_test, std::size_t n_pairs, double tolerance, unsigned threads,
                              std::vector<SyntheticContext>* generated) {
    if (sizes.size() < 2) fail(ErrorKind::Config, "theorem1_check: need at least 2 sample sizes");
    if (cfg.delta != 0.0) fail(ErrorKind::Config, "theorem1_check: requires delta = 0");
    check_config(cfg);

    SyntheticConfig test_cfg = cfg;
    test_cfg.n = n_test;
    test_cfg.seed = derive_seed(cfg.seed, 2);
    const auto test = generate_context(test_cfg, "TEST");

    Theorem1Result out;
    const std::size_t n_max = *std::max_element(sizes.begin(), sizes.end());
    if (generated) generated->push_back(test);
    for (std::size_t n : sizes) {
        SyntheticConfig train_cfg = cfg;
        train_cfg.n = n;
        const auto train = generate_context(train_cfg, "TRAIN");
        const auto model = fit(spec, train.matrix.values, train.y_weak, train.matrix.column_names, threads);
        const auto pred = predict(model, test.matrix.values);
        out.curve.push_back({n, pairwise_agreement(pred, test.y_star, n_pairs, derive_seed(cfg.seed, 3))});
        if (generated && n == n_max) generated->push_back(train);
    }
    out.non_decreasing = true;
    for (std::size_t k = 1; k < out.curve.size(); ++k)
        if (out.curve[k].agreement < out.curve[k - 1].agreement - tolerance) out.non_decreasing = false;
    return out;
}

// ---------------------------------------------------------------- theorem 2 ---

Theorem2Result theorem2_check(const SyntheticConfig& cfg, const ModelSpec& spec, const std::vector<double>& deltas,
                              unsigned threads, std::vector<SyntheticContext>* generated) {
    if (deltas.size() < 3) fail(ErrorKind::Config, "theorem2_check: need at least 3 drift values");
    if (std::find(deltas.begin(), deltas.end(), 0.0) == deltas.end())
        fail(ErrorKind::Config, "theorem2_check: the drift grid must include 0");
    if (!std::is_sorted(deltas.begin(), deltas.end()) ||
        std::adjacent_find(deltas.begin(), deltas.end()) != deltas.end())
        fail(ErrorKind::Config, "theorem2_check: drift grid must be strictly increasing");
    if (cfg.d < 2) fail(ErrorKind::UndefinedMetric, "theorem2_check: importance stability needs d >= 2");

    SyntheticConfig src_cfg = cfg;
    src_cfg.delta = 0.0;
    src_cfg.seed = derive_seed(cfg.seed, 10);
    const auto source = generate_context(src_cfg, "SOURCE");
    SyntheticConfig held_cfg = src_cfg;
    held_cfg.seed = derive_seed(cfg.seed, 11);
    const auto held_out = generate_context(held_cfg, "SOURCE_TEST");

    const auto src_model = fit(spec, source.matrix.values, source.y_weak, source.matrix.column_names, threads);
    const double in_domain = spearman(predict(src_model, held_out.matrix.values), held_out.y_weak);
    const auto src_corr = feature_label_corr(source.matrix, as_label(source.y_weak));
    if (generated) {
        generated->push_back(source);
        generated->push_back(held_out);
    }

    Theorem2Result out;
    out.family = family_of(spec);
    for (double delta : deltas) {
        SyntheticConfig dcfg = cfg;
        dcfg.delta = delta;
        dcfg.seed = derive_seed(cfg.seed, 12);
        auto drifted = generate_context(dcfg, "DRIFTED");
        if (generated) {
            generated->push_back(drifted);
            generated->back().matrix.context_id = "DRIFTED_" + io::format_double(delta);
        }
        const auto model = fit(spec, drifted.matrix.values, drifted.y_weak, drifted.matrix.column_names, threads);

        Theorem2Row row;
        row.delta = delta;
        row.rank_rho = importance_rank_stability(src_model, model, {"SOURCE", "DRIFTED"}).rank_rho;
        row.transfer_rho = spearman(predict(src_model, drifted.matrix.values), drifted.y_weak);
        row.in_domain_rho = in_domain;
        const auto corr = feature_label_corr(drifted.matrix, as_label(drifted.y_weak));
        double total = 0.0;
        for (std::size_t j = 0; j < corr.size(); ++j) total += shift_score(src_corr[j], corr[j]).value;
        row.shift_magnitude = total / static_cast<double>(corr.size());
        out.rows.push_back(row);
    }

    out.transfer_non_increasing = true;
    for (std::size_t k = 1; k < out.rows.size(); ++k)
        if (out.rows[k].transfer_rho > out.rows[k - 1].transfer_rho) out.transfer_non_increasing = false;
    for (const auto& row : out.rows)
        if (row.delta == 0.0) out.rank_rho_one_at_zero = row.rank_rho && std::abs(*row.rank_rho - 1.0) < 1e-12;

    std::vector<ShiftScore> scores;
    std::vector<double> transfer;
    Eigen::VectorXd d(static_cast<Eigen::Index>(out.rows.size()));
    for (std::size_t k = 0; k < out.rows.size(); ++k) {
        scores.push_back(ShiftScore{"mean", {"SOURCE", "DRIFTED"}, out.rows[k].shift_magnitude});
        transfer.push_back(out.rows[k].transfer_rho);
        d(static_cast<Eigen::Index>(k)) = out.rows[k].delta;
    }
    try {
        out.shift_vs_transfer = shift_vs_performance(scores, transfer);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
    }
    try {
        out.delta_vs_transfer = spearman(d, Eigen::Map<const Eigen::VectorXd>(transfer.data(), d.size()));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
    }
    return out;
}

// ------------------------------------------------------------ paper pattern ---

PaperPatternData generate_paper_pattern(const PaperPatternConfig& cfg) {
    if (cfg.n < 10) fail(ErrorKind::Config, "paper-pattern: n must be at least 10");
    if (!(cfg.b > 0.0 && cfg.b < 1.0)) fail(ErrorKind::Config, "paper-pattern: b must lie in (0,1)");
    if (!(cfg.s > 0.0)) fail(ErrorKind::Config, "paper-pattern: s must be positive");
    if (!(cfg.delta_cross >= 0.0 && cfg.delta_cross <= 1.0) || !(cfg.delta_temporal >= 0.0 && cfg.delta_temporal <= 1.0))
        fail(ErrorKind::Config, "paper-pattern: drift levels must lie in [0,1]");

    PaperPatternData out;
    out.source = canonical_context_id("SYNA", 2);
    out.cross = canonical_context_id("SYNB", 2);
    out.late = canonical_context_id("SYNA", 7);
    out.metas = {
        SampleMeta{out.source, "SYNA", 2, 90.0},
        SampleMeta{out.cross, "SYNB", 2, 90.0},
        SampleMeta{out.late, "SYNA", 7, 90.0},
    };

    std::mt19937_64 rng(derive_seed(cfg.seed, 20));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double v = cfg.s * cfg.s;
    const double xi_sd = std::sqrt(cfg.delta_temporal * cfg.b * (1.0 - cfg.b) * v);
    const double r = 1.0 - cfg.delta_cross;
    const double r_perp = std::sqrt(1.0 - r * r);

    auto record = [](const std::string& id, double log_expr) {
        const double tpm = std::max(std::expm1(log_expr), 0.0);
        return QuantRecord{id, 1000, 850.0, tpm, std::round(tpm * 0.85)};
    };
    auto& src = out.quant[out.source];
    auto& crs = out.quant[out.cross];
    auto& late = out.quant[out.late];
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::string id = row_id("SYNT", i);
        const double z = normal(rng);
        const double xi = normal(rng);
        const double z_b = normal(rng);
        const double early = cfg.mu + cfg.s * z;
        const double y = -cfg.b * (early - cfg.mu) + xi_sd * xi;
        src.push_back(record(id, early));
        late.push_back(record(id, early + y));
        crs.push_back(record(id, cfg.mu + r * (early - cfg.mu) + r_perp * cfg.s * z_b));
    }
    return out;
}

PaperPatternResult paper_pattern_check(const RunResult& result, double max_temporal_rho) {
    std::map<std::pair<ModelFamily, FeatureSet>, PatternCell> cells;
    bool failed_record = false;
    for (const auto& rec : result.records) {
        auto& cell = cells[{rec.family, rec.features}];
        cell.family = rec.family;
        cell.features = rec.features;
        if (!rec.metrics) failed_record = true;
        switch (rec.setting) {
            case SettingKind::InDomain: cell.in_domain = rec.metrics; break;
            case SettingKind::CrossDomain: cell.cross_domain = rec.metrics; break;
            case SettingKind::Temporal: cell.temporal = rec.metrics; break;
        }
    }
    PaperPatternResult out;
    out.pass = !cells.empty() && !failed_record;
    for (auto& [_, cell] : cells) {
        const auto& in = cell.in_domain;
        const auto& cr = cell.cross_domain;
        const auto& te = cell.temporal;
        cell.pass = in && cr && te && in->r2 && cr->r2 && te->r2 && in->spearman && cr->spearman && te->spearman &&
                    *in->r2 > *cr->r2 && *cr->r2 > *te->r2 && *te->r2 <= 0.0 && *te->spearman <= max_temporal_rho &&
                    *in->spearman > *te->spearman && *cr->spearman > *te->spearman;
        out.pass = out.pass && cell.pass;
        out.cells.push_back(cell);
    }
    return out;
}

}  // namespace driftlab
