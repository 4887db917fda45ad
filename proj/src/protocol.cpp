#include "driftlab/protocol.hpp"

#include "driftlab/error.hpp"
#include "driftlab/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace driftlab {

const char* to_string(SettingKind kind) {
    switch (kind) {
        case SettingKind::InDomain: return "in_domain";
        case SettingKind::CrossDomain: return "cross_domain";
        case SettingKind::Temporal: return "temporal";
    }
    return "?";
}

const char* to_string(Mitigation m) {
    switch (m) {
        case Mitigation::None: return "none";
        case Mitigation::ContextOneHot: return "onehot";
        case Mitigation::TrainStandardize: return "standardize";
    }
    return "?";
}

const char* to_string(PerformanceMetric m) {
    return m == PerformanceMetric::Spearman ? "spearman" : "r2";
}

SettingKind parse_setting_kind(std::string_view name) {
    if (name == "in_domain") return SettingKind::InDomain;
    if (name == "cross_domain") return SettingKind::CrossDomain;
    if (name == "temporal") return SettingKind::Temporal;
    fail(ErrorKind::Config, "unknown setting '" + std::string(name) + "'");
}

Mitigation parse_mitigation(std::string_view name) {
    if (name == "none") return Mitigation::None;
    if (name == "onehot") return Mitigation::ContextOneHot;
    if (name == "standardize") return Mitigation::TrainStandardize;
    fail(ErrorKind::Config, "unknown mitigation '" + std::string(name) + "' (none|onehot|standardize)");
}

PerformanceMetric parse_performance_metric(std::string_view name) {
    if (name == "spearman") return PerformanceMetric::Spearman;
    if (name == "r2") return PerformanceMetric::R2;
    fail(ErrorKind::Config, "unknown performance metric '" + std::string(name) + "' (spearman|r2)");
}

std::vector<Setting> standard_settings(const std::string& source, const std::string& cross, const std::string& late,
                                       std::uint64_t split_seed) {
    return {
        Setting{SettingKind::InDomain, source, source, 0.8, split_seed},
        Setting{SettingKind::CrossDomain, cross, source, 0.8, split_seed},
        Setting{SettingKind::Temporal, source, late, 0.8, split_seed},
    };
}

// ----------------------------------------------------------- ContextStore ---

ContextStore::ContextStore(const ContextRegistry& registry) : transcript_ids_(registry.shared_transcripts()) {
    for (const auto& id : registry.context_ids()) tpm_.emplace(id, registry.tpm(id));
}

ContextStore::ContextStore(std::vector<std::string> transcript_ids, std::map<std::string, Eigen::VectorXd> tpm)
    : transcript_ids_(std::move(transcript_ids)) {
    for (auto& [id, v] : tpm) {
        if (static_cast<std::size_t>(v.size()) != transcript_ids_.size())
            fail(ErrorKind::Alignment, "context '" + id + "' is not aligned to the transcript list");
        tpm_.emplace(id, std::move(v));
    }
}

std::vector<std::string> ContextStore::vocabulary() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : tpm_) ids.push_back(id);
    return ids;
}

bool ContextStore::contains(std::string_view context_id) const {
    return tpm_.find(context_id) != tpm_.end();
}

const Eigen::VectorXd& ContextStore::tpm(std::string_view context_id) const {
    const auto it = tpm_.find(context_id);
    if (it == tpm_.end()) fail(ErrorKind::Setting, "context '" + std::string(context_id) + "' is not registered");
    if (observer_) observer_->on_read(context_id);
    return it->second;
}

ContextMatrix ContextStore::matrix(std::string_view context_id, FeatureSet set) const {
    return assemble(std::string(context_id), transcript_ids_, tpm(context_id), set);
}

Eigen::VectorXd ContextStore::logtpm(std::string_view context_id) const {
    return log_tpm(tpm(context_id));
}

// ---------------------------------------------------------------- setting ---

WeakLabelVector build_run_label(const RunConfig& cfg, const ContextStore& store) {
    if (!store.contains(cfg.label_late_context) || !store.contains(cfg.label_early_context))
        fail(ErrorKind::Setting, "label reference contexts '" + cfg.label_late_context + "' and '" +
                                     cfg.label_early_context + "' must both be registered");
    const Eigen::VectorXd early = store.logtpm(cfg.label_early_context);
    auto contrast = build_contrast_label(store.logtpm(cfg.label_late_context), early, cfg.label_late_context,
                                         cfg.label_early_context);
    if (cfg.label_mode == LabelConstruction::FixedContrast) return contrast;
    return build_external_split_label(early, contrast, store.transcript_ids(), cfg.master_seed, cfg.label_k);
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(static_cast<Eigen::Index>(rows[k]));
    return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

void validate_setting(const Setting& s, const ContextStore& store) {
    if (!store.contains(s.train_context) || !store.contains(s.test_context))
        fail(ErrorKind::Setting, std::string(to_string(s.kind)) + ": contexts '" + s.train_context + "' / '" +
                                     s.test_context + "' are not both registered");
    if (s.kind == SettingKind::InDomain) {
        if (s.train_context != s.test_context)
            fail(ErrorKind::Setting, "in_domain: train and test context must coincide");
        if (!(s.split_fraction > 0.0 && s.split_fraction < 1.0))
            fail(ErrorKind::Setting, "in_domain: split fraction must lie in (0,1)");
    } else if (s.train_context == s.test_context) {
        fail(ErrorKind::Setting, std::string(to_string(s.kind)) + ": train and test contexts must differ");
    }
}

}  // namespace

EvalRecord run_setting(const RunConfig& cfg, const ContextStore& store, const WeakLabelVector& label,
                       const Setting& setting, const ModelSpec& spec, FeatureSet features) {
    EvalRecord rec;
    rec.setting = setting.kind;
    rec.train_context = setting.train_context;
    rec.test_context = setting.test_context;
    rec.family = family_of(spec);
    rec.features = features;
    rec.mitigation = cfg.mitigation;
    rec.label_fingerprint = label.fingerprint();

    validate_setting(setting, store);
    const auto n = store.transcript_ids().size();
    if (static_cast<std::size_t>(label.values.size()) != n)
        fail(ErrorKind::Alignment, "label is not aligned to the registered transcripts");

    if (setting.kind == SettingKind::InDomain) {
        auto perm = all_rows(n);
        std::mt19937_64 rng(setting.split_seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto n_train = static_cast<std::size_t>(std::floor(setting.split_fraction * static_cast<double>(n)));
        rec.train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        rec.test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    } else {
        rec.train_rows = all_rows(n);
        rec.test_rows = all_rows(n);
    }
    if (rec.train_rows.size() < 2) fail(ErrorKind::Setting, "fewer than 2 training rows");
    if (rec.test_rows.size() < 2) fail(ErrorKind::Setting, "fewer than 2 test rows");
    const auto vocabulary = store.vocabulary();

    // fit: only the training context is read
    ProtocolObserver* obs = store.observer();
    if (obs) obs->on_phase(setting, Phase::Fit);
    ContextMatrix train = store.matrix(setting.train_context, features);
    if (cfg.mitigation == Mitigation::ContextOneHot) train = augment_context_onehot(train, vocabulary);
    Eigen::MatrixXd x_train = take_rows(train.values, rec.train_rows);
    const Eigen::VectorXd y_train = take_rows(label.values, rec.train_rows);
    if (cfg.mitigation == Mitigation::TrainStandardize) {
        rec.standardizer = fit_standardizer(x_train, train.column_names);
        x_train = apply_standardizer(*rec.standardizer, x_train);
    }
    const TrainedModel model = fit(spec, x_train, y_train, train.column_names, cfg.threads);

    if (obs) obs->on_phase(setting, Phase::Evaluate);
    ContextMatrix test = store.matrix(setting.test_context, features);
    if (cfg.mitigation == Mitigation::ContextOneHot) test = augment_context_onehot(test, vocabulary);
    Eigen::MatrixXd x_test = take_rows(test.values, rec.test_rows);
    if (rec.standardizer) x_test = apply_standardizer(*rec.standardizer, x_test);

    rec.predictions = predict(model, x_test);
    rec.metrics = evaluate(take_rows(label.values, rec.test_rows), rec.predictions);
    rec.feature_names = model.feature_names;
    rec.importance = model.importance;
    return rec;
}

// -------------------------------------------------------------------- run ---

namespace {

bool runs_on(const RunConfig& cfg, const ModelSpec& spec, FeatureSet fs) {
    return !(cfg.gbt_logtpm_only && family_of(spec) == ModelFamily::Gbt && fs != FeatureSet::LogTpmOnly);
}

std::optional<double> performance_of(const MetricTriple& m, PerformanceMetric metric) {
    return metric == PerformanceMetric::Spearman ? m.spearman : m.r2;
}

}  // namespace

RunResult run_all(const RunConfig& cfg, const ContextStore& store) {
    if (cfg.model_grid.empty() || cfg.feature_grid.empty() || cfg.settings.empty())
        fail(ErrorKind::Config, "run_all: settings, model grid and feature grid must be non-empty");
    for (const auto& s : cfg.settings) validate_setting(s, store);

    RunResult out;
    out.label = build_run_label(cfg, store);
    const WeakLabelVector& label = out.label;

    for (const auto& setting : cfg.settings)
        for (const auto& spec : cfg.model_grid)
            for (auto fs : cfg.feature_grid) {
                if (!runs_on(cfg, spec, fs)) continue;
                try {
                    out.records.push_back(run_setting(cfg, store, label, setting, spec, fs));
                } catch (const Error& e) {
                    EvalRecord rec;
                    rec.setting = setting.kind;
                    rec.train_context = setting.train_context;
                    rec.test_context = setting.test_context;
                    rec.family = family_of(spec);
                    rec.features = fs;
                    rec.mitigation = cfg.mitigation;
                    rec.label_fingerprint = label.fingerprint();
                    rec.error_code = to_string(e.kind());
                    rec.error_message = e.what();
                    out.records.push_back(std::move(rec));
                    out.partial = true;
                }
            }
    std::stable_sort(out.records.begin(), out.records.end(), [](const EvalRecord& a, const EvalRecord& b) {
        if (a.setting != b.setting) return a.setting < b.setting;
        if (a.family != b.family) return a.family < b.family;
        return a.features < b.features;
    });

    // feature-label correlations on every registered context
    const auto vocabulary = store.vocabulary();
    std::map<std::pair<std::string, std::string>, std::optional<double>> rho;
    for (const auto& ctx : vocabulary) {
        const auto m = store.matrix(ctx, FeatureSet::Both);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            CorrEntry e{ctx, m.column_names[static_cast<std::size_t>(j)], std::nullopt,
                        static_cast<std::size_t>(m.rows())};
            try {
                e.rho = spearman(m.values.col(j), label.values);
            } catch (const Error& err) {
                if (err.kind() != ErrorKind::UndefinedMetric) throw;
            }
            rho[{ctx, e.feature_name}] = e.rho;
            out.feature_label_corr.push_back(std::move(e));
        }
    }

    // stability differences for each shifted setting's (train, test) pair
    for (const auto& s : cfg.settings) {
        if (s.kind == SettingKind::InDomain) continue;
        for (auto feature : {kLogTpmColumn, kRankColumn}) {
            StabilityDiff d{std::string(feature), {s.train_context, s.test_context}, std::nullopt};
            const auto a = rho[{s.train_context, d.feature_name}];
            const auto b = rho[{s.test_context, d.feature_name}];
            if (a && b)
                d.value = shift_score(FeatureLabelCorr{s.train_context, d.feature_name, *a, 0},
                                      FeatureLabelCorr{s.test_context, d.feature_name, *b, 0})
                              .value;
            out.stability_diffs.push_back(std::move(d));
        }
    }

    // models fitted on whole contexts, shared by the transfer sweep and the
    // importance-stability table
    struct Key {
        std::size_t spec;
        FeatureSet fs;
        std::string ctx;
        bool operator<(const Key& o) const {
            return std::tie(spec, fs, ctx) < std::tie(o.spec, o.fs, o.ctx);
        }
    };
    std::map<Key, std::optional<TrainedModel>> fitted;
    auto model_for = [&](std::size_t spec_idx, FeatureSet fs, const std::string& ctx) -> const std::optional<TrainedModel>& {
        const Key key{spec_idx, fs, ctx};
        auto it = fitted.find(key);
        if (it != fitted.end()) return it->second;
        std::optional<TrainedModel> model;
        try {
            ContextMatrix m = store.matrix(ctx, fs);
            if (cfg.mitigation == Mitigation::ContextOneHot) m = augment_context_onehot(m, vocabulary);
            Eigen::MatrixXd x = m.values;
            if (cfg.mitigation == Mitigation::TrainStandardize)
                x = apply_standardizer(fit_standardizer(x, m.column_names), x);
            model = fit(cfg.model_grid[spec_idx], x, label.values, m.column_names, cfg.threads);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UndefinedMetric) out.partial = true;
        }
        return fitted.emplace(key, std::move(model)).first->second;
    };

    // transfer sweep over all ordered context pairs, on logTPM
    for (const auto& train_ctx : vocabulary)
        for (const auto& test_ctx : vocabulary) {
            if (train_ctx == test_ctx) continue;
            const auto a = rho[{train_ctx, std::string(kLogTpmColumn)}];
            const auto b = rho[{test_ctx, std::string(kLogTpmColumn)}];
            if (!a || !b) continue;
            ShiftEntry entry{shift_score(FeatureLabelCorr{train_ctx, std::string(kLogTpmColumn), *a, 0},
                                         FeatureLabelCorr{test_ctx, std::string(kLogTpmColumn), *b, 0}),
                             {}};
            for (std::size_t k = 0; k < cfg.model_grid.size(); ++k) {
                const auto& model = model_for(k, FeatureSet::LogTpmOnly, train_ctx);
                std::optional<double> perf;
                if (model) {
                    ContextMatrix m = store.matrix(test_ctx, FeatureSet::LogTpmOnly);
                    if (cfg.mitigation == Mitigation::ContextOneHot) m = augment_context_onehot(m, vocabulary);
                    Eigen::MatrixXd x = m.values;
                    if (cfg.mitigation == Mitigation::TrainStandardize) {
                        // standardize with the training context's statistics
                        const ContextMatrix tm = store.matrix(train_ctx, FeatureSet::LogTpmOnly);
                        x = apply_standardizer(fit_standardizer(tm.values, tm.column_names), x);
                    }
                    perf = performance_of(evaluate(label.values, predict(*model, x)), cfg.shift_metric);
                }
                entry.performance[to_string(family_of(cfg.model_grid[k]))] = perf;
            }
            out.shift_scores.push_back(std::move(entry));
        }

    for (std::size_t k = 0; k < cfg.model_grid.size(); ++k) {
        const auto family = family_of(cfg.model_grid[k]);
        ShiftCorrelation sc{family, cfg.shift_metric, std::nullopt, 0};
        std::vector<ShiftScore> scores;
        std::vector<double> perf;
        for (const auto& e : out.shift_scores) {
            const auto it = e.performance.find(to_string(family));
            if (it == e.performance.end() || !it->second) continue;
            scores.push_back(e.score);
            perf.push_back(*it->second);
        }
        sc.pairs = scores.size();
        if (scores.size() >= 3) {
            try {
                sc.rho = shift_vs_performance(scores, perf);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::UndefinedMetric) throw;
            }
        }
        out.shift_vs_performance.push_back(sc);
    }

    // importance-rank stability between every pair of contexts
    for (std::size_t k = 0; k < cfg.model_grid.size(); ++k)
        for (auto fs : cfg.feature_grid) {
            if (!runs_on(cfg, cfg.model_grid[k], fs)) continue;
            for (std::size_t i = 0; i < vocabulary.size(); ++i)
                for (std::size_t j = i + 1; j < vocabulary.size(); ++j) {
                    const auto& a = model_for(k, fs, vocabulary[i]);
                    const auto& b = model_for(k, fs, vocabulary[j]);
                    StabilityEntry e{fs, ImportanceStability{family_of(cfg.model_grid[k]),
                                                             {vocabulary[i], vocabulary[j]}, std::nullopt}};
                    if (a && b) e.stability = importance_rank_stability(*a, *b, {vocabulary[i], vocabulary[j]});
                    out.importance_stability.push_back(std::move(e));
                }
        }
    return out;
}

}  // namespace driftlab
