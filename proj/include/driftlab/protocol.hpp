#pragma once

#include "driftlab/diagnostics.hpp"
#include "driftlab/features.hpp"
#include "driftlab/labels.hpp"
#include "driftlab/metrics.hpp"
#include "driftlab/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

class ContextRegistry;

enum class SettingKind { InDomain, CrossDomain, Temporal };
enum class Mitigation { None, ContextOneHot, TrainStandardize };
enum class PerformanceMetric { Spearman, R2 };

const char* to_string(SettingKind kind);  // "in_domain" | "cross_domain" | "temporal"
const char* to_string(Mitigation m);      // "none" | "onehot" | "standardize"
const char* to_string(PerformanceMetric m);
SettingKind parse_setting_kind(std::string_view name);
Mitigation parse_mitigation(std::string_view name);
PerformanceMetric parse_performance_metric(std::string_view name);

struct Setting {
    SettingKind kind = SettingKind::InDomain;
    std::string train_context;
    std::string test_context;
    double split_fraction = 0.8;  // InDomain only
    std::uint64_t split_seed = 0;
};

// The three standard settings: in-domain on `source`, cross-domain from
// `cross` to `source`, temporal from `source` to `late`.
std::vector<Setting> standard_settings(const std::string& source, const std::string& cross, const std::string& late,
                                       std::uint64_t split_seed);

struct RunConfig {
    std::vector<Setting> settings;
    std::vector<ModelSpec> model_grid;
    std::vector<FeatureSet> feature_grid;
    LabelConstruction label_mode = LabelConstruction::FixedContrast;
    std::string label_late_context;
    std::string label_early_context;
    int label_k = kDefaultNeighborCount;
    Mitigation mitigation = Mitigation::None;
    PerformanceMetric shift_metric = PerformanceMetric::Spearman;
    bool gbt_logtpm_only = true;
    std::uint64_t master_seed = 0;
    unsigned threads = 1;  // never affects results
};

enum class Phase { Fit, Evaluate };

// Hooks for auditing which context features a setting touches and when.
class ProtocolObserver {
public:
    virtual ~ProtocolObserver() = default;
    virtual void on_read(std::string_view /*context_id*/) {}
    virtual void on_phase(const Setting& /*setting*/, Phase /*phase*/) {}
};

/// Per-context TPM vectors aligned to one transcript list. Every feature
/// read goes through matrix()/logtpm(), which report to the observer.
class ContextStore {
public:
    explicit ContextStore(const ContextRegistry& registry);
    ContextStore(std::vector<std::string> transcript_ids, std::map<std::string, Eigen::VectorXd> tpm);

    const std::vector<std::string>& transcript_ids() const { return transcript_ids_; }
    std::vector<std::string> vocabulary() const;  // all context ids, sorted
    bool contains(std::string_view context_id) const;

    ContextMatrix matrix(std::string_view context_id, FeatureSet set) const;
    Eigen::VectorXd logtpm(std::string_view context_id) const;

    void set_observer(ProtocolObserver* observer) { observer_ = observer; }
    ProtocolObserver* observer() const { return observer_; }

private:
    const Eigen::VectorXd& tpm(std::string_view context_id) const;

    std::vector<std::string> transcript_ids_;
    std::map<std::string, Eigen::VectorXd, std::less<>> tpm_;
    ProtocolObserver* observer_ = nullptr;
};

struct EvalRecord {
    SettingKind setting = SettingKind::InDomain;
    std::string train_context;
    std::string test_context;
    ModelFamily family = ModelFamily::Ridge;
    FeatureSet features = FeatureSet::LogTpmOnly;
    Mitigation mitigation = Mitigation::None;
    std::optional<MetricTriple> metrics;  // empty when the cell failed
    std::vector<std::string> feature_names;
    Eigen::VectorXd importance;
    std::string label_fingerprint;
    std::optional<std::string> error_code;
    std::optional<std::string> error_message;

    // audit trail, not serialized
    std::optional<Standardizer> standardizer;
    Eigen::VectorXd predictions;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// Built once per run from the configured reference contexts.
WeakLabelVector build_run_label(const RunConfig& cfg, const ContextStore& store);

EvalRecord run_setting(const RunConfig& cfg, const ContextStore& store, const WeakLabelVector& label,
                       const Setting& setting, const ModelSpec& spec, FeatureSet features);

struct CorrEntry {
    std::string context_id;
    std::string feature_name;
    std::optional<double> rho;
    std::size_t n = 0;
};

struct StabilityDiff {
    std::string feature_name;
    ContextPair context_pair;
    std::optional<double> value;
};

struct ShiftEntry {
    ShiftScore score;
    std::map<std::string, std::optional<double>> performance;  // keyed by model family
};

struct ShiftCorrelation {
    ModelFamily family = ModelFamily::Ridge;
    PerformanceMetric metric = PerformanceMetric::Spearman;
    std::optional<double> rho;
    std::size_t pairs = 0;
};

struct StabilityEntry {
    FeatureSet features = FeatureSet::LogTpmOnly;
    ImportanceStability stability;
};

struct RunResult {
    WeakLabelVector label;
    std::vector<EvalRecord> records;
    std::vector<CorrEntry> feature_label_corr;
    std::vector<StabilityDiff> stability_diffs;
    std::vector<ShiftEntry> shift_scores;
    std::vector<ShiftCorrelation> shift_vs_performance;
    std::vector<StabilityEntry> importance_stability;
    bool partial = false;
};

RunResult run_all(const RunConfig& cfg, const ContextStore& store);

}  // namespace driftlab
