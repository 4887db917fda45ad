#include "driftlab/report.hpp"

#include "driftlab/error.hpp"
#include "driftlab/io.hpp"

#include <json.hpp>

#include <algorithm>

namespace driftlab {

using Json = nlohmann::ordered_json;

RunReport make_report(const RunResult& result, Provenance provenance) {
    RunReport r;
    r.eval_records = result.records;
    for (auto& rec : r.eval_records) {
        rec.standardizer.reset();
        rec.predictions.resize(0);
        rec.train_rows.clear();
        rec.test_rows.clear();
    }
    r.feature_label_corr = result.feature_label_corr;
    r.stability_diffs = result.stability_diffs;
    r.shift_scores = result.shift_scores;
    r.shift_vs_performance = result.shift_vs_performance;
    r.importance_stability = result.importance_stability;
    r.partial = result.partial;

    const auto& label = result.label;
    provenance.label.construction = label.construction;
    provenance.label.late_context = label.late_context;
    provenance.label.early_context = label.early_context;
    provenance.label.split_seed = label.split_seed;
    provenance.label.k = label.k;
    provenance.label.n = static_cast<std::size_t>(label.values.size());
    provenance.label.fingerprint = label.fingerprint();
    r.provenance = std::move(provenance);
    return r;
}

// ------------------------------------------------------------------- emit ---

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

Json pair_json(const ContextPair& p) { return Json::array({p.first, p.second}); }

Json record_json(const EvalRecord& rec) {
    Json j;
    j["setting"] = to_string(rec.setting);
    j["train_context"] = rec.train_context;
    j["test_context"] = rec.test_context;
    j["family"] = to_string(rec.family);
    j["features"] = to_string(rec.features);
    j["mitigation"] = to_string(rec.mitigation);
    if (rec.metrics) {
        j["n"] = rec.metrics->n;
        j["r2"] = opt(rec.metrics->r2);
        j["mae"] = rec.metrics->mae;
        j["spearman"] = opt(rec.metrics->spearman);
    } else {
        j["n"] = nullptr;
        j["r2"] = nullptr;
        j["mae"] = nullptr;
        j["spearman"] = nullptr;
    }
    j["feature_names"] = rec.feature_names;
    Json imp = Json::array();
    for (Eigen::Index k = 0; k < rec.importance.size(); ++k) imp.push_back(rec.importance(k));
    j["importance"] = imp;
    j["label_fingerprint"] = rec.label_fingerprint;
    j["error_code"] = opt(rec.error_code);
    j["error_message"] = opt(rec.error_message);
    return j;
}

Json to_json(const RunReport& r) {
    Json root;
    root["schema_version"] = r.provenance.schema_version;
    root["partial"] = r.partial;

    Json records = Json::array();
    for (const auto& rec : r.eval_records) records.push_back(record_json(rec));
    root["eval_records"] = records;

    Json corr = Json::array();
    for (const auto& c : r.feature_label_corr)
        corr.push_back(Json{{"context_id", c.context_id}, {"feature", c.feature_name}, {"rho", opt(c.rho)}, {"n", c.n}});
    root["feature_label_corr"] = corr;

    Json stab = Json::array();
    for (const auto& s : r.stability_diffs)
        stab.push_back(Json{{"feature", s.feature_name}, {"context_pair", pair_json(s.context_pair)}, {"value", opt(s.value)}});
    root["stability_diffs"] = stab;

    Json shifts = Json::array();
    for (const auto& s : r.shift_scores) {
        Json perf = Json::object();
        for (const auto& [family, v] : s.performance) perf[family] = opt(v);
        shifts.push_back(Json{{"feature", s.score.feature_name},
                              {"context_pair", pair_json(s.score.context_pair)},
                              {"value", s.score.value},
                              {"performance", perf}});
    }
    root["shift_scores"] = shifts;

    Json svp = Json::array();
    for (const auto& s : r.shift_vs_performance)
        svp.push_back(Json{{"family", to_string(s.family)}, {"metric", to_string(s.metric)}, {"rho", opt(s.rho)}, {"pairs", s.pairs}});
    root["shift_vs_performance"] = svp;

    Json imp = Json::array();
    for (const auto& s : r.importance_stability)
        imp.push_back(Json{{"family", to_string(s.stability.family)},
                           {"features", to_string(s.features)},
                           {"context_pair", pair_json(s.stability.context_pair)},
                           {"rank_rho", opt(s.stability.rank_rho)}});
    root["importance_stability"] = imp;

    const auto& p = r.provenance;
    Json prov;
    prov["toolkit_version"] = p.toolkit_version;
    prov["schema_version"] = p.schema_version;
    prov["master_seed"] = p.master_seed;
    Json cfg = Json::object();
    for (const auto& [k, v] : p.config) cfg[k] = v;
    prov["config"] = cfg;
    Json fps = Json::object();
    for (const auto& [k, v] : p.input_fingerprints) fps[k] = v;
    prov["input_fingerprints"] = fps;
    prov["label"] = Json{{"construction", to_string(p.label.construction)},
                         {"late_context", p.label.late_context},
                         {"early_context", p.label.early_context},
                         {"split_seed", opt(p.label.split_seed)},
                         {"k", opt(p.label.k)},
                         {"n", p.label.n},
                         {"fingerprint", p.label.fingerprint}};
    root["provenance"] = prov;
    return root;
}

}  // namespace

std::string report_to_json(const RunReport& report) { return to_json(report).dump(2) + "\n"; }

// ------------------------------------------------------------------ parse ---

namespace {

template <typename T>
std::optional<T> get_opt(const Json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<T>();
}

ContextPair get_pair(const Json& j) {
    const auto& p = j.at("context_pair");
    if (!p.is_array() || p.size() != 2) fail(ErrorKind::Schema, "context_pair must have two entries");
    return {p[0].get<std::string>(), p[1].get<std::string>()};
}

EvalRecord parse_record(const Json& j) {
    EvalRecord rec;
    rec.setting = parse_setting_kind(j.at("setting").get<std::string>());
    rec.train_context = j.at("train_context").get<std::string>();
    rec.test_context = j.at("test_context").get<std::string>();
    rec.family = parse_model_family(j.at("family").get<std::string>());
    rec.features = parse_feature_set(j.at("features").get<std::string>());
    rec.mitigation = parse_mitigation(j.at("mitigation").get<std::string>());
    if (!j.at("n").is_null()) {
        MetricTriple m;
        m.n = j.at("n").get<std::size_t>();
        m.r2 = get_opt<double>(j, "r2");
        m.mae = j.at("mae").get<double>();
        m.spearman = get_opt<double>(j, "spearman");
        rec.metrics = m;
    }
    rec.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const auto imp = j.at("importance").get<std::vector<double>>();
    rec.importance = Eigen::Map<const Eigen::VectorXd>(imp.data(), static_cast<Eigen::Index>(imp.size()));
    rec.label_fingerprint = j.at("label_fingerprint").get<std::string>();
    rec.error_code = get_opt<std::string>(j, "error_code");
    rec.error_message = get_opt<std::string>(j, "error_message");
    return rec;
}

RunReport from_json(const Json& root) {
    RunReport r;
    r.partial = root.at("partial").get<bool>();
    for (const auto& j : root.at("eval_records")) r.eval_records.push_back(parse_record(j));
    for (const auto& j : root.at("feature_label_corr"))
        r.feature_label_corr.push_back(CorrEntry{j.at("context_id").get<std::string>(), j.at("feature").get<std::string>(),
                                                 get_opt<double>(j, "rho"), j.at("n").get<std::size_t>()});
    for (const auto& j : root.at("stability_diffs"))
        r.stability_diffs.push_back(StabilityDiff{j.at("feature").get<std::string>(), get_pair(j), get_opt<double>(j, "value")});
    for (const auto& j : root.at("shift_scores")) {
        ShiftEntry e{ShiftScore{j.at("feature").get<std::string>(), get_pair(j), j.at("value").get<double>()}, {}};
        for (const auto& [family, v] : j.at("performance").items())
            e.performance[family] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        r.shift_scores.push_back(std::move(e));
    }
    for (const auto& j : root.at("shift_vs_performance"))
        r.shift_vs_performance.push_back(ShiftCorrelation{parse_model_family(j.at("family").get<std::string>()),
                                                          parse_performance_metric(j.at("metric").get<std::string>()),
                                                          get_opt<double>(j, "rho"), j.at("pairs").get<std::size_t>()});
    for (const auto& j : root.at("importance_stability"))
        r.importance_stability.push_back(StabilityEntry{
            parse_feature_set(j.at("features").get<std::string>()),
            ImportanceStability{parse_model_family(j.at("family").get<std::string>()), get_pair(j),
                                get_opt<double>(j, "rank_rho")}});

    const auto& pj = root.at("provenance");
    auto& p = r.provenance;
    p.toolkit_version = pj.at("toolkit_version").get<std::string>();
    p.schema_version = pj.at("schema_version").get<int>();
    if (root.at("schema_version").get<int>() != p.schema_version)
        fail(ErrorKind::Schema, "report: schema_version disagrees with provenance");
    p.master_seed = pj.at("master_seed").get<std::uint64_t>();
    for (const auto& [k, v] : pj.at("config").items()) p.config.emplace_back(k, v.get<std::string>());
    for (const auto& [k, v] : pj.at("input_fingerprints").items()) p.input_fingerprints[k] = v.get<std::string>();
    const auto& lj = pj.at("label");
    p.label.construction = parse_label_construction(lj.at("construction").get<std::string>());
    p.label.late_context = lj.at("late_context").get<std::string>();
    p.label.early_context = lj.at("early_context").get<std::string>();
    p.label.split_seed = get_opt<std::uint64_t>(lj, "split_seed");
    p.label.k = get_opt<int>(lj, "k");
    p.label.n = lj.at("n").get<std::size_t>();
    p.label.fingerprint = lj.at("fingerprint").get<std::string>();
    return r;
}

}  // namespace

RunReport parse_report(std::string_view json) {
    try {
        return from_json(Json::parse(json));
    } catch (const Json::exception& e) {
        fail(ErrorKind::Schema, std::string("report: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorKind::Schema, std::string("report: ") + e.what());
    }
}

// ------------------------------------------------------------------- TSVs ---

namespace {

std::string num(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

}  // namespace

std::string eval_tsv(const RunReport& report) {
    std::string out = "setting\ttrain_context\ttest_context\tfamily\tfeatures\tmitigation\tn\tr2\tmae\tspearman\terror_code\n";
    for (const auto& rec : report.eval_records) {
        out += std::string(to_string(rec.setting)) + '\t' + rec.train_context + '\t' + rec.test_context + '\t' +
               to_string(rec.family) + '\t' + to_string(rec.features) + '\t' + to_string(rec.mitigation) + '\t';
        if (rec.metrics)
            out += std::to_string(rec.metrics->n) + '\t' + num(rec.metrics->r2) + '\t' + io::format_double(rec.metrics->mae) +
                   '\t' + num(rec.metrics->spearman);
        else
            out += "NA\tNA\tNA\tNA";
        out += '\t' + rec.error_code.value_or("NA") + '\n';
    }
    return out;
}

std::string feature_label_corr_tsv(const RunReport& report) {
    std::string out = "context_id\tfeature\tspearman_rho\tn\n";
    for (const auto& c : report.feature_label_corr)
        out += c.context_id + '\t' + c.feature_name + '\t' + num(c.rho) + '\t' + std::to_string(c.n) + '\n';
    return out;
}

std::string stability_tsv(const RunReport& report) {
    std::string out = "feature\tcontext_a\tcontext_b\tabs_diff\n";
    for (const auto& s : report.stability_diffs)
        out += s.feature_name + '\t' + s.context_pair.first + '\t' + s.context_pair.second + '\t' + num(s.value) + '\n';
    return out;
}

std::string shift_score_tsv(const RunReport& report) {
    std::vector<std::string> families;
    for (const auto& s : report.shift_scores)
        for (const auto& [f, _] : s.performance)
            if (std::find(families.begin(), families.end(), f) == families.end()) families.push_back(f);
    std::sort(families.begin(), families.end());
    std::string out = "feature\ttrain_context\ttest_context\tshift_score";
    for (const auto& f : families) out += "\tperf_" + f;
    out += '\n';
    for (const auto& s : report.shift_scores) {
        out += s.score.feature_name + '\t' + s.score.context_pair.first + '\t' + s.score.context_pair.second + '\t' +
               io::format_double(s.score.value);
        for (const auto& f : families) {
            const auto it = s.performance.find(f);
            out += '\t' + (it == s.performance.end() ? std::string("NA") : num(it->second));
        }
        out += '\n';
    }
    return out;
}

void emit(const RunReport& report, const std::filesystem::path& path, bool force) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::vector<std::pair<std::filesystem::path, std::string>> files = {
        {path, report_to_json(report)},
        {dir / kReportTables[0], eval_tsv(report)},
        {dir / kReportTables[1], feature_label_corr_tsv(report)},
        {dir / kReportTables[2], stability_tsv(report)},
        {dir / kReportTables[3], shift_score_tsv(report)},
    };
    if (!force)
        for (const auto& [p, _] : files)
            if (std::filesystem::exists(p))
                fail(ErrorKind::Io, "refusing to overwrite '" + p.string() + "' (use --force)");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    for (const auto& [p, content] : files) io::atomic_write_file(p, content);
}

}  // namespace driftlab
