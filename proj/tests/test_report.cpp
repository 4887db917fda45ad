#include "driftlab/diagnostics.hpp"
#include "driftlab/io.hpp"
#include "driftlab/report.hpp"
#include "driftlab/synthetic.hpp"

#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <sstream>

using namespace driftlab;

namespace {

RunResult small_run(bool with_failure) {
    PaperPatternConfig pc;
    pc.n = 200;
    const auto data = generate_paper_pattern(pc);
    const ContextStore store(align_contexts(data.quant));
    RunConfig cfg;
    cfg.settings = standard_settings(data.source, data.cross, data.late, 0);
    cfg.model_grid = {RidgeSpec{}};
    if (with_failure) cfg.model_grid.push_back(RidgeSpec{-1.0});
    cfg.feature_grid = {FeatureSet::LogTpmOnly, FeatureSet::Both};
    cfg.label_late_context = data.late;
    cfg.label_early_context = data.source;
    return run_all(cfg, store);
}

std::vector<std::vector<std::string>> rows(const std::string& tsv) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(tsv);
    std::string line;
    while (std::getline(in, line)) {
        out.emplace_back();
        for (auto f : io::split(line, '\t')) out.back().emplace_back(f);
    }
    return out;
}

}  // namespace

TEST_CASE("empty partial report") {
    RunReport r;
    r.partial = true;
    const auto json = report_to_json(r);
    const auto j = nlohmann::json::parse(json);
    CHECK(j["partial"] == true);
    CHECK(j["eval_records"].empty());
    CHECK(j["provenance"]["toolkit_version"] == std::string(kToolkitVersion));
    CHECK(eval_tsv(r).find('\n') == eval_tsv(r).size() - 1);
    CHECK(report_to_json(parse_report(json)) == json);

    support::TempDir tmp("empty_report");
    emit(r, tmp.path() / "report.json");
    for (const char* t : kReportTables) CHECK(std::filesystem::exists(tmp.path() / t));
}

TEST_CASE("emit, parse, emit is byte-identical") {
    auto report = make_report(small_run(true), Provenance{});
    report.provenance.config = {{"command", "run"}, {"seed", "0"}};
    report.provenance.input_fingerprints = {{"a.quant.sf", io::sha256_hex("a")}};
    support::TempDir tmp("roundtrip");
    const auto path = tmp.path() / "report.json";
    emit(report, path);
    const auto first = io::read_file(path);
    const auto parsed = parse_report(first);
    CHECK(parsed.eval_records.size() == report.eval_records.size());
    CHECK(parsed.partial);
    support::TempDir tmp2("roundtrip2");
    emit(parsed, tmp2.path() / "report.json");
    CHECK(io::read_file(tmp2.path() / "report.json") == first);
    for (const char* t : kReportTables) CHECK(io::read_file(tmp2.path() / t) == io::read_file(tmp.path() / t));
}

TEST_CASE("undefined values serialize as null") {
    auto report = make_report(small_run(true), Provenance{});
    report.feature_label_corr.push_back(CorrEntry{"X", "logTPM", std::nullopt, 10});
    const auto j = nlohmann::json::parse(report_to_json(report));
    bool saw_failed = false;
    for (const auto& rec : j["eval_records"]) {
        if (rec["error_code"].is_null()) continue;
        saw_failed = true;
        CHECK(rec["r2"].is_null());
        CHECK(rec["spearman"].is_null());
        CHECK(rec["error_code"] == "parameter");
    }
    CHECK(saw_failed);
    CHECK(j["feature_label_corr"].back()["rho"].is_null());
    CHECK(feature_label_corr_tsv(report).find("X\tlogTPM\tNA\t10\n") != std::string::npos);
}

TEST_CASE("stability table reproduces the reference rows") {
    RunReport r;
    const FeatureLabelCorr k562{"K562_D2", "logTPM", -0.282, 251955}, d2{"HEK293FT_D2", "logTPM", -0.468, 251955},
        d7{"HEK293FT_D7", "logTPM", -0.001, 251955};
    for (const auto& [a, b] : {std::pair{k562, d2}, std::pair{d2, d7}}) {
        const auto s = shift_score(a, b);
        r.stability_diffs.push_back({s.feature_name, s.context_pair, s.value});
    }
    const auto t = rows(stability_tsv(r));
    REQUIRE(t.size() == 3);
    CHECK(t[0] == std::vector<std::string>{"feature", "context_a", "context_b", "abs_diff"});
    CHECK(t[1][0] == "logTPM");
    CHECK(t[1][1] == "K562_D2");
    CHECK(t[1][2] == "HEK293FT_D2");
    CHECK(std::abs(*io::parse_double(t[1][3]) - 0.186) <= 1e-12);
    CHECK(std::abs(*io::parse_double(t[2][3]) - 0.468) <= 0.002);
}

TEST_CASE("tables mirror the report") {
    const auto report = make_report(small_run(false), Provenance{});
    const auto e = rows(eval_tsv(report));
    CHECK(e.size() == report.eval_records.size() + 1);
    CHECK(rows(feature_label_corr_tsv(report)).size() == report.feature_label_corr.size() + 1);
    const auto s = rows(shift_score_tsv(report));
    CHECK(s.size() == 7);
    CHECK(s[0].back() == "perf_ridge");
}

TEST_CASE("report parse errors and overwrite protection") {
    CHECK_THROWS_KIND(parse_report("{}"), ErrorKind::Schema);
    CHECK_THROWS_KIND(parse_report("not json"), ErrorKind::Schema);
    CHECK_THROWS_KIND(parse_report(R"({"schema_version": 99})"), ErrorKind::Schema);
    support::TempDir tmp("protect");
    RunReport r;
    emit(r, tmp.path() / "report.json");
    CHECK_THROWS_KIND(emit(r, tmp.path() / "report.json"), ErrorKind::Io);
    CHECK_NOTHROW(emit(r, tmp.path() / "report.json", true));
}
