#include "cli.hpp"

#include "driftlab/features.hpp"
#include "driftlab/ingest.hpp"
#include "driftlab/io.hpp"
#include "driftlab/labels.hpp"
#include "driftlab/models.hpp"
#include "driftlab/protocol.hpp"
#include "driftlab/report.hpp"
#include "driftlab/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace driftlab::cli {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Format:
        case ErrorKind::Parse:
        case ErrorKind::DuplicateId: return kExitFormat;
        case ErrorKind::Alignment: return kExitAlignment;
        case ErrorKind::Setting: return kExitSetting;
        default: return kExitOther;
    }
}

namespace {

struct IngestOptions {
    std::vector<std::string> quant;
    std::string meta;
    double qc_threshold = kDefaultQcThresholdPct;
    std::string out;
    bool force = false;
};

struct RunOptions {
    std::string registry;
    std::string label_mode = "fixed";
    int k = kDefaultNeighborCount;
    std::string mitigation = "none";
    std::string models = "ridge,forest";
    std::string features = "logtpm,rank,both";
    std::uint64_t seed = 0;
    std::string out;
    bool force = false;
    unsigned threads = 1;
    std::string source;
    std::string cross;
    std::string late;
    std::string shift_metric = "spearman";
    double split_fraction = 0.8;
    bool gbt_all_features = false;
};

struct SynthOptions {
    std::string preset;
    std::uint64_t seed = 0;
    std::string out;
    bool force = false;
    unsigned threads = 1;
};

unsigned resolve_threads(unsigned t) {
    if (t > 0) return t;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

void require_writable_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_directory(dir)) fail(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
    if (!force && fs::exists(dir) && !fs::is_empty(dir))
        fail(ErrorKind::Io, "refusing to write into non-empty '" + dir.string() + "' (use --force)");
    fs::create_directories(dir);
}

std::vector<std::string> split_list(const std::string& text, const char* what) {
    std::vector<std::string> out;
    for (auto part : io::split(text, ',')) {
        const auto item = std::string(io::trim(part));
        if (item.empty()) continue;
        if (std::find(out.begin(), out.end(), item) != out.end())
            fail(ErrorKind::Config, std::string(what) + " lists '" + item + "' twice");
        out.push_back(item);
    }
    if (out.empty()) fail(ErrorKind::Config, std::string(what) + " must not be empty");
    return out;
}

// ---------------------------------------------------------------- ingest ---

// "ID=path"; otherwise a file called quant.sf takes its directory name and
// anything else the file name up to the first dot.
std::pair<std::string, fs::path> quant_source(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq != std::string::npos && eq > 0 && arg.find('/') > eq) return {arg.substr(0, eq), arg.substr(eq + 1)};
    const fs::path p(arg);
    if (p.filename() == "quant.sf") return {p.parent_path().filename().string(), p};
    const auto name = p.filename().string();
    return {name.substr(0, name.find('.')), p};
}

void cmd_ingest(const IngestOptions& opt, std::ostream& out) {
    if (opt.quant.empty()) fail(ErrorKind::Config, "ingest: at least one --quant file is required");
    const auto metas = parse_sample_meta_file(opt.meta);
    std::map<std::string, const SampleMeta*> meta_by_id;
    for (const auto& m : metas) meta_by_id[m.context_id] = &m;

    std::map<std::string, std::vector<QuantRecord>> parsed;
    for (const auto& arg : opt.quant) {
        const auto [id, path] = quant_source(arg);
        if (!meta_by_id.count(id))
            fail(ErrorKind::Format, "no sample metadata for context '" + id + "' (" + path.string() + ")");
        if (parsed.count(id)) fail(ErrorKind::DuplicateId, "context '" + id + "' given by more than one quant file");
        parsed.emplace(id, parse_quant_file(path));
    }

    std::vector<AdmissionEntry> log;
    std::map<std::string, std::vector<QuantRecord>> admitted;
    for (auto& [id, records] : parsed) {
        const auto& meta = *meta_by_id.at(id);
        const bool ok = qc_admit(meta, opt.qc_threshold);
        log.push_back(AdmissionEntry{id, meta.percent_mapped, ok, ok ? "ok" : "qc_failed"});
        if (ok) admitted.emplace(id, std::move(records));
    }
    if (admitted.empty()) fail(ErrorKind::Alignment, "no context passed the QC threshold");
    const auto registry = align_contexts(admitted);

    require_writable_dir(opt.out, opt.force);
    save_registry(opt.out, registry, metas, log);
    for (const auto& e : log)
        out << (e.admitted ? "admitted " : "excluded ") << e.context_id << " percent_mapped=" << io::format_double(e.percent_mapped)
            << (e.admitted ? "" : " reason=" + e.reason) << '\n';
    out << "registry " << opt.out << ": " << registry.context_ids().size() << " contexts, "
        << registry.shared_transcripts().size() << " shared transcripts\n";
}

// ------------------------------------------------------------------- run ---

struct Roles {
    std::string source, cross, late;
};

// source: earliest timepoint of the first cell line sampled at two or more
// timepoints; late: its latest; cross: another cell line at the source day.
Roles resolve_roles(const std::vector<SampleMeta>& metas, const RunOptions& opt) {
    Roles r;
    std::map<std::string, std::map<int, std::string>> by_line;
    for (const auto& m : metas) by_line[m.cell_line][m.timepoint_days] = m.context_id;
    for (const auto& [line, tps] : by_line) {
        if (tps.size() < 2) continue;
        r.source = tps.begin()->second;
        r.late = tps.rbegin()->second;
        for (const auto& [other, otps] : by_line) {
            if (other == line) continue;
            const auto it = otps.find(tps.begin()->first);
            if (it != otps.end()) {
                r.cross = it->second;
                break;
            }
        }
        break;
    }
    if (!opt.source.empty()) r.source = opt.source;
    if (!opt.cross.empty()) r.cross = opt.cross;
    if (!opt.late.empty()) r.late = opt.late;
    if (r.source.empty() || r.cross.empty() || r.late.empty())
        fail(ErrorKind::Setting, "cannot infer source/cross/late contexts from the registry; pass --source, --cross and --late");
    return r;
}

RunReport cmd_run(const RunOptions& opt, std::ostream& out) {
    const auto stored = load_registry(opt.registry);
    const auto roles = resolve_roles(stored.metas, opt);

    RunConfig cfg;
    cfg.label_mode = parse_label_construction(opt.label_mode);
    cfg.label_k = opt.k;
    cfg.mitigation = parse_mitigation(opt.mitigation);
    cfg.shift_metric = parse_performance_metric(opt.shift_metric);
    cfg.gbt_logtpm_only = !opt.gbt_all_features;
    cfg.master_seed = opt.seed;
    cfg.threads = resolve_threads(opt.threads);
    cfg.label_late_context = roles.late;
    cfg.label_early_context = roles.source;
    cfg.settings = standard_settings(roles.source, roles.cross, roles.late, opt.seed);
    for (auto& s : cfg.settings) s.split_fraction = opt.split_fraction;
    for (const auto& m : split_list(opt.models, "--models")) cfg.model_grid.push_back(default_spec(parse_model_family(m), opt.seed));
    for (const auto& f : split_list(opt.features, "--features")) cfg.feature_grid.push_back(parse_feature_set(f));

    ContextStore store(stored.registry);
    const auto result = run_all(cfg, store);

    Provenance prov;
    prov.master_seed = opt.seed;
    prov.input_fingerprints = stored.fingerprints;
    prov.config = {
        {"command", "run"},
        {"registry", opt.registry},
        {"source", roles.source},
        {"cross", roles.cross},
        {"late", roles.late},
        {"label_mode", opt.label_mode},
        {"k", std::to_string(opt.k)},
        {"mitigation", opt.mitigation},
        {"models", opt.models},
        {"features", opt.features},
        {"seed", std::to_string(opt.seed)},
        {"split_fraction", io::format_double(opt.split_fraction)},
        {"shift_metric", opt.shift_metric},
        {"gbt_logtpm_only", cfg.gbt_logtpm_only ? "true" : "false"},
    };
    auto report = make_report(result, std::move(prov));
    emit(report, opt.out, opt.force);

    std::size_t failed = 0;
    for (const auto& r : report.eval_records) failed += r.error_code ? 1 : 0;
    out << "wrote " << opt.out << ": " << report.eval_records.size() << " eval records (" << failed
        << " failed), partial=" << (report.partial ? "true" : "false") << '\n';
    for (const auto& r : report.eval_records) {
        out << "  " << to_string(r.setting) << ' ' << to_string(r.family) << ' ' << to_string(r.features);
        if (r.metrics) {
            auto show = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("null"); };
            out << " r2=" << show(r.metrics->r2) << " spearman=" << show(r.metrics->spearman);
        } else {
            out << " error=" << r.error_code.value_or("?");
        }
        out << '\n';
    }
    return report;
}

// ----------------------------------------------------------------- synth ---

struct Check {
    std::string name;
    std::string value;
    std::string criterion;
    bool pass = false;
};

bool write_checks(const fs::path& path, const std::vector<Check>& checks, std::ostream& out) {
    bool all = !checks.empty();
    std::string text = "check\tvalue\tcriterion\tresult\n";
    for (const auto& c : checks) {
        all = all && c.pass;
        text += c.name + '\t' + c.value + '\t' + c.criterion + '\t' + (c.pass ? "PASS" : "FAIL") + '\n';
        out << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << c.value << " (" << c.criterion << ")\n";
    }
    text += std::string("overall\t\t\t") + (all ? "PASS" : "FAIL") + '\n';
    io::atomic_write_file(path, text);
    out << (all ? "PASS" : "FAIL") << " overall\n";
    return all;
}

void export_contexts(const fs::path& dir, const std::string& prefix, const std::vector<SyntheticContext>& contexts) {
    fs::create_directories(dir);
    for (const auto& c : contexts) {
        const auto stem = prefix + c.matrix.context_id;
        io::atomic_write_file(dir / (stem + ".features.tsv"), serialize_context_matrix(c.matrix));
        io::atomic_write_file(dir / (stem + ".labels.tsv"), serialize_synthetic_labels(c));
    }
}

SyntheticConfig preset_base(std::uint64_t seed) {
    SyntheticConfig c;
    c.d = 5;
    c.invariant_set = {0, 1, 2, 3, 4};
    c.beta_S = Eigen::VectorXd(5);
    c.beta_S << 2.0, 1.6, 1.2, 0.8, 0.4;
    c.seed = seed;
    return c;
}

std::string fmt(double v) { return io::format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

bool synth_theorem1(const SynthOptions& opt, const fs::path& dir, std::ostream& out) {
    const std::vector<std::size_t> sizes = {50, 100, 200, 500, 1000, 2000, 5000};
    const RidgeSpec ridge{0.01};
    const unsigned threads = resolve_threads(opt.threads);

    SyntheticConfig clean = preset_base(opt.seed);
    SyntheticConfig noisy = preset_base(opt.seed);
    noisy.sigma = 0.1;
    noisy.g_shape = 0.5;

    std::vector<SyntheticContext> clean_data, noisy_data;
    const auto a = theorem1_check(clean, ridge, sizes, 2000, 10000, 0.02, threads, &clean_data);
    const auto b = theorem1_check(noisy, ridge, sizes, 2000, 10000, 0.02, threads, &noisy_data);
    export_contexts(dir / "data", "noiseless_", clean_data);
    export_contexts(dir / "data", "noisy_", noisy_data);

    std::string curve = "case\tn\tagreement\n";
    for (const auto& p : a.curve) curve += "noiseless\t" + std::to_string(p.n) + '\t' + fmt(p.agreement) + '\n';
    for (const auto& p : b.curve) curve += "sigma0.1_a0.5\t" + std::to_string(p.n) + '\t' + fmt(p.agreement) + '\n';
    io::atomic_write_file(dir / "theorem1_curve.tsv", curve);

    double min_clean = 1.0;
    for (const auto& p : a.curve) min_clean = std::min(min_clean, p.agreement);
    const double last = b.curve.back().agreement;
    return write_checks(dir / "theorem1_check.tsv",
                        {
                            {"noiseless_min_agreement", fmt(min_clean), ">= 0.999 for all n >= 50", min_clean >= 0.999},
                            {"noiseless_non_decreasing", a.non_decreasing ? "true" : "false", "tolerance 0.02", a.non_decreasing},
                            {"noisy_non_decreasing", b.non_decreasing ? "true" : "false", "tolerance 0.02", b.non_decreasing},
                            {"noisy_agreement_n5000", fmt(last), ">= 0.9", last >= 0.9},
                        },
                        out);
}

bool synth_theorem2(const SynthOptions& opt, const fs::path& dir, std::ostream& out) {
    const std::vector<double> deltas = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    SyntheticConfig cfg = preset_base(opt.seed);
    cfg.n = 1000;
    cfg.eta_sd = 0.5;
    cfg.sigma = 0.25;
    cfg.g_shape = 0.1;
    cfg.beta_alt = -cfg.beta_S;
    const unsigned threads = resolve_threads(opt.threads);

    std::string table = "family\tdelta\trank_rho\ttransfer_rho\tin_domain_rho\tshift_magnitude\n";
    std::vector<Check> checks;
    bool exported = false;
    for (auto family : {ModelFamily::Ridge, ModelFamily::Forest}) {
        std::vector<SyntheticContext> data;
        const auto r = theorem2_check(cfg, default_spec(family, opt.seed), deltas, threads, exported ? nullptr : &data);
        if (!exported) export_contexts(dir / "data", "", data);
        exported = true;
        const std::string f = to_string(family);
        for (const auto& row : r.rows)
            table += f + '\t' + fmt(row.delta) + '\t' + fmt(row.rank_rho) + '\t' + fmt(row.transfer_rho) + '\t' +
                     fmt(row.in_domain_rho) + '\t' + fmt(row.shift_magnitude) + '\n';
        checks.push_back({f + "_transfer_non_increasing", r.transfer_non_increasing ? "true" : "false",
                          "transfer rho non-increasing in delta", r.transfer_non_increasing});
        checks.push_back({f + "_rank_rho_at_0", fmt(r.rows.front().rank_rho), "== 1", r.rank_rho_one_at_zero});
        checks.push_back({f + "_shift_vs_transfer", fmt(r.shift_vs_transfer), "<= -0.5",
                          r.shift_vs_transfer && *r.shift_vs_transfer <= -0.5});
        checks.push_back({f + "_delta_vs_transfer", fmt(r.delta_vs_transfer), "<= -0.9",
                          r.delta_vs_transfer && *r.delta_vs_transfer <= -0.9});
    }
    io::atomic_write_file(dir / "theorem2_table.tsv", table);
    return write_checks(dir / "theorem2_check.tsv", checks, out);
}

bool synth_paper_pattern(const SynthOptions& opt, const fs::path& dir, std::ostream& out) {
    PaperPatternConfig pc;
    pc.seed = opt.seed;
    const auto data = generate_paper_pattern(pc);

    const auto data_dir = dir / "data";
    fs::create_directories(data_dir);
    IngestOptions ing;
    for (const auto& [id, records] : data.quant) {
        const auto path = data_dir / (id + ".quant.sf");
        io::atomic_write_file(path, serialize_quant(records));
        ing.quant.push_back(path.string());
    }
    ing.meta = (data_dir / "samples.meta").string();
    io::atomic_write_file(ing.meta, serialize_sample_meta(data.metas));
    ing.out = (dir / "registry").string();
    ing.force = true;
    cmd_ingest(ing, out);

    RunOptions run;
    run.registry = ing.out;
    run.models = "ridge,forest,gbt";
    run.seed = opt.seed;
    run.out = (dir / "report.json").string();
    run.force = true;
    run.threads = opt.threads;
    run.source = data.source;
    run.cross = data.cross;
    run.late = data.late;
    const auto report = cmd_run(run, out);

    RunResult rr;
    rr.records = report.eval_records;
    const auto check = paper_pattern_check(rr);
    std::vector<Check> checks;
    for (const auto& cell : check.cells) {
        auto metric = [](const std::optional<MetricTriple>& m, bool r2) {
            return m ? fmt(r2 ? m->r2 : m->spearman) : std::string("NA");
        };
        const std::string name = std::string(to_string(cell.family)) + '_' + to_string(cell.features);
        checks.push_back({name,
                          "r2 " + metric(cell.in_domain, true) + " > " + metric(cell.cross_domain, true) + " > " +
                              metric(cell.temporal, true) + "; rho " + metric(cell.in_domain, false) + ", " +
                              metric(cell.cross_domain, false) + " > " + metric(cell.temporal, false),
                          "in > cross > temporal; temporal r2 <= 0, rho <= 0.2", cell.pass});
    }
    return write_checks(dir / "paper_pattern_check.tsv", checks, out) && check.pass;
}

int cmd_synth(const SynthOptions& opt, std::ostream& out) {
    const fs::path dir(opt.out);
    require_writable_dir(dir, opt.force);
    bool ok = false;
    if (opt.preset == "theorem1") ok = synth_theorem1(opt, dir, out);
    else if (opt.preset == "theorem2") ok = synth_theorem2(opt, dir, out);
    else if (opt.preset == "paper-pattern") ok = synth_paper_pattern(opt, dir, out);
    else fail(ErrorKind::Config, "unknown preset '" + opt.preset + "'");
    return ok ? kExitOk : kExitCheckFailed;
}

// --------------------------------------------------------------- parsing ---

// Splices key=value lines from --config in front of the command-line flags;
// options keep their last value, so flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    static const std::set<std::string> subcommands = {"ingest", "run", "synth"};
    const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return subcommands.count(a) > 0; });
    if (sub == args.end()) return args;
    std::string path;
    for (auto it = sub + 1; it != args.end(); ++it) {
        if (*it == "--config" && it + 1 != args.end()) path = *(it + 1);
        else if (it->rfind("--config=", 0) == 0) path = it->substr(9);
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config file '" + path + "'");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::ParseError& e) {
        fail(ErrorKind::Config, "config file '" + path + "': " + e.what());
    }
    std::vector<std::string> injected;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--" || item.name == "config") continue;
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == *sub)) continue;
        std::string value;
        for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
        injected.push_back("--" + item.name + "=" + value);
    }
    std::vector<std::string> out(args.begin(), sub + 1);
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), sub + 1, args.end());
    return out;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"driftlab: benchmark harness for weakly supervised models under context shift", "driftlab"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", "driftlab " + std::string(kToolkitVersion) + " (report schema " +
                                          std::to_string(kReportSchemaVersion) + ", config schema " +
                                          std::to_string(kConfigSchemaVersion) + ")");
    app.require_subcommand(1);
    std::string config_path;

    IngestOptions ing;
    auto* ingest = app.add_subcommand("ingest", "validate quantification files and write an aligned registry");
    ingest->add_option("--quant", ing.quant, "quant.sf file, optionally as CONTEXT_ID=path")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->delimiter(',');
    ingest->add_option("--meta", ing.meta, "sample metadata file")->required();
    ingest->add_option("--qc-threshold", ing.qc_threshold, "minimum percent mapped")->capture_default_str();
    ingest->add_option("--out", ing.out, "registry directory")->required();
    ingest->add_flag("--force", ing.force, "write into a non-empty directory");
    ingest->add_option("--config", config_path, "key=value defaults");

    RunOptions ro;
    auto* runc = app.add_subcommand("run", "run the evaluation grid on a registry");
    runc->add_option("--registry", ro.registry)->required();
    runc->add_option("--label-mode", ro.label_mode)->check(CLI::IsMember({"fixed", "external"}))->capture_default_str();
    runc->add_option("--k", ro.k, "neighbours for the external-split label")->check(CLI::PositiveNumber)->capture_default_str();
    runc->add_option("--mitigation", ro.mitigation)
        ->check(CLI::IsMember({"none", "onehot", "standardize"}))
        ->capture_default_str();
    runc->add_option("--models", ro.models, "comma list of ridge,forest,gbt")->capture_default_str();
    runc->add_option("--features", ro.features, "comma list of logtpm,rank,both")->capture_default_str();
    runc->add_option("--seed", ro.seed)->capture_default_str();
    runc->add_option("--out", ro.out, "report path (JSON); tables go next to it")->required();
    runc->add_flag("--force", ro.force, "overwrite an existing report");
    runc->add_option("--threads", ro.threads, "0 = all cores")->capture_default_str();
    runc->add_option("--source", ro.source, "in-domain context");
    runc->add_option("--cross", ro.cross, "cross-domain training context");
    runc->add_option("--late", ro.late, "temporal test context");
    runc->add_option("--shift-metric", ro.shift_metric)->check(CLI::IsMember({"spearman", "r2"}))->capture_default_str();
    runc->add_option("--split-fraction", ro.split_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    runc->add_flag("--gbt-all-features", ro.gbt_all_features, "run gbt on every feature set");
    runc->add_option("--config", config_path, "key=value defaults");

    SynthOptions so;
    auto* synth = app.add_subcommand("synth", "synthetic experiments with pass/fail checks");
    synth->add_option("--preset", so.preset)->required()->check(CLI::IsMember({"theorem1", "theorem2", "paper-pattern"}));
    synth->add_option("--seed", so.seed)->capture_default_str();
    synth->add_option("--out", so.out)->required();
    synth->add_flag("--force", so.force);
    synth->add_option("--threads", so.threads)->capture_default_str();
    synth->add_option("--config", config_path, "key=value defaults");

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e, out, err);
            return rc == 0 ? kExitOk : kExitOther;
        }
        if (ingest->parsed()) {
            cmd_ingest(ing, out);
            return kExitOk;
        }
        if (runc->parsed()) {
            cmd_run(ro, out);
            return kExitOk;
        }
        return cmd_synth(so, out);
    } catch (const Error& e) {
        err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitOther;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace driftlab::cli
