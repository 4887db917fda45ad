#include "driftlab/ingest.hpp"

#include "driftlab/error.hpp"
#include "driftlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace driftlab {

namespace fs = std::filesystem;

std::string canonical_context_id(std::string_view cell_line, int timepoint_days) {
    return std::string(cell_line) + "_D" + std::to_string(timepoint_days);
}

std::vector<QuantRecord> parse_quant(std::string_view content) {
    std::vector<QuantRecord> records;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        const auto line = io::strip_cr(content.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;

        if (!have_header) {
            if (line != kQuantHeader)
                fail(ErrorKind::Format, "quantification header must be '" + std::string(kQuantHeader) +
                                            "', got '" + std::string(line) + "'");
            have_header = true;
            continue;
        }
        if (line.empty()) continue;

        const auto fields = io::split(line, '\t');
        if (fields.size() != 5)
            throw ParseError(line_no, "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
        QuantRecord r;
        r.transcript_id = std::string(fields[0]);
        if (r.transcript_id.empty()) throw ParseError(line_no, "empty transcript id");
        const auto length = io::parse_int(fields[1]);
        const auto eff = io::parse_double(fields[2]);
        const auto tpm = io::parse_double(fields[3]);
        const auto reads = io::parse_double(fields[4]);
        if (!length) throw ParseError(line_no, "non-numeric Length '" + std::string(fields[1]) + "'");
        if (!eff) throw ParseError(line_no, "non-numeric EffectiveLength '" + std::string(fields[2]) + "'");
        if (!tpm) throw ParseError(line_no, "non-numeric TPM '" + std::string(fields[3]) + "'");
        if (!reads) throw ParseError(line_no, "non-numeric NumReads '" + std::string(fields[4]) + "'");
        r.length = *length;
        r.effective_length = *eff;
        r.tpm = *tpm;
        r.num_reads = *reads;
        if (r.length < 1) throw ParseError(line_no, "Length must be >= 1");
        if (!(r.effective_length > 0.0) || !std::isfinite(r.effective_length))
            throw ParseError(line_no, "EffectiveLength must be positive");
        if (!(r.tpm >= 0.0) || !std::isfinite(r.tpm)) throw ParseError(line_no, "TPM must be non-negative");
        if (!(r.num_reads >= 0.0) || !std::isfinite(r.num_reads))
            throw ParseError(line_no, "NumReads must be non-negative");
        if (!seen.insert(r.transcript_id).second)
            fail(ErrorKind::DuplicateId, "line " + std::to_string(line_no) + ": duplicate transcript id '" +
                                             r.transcript_id + "'");
        records.push_back(std::move(r));
    }
    if (!have_header) fail(ErrorKind::Format, "quantification file is empty (missing header)");
    return records;
}

std::vector<QuantRecord> parse_quant_file(const fs::path& path) {
    try {
        return parse_quant(io::read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

std::string serialize_quant(const std::vector<QuantRecord>& records) {
    std::string out(kQuantHeader);
    out.push_back('\n');
    for (const auto& r : records) {
        out += r.transcript_id;
        out.push_back('\t');
        out += std::to_string(r.length);
        out.push_back('\t');
        out += io::format_double(r.effective_length);
        out.push_back('\t');
        out += io::format_double(r.tpm);
        out.push_back('\t');
        out += io::format_double(r.num_reads);
        out.push_back('\n');
    }
    return out;
}

namespace {

struct MetaDraft {
    std::optional<std::string> context_id, cell_line;
    std::optional<int> timepoint;
    std::optional<double> mapped;
    std::size_t first_line = 0;

    bool empty() const { return !context_id && !cell_line && !timepoint && !mapped; }
};

SampleMeta finish(const MetaDraft& d) {
    const auto where = "metadata block at line " + std::to_string(d.first_line);
    if (!d.context_id || !d.cell_line || !d.timepoint || !d.mapped)
        fail(ErrorKind::Format, where + ": requires context_id, cell_line, timepoint_days, percent_mapped");
    SampleMeta m{*d.context_id, *d.cell_line, *d.timepoint, *d.mapped};
    if (m.timepoint_days < 0) fail(ErrorKind::Format, where + ": timepoint_days must be >= 0");
    if (!(m.percent_mapped >= 0.0 && m.percent_mapped <= 100.0))
        fail(ErrorKind::Format, where + ": percent_mapped must lie in [0,100]");
    if (m.context_id != canonical_context_id(m.cell_line, m.timepoint_days))
        fail(ErrorKind::Format, where + ": context_id '" + m.context_id + "' is not " +
                                    canonical_context_id(m.cell_line, m.timepoint_days));
    return m;
}

}  // namespace

std::vector<SampleMeta> parse_sample_meta(std::string_view content) {
    std::vector<SampleMeta> out;
    MetaDraft draft;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto flush = [&] {
        if (!draft.empty()) out.push_back(finish(draft));
        draft = MetaDraft{};
    };
    while (pos <= content.size()) {
        auto end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        const auto line = io::trim(content.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) {
            flush();
            continue;
        }
        if (line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
        const auto key = io::trim(line.substr(0, eq));
        const auto value = io::trim(line.substr(eq + 1));
        if (key == "context_id" && draft.context_id) flush();
        if (draft.empty()) draft.first_line = line_no;
        if (key == "context_id") {
            draft.context_id = std::string(value);
        } else if (key == "cell_line") {
            draft.cell_line = std::string(value);
        } else if (key == "timepoint_days") {
            const auto v = io::parse_int(value);
            if (!v) throw ParseError(line_no, "timepoint_days is not an integer");
            draft.timepoint = static_cast<int>(*v);
        } else if (key == "percent_mapped") {
            const auto v = io::parse_double(value);
            if (!v) throw ParseError(line_no, "percent_mapped is not a number");
            draft.mapped = *v;
        } else {
            throw ParseError(line_no, "unknown metadata key '" + std::string(key) + "'");
        }
    }
    flush();
    return out;
}

std::vector<SampleMeta> parse_sample_meta_file(const fs::path& path) {
    return parse_sample_meta(io::read_file(path));
}

std::string serialize_sample_meta(const std::vector<SampleMeta>& metas) {
    std::string out;
    for (std::size_t i = 0; i < metas.size(); ++i) {
        if (i > 0) out.push_back('\n');
        const auto& m = metas[i];
        out += "context_id=" + m.context_id + "\n";
        out += "cell_line=" + m.cell_line + "\n";
        out += "timepoint_days=" + std::to_string(m.timepoint_days) + "\n";
        out += "percent_mapped=" + io::format_double(m.percent_mapped) + "\n";
    }
    return out;
}

bool qc_admit(const SampleMeta& meta, double threshold_pct) {
    return meta.percent_mapped >= threshold_pct;
}

std::vector<std::string> ContextRegistry::context_ids() const {
    std::vector<std::string> ids;
    ids.reserve(contexts_.size());
    for (const auto& [id, _] : contexts_) ids.push_back(id);
    return ids;
}

bool ContextRegistry::contains(std::string_view context_id) const {
    return contexts_.find(std::string(context_id)) != contexts_.end();
}

const std::vector<QuantRecord>& ContextRegistry::records(std::string_view context_id) const {
    const auto it = contexts_.find(std::string(context_id));
    if (it == contexts_.end()) fail(ErrorKind::Alignment, "unknown context '" + std::string(context_id) + "'");
    return it->second;
}

const QuantRecord& ContextRegistry::record(std::string_view context_id, std::string_view transcript_id) const {
    const auto& recs = records(context_id);
    const auto it = std::lower_bound(shared_.begin(), shared_.end(), transcript_id,
                                     [](const std::string& a, std::string_view b) { return a < b; });
    if (it == shared_.end() || *it != transcript_id)
        fail(ErrorKind::Alignment, "transcript '" + std::string(transcript_id) + "' is not shared");
    return recs[static_cast<std::size_t>(it - shared_.begin())];
}

Eigen::VectorXd ContextRegistry::tpm(std::string_view context_id) const {
    const auto& recs = records(context_id);
    Eigen::VectorXd v(static_cast<Eigen::Index>(recs.size()));
    for (std::size_t i = 0; i < recs.size(); ++i) v(static_cast<Eigen::Index>(i)) = recs[i].tpm;
    return v;
}

ContextRegistry align_contexts(const std::map<std::string, std::vector<QuantRecord>>& contexts) {
    if (contexts.empty()) fail(ErrorKind::Alignment, "no contexts to align");

    std::vector<std::unordered_map<std::string_view, std::size_t>> index;
    index.reserve(contexts.size());
    for (const auto& [id, recs] : contexts) {
        auto& idx = index.emplace_back();
        idx.reserve(recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i)
            if (!idx.emplace(recs[i].transcript_id, i).second)
                fail(ErrorKind::DuplicateId, "context '" + id + "': duplicate transcript id '" +
                                                 recs[i].transcript_id + "'");
    }

    ContextRegistry reg;
    for (const auto& [tid, _] : index.front()) {
        bool everywhere = true;
        for (std::size_t c = 1; c < index.size() && everywhere; ++c) everywhere = index[c].count(tid) > 0;
        if (everywhere) reg.shared_.emplace_back(tid);
    }
    if (reg.shared_.empty()) fail(ErrorKind::Alignment, "transcript intersection across contexts is empty");
    std::sort(reg.shared_.begin(), reg.shared_.end());

    std::size_t c = 0;
    for (const auto& [id, recs] : contexts) {
        std::vector<QuantRecord> aligned;
        aligned.reserve(reg.shared_.size());
        for (const auto& tid : reg.shared_) aligned.push_back(recs[index[c].at(tid)]);
        reg.contexts_.emplace(id, std::move(aligned));
        ++c;
    }
    return reg;
}

void save_registry(const fs::path& dir, const ContextRegistry& registry, const std::vector<SampleMeta>& metas,
                   const std::vector<AdmissionEntry>& log) {
    fs::create_directories(dir);
    std::vector<SampleMeta> admitted;
    for (const auto& m : metas)
        if (registry.contains(m.context_id)) admitted.push_back(m);
    io::atomic_write_file(dir / "contexts.meta", serialize_sample_meta(admitted));

    std::string admission = "context_id\tpercent_mapped\tstatus\treason\n";
    for (const auto& e : log)
        admission += e.context_id + "\t" + io::format_double(e.percent_mapped) + "\t" +
                     (e.admitted ? "admitted" : "excluded") + "\t" + e.reason + "\n";
    io::atomic_write_file(dir / "admission.tsv", admission);

    for (const auto& [id, recs] : registry.contexts())
        io::atomic_write_file(dir / (id + ".quant.sf"), serialize_quant(recs));
}

StoredRegistry load_registry(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorKind::Io, "registry directory not found: " + dir.string());
    const auto meta_path = dir / "contexts.meta";
    auto metas = parse_sample_meta_file(meta_path);
    std::map<std::string, std::string> fingerprints;
    fingerprints["contexts.meta"] = io::sha256_file(meta_path);

    std::map<std::string, std::vector<QuantRecord>> contexts;
    for (const auto& m : metas) {
        const auto name = m.context_id + ".quant.sf";
        const auto path = dir / name;
        const auto content = io::read_file(path);
        fingerprints[name] = io::sha256_hex(content);
        try {
            contexts.emplace(m.context_id, parse_quant(content));
        } catch (const Error& e) {
            throw Error(e.kind(), path.string() + ": " + e.what());
        }
    }
    auto registry = align_contexts(contexts);
    // a stored registry is already aligned; anything else was edited by hand
    for (const auto& [id, recs] : contexts)
        if (recs.size() != registry.shared_transcripts().size())
            fail(ErrorKind::Alignment, "registry context '" + id + "' is not aligned");
    return StoredRegistry{std::move(registry), std::move(metas), std::move(fingerprints)};
}

}  // namespace driftlab
