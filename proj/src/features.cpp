#include "driftlab/features.hpp"

#include "driftlab/error.hpp"
#include "driftlab/ingest.hpp"
#include "driftlab/io.hpp"

#include <cmath>

namespace driftlab {

const char* to_string(FeatureSet set) {
    switch (set) {
        case FeatureSet::LogTpmOnly: return "logtpm";
        case FeatureSet::RankOnly: return "rank";
        case FeatureSet::Both: return "both";
    }
    return "?";
}

FeatureSet parse_feature_set(std::string_view name) {
    if (name == "logtpm") return FeatureSet::LogTpmOnly;
    if (name == "rank") return FeatureSet::RankOnly;
    if (name == "both") return FeatureSet::Both;
    fail(ErrorKind::Config, "unknown feature set '" + std::string(name) + "' (logtpm|rank|both)");
}

Eigen::Index ContextMatrix::column_index(std::string_view name) const {
    for (std::size_t j = 0; j < column_names.size(); ++j)
        if (column_names[j] == name) return static_cast<Eigen::Index>(j);
    fail(ErrorKind::Schema, "context '" + context_id + "' has no column '" + std::string(name) + "'");
}

void ContextMatrix::check() const {
    if (static_cast<std::size_t>(values.rows()) != transcript_ids.size() ||
        static_cast<std::size_t>(values.cols()) != column_names.size())
        fail(ErrorKind::Schema, "context '" + context_id + "': matrix shape does not match row/column names");
}

double log_tpm(double tpm) {
    if (!(tpm >= 0.0)) fail(ErrorKind::Domain, "log_tpm: negative TPM " + io::format_double(tpm));
    return std::log1p(tpm);
}

Eigen::VectorXd log_tpm(const Eigen::VectorXd& tpm) {
    Eigen::VectorXd out(tpm.size());
    for (Eigen::Index i = 0; i < tpm.size(); ++i) out(i) = log_tpm(tpm(i));
    return out;
}

ContextMatrix assemble(std::string context_id, std::vector<std::string> transcript_ids, const Eigen::VectorXd& tpm,
                       FeatureSet set) {
    if (static_cast<std::size_t>(tpm.size()) != transcript_ids.size())
        fail(ErrorKind::Alignment, "assemble: TPM vector is not aligned to transcript ids");
    ContextMatrix m;
    m.context_id = std::move(context_id);
    m.transcript_ids = std::move(transcript_ids);
    const Eigen::Index n = tpm.size();
    switch (set) {
        case FeatureSet::LogTpmOnly:
            m.column_names = {std::string(kLogTpmColumn)};
            m.values.resize(n, 1);
            m.values.col(0) = log_tpm(tpm);
            break;
        case FeatureSet::RankOnly:
            m.column_names = {std::string(kRankColumn)};
            m.values.resize(n, 1);
            m.values.col(0) = rank_pct_within_sample(tpm);
            break;
        case FeatureSet::Both:
            m.column_names = {std::string(kLogTpmColumn), std::string(kRankColumn)};
            m.values.resize(n, 2);
            m.values.col(0) = log_tpm(tpm);
            m.values.col(1) = rank_pct_within_sample(tpm);
            break;
    }
    return m;
}

ContextMatrix assemble(const ContextRegistry& registry, std::string_view context_id, FeatureSet set) {
    return assemble(std::string(context_id), registry.shared_transcripts(), registry.tpm(context_id), set);
}

ContextMatrix augment_context_onehot(const ContextMatrix& matrix, const std::vector<std::string>& vocabulary) {
    Eigen::Index hot = -1;
    for (std::size_t k = 0; k < vocabulary.size(); ++k)
        if (vocabulary[k] == matrix.context_id) hot = static_cast<Eigen::Index>(k);
    if (hot < 0) fail(ErrorKind::Vocabulary, "context '" + matrix.context_id + "' is not in the one-hot vocabulary");

    ContextMatrix out = matrix;
    const Eigen::Index d = matrix.cols();
    const auto extra = static_cast<Eigen::Index>(vocabulary.size());
    out.values.conservativeResize(Eigen::NoChange, d + extra);
    out.values.rightCols(extra).setZero();
    out.values.col(d + hot).setOnes();
    for (const auto& id : vocabulary) out.column_names.push_back("ctx=" + id);
    return out;
}

Standardizer fit_standardizer(const Eigen::MatrixXd& train, std::vector<std::string> column_names) {
    if (train.rows() < 2) fail(ErrorKind::Domain, "fit_standardizer: need at least 2 rows");
    Standardizer s;
    s.column_names = std::move(column_names);
    const double n = static_cast<double>(train.rows());
    s.mean = train.colwise().mean().transpose();
    s.sd.resize(train.cols());
    s.degenerate.assign(static_cast<std::size_t>(train.cols()), false);
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        const double var = (train.col(j).array() - s.mean(j)).square().sum() / n;
        const double sd = std::sqrt(var);
        s.degenerate[static_cast<std::size_t>(j)] = !(sd > kStandardizerEpsilon);
        s.sd(j) = std::max(sd, kStandardizerEpsilon);
    }
    return s;
}

Standardizer fit_standardizer(const ContextMatrix& train) {
    train.check();
    return fit_standardizer(train.values, train.column_names);
}

Eigen::MatrixXd apply_standardizer(const Standardizer& s, const Eigen::MatrixXd& m) {
    if (m.cols() != s.mean.size()) fail(ErrorKind::Schema, "apply_standardizer: column count mismatch");
    return ((m.rowwise() - s.mean.transpose()).array().rowwise() / s.sd.transpose().array()).matrix();
}

ContextMatrix apply_standardizer(const Standardizer& s, const ContextMatrix& m) {
    if (m.column_names != s.column_names) fail(ErrorKind::Schema, "apply_standardizer: column names differ");
    ContextMatrix out = m;
    out.values = apply_standardizer(s, m.values);
    return out;
}

std::string serialize_context_matrix(const ContextMatrix& m) {
    m.check();
    std::string out = "transcript_id";
    for (const auto& c : m.column_names) out += "\t" + c;
    out.push_back('\n');
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out += m.transcript_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out.push_back('\t');
            out += io::format_double(m.values(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

ContextMatrix parse_context_matrix(std::string_view content, std::string context_id) {
    ContextMatrix m;
    m.context_id = std::move(context_id);
    std::vector<double> cells;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        const auto line = io::strip_cr(content.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        const auto fields = io::split(line, '\t');
        if (line_no == 1) {
            if (fields.empty() || fields[0] != "transcript_id")
                fail(ErrorKind::Format, "context matrix header must start with 'transcript_id'");
            for (std::size_t j = 1; j < fields.size(); ++j) m.column_names.emplace_back(fields[j]);
            continue;
        }
        if (line.empty()) continue;
        if (fields.size() != m.column_names.size() + 1)
            throw ParseError(line_no, "expected " + std::to_string(m.column_names.size() + 1) + " fields");
        m.transcript_ids.emplace_back(fields[0]);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            const auto v = io::parse_double(fields[j]);
            if (!v) throw ParseError(line_no, "non-numeric value '" + std::string(fields[j]) + "'");
            cells.push_back(*v);
        }
    }
    if (line_no == 0) fail(ErrorKind::Format, "context matrix is empty");
    const auto n = static_cast<Eigen::Index>(m.transcript_ids.size());
    const auto d = static_cast<Eigen::Index>(m.column_names.size());
    m.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cells.data(), n, d);
    return m;
}

}  // namespace driftlab
