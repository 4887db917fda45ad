#include "driftlab/models.hpp"

#include "driftlab/error.hpp"
#include "driftlab/features.hpp"
#include "driftlab/io.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace driftlab {

const char* to_string(ModelFamily family) {
    switch (family) {
        case ModelFamily::Ridge: return "ridge";
        case ModelFamily::Forest: return "forest";
        case ModelFamily::Gbt: return "gbt";
    }
    return "?";
}

ModelFamily parse_model_family(std::string_view name) {
    if (name == "ridge") return ModelFamily::Ridge;
    if (name == "forest") return ModelFamily::Forest;
    if (name == "gbt") return ModelFamily::Gbt;
    fail(ErrorKind::Config, "unknown model family '" + std::string(name) + "' (ridge|forest|gbt)");
}

ModelFamily family_of(const ModelSpec& spec) {
    return static_cast<ModelFamily>(spec.index());
}

ModelSpec default_spec(ModelFamily family, std::uint64_t seed) {
    switch (family) {
        case ModelFamily::Ridge: return RidgeSpec{};
        case ModelFamily::Forest: {
            ForestSpec s;
            s.seed = seed;
            return s;
        }
        case ModelFamily::Gbt: {
            GbtSpec s;
            s.seed = seed;
            return s;
        }
    }
    return RidgeSpec{};
}

int RegressionTree::depth() const {
    // nodes are stored parent-before-child
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k].feature < 0) continue;
        for (int child : {nodes[k].left, nodes[k].right}) {
            level[static_cast<std::size_t>(child)] = level[k] + 1;
            deepest = std::max(deepest, level[k] + 1);
        }
    }
    return deepest;
}

std::vector<std::string> default_feature_names(Eigen::Index d) {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

namespace {

void check_training_input(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string>& names,
                          const char* who) {
    if (X.rows() != y.size()) fail(ErrorKind::Schema, std::string(who) + ": X and y differ in row count");
    if (X.rows() < 2) fail(ErrorKind::Domain, std::string(who) + ": need at least 2 rows");
    if (!X.allFinite() || !y.allFinite()) fail(ErrorKind::Domain, std::string(who) + ": non-finite input");
    if (names.empty()) names = default_feature_names(X.cols());
    if (static_cast<Eigen::Index>(names.size()) != X.cols())
        fail(ErrorKind::Schema, std::string(who) + ": feature name count does not match X");
}

void normalize_importance(TrainedModel& m, const Eigen::VectorXd& raw) {
    const double total = raw.sum();
    if (raw.size() > 0 && total > 0.0 && std::isfinite(total)) {
        m.importance = raw / total;
        m.degenerate_importance = false;
    } else {
        m.importance = Eigen::VectorXd::Constant(raw.size(), raw.size() > 0 ? 1.0 / double(raw.size()) : 0.0);
        m.degenerate_importance = true;
    }
}

double midpoint(double lo, double hi) {
    double t = lo + (hi - lo) / 2.0;
    // keep lo <= t < hi so that hi still routes right
    if (!(t < hi)) t = lo;
    return t;
}

}  // namespace

// ---------------------------------------------------------------- ridge ---

TrainedModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeSpec& spec,
                       std::vector<std::string> feature_names) {
    check_training_input(X, y, feature_names, "fit_ridge");
    if (!(spec.alpha >= 0.0)) fail(ErrorKind::Parameter, "fit_ridge: alpha must be non-negative");

    TrainedModel m;
    m.family = ModelFamily::Ridge;
    m.spec = spec;
    m.feature_names = std::move(feature_names);
    const double ybar = y.mean();
    if (X.cols() == 0) {
        m.coef = Eigen::VectorXd(0);
        m.intercept = ybar;
        m.importance = Eigen::VectorXd(0);
        m.degenerate_importance = true;
        return m;
    }

    const Eigen::RowVectorXd xbar = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - xbar;
    const Eigen::VectorXd yc = y.array() - ybar;
    Eigen::MatrixXd A = Xc.transpose() * Xc;
    A.diagonal().array() += spec.alpha;
    const Eigen::VectorXd b = Xc.transpose() * yc;

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const Eigen::VectorXd piv = ldlt.vectorD();
    const double tiny = 1e-14 * static_cast<double>(piv.size()) * std::max(piv.cwiseAbs().maxCoeff(), 1e-300);
    if (ldlt.info() != Eigen::Success || !(piv.minCoeff() > tiny))
        fail(ErrorKind::Solver, "fit_ridge: normal equations are singular (alpha=" +
                                    io::format_double(spec.alpha) + ")");
    m.coef = ldlt.solve(b);
    m.intercept = ybar - xbar.dot(m.coef);
    normalize_importance(m, m.coef.cwiseAbs());
    return m;
}

// --------------------------------------------------------------- forest ---

namespace {

struct ForestBuilder {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    const ForestSpec& spec;
    std::vector<double> w;           // bootstrap multiplicity per row
    Eigen::VectorXd gain;            // per-feature weighted SSE reduction
    RegressionTree tree;

    // rows: node rows in ascending index order; sorted[f]: same rows ordered by X(:, f)
    int build(const std::vector<int>& rows, const std::vector<std::vector<int>>& sorted, int depth) {
        double W = 0.0, S = 0.0, Q = 0.0;
        for (int i : rows) {
            W += w[i];
            S += w[i] * y(i);
            Q += w[i] * y(i) * y(i);
        }
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, S / W});

        if (depth >= spec.max_depth || W < spec.min_samples_split) return id;
        bool pure = true;
        for (int i : rows) pure = pure && y(i) == y(rows.front());
        if (pure) return id;

        const double parent = S * S / W;
        // gains within rounding of each other tie; the first candidate wins
        const double tol = 1e-12 * Q;
        int best_f = -1;
        double best_gain = 0.0, best_thr = 0.0;
        for (Eigen::Index f = 0; f < X.cols(); ++f) {
            const auto& order = sorted[static_cast<std::size_t>(f)];
            double wl = 0.0, sl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const int i = order[k];
                wl += w[i];
                sl += w[i] * y(i);
                const double xa = X(i, f), xb = X(order[k + 1], f);
                if (!(xa < xb)) continue;
                const double wr = W - wl, sr = S - sl;
                const double g = sl * sl / wl + sr * sr / wr - parent;
                if (g > best_gain + tol) {
                    best_gain = g;
                    best_f = static_cast<int>(f);
                    best_thr = midpoint(xa, xb);
                }
            }
        }
        if (best_f < 0) return id;

        gain(best_f) += best_gain;
        std::vector<int> lrows, rrows;
        for (int i : rows) (X(i, best_f) <= best_thr ? lrows : rrows).push_back(i);
        std::vector<std::vector<int>> lsorted(sorted.size()), rsorted(sorted.size());
        for (std::size_t f = 0; f < sorted.size(); ++f)
            for (int i : sorted[f]) (X(i, best_f) <= best_thr ? lsorted[f] : rsorted[f]).push_back(i);

        const int l = build(lrows, lsorted, depth + 1);
        const int r = build(rrows, rsorted, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best_f;
        node.threshold = best_thr;
        node.left = l;
        node.right = r;
        return id;
    }
};

}  // namespace

TrainedModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestSpec& spec,
                        std::vector<std::string> feature_names, unsigned threads) {
    check_training_input(X, y, feature_names, "fit_forest");
    if (spec.n_trees < 1 || spec.max_depth < 1 || spec.min_samples_split < 1)
        fail(ErrorKind::Parameter, "fit_forest: n_trees, max_depth and min_samples_split must be positive");

    const auto n = static_cast<std::size_t>(X.rows());
    const auto d = static_cast<std::size_t>(X.cols());
    std::vector<std::vector<int>> presorted(d);
    for (std::size_t f = 0; f < d; ++f) {
        auto& order = presorted[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return X(a, static_cast<Eigen::Index>(f)) < X(b, static_cast<Eigen::Index>(f));
        });
    }

    const auto n_trees = static_cast<std::size_t>(spec.n_trees);
    std::vector<RegressionTree> trees(n_trees);
    std::vector<Eigen::VectorXd> gains(n_trees);

    auto grow = [&](std::size_t t) {
        ForestBuilder b{X, y, spec, std::vector<double>(n, spec.bootstrap ? 0.0 : 1.0),
                        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)), {}};
        if (spec.bootstrap) {
            std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                              static_cast<std::uint32_t>(t)};
            std::mt19937_64 rng(seq);
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (std::size_t k = 0; k < n; ++k) b.w[pick(rng)] += 1.0;
        }
        std::vector<int> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (b.w[i] > 0.0) rows.push_back(static_cast<int>(i));
        std::vector<std::vector<int>> sorted(d);
        for (std::size_t f = 0; f < d; ++f)
            for (int i : presorted[f])
                if (b.w[static_cast<std::size_t>(i)] > 0.0) sorted[f].push_back(i);
        b.build(rows, sorted, 0);
        trees[t] = std::move(b.tree);
        gains[t] = std::move(b.gain);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trees)));
    if (workers == 1) {
        for (std::size_t t = 0; t < n_trees; ++t) grow(t);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t t = w; t < n_trees; t += workers) grow(t);
            });
        for (auto& th : pool) th.join();
    }

    TrainedModel m;
    m.family = ModelFamily::Forest;
    m.spec = spec;
    m.feature_names = std::move(feature_names);
    m.trees = std::move(trees);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (const auto& g : gains) total += g;
    normalize_importance(m, total);
    return m;
}

// ------------------------------------------------------------------ gbt ---

std::vector<double> histogram_thresholds(const Eigen::VectorXd& column, int n_bins) {
    if (n_bins < 2) fail(ErrorKind::Parameter, "histogram_thresholds: n_bins must be >= 2");
    std::vector<double> sorted(column.data(), column.data() + column.size());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> unique = sorted;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    std::vector<double> thr;
    if (unique.size() <= static_cast<std::size_t>(n_bins)) {
        for (std::size_t k = 0; k + 1 < unique.size(); ++k) thr.push_back(midpoint(unique[k], unique[k + 1]));
        return thr;
    }
    const std::size_t n = sorted.size();
    for (int b = 1; b < n_bins; ++b) {
        const std::size_t pos = (static_cast<std::size_t>(b) * n + static_cast<std::size_t>(n_bins) - 1) /
                                static_cast<std::size_t>(n_bins);
        const double cut = sorted[std::max<std::size_t>(pos, 1) - 1];
        if (cut < unique.back() && (thr.empty() || cut > thr.back())) thr.push_back(cut);
    }
    return thr;
}

namespace {

struct GbtBuilder {
    const std::vector<std::vector<int>>& bins;     // bins[f][i]
    const std::vector<std::vector<double>>& thr;   // thr[f][b]
    const GbtSpec& spec;
    const Eigen::VectorXd& residual;
    const std::vector<int>& features;              // columns sampled for this tree
    Eigen::VectorXd& gain;
    RegressionTree tree;

    int build(const std::vector<int>& rows, int depth) {
        double G = 0.0;
        for (int i : rows) G += residual(i);
        const double H = static_cast<double>(rows.size());
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, spec.learning_rate * G / (H + spec.l2_lambda)});
        if (depth >= spec.max_depth || rows.size() < 2) return id;

        const double parent = G * G / (H + spec.l2_lambda);
        double Q = 0.0;
        for (int i : rows) Q += residual(i) * residual(i);
        const double tol = 1e-12 * Q;
        int best_f = -1, best_bin = -1;
        double best_gain = 0.0;
        std::vector<double> hg, hh;
        for (int f : features) {
            const auto nb = thr[static_cast<std::size_t>(f)].size() + 1;
            if (nb < 2) continue;
            hg.assign(nb, 0.0);
            hh.assign(nb, 0.0);
            const auto& col = bins[static_cast<std::size_t>(f)];
            for (int i : rows) {
                hg[static_cast<std::size_t>(col[static_cast<std::size_t>(i)])] += residual(i);
                hh[static_cast<std::size_t>(col[static_cast<std::size_t>(i)])] += 1.0;
            }
            double gl = 0.0, hl = 0.0;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                gl += hg[b];
                hl += hh[b];
                const double hr = H - hl;
                if (hl < 1.0 || hr < 1.0 || hh[b] == 0.0) continue;
                const double gr = G - gl;
                const double g = gl * gl / (hl + spec.l2_lambda) + gr * gr / (hr + spec.l2_lambda) - parent;
                if (g > best_gain + tol) {
                    best_gain = g;
                    best_f = f;
                    best_bin = static_cast<int>(b);
                }
            }
        }
        if (best_f < 0) return id;

        gain(best_f) += best_gain;
        const auto& col = bins[static_cast<std::size_t>(best_f)];
        std::vector<int> lrows, rrows;
        for (int i : rows) (col[static_cast<std::size_t>(i)] <= best_bin ? lrows : rrows).push_back(i);
        const int l = build(lrows, depth + 1);
        const int r = build(rrows, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best_f;
        node.threshold = thr[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_bin)];
        node.left = l;
        node.right = r;
        return id;
    }
};

std::size_t subsample_count(double fraction, std::size_t total) {
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total) - 1e-9));
    return std::clamp<std::size_t>(k, 1, total);
}

}  // namespace

TrainedModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbtSpec& spec,
                     std::vector<std::string> feature_names) {
    check_training_input(X, y, feature_names, "fit_gbt");
    if (spec.n_bins < 2) fail(ErrorKind::Parameter, "fit_gbt: n_bins must be >= 2");
    if (spec.n_estimators < 0 || spec.max_depth < 1 || !(spec.learning_rate > 0.0) || !(spec.l2_lambda >= 0.0) ||
        !(spec.subsample_rows > 0.0 && spec.subsample_rows <= 1.0) ||
        !(spec.subsample_cols > 0.0 && spec.subsample_cols <= 1.0))
        fail(ErrorKind::Parameter, "fit_gbt: invalid hyperparameters");

    const auto n = static_cast<std::size_t>(X.rows());
    const auto d = static_cast<std::size_t>(X.cols());
    std::vector<std::vector<double>> thr(d);
    std::vector<std::vector<int>> bins(d, std::vector<int>(n));
    for (std::size_t f = 0; f < d; ++f) {
        thr[f] = histogram_thresholds(X.col(static_cast<Eigen::Index>(f)), spec.n_bins);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
            bins[f][i] = static_cast<int>(std::lower_bound(thr[f].begin(), thr[f].end(), x) - thr[f].begin());
        }
    }

    TrainedModel m;
    m.family = ModelFamily::Gbt;
    m.spec = spec;
    m.feature_names = std::move(feature_names);
    m.base_score = y.mean();

    Eigen::VectorXd F = Eigen::VectorXd::Constant(y.size(), m.base_score);
    Eigen::VectorXd gain = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    std::mt19937_64 rng(spec.seed);
    std::vector<int> all_rows(n), all_cols(d);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::iota(all_cols.begin(), all_cols.end(), 0);
    const std::size_t n_rows = subsample_count(spec.subsample_rows, n);
    const std::size_t n_cols = d == 0 ? 0 : subsample_count(spec.subsample_cols, d);

    for (int stage = 0; stage < spec.n_estimators; ++stage) {
        const Eigen::VectorXd residual = y - F;
        std::vector<int> rows = all_rows, cols = all_cols;
        if (n_rows < n) {
            std::shuffle(rows.begin(), rows.end(), rng);
            rows.resize(n_rows);
            std::sort(rows.begin(), rows.end());
        }
        if (n_cols < d) {
            std::shuffle(cols.begin(), cols.end(), rng);
            cols.resize(n_cols);
            std::sort(cols.begin(), cols.end());
        }
        GbtBuilder b{bins, thr, spec, residual, cols, gain, {}};
        b.build(rows, 0);
        for (std::size_t i = 0; i < n; ++i) F(static_cast<Eigen::Index>(i)) += b.tree.predict(X.row(static_cast<Eigen::Index>(i)));
        m.trees.push_back(std::move(b.tree));
        m.stage_train_mse.push_back((y - F).squaredNorm() / static_cast<double>(n));
    }
    normalize_importance(m, gain);
    return m;
}

TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 std::vector<std::string> feature_names, unsigned threads) {
    return std::visit(
        [&](const auto& s) -> TrainedModel {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, RidgeSpec>) return fit_ridge(X, y, s, std::move(feature_names));
            else if constexpr (std::is_same_v<S, ForestSpec>)
                return fit_forest(X, y, s, std::move(feature_names), threads);
            else return fit_gbt(X, y, s, std::move(feature_names));
        },
        spec);
}

// -------------------------------------------------------------- predict ---

Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X) {
    if (static_cast<std::size_t>(X.cols()) != model.feature_names.size())
        fail(ErrorKind::Schema, "predict: expected " + std::to_string(model.feature_names.size()) +
                                    " feature columns, got " + std::to_string(X.cols()));
    const Eigen::Index n = X.rows();
    switch (model.family) {
        case ModelFamily::Ridge: {
            Eigen::VectorXd out = X * model.coef;
            out.array() += model.intercept;
            return out;
        }
        case ModelFamily::Forest: {
            Eigen::VectorXd out(n);
            const double trees = static_cast<double>(model.trees.size());
            for (Eigen::Index i = 0; i < n; ++i) {
                double s = 0.0;
                for (const auto& t : model.trees) s += t.predict(X.row(i));
                out(i) = s / trees;
            }
            return out;
        }
        case ModelFamily::Gbt: {
            Eigen::VectorXd out(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                double s = model.base_score;
                for (const auto& t : model.trees) s += t.predict(X.row(i));
                out(i) = s;
            }
            return out;
        }
    }
    return {};
}

Eigen::VectorXd predict(const TrainedModel& model, const ContextMatrix& m) {
    if (m.column_names != model.feature_names)
        fail(ErrorKind::Schema, "predict: context '" + m.context_id + "' columns do not match the model's features");
    return predict(model, m.values);
}

// -------------------------------------------------------- serialization ---

namespace {

std::string join_doubles(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back('\t');
        out += io::format_double(v(i));
    }
    return out;
}

std::string spec_line(const ModelSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using S = std::decay_t<decltype(s)>;
            using io::format_double;
            if constexpr (std::is_same_v<S, RidgeSpec>) {
                return "alpha=" + format_double(s.alpha);
            } else if constexpr (std::is_same_v<S, ForestSpec>) {
                return "n_trees=" + std::to_string(s.n_trees) + "\tmax_depth=" + std::to_string(s.max_depth) +
                       "\tseed=" + std::to_string(s.seed) + "\tmin_samples_split=" +
                       std::to_string(s.min_samples_split) + "\tbootstrap=" + (s.bootstrap ? "1" : "0");
            } else {
                return "learning_rate=" + format_double(s.learning_rate) + "\tmax_depth=" +
                       std::to_string(s.max_depth) + "\tn_estimators=" + std::to_string(s.n_estimators) +
                       "\tsubsample_rows=" + format_double(s.subsample_rows) +
                       "\tsubsample_cols=" + format_double(s.subsample_cols) +
                       "\tl2_lambda=" + format_double(s.l2_lambda) + "\tn_bins=" + std::to_string(s.n_bins) +
                       "\tseed=" + std::to_string(s.seed);
            }
        },
        spec);
}

class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    std::vector<std::string_view> next(std::string_view expected_key) {
        if (pos_ >= text_.size()) fail(ErrorKind::Format, "model dump truncated before '" + std::string(expected_key) + "'");
        auto end = text_.find('\n', pos_);
        if (end == std::string_view::npos) end = text_.size();
        const auto line = io::strip_cr(text_.substr(pos_, end - pos_));
        pos_ = end + 1;
        ++line_;
        auto fields = io::split(line, '\t');
        if (fields.front() != expected_key)
            throw ParseError(line_, "expected '" + std::string(expected_key) + "', got '" + std::string(fields.front()) + "'");
        fields.erase(fields.begin());
        return fields;
    }

    double real(std::string_view s) const {
        const auto v = io::parse_double(s);
        if (!v) throw ParseError(line_, "bad number '" + std::string(s) + "'");
        return *v;
    }
    long long integer(std::string_view s) const {
        const auto v = io::parse_int(s);
        if (!v) throw ParseError(line_, "bad integer '" + std::string(s) + "'");
        return *v;
    }
    Eigen::VectorXd reals(const std::vector<std::string_view>& f, std::size_t from = 0) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(f.size() - from));
        for (std::size_t i = from; i < f.size(); ++i) v(static_cast<Eigen::Index>(i - from)) = real(f[i]);
        return v;
    }
    std::size_t line() const { return line_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

std::map<std::string, std::string_view> key_values(const std::vector<std::string_view>& fields, std::size_t line) {
    std::map<std::string, std::string_view> kv;
    for (auto f : fields) {
        const auto eq = f.find('=');
        if (eq == std::string_view::npos) throw ParseError(line, "expected key=value, got '" + std::string(f) + "'");
        kv[std::string(f.substr(0, eq))] = f.substr(eq + 1);
    }
    return kv;
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
    std::string out = "driftlab-model\t1\n";
    out += std::string("family\t") + to_string(model.family) + "\n";
    out += "features";
    for (const auto& name : model.feature_names) out += "\t" + name;
    out += "\n";
    out += "spec\t" + spec_line(model.spec) + "\n";
    out += "intercept\t" + io::format_double(model.intercept) + "\n";
    out += "coef" + join_doubles(model.coef) + "\n";
    out += "base_score\t" + io::format_double(model.base_score) + "\n";
    out += "trees\t" + std::to_string(model.trees.size()) + "\n";
    for (const auto& tree : model.trees) {
        out += "tree\t" + std::to_string(tree.nodes.size()) + "\n";
        for (const auto& nd : tree.nodes)
            out += "node\t" + std::to_string(nd.feature) + "\t" + io::format_double(nd.threshold) + "\t" +
                   std::to_string(nd.left) + "\t" + std::to_string(nd.right) + "\t" + io::format_double(nd.value) +
                   "\n";
    }
    out += "importance" + join_doubles(model.importance) + "\n";
    out += std::string("degenerate_importance\t") + (model.degenerate_importance ? "1" : "0") + "\n";
    out += "stage_train_mse" + join_doubles(Eigen::Map<const Eigen::VectorXd>(
                                   model.stage_train_mse.data(), static_cast<Eigen::Index>(model.stage_train_mse.size()))) +
           "\n";
    return out;
}

TrainedModel parse_model(std::string_view text) {
    LineReader in(text);
    TrainedModel m;
    const auto magic = in.next("driftlab-model");
    if (magic.size() != 1 || magic[0] != "1") fail(ErrorKind::Format, "unsupported model dump version");
    const auto fam = in.next("family");
    if (fam.size() != 1) throw ParseError(in.line(), "family takes one value");
    m.family = parse_model_family(fam[0]);
    for (auto name : in.next("features")) m.feature_names.emplace_back(name);

    const auto kv = key_values(in.next("spec"), in.line());
    auto get = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(in.line(), std::string("missing spec key '") + key + "'");
        return it->second;
    };
    switch (m.family) {
        case ModelFamily::Ridge: m.spec = RidgeSpec{in.real(get("alpha"))}; break;
        case ModelFamily::Forest: {
            ForestSpec s;
            s.n_trees = static_cast<int>(in.integer(get("n_trees")));
            s.max_depth = static_cast<int>(in.integer(get("max_depth")));
            s.seed = static_cast<std::uint64_t>(in.integer(get("seed")));
            s.min_samples_split = static_cast<int>(in.integer(get("min_samples_split")));
            s.bootstrap = in.integer(get("bootstrap")) != 0;
            m.spec = s;
            break;
        }
        case ModelFamily::Gbt: {
            GbtSpec s;
            s.learning_rate = in.real(get("learning_rate"));
            s.max_depth = static_cast<int>(in.integer(get("max_depth")));
            s.n_estimators = static_cast<int>(in.integer(get("n_estimators")));
            s.subsample_rows = in.real(get("subsample_rows"));
            s.subsample_cols = in.real(get("subsample_cols"));
            s.l2_lambda = in.real(get("l2_lambda"));
            s.n_bins = static_cast<int>(in.integer(get("n_bins")));
            s.seed = static_cast<std::uint64_t>(in.integer(get("seed")));
            m.spec = s;
            break;
        }
    }

    const auto ic = in.next("intercept");
    if (ic.size() != 1) throw ParseError(in.line(), "intercept takes one value");
    m.intercept = in.real(ic[0]);
    m.coef = in.reals(in.next("coef"));
    const auto bs = in.next("base_score");
    if (bs.size() != 1) throw ParseError(in.line(), "base_score takes one value");
    m.base_score = in.real(bs[0]);
    const auto tc = in.next("trees");
    if (tc.size() != 1) throw ParseError(in.line(), "trees takes one value");
    const auto n_trees = in.integer(tc[0]);
    for (long long t = 0; t < n_trees; ++t) {
        const auto nc = in.next("tree");
        if (nc.size() != 1) throw ParseError(in.line(), "tree takes one value");
        RegressionTree tree;
        const auto n_nodes = in.integer(nc[0]);
        for (long long k = 0; k < n_nodes; ++k) {
            const auto f = in.next("node");
            if (f.size() != 5) throw ParseError(in.line(), "node takes five values");
            tree.nodes.push_back(TreeNode{static_cast<int>(in.integer(f[0])), in.real(f[1]),
                                          static_cast<int>(in.integer(f[2])), static_cast<int>(in.integer(f[3])),
                                          in.real(f[4])});
        }
        for (const auto& nd : tree.nodes)
            if (nd.feature >= 0 && (nd.left <= 0 || nd.right <= 0 || nd.left >= n_nodes || nd.right >= n_nodes ||
                                    nd.feature >= static_cast<int>(m.feature_names.size())))
                throw ParseError(in.line(), "tree node references are out of range");
        m.trees.push_back(std::move(tree));
    }
    m.importance = in.reals(in.next("importance"));
    const auto deg = in.next("degenerate_importance");
    if (deg.size() != 1) throw ParseError(in.line(), "degenerate_importance takes one value");
    m.degenerate_importance = in.integer(deg[0]) != 0;
    const auto mse = in.reals(in.next("stage_train_mse"));
    m.stage_train_mse.assign(mse.data(), mse.data() + mse.size());
    if (m.family == ModelFamily::Ridge && static_cast<std::size_t>(m.coef.size()) != m.feature_names.size())
        fail(ErrorKind::Format, "ridge dump: coefficient count does not match features");
    return m;
}

}  // namespace driftlab
