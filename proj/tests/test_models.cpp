#include "driftlab/features.hpp"
#include "driftlab/models.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace driftlab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd col(std::initializer_list<double> x) { return MatrixXd(support::to_eigen(std::vector<double>(x))); }
VectorXd v(std::initializer_list<double> x) { return support::to_eigen(std::vector<double>(x)); }

void check_importance(const TrainedModel& m) {
    CHECK((m.importance.array() >= 0.0).all());
    CHECK(std::abs(m.importance.sum() - 1.0) <= 1e-9);
}

ForestSpec single_tree(int depth) {
    ForestSpec s;
    s.n_trees = 1;
    s.max_depth = depth;
    s.bootstrap = false;
    return s;
}

GbtSpec exact_gbt(int stages, double lr = 0.3, int depth = 3) {
    GbtSpec s;
    s.learning_rate = lr;
    s.max_depth = depth;
    s.n_estimators = stages;
    s.subsample_rows = 1.0;
    s.subsample_cols = 1.0;
    s.l2_lambda = 0.0;
    return s;
}

}  // namespace

TEST_CASE("ridge exact fit and extrapolation") {
    const auto m = fit_ridge(col({1, 2, 3}), v({2, 4, 6}), RidgeSpec{0.0});
    CHECK(m.coef(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(m.intercept) <= 1e-14);
    CHECK(predict(m, col({4}))(0) == doctest::Approx(8.0).epsilon(1e-14));
    check_importance(m);
}

TEST_CASE("ridge small example against normal equations") {
    const auto m = fit_ridge(col({1, 2, 3}), v({1, 2, 2}), RidgeSpec{1.0});
    const auto o = oracle::ridge({{1}, {2}, {3}}, {1, 2, 2}, 1.0);
    CHECK(std::abs(m.coef(0) - o.w[0]) <= 1e-10);
    CHECK(std::abs(m.intercept - o.b) <= 1e-10);
    CHECK(m.coef(0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ridge limit of huge alpha predicts the mean") {
    std::mt19937_64 rng(1);
    const MatrixXd X = support::random_matrix(rng, 60, 4);
    const VectorXd y = X * v({1, -2, 3, 0.5}) + support::random_vector(rng, 60);
    const auto m = fit_ridge(X, y, RidgeSpec{1e9});
    const double range = y.maxCoeff() - y.minCoeff();
    CHECK((predict(m, X).array() - y.mean()).abs().maxCoeff() <= 1e-3 * range);
    CHECK(m.coef.cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("ridge agrees with the dense oracle") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> nd(2, 120), dd(1, 8);
    for (int t = 0; t < 30; ++t) {
        const int n = nd(rng), d = dd(rng);
        const double alpha = std::array<double, 3>{0.1, 1.0, 10.0}[static_cast<std::size_t>(t % 3)];
        const MatrixXd X = support::random_matrix(rng, n, d);
        const VectorXd y = support::random_vector(rng, n);
        const auto m = fit_ridge(X, y, RidgeSpec{alpha});
        const auto o = oracle::ridge(support::rows_of(X), support::to_std(y), alpha);
        for (int j = 0; j < d; ++j) CHECK(std::abs(m.coef(j) - o.w[static_cast<std::size_t>(j)]) <= 1e-8);
        CHECK(std::abs(m.intercept - o.b) <= 1e-8);
        check_importance(m);
    }
}

TEST_CASE("ridge ignores an appended constant column") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const MatrixXd X = support::random_matrix(rng, 100, 3), T = support::random_matrix(rng, 40, 3);
        const VectorXd y = X.col(0) * 2 - X.col(2) + support::random_vector(rng, 100) * 0.1;
        MatrixXd X1(100, 4), T1(40, 4);
        X1 << X, VectorXd::Ones(100);
        T1 << T, VectorXd::Ones(40);
        const auto a = fit_ridge(X, y, RidgeSpec{});
        const auto b = fit_ridge(X1, y, RidgeSpec{});
        CHECK((predict(a, T) - predict(b, T1)).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(b.coef(3) == 0.0);
    }
}

TEST_CASE("ridge coefficients shrink as alpha grows") {
    std::mt19937_64 rng(4);
    const MatrixXd X = support::random_matrix(rng, 80, 5);
    const VectorXd y = X * v({3, -1, 0.5, 2, -2}) + support::random_vector(rng, 80);
    double prev = INFINITY;
    for (double alpha : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
        const double norm = fit_ridge(X, y, RidgeSpec{alpha}).coef.norm();
        CHECK(norm < prev);
        prev = norm;
    }
}

TEST_CASE("ridge errors and degenerate cases") {
    MatrixXd X(3, 2);
    X << 1, 2, 2, 4, 3, 6;
    CHECK_THROWS_KIND(fit_ridge(X, v({1, 2, 3}), RidgeSpec{0.0}), ErrorKind::Solver);
    CHECK_THROWS_KIND(fit_ridge(X, v({1, 2, 3}), RidgeSpec{-1.0}), ErrorKind::Parameter);
    const auto empty = fit_ridge(MatrixXd(3, 0), v({1, 2, 6}), RidgeSpec{});
    CHECK(predict(empty, MatrixXd(2, 0)) == VectorXd::Constant(2, 3.0));
    const auto flat = fit_ridge(X, v({5, 5, 5}), RidgeSpec{});
    CHECK(flat.degenerate_importance);
    check_importance(flat);
}

TEST_CASE("forest on a constant target") {
    std::mt19937_64 rng(5);
    const MatrixXd X = support::random_matrix(rng, 30, 3);
    ForestSpec spec;
    spec.n_trees = 10;
    const auto m = fit_forest(X, VectorXd::Constant(30, 5.0), spec);
    CHECK(predict(m, X) == VectorXd::Constant(30, 5.0));
    CHECK(m.degenerate_importance);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(m.importance(j) == doctest::Approx(1.0 / 3));
    for (const auto& t : m.trees) CHECK(t.nodes.size() == 1);
}

TEST_CASE("depth-1 tree splits at the midpoint") {
    const auto m = fit_forest(col({0, 0, 1, 1}), v({0, 0, 1, 1}), single_tree(1));
    REQUIRE(m.trees.size() == 1);
    CHECK(m.trees[0].nodes[0].feature == 0);
    CHECK(m.trees[0].nodes[0].threshold == 0.5);
    CHECK(predict(m, col({0, 0, 1, 1})) == v({0, 0, 1, 1}));
}

TEST_CASE("depth-1 trees agree with the exhaustive split oracle") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> nd(4, 40), dd(1, 4);
    for (int t = 0; t < 40; ++t) {
        const int n = nd(rng), d = dd(rng);
        MatrixXd X = support::random_matrix(rng, n, d);
        if (t % 3 == 0) X = X.array().round().matrix();
        const VectorXd y = support::random_vector(rng, n);
        const auto m = fit_forest(X, y, single_tree(1));
        const auto rows = support::rows_of(X);
        std::vector<std::size_t> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), std::size_t{0});
        const auto best = oracle::best_split(rows, support::to_std(y), all);
        const auto& root = m.trees[0].nodes[0];
        CHECK(root.feature == best.feature);
        if (best.feature >= 0) CHECK(root.threshold == best.threshold);
    }
}

TEST_CASE("an unlimited single tree memorizes its training set") {
    std::mt19937_64 rng(7);
    const MatrixXd X = support::random_matrix(rng, 60, 2);
    const VectorXd y = support::random_vector(rng, 60);
    const auto m = fit_forest(X, y, single_tree(1000));
    CHECK(predict(m, X) == y);
}

TEST_CASE("forest is deterministic and thread-invariant") {
    std::mt19937_64 rng(8);
    const MatrixXd X = support::random_matrix(rng, 150, 3);
    const VectorXd y = X.col(0).array().sin().matrix() + X.col(1) * 0.5;
    ForestSpec spec;
    spec.n_trees = 24;
    spec.seed = 77;
    const auto a = fit_forest(X, y, spec, {}, 1);
    const auto b = fit_forest(X, y, spec, {}, 1);
    const auto c = fit_forest(X, y, spec, {}, 4);
    CHECK(predict(a, X) == predict(b, X));
    CHECK(predict(a, X) == predict(c, X));
    CHECK(a.importance == c.importance);
    CHECK(serialize_model(a) == serialize_model(c));
    check_importance(a);
    CHECK(a.importance(0) > a.importance(2));
    spec.seed = 78;
    CHECK(predict(fit_forest(X, y, spec), X) != predict(a, X));
    for (const auto& t : a.trees) CHECK(t.depth() <= 10);
}

TEST_CASE("gbt null ensemble and constant target") {
    std::mt19937_64 rng(9);
    const MatrixXd X = support::random_matrix(rng, 20, 2);
    const VectorXd y = support::random_vector(rng, 20);
    GbtSpec spec;
    spec.n_estimators = 0;
    spec.learning_rate = 0.7;
    const auto m = fit_gbt(X, y, spec);
    CHECK(predict(m, support::random_matrix(rng, 5, 2)) == VectorXd::Constant(5, y.mean()));

    spec.n_estimators = 20;
    const auto c = fit_gbt(X, VectorXd::Constant(20, -2.5), spec);
    CHECK(predict(c, X) == VectorXd::Constant(20, -2.5));
    CHECK(c.degenerate_importance);
    for (double mse : c.stage_train_mse) CHECK(mse == 0.0);

    spec.n_bins = 1;
    CHECK_THROWS_KIND(fit_gbt(X, y, spec), ErrorKind::Parameter);
}

TEST_CASE("gbt without subsampling or l2 matches the stagewise oracle") {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 6; ++t) {
        const int d = t < 3 ? 1 : 3;
        const MatrixXd X = support::random_matrix(rng, 50, d);
        const VectorXd y = X.col(0).array().cube().matrix() + support::random_vector(rng, 50) * 0.2;
        const auto spec = exact_gbt(10);
        const auto m = fit_gbt(X, y, spec);
        const auto ref = oracle::Booster{support::rows_of(X), support::to_std(y), spec.learning_rate, spec.max_depth}.run(10);
        const VectorXd p = predict(m, X);
        for (Eigen::Index i = 0; i < 50; ++i) CHECK(std::abs(p(i) - ref.back()[static_cast<std::size_t>(i)]) <= 1e-8);
        REQUIRE(m.stage_train_mse.size() == 10);
        for (std::size_t s = 1; s < 10; ++s) CHECK(m.stage_train_mse[s] <= m.stage_train_mse[s - 1]);
        check_importance(m);
    }
}

TEST_CASE("gbt is deterministic and thread-invariant with subsampling") {
    std::mt19937_64 rng(11);
    const MatrixXd X = support::random_matrix(rng, 200, 4);
    const VectorXd y = X.col(1) - X.col(3).cwiseAbs();
    GbtSpec spec;
    spec.n_estimators = 40;
    spec.seed = 3;
    const auto a = fit_gbt(X, y, spec);
    const auto b = fit(ModelSpec{spec}, X, y, {}, 4);
    CHECK(predict(a, X) == predict(b, X));
    CHECK(serialize_model(a) == serialize_model(b));
}

TEST_CASE("histogram thresholds") {
    CHECK(histogram_thresholds(v({3, 1, 2, 2}), 256) == std::vector<double>{1.5, 2.5});
    const auto many = histogram_thresholds(VectorXd::LinSpaced(1000, 0, 1), 16);
    CHECK(many.size() == 15);
    CHECK(std::is_sorted(many.begin(), many.end()));
    CHECK_THROWS_KIND(histogram_thresholds(v({1, 2}), 1), ErrorKind::Parameter);
}

TEST_CASE("model dump round-trips bit-exactly") {
    std::mt19937_64 rng(12);
    const MatrixXd X = support::random_matrix(rng, 80, 2);
    const VectorXd y = X.col(0) * 0.3 + X.col(1).array().square().matrix();
    ForestSpec fs;
    fs.n_trees = 5;
    GbtSpec gs;
    gs.n_estimators = 15;
    for (const ModelSpec& spec : {ModelSpec{RidgeSpec{0.5}}, ModelSpec{fs}, ModelSpec{gs}}) {
        const auto m = fit(spec, X, y, {"logTPM", "rank_pct_within_sample"});
        const auto text = serialize_model(m);
        const auto back = parse_model(text);
        CHECK(back.family == m.family);
        CHECK(back.feature_names == m.feature_names);
        CHECK(predict(back, X) == predict(m, X));
        CHECK(back.importance == m.importance);
        CHECK(serialize_model(back) == text);
    }
    CHECK_THROWS_KIND(parse_model("garbage"), ErrorKind::Parse);
    CHECK_THROWS_KIND(parse_model(""), ErrorKind::Format);
}

TEST_CASE("predict checks feature columns") {
    const auto m = fit_ridge(MatrixXd::Identity(3, 2), v({1, 2, 3}), RidgeSpec{}, {"logTPM", "rank_pct_within_sample"});
    CHECK_THROWS_KIND(predict(m, MatrixXd::Zero(2, 3)), ErrorKind::Schema);
    ContextMatrix cm{"A", {"t1"}, {"rank_pct_within_sample", "logTPM"}, MatrixXd::Zero(1, 2)};
    CHECK_THROWS_KIND(predict(m, cm), ErrorKind::Schema);
    cm.column_names = {"logTPM", "rank_pct_within_sample"};
    CHECK(predict(m, cm).size() == 1);
}

TEST_CASE("model family names and defaults") {
    CHECK(parse_model_family("gbt") == ModelFamily::Gbt);
    CHECK_THROWS_KIND(parse_model_family("svm"), ErrorKind::Config);
    const auto r = std::get<RidgeSpec>(default_spec(ModelFamily::Ridge, 0));
    CHECK(r.alpha == 1.0);
    const auto f = std::get<ForestSpec>(default_spec(ModelFamily::Forest, 9));
    CHECK(f.n_trees == 200);
    CHECK(f.max_depth == 10);
    CHECK(f.seed == 9);
    const auto g = std::get<GbtSpec>(default_spec(ModelFamily::Gbt, 9));
    CHECK(g.learning_rate == 0.05);
    CHECK(g.max_depth == 6);
    CHECK(g.n_estimators == 800);
    CHECK(g.subsample_rows == 0.8);
    CHECK(g.subsample_cols == 0.8);
    CHECK(g.l2_lambda == 1.0);
}

TEST_CASE("equal-gain splits resolve to the first feature") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
        const VectorXd x = support::random_vector(rng, 30), y = support::random_vector(rng, 30);
        MatrixXd X(30, 3);
        X << -x * 1e-3, x * 7.0, x;
        const auto m = fit_forest(X, y, single_tree(1));
        const auto& root = m.trees[0].nodes[0];
        const auto best = oracle::best_split(support::rows_of(X), support::to_std(y), [] {
            std::vector<std::size_t> r(30);
            std::iota(r.begin(), r.end(), std::size_t{0});
            return r;
        }());
        CHECK(root.feature == best.feature);
        CHECK(root.threshold == best.threshold);
    }
}
