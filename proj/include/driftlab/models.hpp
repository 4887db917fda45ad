#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace driftlab {

struct ContextMatrix;

enum class ModelFamily { Ridge, Forest, Gbt };

const char* to_string(ModelFamily family);  // "ridge" | "forest" | "gbt"
ModelFamily parse_model_family(std::string_view name);

struct RidgeSpec {
    double alpha = 1.0;
};

struct ForestSpec {
    int n_trees = 200;
    int max_depth = 10;
    std::uint64_t seed = 0;
    int min_samples_split = 2;
    bool bootstrap = true;
};

struct GbtSpec {
    double learning_rate = 0.05;
    int max_depth = 6;
    int n_estimators = 800;
    double subsample_rows = 0.8;
    double subsample_cols = 0.8;
    double l2_lambda = 1.0;
    int n_bins = 256;
    std::uint64_t seed = 0;
};

using ModelSpec = std::variant<RidgeSpec, ForestSpec, GbtSpec>;

ModelFamily family_of(const ModelSpec& spec);
ModelSpec default_spec(ModelFamily family, std::uint64_t seed);

// A leaf has feature < 0. Rows with x[feature] <= threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    template <typename Row>
    double predict(const Row& x) const {
        int k = 0;
        while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
            const auto& node = nodes[static_cast<std::size_t>(k)];
            k = x(node.feature) <= node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(k)].value;
    }
    int depth() const;
};

/// A fitted regressor. Immutable after fit; predict() is reentrant.
struct TrainedModel {
    ModelFamily family = ModelFamily::Ridge;
    ModelSpec spec;
    std::vector<std::string> feature_names;

    // ridge
    Eigen::VectorXd coef;
    double intercept = 0.0;

    // forest: mean of tree outputs; gbt: base_score + sum of tree outputs
    std::vector<RegressionTree> trees;
    double base_score = 0.0;

    // non-negative, sums to 1; uniform with degenerate_importance set when
    // the fit carried no signal to apportion
    Eigen::VectorXd importance;
    bool degenerate_importance = false;

    std::vector<double> stage_train_mse;  // gbt only, one entry per stage
};

std::vector<std::string> default_feature_names(Eigen::Index d);

TrainedModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeSpec& spec,
                       std::vector<std::string> feature_names = {});
TrainedModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestSpec& spec,
                        std::vector<std::string> feature_names = {}, unsigned threads = 1);
TrainedModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbtSpec& spec,
                     std::vector<std::string> feature_names = {});
TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 std::vector<std::string> feature_names = {}, unsigned threads = 1);

Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X);
Eigen::VectorXd predict(const TrainedModel& model, const ContextMatrix& m);  // checks column names

// Per-feature histogram bin edges used by fit_gbt; exposed for tests.
std::vector<double> histogram_thresholds(const Eigen::VectorXd& column, int n_bins);

std::string serialize_model(const TrainedModel& model);
TrainedModel parse_model(std::string_view text);

}  // namespace driftlab
