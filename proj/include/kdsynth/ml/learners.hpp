#pragma once
// Minimal binary learners standing in for the classifier nodes:
//   linear          logistic regression fitted by gradient descent
//   rbf             kernel logistic regression on RBF landmark features
//   boosted_stumps  gradient-boosted shallow regression trees (logistic loss)

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kdsynth/dataset.hpp"

namespace kdsynth::ml {

enum class ModelKind { Linear, Rbf, BoostedStumps };

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

using Hyperparams = std::map<std::string, double>;
using Grid = std::map<std::string, std::vector<double>>;

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct TrainedModel {
    ModelKind kind = ModelKind::Linear;
    Hyperparams hyperparams;
    // Deterministic classifiers report 0/1 probabilities (then clipped).
    bool hard_output = false;
    bool converged = true;

    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;
    Eigen::VectorXd weights;
    double bias = 0;
    Eigen::MatrixXd landmarks;
    double gamma = 0;
    std::vector<Tree> trees;
    double base_score = 0;
    double learning_rate = 0;
};

inline constexpr double kProbabilityClip = 1e-12;

struct TrainSettings {
    ModelKind kind = ModelKind::Linear;
    Hyperparams fixed; // overrides defaults, not searched
    Grid grid;         // searched exhaustively when non-empty
    bool hard_output = false;
    std::uint64_t seed = 0;
};

struct GridTrial {
    Hyperparams params;
    double validation_logloss = 0;
};

struct TrainResult {
    TrainedModel model;
    std::vector<GridTrial> trials;
};

struct Metrics {
    double logloss = 0;
    double accuracy = 0;

    bool operator==(const Metrics&) const = default;
};

TrainedModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXi& y, ModelKind kind,
                 const Hyperparams& hyperparams, bool hard_output, std::uint64_t seed);

// Probabilities of class 1, clipped to [1e-12, 1 - 1e-12].
Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X);

// Fits on the training side of ds.split (grid search on a 25% validation
// slice of it when a grid is given, then refit on the full training side).
TrainResult train(const Dataset& ds, const TrainSettings& settings);

// Scores the model on the test side of ds.split.
Metrics evaluate(const TrainedModel& model, const Dataset& ds);

} // namespace kdsynth::ml
