#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/dataset.hpp"
#include "statsformer/learners/tree.hpp"

namespace statsformer::learners {

struct GbtOptions {
    int n_rounds = 50;
    int max_depth = 6;
    double learning_rate = 0.3;
    double reg_lambda = 1.0;        ///< L2 on leaf weights
    double min_child_weight = 1.0;  ///< minimum hessian sum per child
    /// Per-node feature fraction; negative selects max(0.2, min(1, 30/p)).
    double colsample_bynode = -1.0;
    std::uint64_t seed = 0;
};

/// Second-order boosted trees. Multiclass rounds grow one tree per class
/// (softmax); `trees[round * outputs + class]`.
struct GbtState {
    std::vector<DecisionTree> trees;
    Eigen::VectorXd base_score;  ///< per output column
    Eigen::VectorXd feature_probs;
    double learning_rate = 0.3;
    Task task;
    int p = 0;
    std::uint64_t seed = 0;
    std::vector<double> train_loss;  ///< mean training loss after each round (index 0 = base score)

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// max(0.2, min(1, 30/p)).
double default_colsample(Eigen::Index p);

/// Number of features examined per node: max(1, floor(fraction * p)).
int features_per_node(double fraction, Eigen::Index p);

/// Draws `k` distinct indices with inclusion driven by `weights` using
/// exponential keys (u^(1/w), keep the k largest).
std::vector<int> weighted_sample_without_replacement(const Eigen::VectorXd& weights, int k, std::uint64_t seed);

/// Empty `feature_probs` means uniform.
GbtState fit_gbt(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, const Eigen::VectorXd& feature_probs,
                 const Task& task, const GbtOptions& options);

}  // namespace statsformer::learners
