#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/dataset.hpp"
#include "statsformer/learners/tree.hpp"

namespace statsformer::learners {

struct ForestOptions {
    int n_trees = 50;
    /// Extra feature draws as a multiple of p; 1 gives 2p candidate columns.
    int oversample_factor = 1;
    /// Additive (Laplace) smoothing of leaf class counts.
    double leaf_smoothing = 1.0;
    std::uint64_t seed = 0;
};

/// Fitted forest. Leaves hold smoothed class log-odds (binary), per-class
/// log-probabilities (multiclass) or weighted means (regression);
/// predictions average the trees.
struct ForestState {
    std::vector<DecisionTree> trees;
    Eigen::VectorXd feature_probs;
    std::vector<int> candidate_columns;  ///< original p columns plus the oversampled draws
    Task task;
    int p = 0;
    std::uint64_t seed = 0;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// Leaf output for weighted class counts with additive smoothing:
/// probabilities (c_k + s) / (sum c + s K), returned as log-odds for two
/// classes (length 1) or log-probabilities otherwise.
Eigen::VectorXd smoothed_class_logits(const std::vector<double>& counts, double smoothing);

/// Random forest with prior-aware bootstrap and feature oversampling.
/// Empty `sample_weights` / `feature_probs` mean uniform.
ForestState fit_random_forest(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& sample_weights, const Eigen::VectorXd& feature_probs,
                              const Task& task, const ForestOptions& options);

}  // namespace statsformer::learners
