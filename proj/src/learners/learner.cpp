#include "statsformer/learners/learner.hpp"

#include <cmath>

#include <fmt/core.h>

#include "statsformer/error.hpp"

namespace statsformer::learners {

FittedLearner::FittedLearner(State state, Task task, int p) : state_(std::move(state)), task_(task), p_(p) {}

LearnerKind FittedLearner::kind() const {
    switch (state_.index()) {
        case 0: return LearnerKind::lasso;
        case 1: return LearnerKind::random_forest;
        case 2: return LearnerKind::gbt;
        default: return LearnerKind::kernel_svm;
    }
}

Eigen::MatrixXd FittedLearner::predict(const Eigen::MatrixXd& x_std) const {
    if (x_std.cols() != p_) {
        throw DataError(fmt::format("{} expects {} columns, got {}", to_string(kind()), p_, x_std.cols()));
    }
    if (x_std.rows() == 0) return Eigen::MatrixXd(0, task_.output_columns());
    return std::visit([&](const auto& s) { return s.predict(x_std); }, state_);
}

LassoOptions lasso_options(const LearnerConfig& config, std::uint64_t seed) {
    LassoOptions o;
    o.folds_internal = static_cast<int>(config.hyper_or("folds_internal", o.folds_internal));
    o.n_lambda = static_cast<int>(config.hyper_or("n_lambda", o.n_lambda));
    o.lambda_min_ratio = config.hyper_or("lambda_min_ratio", o.lambda_min_ratio);
    o.seed = seed;
    return o;
}

ForestOptions forest_options(const LearnerConfig& config, std::uint64_t seed) {
    ForestOptions o;
    o.n_trees = static_cast<int>(config.hyper_or("n_trees", o.n_trees));
    o.oversample_factor = static_cast<int>(config.hyper_or("oversample_factor", o.oversample_factor));
    o.leaf_smoothing = config.hyper_or("leaf_smoothing", o.leaf_smoothing);
    o.seed = seed;
    return o;
}

GbtOptions gbt_options(const LearnerConfig& config, std::uint64_t seed) {
    GbtOptions o;
    o.n_rounds = static_cast<int>(config.hyper_or("n_rounds", o.n_rounds));
    o.max_depth = static_cast<int>(config.hyper_or("max_depth", o.max_depth));
    o.learning_rate = config.hyper_or("learning_rate", o.learning_rate);
    o.reg_lambda = config.hyper_or("reg_lambda", o.reg_lambda);
    o.min_child_weight = config.hyper_or("min_child_weight", o.min_child_weight);
    o.colsample_bynode = config.hyper_or("colsample_bynode", o.colsample_bynode);
    o.seed = seed;
    return o;
}

SvmOptions svm_options(const LearnerConfig& config) {
    SvmOptions o;
    o.C = config.hyper_or("C", o.C);
    o.gamma = config.hyper_or("gamma", o.gamma);
    o.svr_epsilon = config.hyper_or("svr_epsilon", o.svr_epsilon);
    return o;
}

FittedLearner fit_learner(const LearnerConfig& config, const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y,
                          const Task& task, const priors::AdapterInputs& inputs, std::uint64_t seed) {
    const auto p = static_cast<int>(x_std.cols());
    switch (config.learner) {
        case LearnerKind::lasso:
            return {fit_lasso(x_std, y, inputs.penalty_weights, task, lasso_options(config, seed)), task, p};
        case LearnerKind::random_forest:
            return {fit_random_forest(x_std, y, inputs.instance_weights, inputs.feature_probs, task,
                                      forest_options(config, seed)),
                    task, p};
        case LearnerKind::gbt:
            return {fit_gbt(x_std, y, inputs.feature_probs, task, gbt_options(config, seed)), task, p};
        case LearnerKind::kernel_svm:
            return {fit_kernel_svm(x_std, y, inputs.feature_scales, task, svm_options(config)), task, p};
    }
    throw UsageError("unknown learner");
}

}  // namespace statsformer::learners
