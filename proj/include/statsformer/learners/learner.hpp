#pragma once

#include <cstdint>
#include <variant>

#include <Eigen/Dense>

#include "statsformer/core/config.hpp"
#include "statsformer/core/dataset.hpp"
#include "statsformer/learners/forest.hpp"
#include "statsformer/learners/gbt.hpp"
#include "statsformer/learners/lasso.hpp"
#include "statsformer/learners/svm.hpp"
#include "statsformer/priors/transforms.hpp"

namespace statsformer::learners {

/// A fitted base learner of any kind. Predictions are scores on the
/// standardized scale: regression values, a binary logit, or c class logits.
class FittedLearner {
public:
    using State = std::variant<LassoState, ForestState, GbtState, KernelSvmState>;

    FittedLearner(State state, Task task, int p);

    LearnerKind kind() const;
    const Task& task() const { return task_; }
    int p() const { return p_; }
    const State& state() const { return state_; }

    /// Rows x task.output_columns(). Throws DataError on a column mismatch.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x_std) const;

private:
    State state_;
    Task task_;
    int p_ = 0;
};

LassoOptions lasso_options(const LearnerConfig& config, std::uint64_t seed);
ForestOptions forest_options(const LearnerConfig& config, std::uint64_t seed);
GbtOptions gbt_options(const LearnerConfig& config, std::uint64_t seed);
SvmOptions svm_options(const LearnerConfig& config);

/// Fits the configuration's learner with its adapter inputs already computed.
FittedLearner fit_learner(const LearnerConfig& config, const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y,
                          const Task& task, const priors::AdapterInputs& inputs, std::uint64_t seed);

}  // namespace statsformer::learners
