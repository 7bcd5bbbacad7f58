#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/config.hpp"
#include "statsformer/core/dataset.hpp"
#include "statsformer/core/standardizer.hpp"
#include "statsformer/learners/learner.hpp"
#include "statsformer/stacking/meta.hpp"
#include "statsformer/stacking/oof.hpp"

namespace statsformer::stacking {

struct Provenance {
    std::uint64_t seed = 0;
    std::string created_utc;
    std::string prior_fingerprint;
    bool prior_inverted = false;
    std::string library_version;
};

/// Refit base learners combined by nonnegative meta weights.
struct StatsformerModel {
    Task task;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_labels;
    Standardizer standardizer;
    std::vector<LearnerConfig> dictionary;   ///< configurations that survived the OOF stage
    std::vector<MetaWeights> weights;        ///< one per output column
    std::vector<std::size_t> refit_index;    ///< dictionary position of each refit learner
    std::vector<learners::FittedLearner> refit_learners;
    RunConfig run_config;
    Provenance provenance;

    /// Number of output problems: 1 for regression and binary, c for multiclass.
    int problems() const { return static_cast<int>(weights.size()); }
};

struct ModelPrediction {
    Eigen::MatrixXd scores;          ///< n x problems, meta-level scores
    Eigen::VectorXd values;          ///< regression values or positive-class probabilities (binary)
    std::vector<int> labels;         ///< classification only
};

/// Minimum meta weight for a configuration to be refit.
inline constexpr double kRefitThreshold = 1e-8;

/// Refits every configuration with weight above the threshold (union over
/// classes) on the full standardized data and assembles the model.
StatsformerModel refit_and_assemble(const Dataset& d, const FeaturePrior& v, const std::vector<LearnerConfig>& dictionary,
                                    const std::vector<MetaWeights>& meta, const RunConfig& rc);

/// Scores on standardized inputs: b0_j + sum_l pi_jl f_l(x)_j.
Eigen::MatrixXd model_scores(const StatsformerModel& m, const Eigen::MatrixXd& x_std);

/// Standardizes raw features with the stored statistics and predicts.
ModelPrediction predict_model(const StatsformerModel& m, const Eigen::MatrixXd& x_raw);

/// Everything produced by one end-to-end fit.
struct FitResult {
    OofMatrix oof;
    StatsformerModel model;
    std::vector<std::string> warnings;
};

/// Folds, OOF predictions, meta fit, refit.
FitResult fit_statsformer(const Dataset& d, const FeaturePrior& v, const RunConfig& rc);

}  // namespace statsformer::stacking
