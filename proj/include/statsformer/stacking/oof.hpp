#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/config.hpp"
#include "statsformer/core/dataset.hpp"
#include "statsformer/stacking/folds.hpp"

namespace statsformer::stacking {

/// Out-of-fold predictions. `slices[j]` is the n x L matrix for output
/// column j (one slice for regression and binary, c for multiclass).
struct OofMatrix {
    std::vector<Eigen::MatrixXd> slices;
    std::vector<LearnerConfig> configs;    ///< surviving configurations, column order
    std::vector<std::size_t> config_index; ///< position of each column in the input dictionary
    FoldPlan plan;
    std::vector<std::string> warnings;     ///< one entry per dropped configuration

    Eigen::Index n() const { return slices.empty() ? 0 : slices.front().rows(); }
    Eigen::Index columns() const { return static_cast<Eigen::Index>(configs.size()); }
};

/// Seed for fitting `config` on fold `fold` (use fold = K for the full-data refit).
/// Keyed by the configuration's identity, so duplicated or reordered
/// dictionaries reproduce the same columns.
std::uint64_t task_seed(std::uint64_t root, int fold, const LearnerConfig& config);

/// Fits every (fold, configuration) pair and writes held-out predictions.
/// Configurations that fail on any fold are dropped with a warning; throws
/// NumericError if none survive.
OofMatrix compute_oof(const Dataset& d, const FeaturePrior& v, const std::vector<LearnerConfig>& dictionary,
                      const FoldPlan& plan, const RunConfig& rc);

}  // namespace statsformer::stacking
