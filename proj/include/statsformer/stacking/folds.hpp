#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/dataset.hpp"

namespace statsformer::stacking {

/// Assignment of every sample to one of K folds.
struct FoldPlan {
    std::vector<int> assignment;  ///< k(i)
    int k = 0;
    bool stratified = false;

    std::vector<std::size_t> test_indices(int fold) const;
    std::vector<std::size_t> train_indices(int fold) const;
};

/// Stratified round-robin over shuffled per-class blocks (classification) or
/// round-robin over one shuffled block (regression). Throws DataError
/// "insufficient minority samples" when a class has fewer than K members.
FoldPlan make_folds(const Dataset& d, int k, std::uint64_t seed);

/// Same scheme on raw labels; `n_classes` = 0 selects the unstratified path.
FoldPlan make_folds(const Eigen::VectorXd& labels, int n_classes, int k, std::uint64_t seed);

}  // namespace statsformer::stacking
