#include "statsformer/stacking/folds.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/core.h>

#include "statsformer/error.hpp"
#include "statsformer/random.hpp"

namespace statsformer::stacking {

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) out.push_back(i);
    }
    return out;
}

FoldPlan make_folds(const Eigen::VectorXd& labels, int n_classes, int k, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(labels.size());
    if (k < 2) throw UsageError("number of folds must be >= 2");
    if (static_cast<std::size_t>(k) > n) {
        throw DataError(fmt::format("cannot split {} samples into {} folds", n, k));
    }
    Rng rng(seed);
    FoldPlan plan;
    plan.k = k;
    plan.stratified = n_classes > 0;
    plan.assignment.assign(n, -1);

    std::vector<std::size_t> order;
    if (n_classes > 0) {
        std::vector<std::vector<std::size_t>> blocks(static_cast<std::size_t>(n_classes));
        for (std::size_t i = 0; i < n; ++i) blocks[static_cast<std::size_t>(labels(static_cast<Eigen::Index>(i)))].push_back(i);
        for (int c = 0; c < n_classes; ++c) {
            auto& block = blocks[static_cast<std::size_t>(c)];
            if (!block.empty() && block.size() < static_cast<std::size_t>(k)) {
                throw DataError(fmt::format("insufficient minority samples: class {} has {} members for {} folds",
                                            c, block.size(), k));
            }
            std::shuffle(block.begin(), block.end(), rng);
            order.insert(order.end(), block.begin(), block.end());
        }
    } else {
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        plan.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    }
    return plan;
}

FoldPlan make_folds(const Dataset& d, int k, std::uint64_t seed) {
    return make_folds(d.targets(), d.task().is_classification() ? d.task().n_classes : 0, k, seed);
}

}  // namespace statsformer::stacking
