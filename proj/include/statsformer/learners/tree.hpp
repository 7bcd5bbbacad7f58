#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace statsformer::learners {

/// Binary decision tree stored as a flat node array. Node 0 is the root.
/// Leaves have feature = -1 and own `outputs` consecutive values.
struct DecisionTree {
    struct Node {
        std::int32_t feature = -1;
        double threshold = 0.0;  ///< go left when x[feature] < threshold
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    int outputs = 1;
    std::vector<Node> nodes;
    std::vector<double> values;  ///< nodes.size() * outputs; meaningful at leaves

    int add_leaf();
    bool is_leaf(int node) const { return nodes[static_cast<std::size_t>(node)].feature < 0; }
    double* value(int node) { return values.data() + static_cast<std::ptrdiff_t>(node) * outputs; }
    const double* value(int node) const { return values.data() + static_cast<std::ptrdiff_t>(node) * outputs; }

    /// Index of the leaf reached by row `row` of `x`.
    int leaf_for(const Eigen::MatrixXd& x, Eigen::Index row) const;

    /// Adds this tree's leaf outputs for every row into `out` (rows x outputs).
    void accumulate(const Eigen::MatrixXd& x, Eigen::MatrixXd& out, double scale = 1.0) const;

    int depth() const;
};

}  // namespace statsformer::learners
