#include "statsformer/learners/tree.hpp"

#include <algorithm>
#include <functional>

namespace statsformer::learners {

int DecisionTree::add_leaf() {
    nodes.emplace_back();
    values.resize(values.size() + static_cast<std::size_t>(outputs), 0.0);
    return static_cast<int>(nodes.size()) - 1;
}

int DecisionTree::leaf_for(const Eigen::MatrixXd& x, Eigen::Index row) const {
    int node = 0;
    while (!is_leaf(node)) {
        const Node& nd = nodes[static_cast<std::size_t>(node)];
        node = x(row, nd.feature) < nd.threshold ? nd.left : nd.right;
    }
    return node;
}

void DecisionTree::accumulate(const Eigen::MatrixXd& x, Eigen::MatrixXd& out, double scale) const {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double* v = value(leaf_for(x, i));
        for (int k = 0; k < outputs; ++k) out(i, k) += scale * v[k];
    }
}

int DecisionTree::depth() const {
    std::function<int(int)> walk = [&](int node) -> int {
        if (is_leaf(node)) return 0;
        const Node& nd = nodes[static_cast<std::size_t>(node)];
        return 1 + std::max(walk(nd.left), walk(nd.right));
    };
    return nodes.empty() ? 0 : walk(0);
}

}  // namespace statsformer::learners
