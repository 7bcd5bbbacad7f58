#include "statsformer/learners/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "statsformer/error.hpp"
#include "statsformer/random.hpp"

namespace statsformer::learners {
namespace {

std::vector<double> cumulative(const Eigen::VectorXd& w) {
    std::vector<double> cdf(static_cast<std::size_t>(w.size()));
    double total = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        total += w(i);
        cdf[static_cast<std::size_t>(i)] = total;
    }
    return cdf;
}

std::size_t draw(const std::vector<double>& cdf, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
};

class TreeGrower {
public:
    TreeGrower(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Task& task,
               const std::vector<int>& candidates, int mtry, double smoothing)
        : x_(x), y_(y), task_(task), candidates_(candidates), mtry_(mtry), smoothing_(smoothing),
          n_classes_(task.is_classification() ? task.n_classes : 0),
          seen_(static_cast<std::size_t>(x.cols()), 0) {}

    DecisionTree grow(const std::vector<std::size_t>& rows, const std::vector<double>& weight, Rng& rng) {
        DecisionTree tree;
        tree.outputs = task_.output_columns();
        weight_ = &weight;
        tree.add_leaf();
        struct Pending {
            int node;
            std::vector<std::size_t> rows;
        };
        std::vector<Pending> stack;
        stack.push_back({0, rows});
        while (!stack.empty()) {
            Pending cur = std::move(stack.back());
            stack.pop_back();
            const Split split = cur.rows.size() >= 2 && !is_pure(cur.rows) ? best_split(cur.rows, rng) : Split{};
            if (split.feature < 0) {
                set_leaf(tree, cur.node, cur.rows);
                continue;
            }
            std::vector<std::size_t> left;
            std::vector<std::size_t> right;
            for (std::size_t r : cur.rows) {
                (x_(static_cast<Eigen::Index>(r), split.feature) < split.threshold ? left : right).push_back(r);
            }
            const int l = tree.add_leaf();
            const int rr = tree.add_leaf();
            auto& nd = tree.nodes[static_cast<std::size_t>(cur.node)];
            nd.feature = split.feature;
            nd.threshold = split.threshold;
            nd.left = l;
            nd.right = rr;
            stack.push_back({rr, std::move(right)});
            stack.push_back({l, std::move(left)});
        }
        return tree;
    }

private:
    double w(std::size_t r) const { return (*weight_)[r]; }

    bool is_pure(const std::vector<std::size_t>& rows) const {
        const double first = y_(static_cast<Eigen::Index>(rows.front()));
        return std::all_of(rows.begin(), rows.end(),
                           [&](std::size_t r) { return y_(static_cast<Eigen::Index>(r)) == first; });
    }

    void set_leaf(DecisionTree& tree, int node, const std::vector<std::size_t>& rows) const {
        double* out = tree.value(node);
        if (n_classes_ > 0) {
            std::vector<double> counts(static_cast<std::size_t>(n_classes_), 0.0);
            for (std::size_t r : rows) counts[static_cast<std::size_t>(y_(static_cast<Eigen::Index>(r)))] += w(r);
            const Eigen::VectorXd logits = smoothed_class_logits(counts, smoothing_);
            for (Eigen::Index k = 0; k < logits.size(); ++k) out[k] = logits(k);
        } else {
            double sw = 0.0;
            double sy = 0.0;
            for (std::size_t r : rows) {
                sw += w(r);
                sy += w(r) * y_(static_cast<Eigen::Index>(r));
            }
            out[0] = sy / sw;
        }
    }

    // Maximizes sum_k L_k^2/W_L + sum_k R_k^2/W_R (equivalently the weighted
    // Gini decrease) or S_L^2/W_L + S_R^2/W_R for regression.
    Split best_split(const std::vector<std::size_t>& rows, Rng& rng) {
        Split best;
        const std::size_t m = candidates_.size();
        positions_.resize(m);
        std::iota(positions_.begin(), positions_.end(), std::size_t{0});
        ++stamp_;
        const auto k_classes = static_cast<std::size_t>(std::max(n_classes_, 1));
        std::vector<double> total(k_classes, 0.0);
        double total_w = 0.0;
        for (std::size_t r : rows) {
            const std::size_t slot = n_classes_ > 0 ? static_cast<std::size_t>(y_(static_cast<Eigen::Index>(r))) : 0;
            total[slot] += n_classes_ > 0 ? w(r) : w(r) * y_(static_cast<Eigen::Index>(r));
            total_w += w(r);
        }
        double parent = 0.0;
        for (double t : total) parent += t * t / total_w;
        best.score = parent;

        std::vector<std::pair<double, std::size_t>> order(rows.size());
        std::vector<double> left(k_classes);
        const std::size_t draws = std::min<std::size_t>(static_cast<std::size_t>(mtry_), m);
        for (std::size_t d = 0; d < draws; ++d) {
            std::uniform_int_distribution<std::size_t> pick(d, m - 1);
            std::swap(positions_[d], positions_[pick(rng)]);
            const int f = candidates_[positions_[d]];
            if (seen_[static_cast<std::size_t>(f)] == stamp_) continue;
            seen_[static_cast<std::size_t>(f)] = stamp_;

            for (std::size_t i = 0; i < rows.size(); ++i) {
                order[i] = {x_(static_cast<Eigen::Index>(rows[i]), f), rows[i]};
            }
            std::sort(order.begin(), order.end());
            if (order.front().first == order.back().first) continue;
            std::fill(left.begin(), left.end(), 0.0);
            double left_w = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const std::size_t r = order[i].second;
                const std::size_t slot = n_classes_ > 0 ? static_cast<std::size_t>(y_(static_cast<Eigen::Index>(r))) : 0;
                left[slot] += n_classes_ > 0 ? w(r) : w(r) * y_(static_cast<Eigen::Index>(r));
                left_w += w(r);
                if (order[i].first == order[i + 1].first) continue;
                const double right_w = total_w - left_w;
                double score = 0.0;
                for (std::size_t k = 0; k < k_classes; ++k) {
                    const double rk = total[k] - left[k];
                    score += left[k] * left[k] / left_w + rk * rk / right_w;
                }
                if (score > best.score + 1e-12 * std::abs(best.score) + 1e-15) {
                    const double lo = order[i].first;
                    const double hi = order[i + 1].first;
                    double threshold = lo + 0.5 * (hi - lo);
                    if (!(threshold > lo)) threshold = hi;
                    best = {f, threshold, score};
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    Task task_;
    const std::vector<int>& candidates_;
    int mtry_;
    double smoothing_;
    int n_classes_;
    const std::vector<double>* weight_ = nullptr;
    std::vector<std::size_t> positions_;
    std::vector<std::uint32_t> seen_;
    std::uint32_t stamp_ = 0;
};

}  // namespace

Eigen::VectorXd smoothed_class_logits(const std::vector<double>& counts, double smoothing) {
    const auto k = static_cast<Eigen::Index>(counts.size());
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0) + smoothing * static_cast<double>(k);
    Eigen::VectorXd logp(k);
    for (Eigen::Index c = 0; c < k; ++c) logp(c) = std::log((counts[static_cast<std::size_t>(c)] + smoothing) / total);
    if (k == 2) {
        Eigen::VectorXd out(1);
        out(0) = logp(1) - logp(0);
        return out;
    }
    return logp;
}

Eigen::MatrixXd ForestState::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != p) throw DataError(fmt::format("forest expects {} columns, got {}", p, x.cols()));
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), task.output_columns());
    for (const auto& tree : trees) tree.accumulate(x, out);
    if (!trees.empty()) out /= static_cast<double>(trees.size());
    return out;
}

ForestState fit_random_forest(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& sample_weights, const Eigen::VectorXd& feature_probs,
                              const Task& task, const ForestOptions& options) {
    const Eigen::Index n = x_std.rows();
    const Eigen::Index p = x_std.cols();
    if (n < 1 || p < 1) throw DataError("random forest: empty training data");
    if (y.size() != n) throw DataError("random forest: target length does not match rows");
    const Eigen::VectorXd weights = sample_weights.size() == 0 ? Eigen::VectorXd::Ones(n) : sample_weights;
    const Eigen::VectorXd probs =
        feature_probs.size() == 0 ? Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p)) : feature_probs;
    if (weights.size() != n) throw DataError("random forest: sample weight length does not match rows");
    if (probs.size() != p) throw DataError("random forest: feature probability length does not match columns");
    if ((weights.array() < 0.0).any() || !(weights.sum() > 0.0)) {
        throw DataError("random forest: sample weights must be nonnegative and not all zero");
    }
    if ((probs.array() < 0.0).any() || !(probs.sum() > 0.0)) {
        throw DataError("random forest: feature probabilities must be nonnegative and not all zero");
    }

    ForestState state;
    state.task = task;
    state.p = static_cast<int>(p);
    state.seed = options.seed;
    state.feature_probs = probs;

    Rng column_rng(derive_seed(options.seed, "forest-columns"));
    state.candidate_columns.resize(static_cast<std::size_t>(p));
    std::iota(state.candidate_columns.begin(), state.candidate_columns.end(), 0);
    const std::vector<double> feature_cdf = cumulative(probs);
    for (Eigen::Index d = 0; d < options.oversample_factor * p; ++d) {
        state.candidate_columns.push_back(static_cast<int>(draw(feature_cdf, column_rng)));
    }
    const auto m = static_cast<double>(state.candidate_columns.size());
    const int mtry = task.is_classification() ? static_cast<int>(std::ceil(std::sqrt(m)))
                                              : static_cast<int>(std::ceil(m / 3.0));

    TreeGrower grower(x_std, y, task, state.candidate_columns, std::max(1, mtry), options.leaf_smoothing);
    const std::vector<double> sample_cdf = cumulative(weights);
    std::vector<double> multiplicity(static_cast<std::size_t>(n));
    state.trees.reserve(static_cast<std::size_t>(options.n_trees));
    for (int t = 0; t < options.n_trees; ++t) {
        Rng rng(derive_seed(options.seed, "forest-tree", {static_cast<std::uint64_t>(t)}));
        std::fill(multiplicity.begin(), multiplicity.end(), 0.0);
        for (Eigen::Index d = 0; d < n; ++d) multiplicity[draw(sample_cdf, rng)] += 1.0;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < multiplicity.size(); ++i) {
            if (multiplicity[i] > 0.0) rows.push_back(i);
        }
        state.trees.push_back(grower.grow(rows, multiplicity, rng));
    }
    return state;
}

}  // namespace statsformer::learners
