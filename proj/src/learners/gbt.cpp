#include "statsformer/learners/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "statsformer/error.hpp"
#include "statsformer/random.hpp"

namespace statsformer::learners {
namespace {

constexpr double kMinGain = 1e-6;

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

std::vector<int> sample_features(const Eigen::VectorXd& weights, int k, Rng& rng) {
    const auto p = static_cast<int>(weights.size());
    if (k >= p) {
        std::vector<int> all(static_cast<std::size_t>(p));
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, int>> keys(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        double u = unif(rng);
        while (u <= 0.0) u = unif(rng);
        const double w = weights(j);
        keys[static_cast<std::size_t>(j)] = {w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity(), j};
    }
    std::partial_sort(keys.begin(), keys.begin() + k, keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<int> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = keys[static_cast<std::size_t>(i)].second;
    std::sort(out.begin(), out.end());
    return out;
}

class BoostTreeBuilder {
public:
    BoostTreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& probs, const GbtOptions& opt, int per_node)
        : x_(x), probs_(probs), opt_(opt), per_node_(per_node) {}

    DecisionTree build(const Eigen::VectorXd& g, const Eigen::VectorXd& h, Rng& rng) {
        DecisionTree tree;
        tree.outputs = 1;
        tree.add_leaf();
        std::vector<std::size_t> all(static_cast<std::size_t>(x_.rows()));
        std::iota(all.begin(), all.end(), std::size_t{0});
        struct Pending {
            int node;
            int depth;
            std::vector<std::size_t> rows;
        };
        std::vector<Pending> stack;
        stack.push_back({0, 0, std::move(all)});
        while (!stack.empty()) {
            Pending cur = std::move(stack.back());
            stack.pop_back();
            double sg = 0.0;
            double sh = 0.0;
            for (std::size_t r : cur.rows) {
                sg += g(static_cast<Eigen::Index>(r));
                sh += h(static_cast<Eigen::Index>(r));
            }
            int feature = -1;
            double threshold = 0.0;
            if (cur.depth < opt_.max_depth && cur.rows.size() >= 2) {
                const std::vector<int> features = sample_features(probs_, per_node_, rng);
                find_split(cur.rows, features, g, h, sg, sh, feature, threshold);
            }
            if (feature < 0) {
                *tree.value(cur.node) = -sg / (sh + opt_.reg_lambda) * opt_.learning_rate;
                continue;
            }
            std::vector<std::size_t> left;
            std::vector<std::size_t> right;
            for (std::size_t r : cur.rows) {
                (x_(static_cast<Eigen::Index>(r), feature) < threshold ? left : right).push_back(r);
            }
            const int l = tree.add_leaf();
            const int rr = tree.add_leaf();
            auto& nd = tree.nodes[static_cast<std::size_t>(cur.node)];
            nd.feature = feature;
            nd.threshold = threshold;
            nd.left = l;
            nd.right = rr;
            stack.push_back({rr, cur.depth + 1, std::move(right)});
            stack.push_back({l, cur.depth + 1, std::move(left)});
        }
        return tree;
    }

private:
    void find_split(const std::vector<std::size_t>& rows, const std::vector<int>& features, const Eigen::VectorXd& g,
                    const Eigen::VectorXd& h, double sg, double sh, int& best_feature, double& best_threshold) {
        const double lambda = opt_.reg_lambda;
        const double parent = sg * sg / (sh + lambda);
        double best_gain = kMinGain;
        order_.resize(rows.size());
        for (int f : features) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                order_[i] = {x_(static_cast<Eigen::Index>(rows[i]), f), rows[i]};
            }
            std::sort(order_.begin(), order_.end());
            double gl = 0.0;
            double hl = 0.0;
            for (std::size_t i = 0; i + 1 < order_.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(order_[i].second);
                gl += g(r);
                hl += h(r);
                if (order_[i].first == order_[i + 1].first) continue;
                const double gr = sg - gl;
                const double hr = sh - hl;
                if (hl < opt_.min_child_weight || hr < opt_.min_child_weight) continue;
                const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    const double lo = order_[i].first;
                    const double hi = order_[i + 1].first;
                    best_threshold = lo + 0.5 * (hi - lo);
                    if (!(best_threshold > lo)) best_threshold = hi;
                }
            }
        }
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& probs_;
    const GbtOptions& opt_;
    int per_node_;
    std::vector<std::pair<double, std::size_t>> order_;
};

}  // namespace

double default_colsample(Eigen::Index p) {
    return std::max(0.2, std::min(1.0, 30.0 / static_cast<double>(p)));
}

int features_per_node(double fraction, Eigen::Index p) {
    return std::max(1, static_cast<int>(std::floor(fraction * static_cast<double>(p) + 1e-9)));
}

std::vector<int> weighted_sample_without_replacement(const Eigen::VectorXd& weights, int k, std::uint64_t seed) {
    Rng rng(seed);
    return sample_features(weights, k, rng);
}

Eigen::MatrixXd GbtState::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != p) throw DataError(fmt::format("gbt expects {} columns, got {}", p, x.cols()));
    const int k = task.output_columns();
    Eigen::MatrixXd out(x.rows(), k);
    out.rowwise() = base_score.transpose();
    Eigen::MatrixXd col(x.rows(), 1);
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const auto c = static_cast<Eigen::Index>(t % static_cast<std::size_t>(k));
        col.setZero();
        trees[t].accumulate(x, col);
        out.col(c) += col.col(0);
    }
    return out;
}

GbtState fit_gbt(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, const Eigen::VectorXd& feature_probs,
                 const Task& task, const GbtOptions& options) {
    const Eigen::Index n = x_std.rows();
    const Eigen::Index p = x_std.cols();
    if (n < 1 || p < 1) throw DataError("gbt: empty training data");
    if (y.size() != n) throw DataError("gbt: target length does not match rows");
    const Eigen::VectorXd probs =
        feature_probs.size() == 0 ? Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p)) : feature_probs;
    if (probs.size() != p) throw DataError("gbt: feature probability length does not match columns");

    GbtState state;
    state.task = task;
    state.p = static_cast<int>(p);
    state.seed = options.seed;
    state.feature_probs = probs;
    state.learning_rate = options.learning_rate;
    const int k = task.output_columns();
    state.base_score.resize(k);
    if (task.kind == TaskKind::regression) {
        state.base_score(0) = y.mean();
    } else if (task.kind == TaskKind::binary) {
        const double m = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
        state.base_score(0) = std::log(m / (1.0 - m));
    } else {
        for (int c = 0; c < k; ++c) {
            const double m = std::clamp((y.array() == c).cast<double>().mean(), 1e-6, 1.0);
            state.base_score(c) = std::log(m);
        }
    }

    const double fraction = options.colsample_bynode > 0 ? options.colsample_bynode : default_colsample(p);
    BoostTreeBuilder builder(x_std, probs, options, features_per_node(fraction, p));

    Eigen::MatrixXd margin(n, k);
    margin.rowwise() = state.base_score.transpose();
    auto mean_loss = [&]() {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (task.kind == TaskKind::regression) {
                total += 0.5 * (y(i) - margin(i, 0)) * (y(i) - margin(i, 0));
            } else if (task.kind == TaskKind::binary) {
                const double t = margin(i, 0);
                total += std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))) - y(i) * t;
            } else {
                const double mx = margin.row(i).maxCoeff();
                const double lse = mx + std::log((margin.row(i).array() - mx).exp().sum());
                total += lse - margin(i, static_cast<Eigen::Index>(y(i)));
            }
        }
        return total / static_cast<double>(n);
    };
    state.train_loss.push_back(mean_loss());

    Eigen::MatrixXd grad(n, k);
    Eigen::MatrixXd hess(n, k);
    for (int round = 0; round < options.n_rounds; ++round) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (task.kind == TaskKind::regression) {
                grad(i, 0) = margin(i, 0) - y(i);
                hess(i, 0) = 1.0;
            } else if (task.kind == TaskKind::binary) {
                const double prob = sigmoid(margin(i, 0));
                grad(i, 0) = prob - y(i);
                hess(i, 0) = std::max(prob * (1.0 - prob), 1e-16);
            } else {
                const double mx = margin.row(i).maxCoeff();
                const Eigen::ArrayXd e = (margin.row(i).array() - mx).exp();
                const double z = e.sum();
                for (int c = 0; c < k; ++c) {
                    const double prob = e(c) / z;
                    grad(i, c) = prob - (y(i) == c ? 1.0 : 0.0);
                    hess(i, c) = std::max(2.0 * prob * (1.0 - prob), 1e-16);
                }
            }
        }
        for (int c = 0; c < k; ++c) {
            Rng rng(derive_seed(options.seed, "gbt-tree",
                                {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(c)}));
            DecisionTree tree = builder.build(grad.col(c), hess.col(c), rng);
            Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, 1);
            tree.accumulate(x_std, delta);
            margin.col(c) += delta.col(0);
            state.trees.push_back(std::move(tree));
        }
        state.train_loss.push_back(mean_loss());
    }
    return state;
}

}  // namespace statsformer::learners
