#include "statsformer/stacking/oof.hpp"

#include <exception>
#include <optional>

#include <fmt/core.h>

#include "statsformer/core/standardizer.hpp"
#include "statsformer/error.hpp"
#include "statsformer/learners/learner.hpp"
#include "statsformer/parallel.hpp"
#include "statsformer/priors/transforms.hpp"
#include "statsformer/random.hpp"

namespace statsformer::stacking {
namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(rows[r]));
    return out;
}

struct FoldData {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    Eigen::MatrixXd x_train;
    Eigen::MatrixXd x_test;
    Eigen::VectorXd y_train;
};

}  // namespace

std::uint64_t task_seed(std::uint64_t root, int fold, const LearnerConfig& config) {
    return derive_seed(root, "base-learner", {static_cast<std::uint64_t>(fold), label_hash(config.label())});
}

OofMatrix compute_oof(const Dataset& d, const FeaturePrior& v, const std::vector<LearnerConfig>& dictionary,
                      const FoldPlan& plan, const RunConfig& rc) {
    const auto n = static_cast<Eigen::Index>(d.n());
    if (static_cast<Eigen::Index>(plan.assignment.size()) != n) throw DataError("fold plan does not match dataset");
    if (v.size() != static_cast<Eigen::Index>(d.p())) throw DataError("prior length does not match feature count");
    if (dictionary.empty()) throw UsageError("empty dictionary");

    const std::optional<Standardizer> global =
        rc.standardize_scope == StandardizeScope::global ? std::optional(fit_standardizer(d.features())) : std::nullopt;
    std::vector<FoldData> folds(static_cast<std::size_t>(plan.k));
    for (int k = 0; k < plan.k; ++k) {
        auto& f = folds[static_cast<std::size_t>(k)];
        f.train = plan.train_indices(k);
        f.test = plan.test_indices(k);
        const Eigen::MatrixXd raw_train = take_rows(d.features(), f.train);
        const Standardizer s = global ? *global : fit_standardizer(raw_train);
        f.x_train = s.transform(raw_train);
        f.x_test = s.transform(take_rows(d.features(), f.test));
        f.y_train = take(d.targets(), f.train);
    }

    const std::size_t L = dictionary.size();
    const int outputs = d.task().output_columns();
    const auto settings = priors::AdapterSettings::from(rc);
    std::vector<Eigen::MatrixXd> full(static_cast<std::size_t>(outputs), Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(L)));
    std::vector<std::string> failure(L * static_cast<std::size_t>(plan.k));

    parallel_for(L * static_cast<std::size_t>(plan.k), rc.workers, [&](std::size_t task) {
        const std::size_t l = task / static_cast<std::size_t>(plan.k);
        const int k = static_cast<int>(task % static_cast<std::size_t>(plan.k));
        const auto& f = folds[static_cast<std::size_t>(k)];
        const auto& cfg = dictionary[l];
        try {
            const auto inputs = priors::adapter_inputs(cfg, v, f.x_train, settings);
            const auto model = learners::fit_learner(cfg, f.x_train, f.y_train, d.task(), inputs,
                                                     task_seed(rc.seed, k, cfg));
            const Eigen::MatrixXd pred = model.predict(f.x_test);
            if (!pred.allFinite()) throw NumericError("non-finite out-of-fold prediction");
            for (int j = 0; j < outputs; ++j) {
                for (std::size_t r = 0; r < f.test.size(); ++r) {
                    full[static_cast<std::size_t>(j)](static_cast<Eigen::Index>(f.test[r]), static_cast<Eigen::Index>(l)) =
                        pred(static_cast<Eigen::Index>(r), j);
                }
            }
        } catch (const std::exception& e) {
            failure[task] = fmt::format("fold {}: {}", k, e.what());
        }
    });

    OofMatrix out;
    out.plan = plan;
    std::vector<Eigen::Index> keep;
    for (std::size_t l = 0; l < L; ++l) {
        std::string reason;
        for (int k = 0; k < plan.k && reason.empty(); ++k) reason = failure[l * static_cast<std::size_t>(plan.k) + static_cast<std::size_t>(k)];
        if (!reason.empty()) {
            out.warnings.push_back(fmt::format("dropped {}: {}", dictionary[l].label(), reason));
            continue;
        }
        keep.push_back(static_cast<Eigen::Index>(l));
        out.configs.push_back(dictionary[l]);
        out.config_index.push_back(l);
    }
    if (keep.empty()) {
        throw NumericError(fmt::format("every configuration failed; first: {}", out.warnings.front()));
    }
    for (int j = 0; j < outputs; ++j) out.slices.push_back(full[static_cast<std::size_t>(j)](Eigen::all, keep));
    return out;
}

}  // namespace statsformer::stacking
