#include "statsformer/stacking/model.hpp"

#include <cmath>
#include <optional>

#include <fmt/core.h>

#include "statsformer/error.hpp"
#include "statsformer/parallel.hpp"
#include "statsformer/priors/transforms.hpp"
#include "statsformer/random.hpp"
#include "statsformer/version.hpp"

namespace statsformer::stacking {

StatsformerModel refit_and_assemble(const Dataset& d, const FeaturePrior& v, const std::vector<LearnerConfig>& dictionary,
                                    const std::vector<MetaWeights>& meta, const RunConfig& rc) {
    if (meta.empty()) throw UsageError("no meta weights to assemble");
    for (const auto& w : meta) {
        if (w.pi.size() != static_cast<Eigen::Index>(dictionary.size())) {
            throw DataError("meta weight length does not match dictionary");
        }
    }
    StatsformerModel m;
    m.task = d.task();
    m.feature_names = d.feature_names();
    m.class_labels = d.class_labels();
    m.standardizer = fit_standardizer(d.features());
    m.dictionary = dictionary;
    m.weights = meta;
    m.run_config = rc;
    m.provenance.seed = rc.seed;
    m.provenance.prior_fingerprint = v.fingerprint();
    m.provenance.library_version = kVersion;

    for (std::size_t l = 0; l < dictionary.size(); ++l) {
        for (const auto& w : meta) {
            if (w.pi(static_cast<Eigen::Index>(l)) > kRefitThreshold) {
                m.refit_index.push_back(l);
                break;
            }
        }
    }
    const Eigen::MatrixXd x_std = m.standardizer.transform(d.features());
    const auto settings = priors::AdapterSettings::from(rc);
    std::vector<std::optional<learners::FittedLearner>> fitted(m.refit_index.size());
    parallel_for(m.refit_index.size(), rc.workers, [&](std::size_t r) {
        const auto& cfg = dictionary[m.refit_index[r]];
        const auto inputs = priors::adapter_inputs(cfg, v, x_std, settings);
        try {
            fitted[r].emplace(learners::fit_learner(cfg, x_std, d.targets(), d.task(), inputs,
                                                    task_seed(rc.seed, rc.k_folds, cfg)));
        } catch (const Error& e) {
            throw NumericError(fmt::format("refit of weighted configuration {} failed: {}", cfg.label(), e.what()));
        }
    });
    for (auto& f : fitted) m.refit_learners.push_back(std::move(*f));
    return m;
}

Eigen::MatrixXd model_scores(const StatsformerModel& m, const Eigen::MatrixXd& x_std) {
    const int problems = m.problems();
    Eigen::MatrixXd scores(x_std.rows(), problems);
    for (int j = 0; j < problems; ++j) scores.col(j).setConstant(m.weights[static_cast<std::size_t>(j)].intercept);
    for (std::size_t r = 0; r < m.refit_learners.size(); ++r) {
        const Eigen::MatrixXd pred = m.refit_learners[r].predict(x_std);
        const auto l = static_cast<Eigen::Index>(m.refit_index[r]);
        for (int j = 0; j < problems; ++j) {
            const double pi = m.weights[static_cast<std::size_t>(j)].pi(l);
            if (pi != 0.0) scores.col(j) += pi * pred.col(j);
        }
    }
    return scores;
}

ModelPrediction predict_model(const StatsformerModel& m, const Eigen::MatrixXd& x_raw) {
    if (x_raw.cols() != m.standardizer.p()) {
        throw DataError(fmt::format("model expects {} feature columns, got {}", m.standardizer.p(), x_raw.cols()));
    }
    ModelPrediction out;
    out.scores = model_scores(m, m.standardizer.transform(x_raw));
    const Eigen::Index n = x_raw.rows();
    switch (m.task.kind) {
        case TaskKind::regression:
            out.values = out.scores.col(0);
            break;
        case TaskKind::binary:
            out.values.resize(n);
            out.labels.resize(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = out.scores(i, 0);
                out.values(i) = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
                out.labels[static_cast<std::size_t>(i)] = out.values(i) >= 0.5 ? 1 : 0;
            }
            break;
        case TaskKind::multiclass:
            out.labels.resize(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::Index best = 0;
                out.scores.row(i).maxCoeff(&best);
                out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
            }
            break;
    }
    return out;
}

FitResult fit_statsformer(const Dataset& d, const FeaturePrior& v, const RunConfig& rc) {
    rc.validate();
    FitResult result;
    const FoldPlan plan = make_folds(d, rc.k_folds, derive_seed(rc.seed, "folds"));
    result.oof = compute_oof(d, v, enumerate_dictionary(rc), plan, rc);
    result.warnings = result.oof.warnings;
    std::vector<MetaWeights> meta;
    if (d.task().kind == TaskKind::regression) {
        meta.push_back(fit_meta_regression(result.oof.slices.front(), d.targets(), rc.meta_reg_grid, plan));
    } else {
        meta = fit_meta_classification(result.oof.slices, d.targets(), d.task(), rc.meta_reg_grid, plan,
                                       &result.warnings);
    }
    result.model = refit_and_assemble(d, v, result.oof.configs, meta, rc);
    return result;
}

}  // namespace statsformer::stacking
