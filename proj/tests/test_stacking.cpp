#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "statsformer/error.hpp"
#include "statsformer/priors/transforms.hpp"
#include "statsformer/stacking/model.hpp"
#include "support.hpp"

using namespace statsformer;
using namespace statsformer::stacking;

namespace {

std::vector<std::string> names(int p) {
    std::vector<std::string> out;
    for (int j = 0; j < p; ++j) out.push_back("x" + std::to_string(j));
    return out;
}

Dataset binary_data(int n, int p, std::uint64_t seed) {
    const Eigen::MatrixXd x = testing::random_matrix(n, p, seed);
    return Dataset(x, testing::linear_labels(x, 2, seed + 1), names(p), Task::binary(), {"neg", "pos"});
}

Dataset regression_data(int n, int p, std::uint64_t seed) {
    const Eigen::MatrixXd x = testing::random_matrix(n, p, seed);
    const Eigen::VectorXd y = x.col(0) - 0.5 * x.col(1) + 0.3 * testing::random_matrix(n, 1, seed + 1).col(0);
    return Dataset(x, y, names(p), Task::regression());
}

LearnerConfig config(LearnerKind kind, double alpha = 0.0, double beta = 0.0) {
    LearnerConfig c;
    c.learner = kind;
    c.adapters = admissible_adapters(kind);
    c.alpha = alpha;
    c.beta = beta;
    c.hyper = default_hyper(kind);
    return c;
}

RunConfig small_run(std::uint64_t seed = 0) {
    RunConfig rc;
    rc.k_folds = 3;
    rc.seed = seed;
    rc.workers = 1;
    return rc;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

TEST_CASE("stratified folds balance classes") {
    Eigen::VectorXd y(10);
    y << 0, 1, 0, 1, 0, 1, 0, 1, 0, 1;
    const FoldPlan plan = make_folds(y, 2, 5, 3);
    for (int k = 0; k < 5; ++k) {
        const auto test = plan.test_indices(k);
        REQUIRE(test.size() == 2);
        CHECK(y(static_cast<Eigen::Index>(test[0])) != y(static_cast<Eigen::Index>(test[1])));
    }
}

TEST_CASE("K = n gives leave-one-out") {
    const FoldPlan plan = make_folds(Eigen::VectorXd::Zero(7), 0, 7, 1);
    for (int k = 0; k < 7; ++k) CHECK(plan.test_indices(k).size() == 1);
}

TEST_CASE("folds partition the rows") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::VectorXd y = testing::linear_labels(testing::random_matrix(37, 2, seed), 1, seed);
        const FoldPlan plan = make_folds(y, 2, 4, seed);
        std::vector<std::size_t> all;
        for (int k = 0; k < 4; ++k) {
            const auto t = plan.test_indices(k);
            all.insert(all.end(), t.begin(), t.end());
            CHECK(plan.train_indices(k).size() + t.size() == 37);
        }
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expected(37);
        std::iota(expected.begin(), expected.end(), 0);
        CHECK(all == expected);
    }
}

TEST_CASE("folds reject classes smaller than K") {
    Eigen::VectorXd y(6);
    y << 0, 0, 0, 0, 1, 1;
    CHECK_THROWS_AS(make_folds(y, 2, 3, 0), DataError);
}

TEST_CASE("OOF column equals independent half-fits") {
    const Dataset d = regression_data(6, 2, 40);
    RunConfig rc = small_run(9);
    rc.k_folds = 2;
    LearnerConfig lasso = config(LearnerKind::lasso);
    lasso.hyper["folds_internal"] = 3;
    const FoldPlan plan = make_folds(d, 2, 5);
    const FeaturePrior v = FeaturePrior::uniform(2);
    const OofMatrix oof = compute_oof(d, v, {lasso}, plan, rc);
    REQUIRE(oof.columns() == 1);
    for (int k = 0; k < 2; ++k) {
        const Dataset train = d.subset(plan.train_indices(k));
        const Dataset test = d.subset(plan.test_indices(k));
        const Standardizer s = fit_standardizer(train.features());
        const Eigen::MatrixXd xt = s.transform(train.features());
        const auto inputs = priors::adapter_inputs(lasso, v, xt, priors::AdapterSettings::from(rc));
        const auto fitted = learners::fit_learner(lasso, xt, train.targets(), d.task(), inputs, task_seed(rc.seed, k, lasso));
        const Eigen::MatrixXd pred = fitted.predict(s.transform(test.features()));
        const auto rows = plan.test_indices(k);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            CHECK(std::abs(oof.slices[0](static_cast<Eigen::Index>(rows[r]), 0) - pred(static_cast<Eigen::Index>(r), 0)) <= 1e-12);
        }
    }
}

TEST_CASE("duplicated configuration yields identical columns") {
    const Dataset d = binary_data(40, 5, 41);
    const RunConfig rc = small_run(2);
    const FoldPlan plan = make_folds(d, 3, 1);
    const LearnerConfig rf = config(LearnerKind::random_forest, 1.0, 0.75);
    const OofMatrix oof = compute_oof(d, FeaturePrior(testing::random_uniform(5, 3, 0.1, 1.0)), {rf, rf}, plan, rc);
    REQUIRE(oof.columns() == 2);
    CHECK(oof.slices[0].col(0) == oof.slices[0].col(1));
}

TEST_CASE("OOF differs from in-sample predictions of a memorizing learner") {
    const Dataset d = binary_data(60, 5, 42);
    const RunConfig rc = small_run(3);
    const FoldPlan plan = make_folds(d, 3, 2);
    const LearnerConfig rf = config(LearnerKind::random_forest);
    const FeaturePrior v = FeaturePrior::uniform(5);
    const OofMatrix oof = compute_oof(d, v, {rf}, plan, rc);
    const Standardizer s = fit_standardizer(d.features());
    const Eigen::MatrixXd x = s.transform(d.features());
    const auto in_sample = learners::fit_learner(rf, x, d.targets(), d.task(), {}, 1).predict(x);
    const double gap = (in_sample.col(0) - oof.slices[0].col(0)).cwiseAbs().mean();
    CHECK(gap > 0.1);
    // In-sample scores separate the training labels better than held-out ones.
    int in_correct = 0, oof_correct = 0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        in_correct += (in_sample(static_cast<Eigen::Index>(i), 0) > 0) == (d.label(i) == 1);
        oof_correct += (oof.slices[0](static_cast<Eigen::Index>(i), 0) > 0) == (d.label(i) == 1);
    }
    CHECK(in_correct > oof_correct);
}

TEST_CASE("no leak: labels inside a fold never reach its predictions") {
    const Dataset d = regression_data(30, 4, 43);
    const RunConfig rc = small_run(4);
    const FoldPlan plan = make_folds(d, 3, 3);
    std::vector<LearnerConfig> dict = {config(LearnerKind::lasso, 1.0), config(LearnerKind::random_forest, 1.0, 0.75),
                                       config(LearnerKind::gbt, 1.0), config(LearnerKind::kernel_svm, 1.0)};
    const FeaturePrior v(testing::random_uniform(4, 5, 0.1, 1.0));
    const OofMatrix base = compute_oof(d, v, dict, plan, rc);
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd y = d.targets();
        for (std::size_t i : plan.test_indices(k)) y(static_cast<Eigen::Index>(i)) += 10.0 * (1.0 + static_cast<double>(i));
        const Dataset perturbed(d.features(), y, d.feature_names(), d.task());
        const OofMatrix again = compute_oof(perturbed, v, dict, plan, rc);
        for (std::size_t i : plan.test_indices(k)) {
            CHECK(again.slices[0].row(static_cast<Eigen::Index>(i)) == base.slices[0].row(static_cast<Eigen::Index>(i)));
        }
    }
}

TEST_CASE("meta regression recovers the exact column") {
    const Eigen::VectorXd y = testing::random_matrix(50, 1, 44).col(0);
    Eigen::VectorXd u = testing::random_matrix(50, 1, 45).col(0);
    Eigen::VectorXd yc = y.array() - y.mean();
    u.array() -= u.mean();
    u -= yc * (u.dot(yc) / yc.squaredNorm());
    Eigen::MatrixXd z(50, 2);
    z.col(0) = y;
    z.col(1) = u;
    const MetaWeights w = solve_meta_regression(z, y, 1e-12);
    CHECK(w.pi(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(w.pi(1)) <= 1e-6);
    CHECK(std::abs(w.intercept) <= 1e-6);
}

TEST_CASE("meta regression with constant target") {
    const Eigen::MatrixXd z = testing::random_matrix(20, 3, 46);
    const MetaWeights w = solve_meta_regression(z, Eigen::VectorXd::Constant(20, 4.0), 0.01);
    CHECK(w.pi.isZero(1e-12));
    CHECK(w.intercept == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("meta regression dominates every vertex and satisfies KKT") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::VectorXd y = testing::random_matrix(40, 1, seed).col(0);
        Eigen::MatrixXd z = testing::random_matrix(40, 6, seed + 100);
        z.col(0) += y;
        z.col(1) -= y;
        const FoldPlan plan = make_folds(Eigen::VectorXd::Zero(40), 0, 5, seed);
        const MetaWeights w = fit_meta_regression(z, y, RunConfig::default_meta_reg_grid(), plan);
        CHECK((w.pi.array() >= 0.0).all());
        const double at = meta_regression_objective(z, y, w.pi, w.intercept, w.reg);
        for (Eigen::Index l = 0; l < 6; ++l) CHECK(at <= meta_regression_vertex_objective(z, y, l, w.reg) + 1e-9);
        const Eigen::VectorXd g = meta_regression_gradient(z, y, w.pi, w.intercept, w.reg);
        for (Eigen::Index l = 0; l < 6; ++l) {
            if (w.pi(l) > 0.0) CHECK(std::abs(g(l)) <= 1e-8);
            else CHECK(g(l) >= -1e-8);
        }
    }
}

TEST_CASE("meta logistic with a predictive column and heavy regularization") {
    const Eigen::VectorXd t = testing::linear_labels(testing::random_matrix(60, 1, 47), 1, 48, 1e-9);
    Eigen::MatrixXd z(60, 1);
    z.col(0) = 4.0 * (2.0 * t.array() - 1.0);
    const MetaWeights w = solve_meta_logistic(z, t, 10.0);
    CHECK(w.pi(0) >= 0.0);
    CHECK(w.pi(0) < 0.5);
    const double prevalence = t.mean();
    const double null_intercept = std::log(prevalence / (1.0 - prevalence));
    CHECK(meta_logistic_objective(z, t, w.pi, w.intercept, 10.0) <=
          meta_logistic_objective(z, t, Eigen::VectorXd::Zero(1), null_intercept, 10.0) + 1e-12);
}

TEST_CASE("meta logistic on zero scores returns the prevalence logit") {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(40);
    t.head(13).setOnes();
    const MetaWeights w = solve_meta_logistic(Eigen::MatrixXd::Zero(40, 3), t, 0.1);
    CHECK(w.pi.isZero(1e-12));
    CHECK(w.intercept == doctest::Approx(std::log(13.0 / 27.0)).epsilon(1e-6));
}

TEST_CASE("meta logistic projected gradient vanishes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::MatrixXd x = testing::random_matrix(50, 2, seed);
        const Eigen::VectorXd t = testing::linear_labels(x, 1, seed + 1);
        Eigen::MatrixXd z = testing::random_matrix(50, 5, seed + 2);
        z.col(0) += 3.0 * (2.0 * t.array() - 1.0).matrix();
        z.col(1) -= 2.0 * (2.0 * t.array() - 1.0).matrix();
        for (double reg : {1e-4, 1e-2, 1.0}) {
            const MetaWeights w = solve_meta_logistic(z, t, reg);
            const Eigen::VectorXd g = meta_logistic_gradient(z, t, w.pi, w.intercept, reg);
            CHECK(projected_gradient_norm(g, w.pi) <= 1e-6);
            for (Eigen::Index l = 0; l < 5; ++l)
                if (w.pi(l) == 0.0) CHECK(g(l + 1) >= -1e-6);
            const double at = meta_logistic_objective(z, t, w.pi, w.intercept, reg);
            for (Eigen::Index l = 0; l < 5; ++l) CHECK(at <= meta_logistic_vertex_objective(z, t, l, reg) + 1e-6);
        }
    }
}

TEST_CASE("meta weights are permutation equivariant") {
    const Eigen::VectorXd y = testing::random_matrix(60, 1, 49).col(0);
    Eigen::MatrixXd z = testing::random_matrix(60, 5, 50);
    z.col(2) += y;
    z.col(4) += 0.5 * y;
    const int perm[] = {3, 0, 4, 1, 2};
    Eigen::MatrixXd zp(60, 5);
    for (int l = 0; l < 5; ++l) zp.col(l) = z.col(perm[l]);
    const MetaWeights a = solve_meta_regression(z, y, 0.01);
    const MetaWeights b = solve_meta_regression(zp, y, 0.01);
    for (int l = 0; l < 5; ++l) CHECK(std::abs(b.pi(l) - a.pi(perm[l])) <= 1e-10);
}

TEST_CASE("refit keeps only weighted configurations") {
    const Dataset d = binary_data(40, 4, 51);
    const RunConfig rc = small_run(5);
    const std::vector<LearnerConfig> dict = {config(LearnerKind::lasso), config(LearnerKind::gbt),
                                             config(LearnerKind::kernel_svm)};
    MetaWeights w;
    w.pi = Eigen::VectorXd::Zero(3);
    w.pi(1) = 0.8;
    w.intercept = -0.2;
    const FeaturePrior v = FeaturePrior::uniform(4);
    const StatsformerModel m = refit_and_assemble(d, v, dict, {w}, rc);
    REQUIRE(m.refit_learners.size() == 1);
    CHECK(m.refit_index[0] == 1);

    const Eigen::MatrixXd x = m.standardizer.transform(d.features());
    const auto gbt = learners::fit_learner(dict[1], x, d.targets(), d.task(), {}, task_seed(rc.seed, rc.k_folds, dict[1]));
    const Eigen::VectorXd expected = (0.8 * gbt.predict(x).col(0)).array() - 0.2;
    CHECK((model_scores(m, x).col(0) - expected).cwiseAbs().maxCoeff() <= 1e-12);

    w.pi.setZero();
    const StatsformerModel flat = refit_and_assemble(d, v, dict, {w}, rc);
    CHECK(flat.refit_learners.empty());
    const ModelPrediction p = predict_model(flat, d.features());
    CHECK((p.scores.array() == -0.2).all());
}

TEST_CASE("binary prediction maps score zero to one half") {
    const Dataset d = binary_data(30, 3, 52);
    MetaWeights w;
    w.pi = Eigen::VectorXd::Zero(1);
    const StatsformerModel m = refit_and_assemble(d, FeaturePrior::uniform(3), {config(LearnerKind::lasso)}, {w}, small_run());
    const ModelPrediction p = predict_model(m, d.features());
    CHECK((p.values.array() == 0.5).all());
    CHECK(p.labels[0] == 1);
}

TEST_CASE("multiclass prediction is the argmax of class scores") {
    const Eigen::MatrixXd x = testing::random_matrix(45, 3, 53);
    Eigen::VectorXd y(45);
    for (int i = 0; i < 45; ++i) y(i) = i % 3;
    const Dataset d(x, y, names(3), Task::multiclass(3), {"a", "b", "c"});
    std::vector<MetaWeights> meta(3);
    for (int j = 0; j < 3; ++j) {
        meta[static_cast<std::size_t>(j)].pi = Eigen::VectorXd::Zero(1);
        meta[static_cast<std::size_t>(j)].intercept = j == 1 ? 5.0 : 0.0;
    }
    const StatsformerModel dominant = refit_and_assemble(d, FeaturePrior::uniform(3), {config(LearnerKind::lasso)}, meta, small_run());
    for (int label : predict_model(dominant, x).labels) CHECK(label == 1);

    RunConfig rc = small_run(6);
    rc.learners = {LearnerKind::lasso, LearnerKind::random_forest};
    const FitResult fit = fit_statsformer(d, FeaturePrior::uniform(3), rc);
    const ModelPrediction p = predict_model(fit.model, x);
    const Eigen::MatrixXd scores = model_scores(fit.model, fit.model.standardizer.transform(x));
    for (Eigen::Index i = 0; i < 45; ++i) {
        int best = 0;
        for (int j = 1; j < 3; ++j)
            if (scores(i, j) > scores(i, best)) best = j;
        CHECK(p.labels[static_cast<std::size_t>(i)] == best);
    }
}

TEST_CASE("full pipeline is deterministic") {
    const Dataset d = binary_data(50, 6, 54);
    RunConfig rc = small_run(7);
    const FeaturePrior v(testing::random_uniform(6, 8, 0.1, 1.0));
    const FitResult a = fit_statsformer(d, v, rc);
    rc.workers = 3;
    const FitResult b = fit_statsformer(d, v, rc);
    CHECK(a.oof.slices[0] == b.oof.slices[0]);
    CHECK(a.model.weights[0].pi == b.model.weights[0].pi);
    CHECK(predict_model(a.model, d.features()).values == predict_model(b.model, d.features()).values);
    CHECK(a.model.dictionary.size() == 18);
}

TEST_CASE("regression pipeline predicts reasonably") {
    const Dataset d = regression_data(80, 5, 55);
    const FitResult fit = fit_statsformer(d, FeaturePrior::uniform(5), small_run(8));
    const ModelPrediction p = predict_model(fit.model, d.features());
    const double mse = (p.values - d.targets()).squaredNorm() / 80.0;
    const double var = (d.targets().array() - d.targets().mean()).square().mean();
    CHECK(mse < 0.5 * var);
    const double at = meta_regression_objective(fit.oof.slices[0], d.targets(), fit.model.weights[0].pi,
                                                fit.model.weights[0].intercept, fit.model.weights[0].reg);
    for (Eigen::Index l = 0; l < fit.oof.columns(); ++l) {
        CHECK(at <= meta_regression_vertex_objective(fit.oof.slices[0], d.targets(), l, fit.model.weights[0].reg) + 1e-9);
    }
}
