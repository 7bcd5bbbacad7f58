#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "statsformer/error.hpp"
#include "statsformer/learners/learner.hpp"
#include "support.hpp"

using namespace statsformer;
using namespace statsformer::learners;

namespace {

double soft(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

/// Plain cyclic coordinate descent on (1/2n)||y - b0 - Xb||^2 + lambda sum w_j |b_j|.
LassoSolution naive_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda) {
    const auto n = static_cast<double>(x.rows());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
    double b0 = 0.0;
    for (int sweep = 0; sweep < 200000; ++sweep) {
        double change = 0.0;
        const double nb0 = (y - x * b).mean();
        change = std::max(change, std::abs(nb0 - b0));
        b0 = nb0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const Eigen::VectorXd r = y - Eigen::VectorXd::Constant(x.rows(), b0) - x * b + x.col(j) * b(j);
            const double z = x.col(j).dot(r) / n;
            const double a = x.col(j).squaredNorm() / n;
            const double nb = soft(z, lambda * w(j)) / a;
            change = std::max(change, std::abs(nb - b(j)));
            b(j) = nb;
        }
        if (change < 1e-14) break;
    }
    LassoSolution s;
    s.coefficients = b;
    s.intercept = b0;
    s.lambda = lambda;
    return s;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Largest KKT violation computed from first principles.
double kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, const LassoSolution& s,
                     bool logistic) {
    const auto n = static_cast<double>(x.rows());
    Eigen::VectorXd eta = (x * s.coefficients).array() + s.intercept;
    Eigen::VectorXd resid(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) resid(i) = (logistic ? sigmoid(eta(i)) : eta(i)) - y(i);
    double worst = std::abs(resid.sum() / n);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double g = x.col(j).dot(resid) / n;
        const double bound = s.lambda * w(j);
        const double b = s.coefficients(j);
        worst = std::max(worst, b == 0.0 ? std::max(0.0, std::abs(g) - bound) : std::abs(g + bound * (b > 0 ? 1.0 : -1.0)));
    }
    return worst;
}

/// Projected gradient on {0 <= a <= C, y'a = 0}; projection by bisection on the multiplier.
Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& z, const Eigen::VectorXd& y, double C) {
    double lo = -1e6, hi = 1e6;
    auto at = [&](double mu) { return (z - mu * y).cwiseMax(0.0).cwiseMin(C); };
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        (y.dot(at(mid)) > 0.0 ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
}

double dual_objective(const Eigen::MatrixXd& q, const Eigen::VectorXd& a) { return 0.5 * a.dot(q * a) - a.sum(); }

LearnerConfig null_config(LearnerKind kind) {
    LearnerConfig c;
    c.learner = kind;
    c.adapters = admissible_adapters(kind);
    c.hyper = default_hyper(kind);
    return c;
}

}  // namespace

TEST_CASE("lasso above lambda_max is intercept only") {
    const Eigen::MatrixXd x = testing::random_matrix(30, 5, 1);
    const Eigen::VectorXd y = testing::random_matrix(30, 1, 2).col(0).array() + 3.0;
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(5);
    const double lmax = lambda_max(x, y, w, GlmLoss::gaussian);
    const LassoSolution s = solve_lasso(x, y, w, lmax * 1.0001, GlmLoss::gaussian);
    CHECK(s.coefficients.isZero(0.0));
    CHECK(s.intercept == doctest::Approx(y.mean()).epsilon(1e-12));
}

TEST_CASE("lasso one orthonormal feature is soft thresholding") {
    Eigen::MatrixXd x = testing::random_matrix(40, 1, 3);
    x.col(0).array() -= x.col(0).mean();
    x.col(0) /= std::sqrt(x.col(0).squaredNorm() / 40.0);
    const Eigen::VectorXd y = 1.7 * x.col(0) + testing::random_matrix(40, 1, 4).col(0);
    for (double w : {1.0, 2.5}) {
        for (double lambda : {0.05, 0.3, 1.0}) {
            const LassoSolution s = solve_lasso(x, y, Eigen::VectorXd::Constant(1, w), lambda, GlmLoss::gaussian);
            const double z = x.col(0).dot(y) / 40.0;
            CHECK(s.coefficients(0) == doctest::Approx(soft(z, lambda * w)).epsilon(1e-9));
        }
    }
}

TEST_CASE("lasso matches naive coordinate descent") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::MatrixXd x = testing::random_matrix(5, 3, seed);
        const Eigen::VectorXd y = testing::random_matrix(5, 1, seed + 1000).col(0);
        const Eigen::VectorXd w = Eigen::VectorXd::Ones(3);
        const double lambda = 0.1 * lambda_max(x, y, w, GlmLoss::gaussian);
        const LassoSolution got = solve_lasso(x, y, w, lambda, GlmLoss::gaussian);
        const LassoSolution oracle = naive_lasso(x, y, w, lambda);
        CHECK((got.coefficients - oracle.coefficients).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(std::abs(got.intercept - oracle.intercept) <= 1e-6);
    }
}

TEST_CASE("lasso KKT holds for weighted gaussian and logistic losses") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::MatrixXd x = testing::random_matrix(40, 8, seed);
        const Eigen::VectorXd w = testing::random_uniform(8, seed + 50, 0.2, 3.0);
        const Eigen::VectorXd yr = x.col(0) - 0.5 * x.col(1) + testing::random_matrix(40, 1, seed + 7).col(0);
        const Eigen::VectorXd yb = testing::linear_labels(x, 2, seed + 9);
        for (double frac : {0.5, 0.1, 0.02}) {
            const LassoSolution g = solve_lasso(x, yr, w, frac * lambda_max(x, yr, w, GlmLoss::gaussian), GlmLoss::gaussian);
            CHECK(kkt_violation(x, yr, w, g, false) <= 1e-6);
            CHECK(lasso_kkt_residual(x, yr, w, g, GlmLoss::gaussian) <= 1e-6);
            const LassoSolution l = solve_lasso(x, yb, w, frac * lambda_max(x, yb, w, GlmLoss::logistic), GlmLoss::logistic);
            CHECK(kkt_violation(x, yb, w, l, true) <= 1e-6);
        }
    }
}

TEST_CASE("lasso penalty factors steer selection") {
    const Eigen::MatrixXd x = testing::random_matrix(60, 4, 21);
    const Eigen::VectorXd y = x.col(0) + x.col(1) + 0.1 * testing::random_matrix(60, 1, 22).col(0);
    Eigen::VectorXd w(4);
    w << 1, 50, 1, 1;
    const LassoSolution s = solve_lasso(x, y, w, 0.05, GlmLoss::gaussian);
    CHECK(s.coefficients(1) == 0.0);
    CHECK(s.coefficients(0) != 0.0);
}

TEST_CASE("forest null path is identical to the unadorned forest") {
    const Eigen::MatrixXd x = testing::random_matrix(60, 6, 5);
    const Eigen::VectorXd y = testing::linear_labels(x, 2, 6);
    const LearnerConfig cfg = null_config(LearnerKind::random_forest);
    const auto inputs = priors::adapter_inputs(cfg, FeaturePrior(testing::random_uniform(6, 7, 0.1, 1.0)), x, {});
    const FittedLearner wired = fit_learner(cfg, x, y, Task::binary(), inputs, 99);
    const ForestState plain = fit_random_forest(x, y, {}, {}, Task::binary(), forest_options(cfg, 99));
    const auto& state = std::get<ForestState>(wired.state());
    REQUIRE(state.trees.size() == plain.trees.size());
    for (std::size_t t = 0; t < plain.trees.size(); ++t) {
        CHECK(state.trees[t].values == plain.trees[t].values);
        REQUIRE(state.trees[t].nodes.size() == plain.trees[t].nodes.size());
        for (std::size_t k = 0; k < plain.trees[t].nodes.size(); ++k) {
            CHECK(state.trees[t].nodes[k].feature == plain.trees[t].nodes[k].feature);
            CHECK(state.trees[t].nodes[k].threshold == plain.trees[t].nodes[k].threshold);
        }
    }
    const ForestState explicit_uniform = fit_random_forest(x, y, Eigen::VectorXd::Ones(60),
                                                           Eigen::VectorXd::Constant(6, 1.0 / 6.0), Task::binary(),
                                                           forest_options(cfg, 99));
    CHECK(explicit_uniform.predict(x) == plain.predict(x));
}

TEST_CASE("forest separable data and determinism") {
    Eigen::MatrixXd x(20, 1);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
        y(i) = i < 10 ? 0.0 : 1.0;
    }
    ForestOptions o;
    o.seed = 4;
    const ForestState f = fit_random_forest(x, y, {}, {}, Task::binary(), o);
    const Eigen::MatrixXd s = f.predict(x);
    for (int i = 0; i < 20; ++i) CHECK((s(i, 0) > 0.0) == (y(i) == 1.0));
    CHECK(fit_random_forest(x, y, {}, {}, Task::binary(), o).predict(x) == s);
}

TEST_CASE("smoothed leaf probabilities") {
    const Eigen::VectorXd logit = smoothed_class_logits({3.0, 0.0}, 1.0);
    REQUIRE(logit.size() == 1);
    CHECK(sigmoid(logit(0)) == doctest::Approx(1.0 / 5.0).epsilon(1e-14));
    const Eigen::VectorXd multi = smoothed_class_logits({3.0, 0.0, 1.0}, 1.0);
    CHECK(std::exp(multi(0)) == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
    CHECK(std::exp(multi(1)) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("forest prediction is the mean over trees") {
    const Eigen::MatrixXd x = testing::random_matrix(50, 4, 8);
    const Eigen::VectorXd y = x.col(0) + 0.3 * testing::random_matrix(50, 1, 9).col(0);
    ForestOptions o;
    o.n_trees = 12;
    o.seed = 3;
    const ForestState f = fit_random_forest(x, y, {}, {}, Task::regression(), o);
    const Eigen::MatrixXd probe = testing::random_matrix(10, 4, 10);
    const Eigen::MatrixXd got = f.predict(probe);
    for (Eigen::Index i = 0; i < probe.rows(); ++i) {
        double sum = 0.0;
        for (const auto& tree : f.trees) {
            int node = 0;
            while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
                const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
                node = probe(i, nd.feature) < nd.threshold ? nd.left : nd.right;
            }
            sum += tree.values[static_cast<std::size_t>(node)];
        }
        CHECK(got(i, 0) == doctest::Approx(sum / 12.0).epsilon(1e-14));
    }
}

TEST_CASE("gbt constant target predicts the mean") {
    const Eigen::MatrixXd x = testing::random_matrix(25, 3, 12);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(25, 2.5);
    const GbtState g = fit_gbt(x, y, {}, Task::regression(), {});
    const Eigen::MatrixXd pred = g.predict(testing::random_matrix(5, 3, 13));
    CHECK((pred.array() == 2.5).all());
}

TEST_CASE("gbt null path is identical to the unadorned booster") {
    const Eigen::MatrixXd x = testing::random_matrix(50, 40, 14);
    const Eigen::VectorXd y = testing::linear_labels(x, 3, 15);
    const LearnerConfig cfg = null_config(LearnerKind::gbt);
    const auto inputs = priors::adapter_inputs(cfg, FeaturePrior(testing::random_uniform(40, 16, 0.1, 1.0)), x, {});
    const FittedLearner wired = fit_learner(cfg, x, y, Task::binary(), inputs, 5);
    const GbtState plain = fit_gbt(x, y, {}, Task::binary(), gbt_options(cfg, 5));
    CHECK(wired.predict(x) == plain.predict(x));
    const GbtState uniform = fit_gbt(x, y, Eigen::VectorXd::Constant(40, 1.0 / 40.0), Task::binary(), gbt_options(cfg, 5));
    CHECK(uniform.predict(x) == plain.predict(x));
}

TEST_CASE("gbt stump matches exhaustive gain enumeration") {
    Eigen::MatrixXd x(6, 2);
    x << 1, 5, 2, 3, 3, 6, 4, 1, 5, 2, 6, 4;
    Eigen::VectorXd y(6);
    y << 1.0, 1.5, 0.2, 4.0, 3.5, 5.0;
    GbtOptions o;
    o.n_rounds = 1;
    o.max_depth = 1;
    o.learning_rate = 0.3;
    o.reg_lambda = 1.0;
    o.colsample_bynode = 1.0;
    const GbtState g = fit_gbt(x, y, {}, Task::regression(), o);

    const double base = y.mean();
    const Eigen::VectorXd grad = Eigen::VectorXd::Constant(6, base) - y;
    const double G = grad.sum(), H = 6.0;
    double best = -1.0;
    int best_f = -1;
    double best_t = 0.0;
    for (int f = 0; f < 2; ++f) {
        for (int r = 0; r < 6; ++r) {
            const double t = x(r, f) + 0.5;
            double gl = 0.0, hl = 0.0;
            for (int i = 0; i < 6; ++i)
                if (x(i, f) < t) {
                    gl += grad(i);
                    hl += 1.0;
                }
            if (hl < 1.0 || H - hl < 1.0) continue;
            const double gain = gl * gl / (hl + 1.0) + (G - gl) * (G - gl) / (H - hl + 1.0) - G * G / (H + 1.0);
            if (gain > best) {
                best = gain;
                best_f = f;
                best_t = t;
            }
        }
    }
    const Eigen::MatrixXd pred = g.predict(x);
    double gl = 0.0, hl = 0.0;
    for (int i = 0; i < 6; ++i)
        if (x(i, best_f) < best_t) {
            gl += grad(i);
            hl += 1.0;
        }
    const double left = -gl / (hl + 1.0) * 0.3;
    const double right = -(G - gl) / (H - hl + 1.0) * 0.3;
    REQUIRE(g.trees.size() == 1);
    CHECK(g.trees[0].nodes[0].feature == best_f);
    for (int i = 0; i < 6; ++i) {
        CHECK(pred(i, 0) == doctest::Approx(base + (x(i, best_f) < best_t ? left : right)).epsilon(1e-14));
    }
}

TEST_CASE("gbt training loss is non-increasing") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::MatrixXd x = testing::random_matrix(60, 10, seed);
        GbtOptions o;
        o.n_rounds = 30;
        o.seed = seed;
        const GbtState bin = fit_gbt(x, testing::linear_labels(x, 2, seed + 1), {}, Task::binary(), o);
        const Eigen::VectorXd yr = x.col(0) + testing::random_matrix(60, 1, seed + 2).col(0);
        const GbtState reg = fit_gbt(x, yr, {}, Task::regression(), o);
        for (const auto* s : {&bin, &reg}) {
            for (std::size_t r = 1; r < s->train_loss.size(); ++r) CHECK(s->train_loss[r] <= s->train_loss[r - 1] + 1e-12);
        }
    }
}

TEST_CASE("svm unit scales equal the plain machine") {
    const Eigen::MatrixXd x = testing::random_matrix(40, 3, 17);
    const Eigen::VectorXd y = testing::linear_labels(x, 1, 18);
    const KernelSvmState plain = fit_kernel_svm(x, y, {}, Task::binary(), {});
    const KernelSvmState ones = fit_kernel_svm(x, y, Eigen::VectorXd::Ones(3), Task::binary(), {});
    CHECK((plain.predict(x) - ones.predict(x)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("svm two separable points") {
    Eigen::MatrixXd x(2, 1);
    x << -1, 1;
    Eigen::VectorXd y(2);
    y << 0, 1;
    const KernelSvmState s = fit_kernel_svm(x, y, {}, Task::binary(), {});
    const Eigen::MatrixXd d = s.predict(x);
    CHECK(d(0, 0) < 0.0);
    CHECK(d(1, 0) > 0.0);
}

TEST_CASE("svm dual on eight points is feasible and optimal") {
    const Eigen::MatrixXd x = testing::random_matrix(8, 2, 19);
    Eigen::VectorXd signs(8);
    signs << 1, -1, 1, -1, 1, 1, -1, -1;
    const double C = 1.0;
    const Eigen::MatrixXd k = rbf_kernel(x, x, 0.5);
    const SvmDual dual = solve_svc_dual(k, signs, C, 1e-10);
    CHECK((dual.alpha.array() >= -1e-8).all());
    CHECK((dual.alpha.array() <= C + 1e-8).all());
    CHECK(std::abs(dual.alpha.dot(signs)) <= 1e-8);

    const Eigen::MatrixXd q = signs.asDiagonal() * k * signs.asDiagonal();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(8);
    const double step = 1.0 / q.operatorNorm();
    for (int it = 0; it < 20000; ++it) a = project_box_hyperplane(a - step * (q * a - Eigen::VectorXd::Ones(8)), signs, C);
    CHECK(dual_objective(q, dual.alpha) <= dual_objective(q, a) + 1e-8);
    CHECK(dual_objective(q, dual.alpha) == doctest::Approx(dual_objective(q, a)).epsilon(1e-6));
}

TEST_CASE("svr dual is feasible") {
    const Eigen::MatrixXd x = testing::random_matrix(20, 2, 23);
    const Eigen::VectorXd y = x.col(0).array().sin();
    const SvmDual dual = solve_svr_dual(rbf_kernel(x, x, 0.5), y, 2.0, 0.1, 1e-8);
    const Eigen::VectorXd a = dual.alpha.head(20), b = dual.alpha.tail(20);
    CHECK((dual.alpha.array() >= -1e-8).all());
    CHECK((dual.alpha.array() <= 2.0 + 1e-8).all());
    CHECK(std::abs(a.sum() - b.sum()) <= 1e-8);
}

TEST_CASE("svm scale on the signal feature changes decisions") {
    const Eigen::MatrixXd x = testing::random_matrix(50, 3, 24);
    const Eigen::VectorXd y = testing::linear_labels(x, 1, 25, 0.2);
    const KernelSvmState base = fit_kernel_svm(x, y, Eigen::VectorXd::Ones(3), Task::binary(), {});
    Eigen::VectorXd scales = Eigen::VectorXd::Ones(3);
    scales(0) = 10.0;
    const KernelSvmState scaled = fit_kernel_svm(x, y, scales, Task::binary(), {});
    CHECK((base.predict(x) - scaled.predict(x)).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("predict contracts") {
    const Eigen::MatrixXd x = testing::random_matrix(30, 3, 26);
    const Eigen::VectorXd y = testing::linear_labels(x, 1, 27);
    for (LearnerKind kind : {LearnerKind::lasso, LearnerKind::random_forest, LearnerKind::gbt, LearnerKind::kernel_svm}) {
        const LearnerConfig cfg = null_config(kind);
        const FittedLearner f = fit_learner(cfg, x, y, Task::binary(), {}, 1);
        const Eigen::MatrixXd empty = f.predict(Eigen::MatrixXd(0, 3));
        CHECK(empty.rows() == 0);
        CHECK_THROWS_AS(f.predict(Eigen::MatrixXd::Zero(2, 4)), DataError);
        CHECK(f.predict(x).allFinite());
    }
    LassoState zero;
    zero.coefficients = Eigen::MatrixXd::Zero(3, 1);
    zero.intercepts = Eigen::VectorXd::Constant(1, 0.7);
    const Eigen::MatrixXd z = zero.predict(x);
    CHECK((z.array() == 0.7).all());
}

TEST_CASE("multiclass learners emit one column per class") {
    const Eigen::MatrixXd x = testing::random_matrix(60, 4, 28);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) y(i) = x(i, 0) < -0.4 ? 0 : (x(i, 0) < 0.4 ? 1 : 2);
    for (LearnerKind kind : {LearnerKind::lasso, LearnerKind::random_forest, LearnerKind::gbt, LearnerKind::kernel_svm}) {
        const FittedLearner f = fit_learner(null_config(kind), x, y, Task::multiclass(3), {}, 2);
        const Eigen::MatrixXd s = f.predict(x);
        CHECK(s.cols() == 3);
        int correct = 0;
        for (int i = 0; i < 60; ++i) {
            Eigen::Index arg;
            s.row(i).maxCoeff(&arg);
            correct += arg == static_cast<Eigen::Index>(y(i));
        }
        CHECK(correct >= 40);
    }
}
