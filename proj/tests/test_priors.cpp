#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "statsformer/error.hpp"
#include "statsformer/priors/transforms.hpp"
#include "support.hpp"

using namespace statsformer;
using namespace statsformer::priors;

namespace {

FeaturePrior prior(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index j = 0;
    for (double x : values) v(j++) = x;
    return FeaturePrior(v);
}

TransformParams params(double alpha, double epsilon) {
    TransformParams t;
    t.alpha = alpha;
    t.epsilon = epsilon;
    return t;
}

/// Tilted mean of s at eta, evaluated in long double.
long double tilted_mean(const Eigen::VectorXd& s, long double eta) {
    long double num = 0.0L, den = 0.0L;
    const long double shift = eta * s.maxCoeff();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const long double w = std::exp(eta * s(i) - (eta > 0 ? shift : eta * s.minCoeff()));
        num += w * s(i);
        den += w;
    }
    return num / den;
}

}  // namespace

TEST_CASE("null condition is exact for every transform") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const FeaturePrior v(testing::random_uniform(7, seed, 0.0, 5.0));
        CHECK((penalty_weights(v, params(0.0, 1e-8)).array() == 1.0).all());
        CHECK((feature_scales(v, params(0.0, 1e-8)).array() == 1.0).all());
        CHECK((feature_sampling_probs(v, params(0.0, 1e-8)).array() == 1.0 / 7.0).all());
        const Eigen::VectorXd s = testing::random_uniform(9, seed + 100, 0.0, 3.0);
        CHECK((instance_weights_blend(s, 0.0, 1e-8).array() == 1.0).all());
        const TiltSolution tilt = instance_weights_tilt(s, 0.0, 0.25);
        CHECK(tilt.eta == 0.0);
        CHECK((tilt.weights.array() == 1.0).all());
    }
}

TEST_CASE("penalty weights") {
    CHECK((penalty_weights(prior({3.0, 0.2}), params(0.0, 1e-8)).array() == 1.0).all());
    const Eigen::VectorXd w = penalty_weights(prior({1.0, 0.25}), params(1.0, 0.0));
    CHECK(w(0) == 1.0);
    CHECK(w(1) == 4.0);

    const double v[] = {0.1, 0.5, 1.0};
    const Eigen::VectorXd w2 = penalty_weights(prior({0.1, 0.5, 1.0}), params(2.0, 0.01));
    for (int j = 0; j < 3; ++j) {
        const long double base = static_cast<long double>(v[j]) + 0.01L;
        const long double expected = 1.0L / (base * base);
        CHECK(std::abs(w2(j) - static_cast<double>(expected)) <= 1e-12 * static_cast<double>(expected));
    }
    CHECK(w2(0) == doctest::Approx(82.6446281).epsilon(1e-8));
    CHECK(w2(1) == doctest::Approx(3.84468).epsilon(1e-5));
    CHECK(w2(2) == doctest::Approx(0.980296).epsilon(1e-6));
}

TEST_CASE("feature scales") {
    const Eigen::VectorXd s = feature_scales(prior({4.0, 1.0}), params(0.5, 0.0));
    CHECK(s(0) == 2.0);
    CHECK(s(1) == 1.0);
    const Eigen::VectorXd c = feature_scales(prior({0.0, 1.0}), params(1.0, 1e-8));
    CHECK(c(0) == 1e-3);
    CHECK(c(1) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("feature sampling probabilities") {
    const Eigen::VectorXd u = feature_sampling_probs(prior({0.3, 2.0, 9.0, 0.0}), params(0.0, 1e-8));
    CHECK((u.array() == 0.25).all());
    const Eigen::VectorXd q = feature_sampling_probs(prior({1.0, 3.0}), params(1.0, 0.0));
    CHECK(q(0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(q(1) == doctest::Approx(0.75).epsilon(1e-15));

    const double raw[] = {0.11 * 0.11, 0.51 * 0.51, 1.01 * 1.01};
    const double total = raw[0] + raw[1] + raw[2];
    const Eigen::VectorXd r = feature_sampling_probs(prior({0.1, 0.5, 1.0}), params(2.0, 0.01));
    for (int j = 0; j < 3; ++j) CHECK(r(j) == doctest::Approx(raw[j] / total).epsilon(1e-12));
    CHECK(r(0) == doctest::Approx(0.00936).epsilon(1e-3));
    CHECK(r(1) == doctest::Approx(0.20122).epsilon(1e-4));
    CHECK(r(2) == doctest::Approx(0.78941).epsilon(1e-4));
}

TEST_CASE("sampling probabilities sum to one and are permutation equivariant") {
    std::mt19937_64 rng(5);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Eigen::VectorXd v = testing::random_uniform(12, seed, 0.0, 2.0);
        const Eigen::VectorXd probs = feature_sampling_probs(FeaturePrior(v), params(1.5, 1e-8));
        CHECK(std::abs(probs.sum() - 1.0) <= 1e-12);
        std::vector<int> perm(12);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::VectorXd pv(12);
        for (int j = 0; j < 12; ++j) pv(j) = v(perm[j]);
        const Eigen::VectorXd pp = feature_sampling_probs(FeaturePrior(pv), params(1.5, 1e-8));
        for (int j = 0; j < 12; ++j) CHECK(std::abs(pp(j) - probs(perm[j])) <= 1e-15);
    }
}

TEST_CASE("monotonicity over random pairs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0), a(0.1, 3.0);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd va(6), vb(6);
        for (int j = 0; j < 6; ++j) {
            va(j) = u(rng);
            vb(j) = va(j) + u(rng);
        }
        const TransformParams t = params(a(rng), 1e-8);
        const Eigen::VectorXd wa = penalty_weights(FeaturePrior(va), t), wb = penalty_weights(FeaturePrior(vb), t);
        const Eigen::VectorXd sa = feature_scales(FeaturePrior(va), t), sb = feature_scales(FeaturePrior(vb), t);
        CHECK((wa.array() >= wb.array()).all());
        CHECK((sa.array() <= sb.array()).all());
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("raw activation") {
    CHECK(raw_activation(testing::random_matrix(5, 3, 1), FeaturePrior(Eigen::VectorXd::Zero(3)), 1).isZero(0.0));
    Eigen::MatrixXd x(2, 2);
    x << 1, -1, 2, 0;
    const Eigen::VectorXd s = raw_activation(x, prior({1.0, 2.0}), 1);
    CHECK(s(0) == 3.0);
    CHECK(s(1) == 2.0);

    const Eigen::MatrixXd r = testing::random_matrix(10, 3, 7);
    const Eigen::VectorXd v = testing::random_uniform(3, 8);
    const Eigen::VectorXd got = raw_activation(r, FeaturePrior(v), 2);
    for (int i = 0; i < 10; ++i) {
        double expected = 0.0;
        for (int j = 0; j < 3; ++j) expected += v(j) * r(i, j) * r(i, j);
        CHECK(std::abs(got(i) - expected) <= 1e-12);
    }
}

TEST_CASE("affine blend weights") {
    Eigen::VectorXd s(3);
    s << 2, 4, 6;
    const Eigen::VectorXd full = instance_weights_blend(s, 1.0, 1e-12);
    CHECK(full(0) == doctest::Approx(0.0));
    CHECK(full(1) == doctest::Approx(0.5));
    CHECK(full(2) == doctest::Approx(1.0));
    const Eigen::VectorXd half = instance_weights_blend(s, 0.5, 1e-12);
    CHECK(half(0) == doctest::Approx(0.5));
    CHECK(half(1) == doctest::Approx(0.75));
    CHECK(half(2) == doctest::Approx(1.0));
}

TEST_CASE("exact tilt two-point example") {
    Eigen::VectorXd s(2);
    s << 0, 1;
    // Bisection oracle on the logistic moment equation.
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (std::exp(mid) / (1.0 + std::exp(mid)) < 0.7 ? lo : hi) = mid;
    }
    const TiltSolution t = solve_tilt(s, 0.7);
    CHECK(t.eta == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));
    CHECK(t.eta == doctest::Approx(std::log(7.0 / 3.0)).epsilon(1e-10));
    CHECK(t.weights(0) == doctest::Approx(0.6).epsilon(1e-10));
    CHECK(t.weights(1) == doctest::Approx(1.4).epsilon(1e-10));
    CHECK(std::abs(static_cast<double>(tilted_mean(s, t.eta)) - 0.7) <= 1e-10);
}

TEST_CASE("tilt residual and normalization on random instances") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> beta(0.05, 1.0), frac(0.05, 0.9);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Eigen::VectorXd s = testing::random_uniform(30, seed, 0.0, 4.0);
        const TiltSolution t = instance_weights_tilt(s, beta(rng), frac(rng));
        CHECK(std::abs(t.weights.mean() - 1.0) <= 1e-10);
        const double moment = (t.weights.array() * s.array()).mean();
        CHECK(std::abs(moment - t.target) <= 1e-10);
        CHECK(std::abs(static_cast<double>(tilted_mean(s, t.eta)) - t.target) <= 1e-10);
        CHECK((t.weights.array() > 0.0).all());
    }
}

TEST_CASE("tilt rejects unreachable targets") {
    Eigen::VectorXd s(3);
    s << 1, 2, 3;
    CHECK_THROWS_AS(solve_tilt(s, 3.5), NumericError);
}

TEST_CASE("invert prior") {
    const FeaturePrior r = invert_prior(prior({0.1, 0.5, 1.0}));
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r[2] == doctest::Approx(0.1).epsilon(1e-15));
    const FeaturePrior c = prior({0.7, 0.7, 0.7});
    CHECK(invert_prior(c).values() == c.values());
}

TEST_CASE("invert prior reverses order and is an involution") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Eigen::VectorXd v = testing::random_uniform(15, seed, 0.0, 2.0);
        const FeaturePrior once = invert_prior(FeaturePrior(v));
        for (int a = 0; a < 15; ++a)
            for (int b = 0; b < 15; ++b)
                if (v(a) < v(b)) CHECK(once[a] > once[b]);
        CHECK((invert_prior(once).values() - v).cwiseAbs().maxCoeff() <= 1e-12);

        // Dyadic values keep every operation exact, so the round trip is bitwise.
        Eigen::VectorXd dyadic = (v * 1024.0).array().round() / 1024.0;
        CHECK(invert_prior(invert_prior(FeaturePrior(dyadic))).values() == dyadic);
    }
}

TEST_CASE("adapter inputs follow the configuration") {
    const Eigen::MatrixXd x = testing::random_matrix(20, 4, 9);
    const FeaturePrior v(testing::random_uniform(4, 10, 0.1, 1.0));
    LearnerConfig rf;
    rf.learner = LearnerKind::random_forest;
    rf.adapters = admissible_adapters(LearnerKind::random_forest);
    rf.alpha = 1.0;
    rf.beta = 0.75;
    const AdapterInputs in = adapter_inputs(rf, v, x, {});
    CHECK(in.feature_probs.size() == 4);
    CHECK(in.instance_weights.size() == 20);
    CHECK(in.penalty_weights.size() == 0);

    const AdapterInputs flat = adapter_inputs(rf, FeaturePrior::uniform(4), x, {});
    LearnerConfig null = rf;
    null.alpha = 0.0;
    null.beta = 0.0;
    const AdapterInputs none = adapter_inputs(null, v, x, {});
    CHECK(flat.feature_probs == none.feature_probs);
    CHECK(flat.instance_weights == none.instance_weights);
}
