#include "statsformer/priors/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/core.h>

#include "statsformer/error.hpp"

namespace statsformer::priors {
namespace {

double clip(double x, const TransformParams& t) { return std::clamp(x, t.clip_lo, t.clip_hi); }

struct TiltMoments {
    double mean;
    double log_partition;  // log Z(eta)
};

// Tilted mean and log-partition with the exponent shifted by eta * max(s)
// (or min(s) for negative eta) to avoid overflow.
TiltMoments tilt_moments(const Eigen::VectorXd& s, double eta) {
    const double shift = eta >= 0 ? eta * s.maxCoeff() : eta * s.minCoeff();
    double z = 0.0;
    double m = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double e = std::exp(eta * s(i) - shift);
        z += e;
        m += e * s(i);
    }
    return {m / z, std::log(z / static_cast<double>(s.size())) + shift};
}

double population_sd(const Eigen::VectorXd& s) {
    const double mean = s.mean();
    return std::sqrt((s.array() - mean).square().mean());
}

}  // namespace

Eigen::VectorXd penalty_weights(const FeaturePrior& v, const TransformParams& t) {
    const Eigen::Index p = v.size();
    if (t.alpha == 0.0) return Eigen::VectorXd::Ones(p);
    Eigen::VectorXd w(p);
    for (Eigen::Index j = 0; j < p; ++j) w(j) = clip(std::pow(v[j] + t.epsilon, -t.alpha), t);
    return w;
}

Eigen::VectorXd feature_scales(const FeaturePrior& v, const TransformParams& t) {
    const Eigen::Index p = v.size();
    if (t.alpha == 0.0) return Eigen::VectorXd::Ones(p);
    Eigen::VectorXd s(p);
    for (Eigen::Index j = 0; j < p; ++j) s(j) = clip(std::pow(v[j] + t.epsilon, t.alpha), t);
    return s;
}

Eigen::VectorXd feature_sampling_probs(const FeaturePrior& v, const TransformParams& t) {
    const Eigen::Index p = v.size();
    if (t.alpha == 0.0) return Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p));
    const Eigen::VectorXd s = feature_scales(v, t);
    return s / s.sum();
}

Eigen::VectorXd raw_activation(const Eigen::MatrixXd& x_std, const FeaturePrior& v, int q) {
    if (x_std.cols() != v.size()) {
        throw DataError(fmt::format("prior has {} entries but data has {} columns", v.size(), x_std.cols()));
    }
    if (q < 1) throw UsageError("q must be >= 1");
    if (q == 1) return x_std.cwiseAbs() * v.values();
    if (q == 2) return x_std.cwiseAbs2() * v.values();
    return x_std.cwiseAbs().array().pow(static_cast<double>(q)).matrix() * v.values();
}

Eigen::VectorXd instance_weights_blend(const Eigen::VectorXd& s, double beta, double epsilon) {
    const Eigen::Index n = s.size();
    if (beta == 0.0 || n == 0) return Eigen::VectorXd::Ones(n);
    const double lo = s.minCoeff();
    const double hi = s.maxCoeff();
    if (hi == lo) return Eigen::VectorXd::Ones(n);
    Eigen::VectorXd rho(n);
    for (Eigen::Index i = 0; i < n; ++i) rho(i) = (1.0 - beta) + beta * (s(i) - lo) / (hi - lo + epsilon);
    return rho;
}

double prior_target_mean(const Eigen::VectorXd& s, double fraction) {
    const auto n = static_cast<std::size_t>(s.size());
    auto top = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    top = std::clamp<std::size_t>(top, 1, n);
    std::vector<double> sorted(s.data(), s.data() + n);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top - 1), sorted.end(),
                     std::greater<>());
    std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top), std::greater<>());
    double sum = 0.0;
    for (std::size_t i = 0; i < top; ++i) sum += sorted[i];
    return sum / static_cast<double>(top);
}

TiltSolution solve_tilt(const Eigen::VectorXd& s, double target) {
    const Eigen::Index n = s.size();
    TiltSolution sol;
    sol.target = target;
    const double mean = n > 0 ? s.mean() : 0.0;
    const double sd = n > 0 ? population_sd(s) : 0.0;
    if (n == 0 || sd == 0.0) {
        if (n > 0 && std::abs(target - mean) > 1e-10) throw NumericError("tilt target unreachable");
        sol.weights = Eigen::VectorXd::Ones(n);
        sol.residual = 0.0;
        return sol;
    }
    auto residual = [&](double eta) { return tilt_moments(s, eta).mean - target; };
    double eta = 0.0;
    if (target != mean) {
        const double bound = 50.0 / sd;
        const double lo = target > mean ? 0.0 : -bound;
        const double hi = target > mean ? bound : 0.0;
        const double f_lo = residual(lo);
        const double f_hi = residual(hi);
        if (f_lo * f_hi > 0.0) throw NumericError("tilt target unreachable");
        if (f_lo == 0.0) {
            eta = lo;
        } else if (f_hi == 0.0) {
            eta = hi;
        } else {
            std::uintmax_t max_iter = 500;
            auto done = [&](double a, double b) {
                return std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a));
            };
            const auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi, done, max_iter);
            const double ra = residual(a);
            const double rb = residual(b);
            eta = std::abs(ra) <= std::abs(rb) ? a : b;
        }
    }
    const TiltMoments m = tilt_moments(s, eta);
    sol.eta = eta;
    sol.partition = std::exp(m.log_partition);
    sol.residual = m.mean - target;
    sol.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) sol.weights(i) = std::exp(eta * s(i) - m.log_partition);
    // Remove rounding drift so the weights average to one.
    sol.weights /= sol.weights.mean();
    if (std::abs(sol.residual) > 1e-10 * std::max(1.0, std::abs(target))) {
        throw NumericError(fmt::format("tilt root finding stalled with residual {:g}", sol.residual));
    }
    return sol;
}

TiltSolution instance_weights_tilt(const Eigen::VectorXd& s, double beta, double target_fraction) {
    const Eigen::Index n = s.size();
    if (beta == 0.0 || n == 0 || s.maxCoeff() == s.minCoeff()) {
        TiltSolution sol;
        sol.target = n > 0 ? s.mean() : 0.0;
        sol.weights = Eigen::VectorXd::Ones(n);
        return sol;
    }
    const double target = (1.0 - beta) * s.mean() + beta * prior_target_mean(s, target_fraction);
    return solve_tilt(s, target);
}

Eigen::VectorXd instance_weights(const Eigen::MatrixXd& x_std, const FeaturePrior& v,
                                 const InstanceWeightParams& params) {
    if (params.beta == 0.0) return Eigen::VectorXd::Ones(x_std.rows());
    const Eigen::VectorXd s = raw_activation(x_std, v, params.q);
    if (params.mode == TiltMode::exact_tilt) {
        return instance_weights_tilt(s, params.beta, params.tilt_target_fraction).weights;
    }
    return instance_weights_blend(s, params.beta, params.epsilon);
}

FeaturePrior invert_prior(const FeaturePrior& v) {
    if (v.size() == 0) return v;
    const double reflect = v.values().minCoeff() + v.values().maxCoeff();
    Eigen::VectorXd out(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) out(j) = std::max(0.0, reflect - v[j]);
    return FeaturePrior(std::move(out));
}

AdapterInputs adapter_inputs(const LearnerConfig& config, const FeaturePrior& v, const Eigen::MatrixXd& x_std,
                             const AdapterSettings& settings) {
    const Eigen::Index p = x_std.cols();
    if (v.size() != p) {
        throw DataError(fmt::format("prior has {} entries but data has {} columns", v.size(), p));
    }
    const bool informative = !v.is_constant();
    TransformParams t;
    t.alpha = informative ? config.alpha : 0.0;
    t.epsilon = settings.epsilon;
    InstanceWeightParams iw;
    iw.beta = informative ? config.beta : 0.0;
    iw.q = settings.q;
    iw.epsilon = settings.epsilon;
    iw.mode = settings.tilt_mode;
    iw.tilt_target_fraction = settings.tilt_target_fraction;

    AdapterInputs in;
    for (AdapterKind adapter : config.adapters) {
        switch (adapter) {
            case AdapterKind::penalty: in.penalty_weights = penalty_weights(v, t); break;
            case AdapterKind::feature_scale: in.feature_scales = feature_scales(v, t); break;
            case AdapterKind::feature_sample: in.feature_probs = feature_sampling_probs(v, t); break;
            case AdapterKind::instance_weight: in.instance_weights = instance_weights(x_std, v, iw); break;
        }
    }
    return in;
}

}  // namespace statsformer::priors
