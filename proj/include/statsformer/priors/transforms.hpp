#pragma once

#include <Eigen/Dense>

#include "statsformer/core/config.hpp"

namespace statsformer::priors {

/// Temperature-controlled monotone map parameters. At alpha = 0 every
/// transform returns exactly 1 and clipping is bypassed.
struct TransformParams {
    double alpha = 0.0;
    double epsilon = 1e-8;
    double clip_lo = 1e-3;
    double clip_hi = 1e3;
};

struct InstanceWeightParams {
    double beta = 0.0;
    int q = 1;
    double epsilon = 1e-8;
    TiltMode mode = TiltMode::affine_blend;
    double tilt_target_fraction = 0.25;
};

/// Exponential tilt of the empirical measure: weights e^{eta s_i} / Z(eta)
/// with Z(eta) = (1/n) sum_k e^{eta s_k}, so the weights average to one.
struct TiltSolution {
    double eta = 0.0;
    double partition = 1.0;  ///< Z(eta); relative to the unshifted exponent
    double target = 0.0;     ///< tilted mean that eta reproduces
    double residual = 0.0;   ///< tilted mean minus target at the returned eta
    Eigen::VectorXd weights;
};

/// w_j = clip((v_j + eps)^-alpha), non-increasing in v_j.
Eigen::VectorXd penalty_weights(const FeaturePrior& v, const TransformParams& t);

/// s_j = clip((v_j + eps)^alpha), non-decreasing in v_j.
Eigen::VectorXd feature_scales(const FeaturePrior& v, const TransformParams& t);

/// Normalized feature_scales; exactly uniform at alpha = 0.
Eigen::VectorXd feature_sampling_probs(const FeaturePrior& v, const TransformParams& t);

/// s_i = sum_j v_j |x_ij|^q over a standardized matrix.
Eigen::VectorXd raw_activation(const Eigen::MatrixXd& x_std, const FeaturePrior& v, int q);

/// rho_i = (1 - beta) + beta (s_i - min s) / (max s - min s + eps).
/// Returns all ones when beta = 0 or when s is constant.
Eigen::VectorXd instance_weights_blend(const Eigen::VectorXd& s, double beta, double epsilon);

/// Mean of the top ceil(fraction * n) activations.
double prior_target_mean(const Eigen::VectorXd& s, double fraction);

/// Solves the moment equation E_tilt[s] = target for eta by bracketed
/// root finding on [-50/sd(s), 50/sd(s)]. Throws NumericError when the
/// target lies outside the reachable range.
TiltSolution solve_tilt(const Eigen::VectorXd& s, double target);

/// Exact KL-projection weights for target (1 - beta) mean(s) + beta * prior_target_mean(s).
TiltSolution instance_weights_tilt(const Eigen::VectorXd& s, double beta, double target_fraction);

/// Instance weights for either mode, computed from standardized training data.
Eigen::VectorXd instance_weights(const Eigen::MatrixXd& x_std, const FeaturePrior& v,
                                 const InstanceWeightParams& params);

/// Order-reversing reflection v'_j = min(v) + max(v) - v_j.
FeaturePrior invert_prior(const FeaturePrior& v);

/// Transformed prior values handed to a learner. Empty vectors mean the
/// learner's prior-free default (uniform).
struct AdapterInputs {
    Eigen::VectorXd penalty_weights;
    Eigen::VectorXd feature_scales;
    Eigen::VectorXd feature_probs;
    Eigen::VectorXd instance_weights;
};

struct AdapterSettings {
    double epsilon = 1e-8;
    int q = 1;
    TiltMode tilt_mode = TiltMode::affine_blend;
    double tilt_target_fraction = 0.25;

    static AdapterSettings from(const RunConfig& rc) {
        return {rc.epsilon, rc.q, rc.tilt_mode, rc.tilt_target_fraction};
    }
};

/// Computes every adapter input the configuration uses. A constant prior
/// ranks nothing, so it yields the same inputs as the null configuration.
AdapterInputs adapter_inputs(const LearnerConfig& config, const FeaturePrior& v, const Eigen::MatrixXd& x_std,
                             const AdapterSettings& settings);

}  // namespace statsformer::priors
