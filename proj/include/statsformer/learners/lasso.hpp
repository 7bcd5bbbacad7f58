#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/dataset.hpp"

namespace statsformer::learners {

enum class GlmLoss { gaussian, logistic };

/// Coordinate-descent settings shared by the path and single-lambda solvers.
struct LassoOptions {
    int folds_internal = 5;
    int n_lambda = 100;
    double lambda_min_ratio = 1e-2;
    double tolerance = 1e-9;  ///< max coefficient change per sweep at convergence
    long max_sweeps = 100000;
    std::uint64_t seed = 0;   ///< drives the internal CV fold assignment
};

/// Solution of min_b0,b  loss(b0, b) + lambda * sum_j w_j |b_j|, where the
/// loss is (1/2n)||y - b0 - Xb||^2 (gaussian) or the mean logistic
/// negative log-likelihood (logistic, y in {0,1}).
struct LassoSolution {
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    double lambda = 0.0;
    long sweeps = 0;
};

/// Fitted state; one coefficient column per output (classes use one-vs-rest).
struct LassoState {
    Eigen::MatrixXd coefficients;  ///< p x k
    Eigen::VectorXd intercepts;    ///< k
    Eigen::VectorXd lambdas;       ///< selected lambda per output column
    Eigen::VectorXd penalty_factors;
    GlmLoss loss = GlmLoss::gaussian;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// Smallest lambda for which the intercept-only model is optimal.
double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                  GlmLoss loss);

/// n values log-spaced from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_path(double lmax, int n, double ratio);

/// Warm-started path solve; element i solves at path[i].
std::vector<LassoSolution> solve_lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                            const Eigen::VectorXd& penalty, const std::vector<double>& path,
                                            GlmLoss loss, const LassoOptions& options = {});

/// Cold-start solve at one lambda.
LassoSolution solve_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                          double lambda, GlmLoss loss, const LassoOptions& options = {});

/// Gradient of the smooth loss with respect to each coefficient.
Eigen::VectorXd lasso_loss_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoSolution& s,
                                    GlmLoss loss);

/// Largest KKT violation of a lasso solution (0 at an exact optimum).
double lasso_kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                          const LassoSolution& s, GlmLoss loss);

/// Lambda selected by internal K-fold CV over the log-spaced path
/// (minimum mean validation loss), then refit on all rows.
LassoSolution fit_lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                           GlmLoss loss, bool stratify, const LassoOptions& options);

/// Task-level entry point: regression, binary, or one-vs-rest multiclass.
/// An empty penalty vector means uniform penalties.
LassoState fit_lasso(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                     const Task& task, const LassoOptions& options);

}  // namespace statsformer::learners
