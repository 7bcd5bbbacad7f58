#pragma once

#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/dataset.hpp"

namespace statsformer::learners {

struct SvmOptions {
    double C = 1.0;
    double gamma = 0.0;         ///< <= 0 selects 1 / (p * var(X_scaled))
    double svr_epsilon = 0.1;
    double tolerance = 1e-3;    ///< maximal KKT violation at termination
    long max_iterations = 0;    ///< 0 = max(10^7, 100 * l)
};

/// Solution of min 1/2 a'Qa + p'a s.t. y'a = 0, 0 <= a <= C.
struct SvmDual {
    Eigen::VectorXd alpha;
    Eigen::VectorXd signs;  ///< y in {-1, +1}
    double rho = 0.0;       ///< decision = sum_i y_i a_i K(x_i, x) - rho
    double max_violation = 0.0;
    long iterations = 0;
};

/// C-SVC dual for labels in {-1, +1} on a precomputed kernel.
SvmDual solve_svc_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& signs, double C, double tolerance,
                       long max_iterations = 0);

/// epsilon-SVR dual (2n variables, a then a*) on a precomputed kernel.
SvmDual solve_svr_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double C, double epsilon,
                       double tolerance, long max_iterations = 0);

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma);

/// One binary or regression machine: decision = sum coef_i K(sv_i, x) + bias.
struct SvmMachine {
    Eigen::MatrixXd support_vectors;    ///< m x p, already scaled
    Eigen::VectorXd dual_coefficients;  ///< y_i a_i (classification) or a_i - a*_i (regression)
    double bias = 0.0;
};

struct KernelSvmState {
    std::vector<SvmMachine> machines;  ///< 1, or one per class (one-vs-rest)
    double gamma = 1.0;
    double C = 1.0;
    Eigen::VectorXd scales;
    Task task;
    int p = 0;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// Scales features by `scales` (empty = ones) and fits an RBF C-SVC / SVR.
KernelSvmState fit_kernel_svm(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, const Eigen::VectorXd& scales,
                              const Task& task, const SvmOptions& options);

}  // namespace statsformer::learners
