#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/dataset.hpp"
#include "statsformer/stacking/folds.hpp"

namespace statsformer::stacking {

/// Nonnegative aggregation weights with a free intercept.
struct MetaWeights {
    Eigen::VectorXd pi;
    double intercept = 0.0;
    double reg = 0.0;
    std::vector<double> cv_loss;  ///< mean validation loss per grid value (empty for direct solves)
};

/// (1/2n) ||y - b0 - Z pi||^2 + reg ||pi||^2.
double meta_regression_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& pi,
                                 double intercept, double reg);

/// Gradient of the regression objective in pi.
Eigen::VectorXd meta_regression_gradient(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& pi, double intercept, double reg);

/// Mean logistic loss of sigmoid(b0 + Z pi) against t in {0,1} plus reg ||pi||^2.
double meta_logistic_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& t, const Eigen::VectorXd& pi,
                               double intercept, double reg);

/// Gradient of the logistic objective: element 0 is the intercept, then pi.
Eigen::VectorXd meta_logistic_gradient(const Eigen::MatrixXd& z, const Eigen::VectorXd& t,
                                       const Eigen::VectorXd& pi, double intercept, double reg);

/// Euclidean norm of the projected gradient for the bound pi >= 0.
double projected_gradient_norm(const Eigen::VectorXd& gradient_with_intercept, const Eigen::VectorXd& pi);

/// Objective at the vertex e_l with the intercept re-optimized.
double meta_regression_vertex_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, Eigen::Index l,
                                        double reg);
double meta_logistic_vertex_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& t, Eigen::Index l,
                                      double reg);

/// Exact minimizer of the regression objective over pi >= 0 by an active-set
/// method; the gradient KKT conditions hold to 1e-8.
MetaWeights solve_meta_regression(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double reg);

/// Bound-constrained projected Newton solve of the logistic objective until
/// the projected gradient norm is at most 1e-6 (typically far below).
MetaWeights solve_meta_logistic(const Eigen::MatrixXd& z, const Eigen::VectorXd& t, double reg);

/// Selects reg from `grid` by cross-validation over `plan`, then solves on all rows.
MetaWeights fit_meta_regression(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const std::vector<double>& grid,
                                const FoldPlan& plan);

/// One-vs-rest over output slices: binary uses slices[0] with targets y,
/// multiclass class j uses slices[j] with targets 1{y = j}. Folds whose
/// training part holds a single class are skipped and reported in `warnings`.
std::vector<MetaWeights> fit_meta_classification(const std::vector<Eigen::MatrixXd>& slices, const Eigen::VectorXd& y,
                                                 const Task& task, const std::vector<double>& grid,
                                                 const FoldPlan& plan, std::vector<std::string>* warnings = nullptr);

}  // namespace statsformer::stacking
