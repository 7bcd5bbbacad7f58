#pragma once

#include <Eigen/Dense>

namespace statsformer {

/// Column-wise z-scoring with population (1/n) standard deviations.
/// Constant columns record std = 1 and therefore map to all zeros.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd stds;

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const;
    Eigen::Index p() const { return means.size(); }
};

Standardizer fit_standardizer(const Eigen::MatrixXd& x);

}  // namespace statsformer
