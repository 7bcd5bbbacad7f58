#include "statsformer/core/standardizer.hpp"

#include <cmath>

#include <fmt/core.h>

#include "statsformer/error.hpp"

namespace statsformer {

Standardizer fit_standardizer(const Eigen::MatrixXd& x) {
    const auto n = static_cast<double>(x.rows());
    Standardizer s;
    s.means = x.colwise().mean().transpose();
    s.stds.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - s.means(j)).square().sum() / n;
        const double sd = std::sqrt(var);
        // Relative test so columns that are constant up to rounding still count.
        const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(s.means(j))));
        s.stds(j) = constant ? 1.0 : sd;
    }
    return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const {
    if (x.cols() != means.size()) {
        throw DataError(fmt::format("standardizer expects {} columns, got {}", means.size(), x.cols()));
    }
    Eigen::MatrixXd z(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        z.col(j) = (x.col(j).array() - means(j)) / stds(j);
    }
    return z;
}

Eigen::MatrixXd Standardizer::inverse(const Eigen::MatrixXd& z) const {
    if (z.cols() != means.size()) {
        throw DataError(fmt::format("standardizer expects {} columns, got {}", means.size(), z.cols()));
    }
    Eigen::MatrixXd x(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        x.col(j) = z.col(j).array() * stds(j) + means(j);
    }
    return x;
}

}  // namespace statsformer
