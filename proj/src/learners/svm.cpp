#include "statsformer/learners/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "statsformer/error.hpp"

namespace statsformer::learners {
namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Generic SMO over a signed kernel: Q(t, s) = y_t y_s K(t mod n, s mod n).
class Smo {
public:
    Smo(const Eigen::MatrixXd& kernel, Eigen::VectorXd signs, Eigen::VectorXd linear, double C)
        : k_(kernel), n_(kernel.rows()), y_(std::move(signs)), p_(std::move(linear)), c_(C) {
        l_ = y_.size();
        alpha_ = Eigen::VectorXd::Zero(l_);
        grad_ = p_;
    }

    SvmDual run(double tolerance, long max_iterations) {
        if (max_iterations <= 0) max_iterations = std::max<long>(10000000L, 100L * static_cast<long>(l_));
        long iter = 0;
        double violation = 0.0;
        for (;;) {
            Eigen::Index i = -1;
            Eigen::Index j = -1;
            violation = select_working_set(i, j);
            if (violation < tolerance || j < 0) break;
            if (++iter > max_iterations) {
                throw NumericError(fmt::format("SMO did not converge after {} iterations (violation {:g})",
                                               max_iterations, violation));
            }
            update(i, j);
        }
        SvmDual out;
        out.alpha = alpha_;
        out.signs = y_;
        out.rho = compute_rho();
        out.max_violation = std::max(violation, 0.0);
        out.iterations = iter;
        return out;
    }

private:
    double q(Eigen::Index t, Eigen::Index s) const { return y_(t) * y_(s) * k_(t % n_, s % n_); }
    bool is_upper(Eigen::Index t) const { return alpha_(t) >= c_; }
    bool is_lower(Eigen::Index t) const { return alpha_(t) <= 0.0; }

    // Second-order working set selection (Fan, Chen and Lin).
    double select_working_set(Eigen::Index& out_i, Eigen::Index& out_j) const {
        double gmax = -kInf;
        double gmax2 = -kInf;
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < l_; ++t) {
            if (y_(t) > 0 ? !is_upper(t) : !is_lower(t)) {
                if (-y_(t) * grad_(t) >= gmax) {
                    gmax = -y_(t) * grad_(t);
                    i = t;
                }
            }
        }
        Eigen::Index j = -1;
        double obj_min = kInf;
        for (Eigen::Index t = 0; t < l_; ++t) {
            if (y_(t) > 0 ? !is_lower(t) : !is_upper(t)) {
                const double yg = y_(t) * grad_(t);
                gmax2 = std::max(gmax2, yg);
                if (i < 0) continue;
                const double grad_diff = gmax + yg;
                if (grad_diff > 0.0) {
                    double quad = q(i, i) + q(t, t) - 2.0 * y_(i) * y_(t) * q(i, t);
                    if (quad <= 0.0) quad = kTau;
                    const double obj = -(grad_diff * grad_diff) / quad;
                    if (obj <= obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        out_i = i;
        out_j = j;
        return gmax + gmax2;
    }

    void update(Eigen::Index i, Eigen::Index j) {
        const double old_i = alpha_(i);
        const double old_j = alpha_(j);
        double ai = old_i;
        double aj = old_j;
        const double qii = q(i, i);
        const double qjj = q(j, j);
        const double qij = q(i, j);
        if (y_(i) != y_(j)) {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad_(i) - grad_(j)) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > c_) {
                    ai = c_;
                    aj = c_ - diff;
                }
            } else if (aj > c_) {
                aj = c_;
                ai = c_ + diff;
            }
        } else {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad_(i) - grad_(j)) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > c_) {
                if (ai > c_) {
                    ai = c_;
                    aj = sum - c_;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > c_) {
                if (aj > c_) {
                    aj = c_;
                    ai = sum - c_;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha_(i) = ai;
        alpha_(j) = aj;
        const double di = ai - old_i;
        const double dj = aj - old_j;
        for (Eigen::Index t = 0; t < l_; ++t) grad_(t) += q(t, i) * di + q(t, j) * dj;
    }

    double compute_rho() const {
        double ub = kInf;
        double lb = -kInf;
        double sum_free = 0.0;
        int n_free = 0;
        for (Eigen::Index t = 0; t < l_; ++t) {
            const double yg = y_(t) * grad_(t);
            if (is_upper(t)) {
                if (y_(t) < 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else if (is_lower(t)) {
                if (y_(t) > 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else {
                ++n_free;
                sum_free += yg;
            }
        }
        if (n_free > 0) return sum_free / n_free;
        if (!std::isfinite(ub) || !std::isfinite(lb)) return std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
        return 0.5 * (ub + lb);
    }

    const Eigen::MatrixXd& k_;
    Eigen::Index n_;
    Eigen::Index l_ = 0;
    Eigen::VectorXd y_;
    Eigen::VectorXd p_;
    double c_;
    Eigen::VectorXd alpha_;
    Eigen::VectorXd grad_;
};

SvmMachine make_machine(const Eigen::MatrixXd& xs, const Eigen::VectorXd& coef, double bias) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < coef.size(); ++i) {
        if (coef(i) != 0.0) keep.push_back(i);
    }
    SvmMachine m;
    m.support_vectors.resize(static_cast<Eigen::Index>(keep.size()), xs.cols());
    m.dual_coefficients.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        m.support_vectors.row(static_cast<Eigen::Index>(r)) = xs.row(keep[r]);
        m.dual_coefficients(static_cast<Eigen::Index>(r)) = coef(keep[r]);
    }
    m.bias = bias;
    return m;
}

}  // namespace

SvmDual solve_svc_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& signs, double C, double tolerance,
                       long max_iterations) {
    if (kernel.rows() != kernel.cols() || kernel.rows() != signs.size()) {
        throw DataError("svc: kernel and label sizes disagree");
    }
    Smo smo(kernel, signs, Eigen::VectorXd::Constant(signs.size(), -1.0), C);
    return smo.run(tolerance, max_iterations);
}

SvmDual solve_svr_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double C, double epsilon,
                       double tolerance, long max_iterations) {
    const Eigen::Index n = y.size();
    if (kernel.rows() != n || kernel.cols() != n) throw DataError("svr: kernel and target sizes disagree");
    Eigen::VectorXd signs(2 * n);
    Eigen::VectorXd linear(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        signs(i) = 1.0;
        signs(i + n) = -1.0;
        linear(i) = epsilon - y(i);
        linear(i + n) = epsilon + y(i);
    }
    Smo smo(kernel, signs, linear, C);
    return smo.run(tolerance, max_iterations);
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd k = -2.0 * a * b.transpose();
    k.colwise() += na;
    k.rowwise() += nb.transpose();
    return (-gamma * k.cwiseMax(0.0)).array().exp().matrix();
}

Eigen::MatrixXd KernelSvmState::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != p) throw DataError(fmt::format("kernel svm expects {} columns, got {}", p, x.cols()));
    const Eigen::MatrixXd xs = x * scales.asDiagonal();
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(machines.size()));
    for (std::size_t m = 0; m < machines.size(); ++m) {
        const auto& mach = machines[m];
        Eigen::VectorXd dec = Eigen::VectorXd::Constant(x.rows(), mach.bias);
        if (mach.support_vectors.rows() > 0) dec += rbf_kernel(xs, mach.support_vectors, gamma) * mach.dual_coefficients;
        out.col(static_cast<Eigen::Index>(m)) = dec;
    }
    return out;
}

KernelSvmState fit_kernel_svm(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, const Eigen::VectorXd& scales,
                              const Task& task, const SvmOptions& options) {
    const Eigen::Index n = x_std.rows();
    const Eigen::Index p = x_std.cols();
    if (n < 1 || p < 1) throw DataError("kernel svm: empty training data");
    if (y.size() != n) throw DataError("kernel svm: target length does not match rows");
    KernelSvmState state;
    state.task = task;
    state.p = static_cast<int>(p);
    state.C = options.C;
    state.scales = scales.size() == 0 ? Eigen::VectorXd::Ones(p) : scales;
    if (state.scales.size() != p) throw DataError("kernel svm: scale length does not match columns");
    if ((state.scales.array() <= 0.0).any()) throw DataError("kernel svm: scales must be positive");

    const Eigen::MatrixXd xs = x_std * state.scales.asDiagonal();
    if (options.gamma > 0.0) {
        state.gamma = options.gamma;
    } else {
        const double mean = xs.mean();
        const double var = (xs.array() - mean).square().mean();
        state.gamma = var > 0.0 ? 1.0 / (static_cast<double>(p) * var) : 1.0;
    }
    const Eigen::MatrixXd kernel = rbf_kernel(xs, xs, state.gamma);

    if (task.kind == TaskKind::regression) {
        const SvmDual dual = solve_svr_dual(kernel, y, options.C, options.svr_epsilon, options.tolerance,
                                            options.max_iterations);
        const Eigen::VectorXd coef = dual.alpha.head(n) - dual.alpha.tail(n);
        state.machines.push_back(make_machine(xs, coef, -dual.rho));
        return state;
    }
    const int machines = task.kind == TaskKind::binary ? 1 : task.n_classes;
    for (int c = 0; c < machines; ++c) {
        const double positive = task.kind == TaskKind::binary ? 1.0 : static_cast<double>(c);
        Eigen::VectorXd signs(n);
        for (Eigen::Index i = 0; i < n; ++i) signs(i) = y(i) == positive ? 1.0 : -1.0;
        if ((signs.array() > 0).all() || (signs.array() < 0).all()) {
            // Single-class subproblem: constant decision value.
            state.machines.push_back(make_machine(xs, Eigen::VectorXd::Zero(n), signs(0)));
            continue;
        }
        const SvmDual dual = solve_svc_dual(kernel, signs, options.C, options.tolerance, options.max_iterations);
        state.machines.push_back(make_machine(xs, dual.alpha.cwiseProduct(signs), -dual.rho));
    }
    return state;
}

}  // namespace statsformer::learners
