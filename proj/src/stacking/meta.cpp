#include "statsformer/stacking/meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "statsformer/error.hpp"

namespace statsformer::stacking {
namespace {

constexpr double kKktTolerance = 1e-8;
constexpr double kProjectedGradientTarget = 1e-10;
constexpr double kProjectedGradientLimit = 1e-6;

double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double mean_logistic_loss(const Eigen::VectorXd& eta, const Eigen::VectorXd& t) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) total += log1p_exp(eta(i)) - t(i) * eta(i);
    return total / static_cast<double>(eta.size());
}

/// argmin_b mean logloss(b + offset, t) by safeguarded Newton.
double best_intercept(const Eigen::VectorXd& offset, const Eigen::VectorXd& t) {
    const double m = std::clamp(t.mean(), 1e-12, 1.0 - 1e-12);
    double b = std::log(m / (1.0 - m)) - offset.mean();
    double f = mean_logistic_loss(offset.array() + b, t);
    for (int it = 0; it < 200; ++it) {
        double g = 0.0;
        double h = 0.0;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double p = sigmoid(offset(i) + b);
            g += p - t(i);
            h += p * (1.0 - p);
        }
        g /= static_cast<double>(t.size());
        h /= static_cast<double>(t.size());
        if (std::abs(g) <= 1e-14) break;
        double step = -g / std::max(h, 1e-12);
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            const double fn = mean_logistic_loss(offset.array() + (b + step), t);
            if (fn <= f - 1e-4 * std::abs(g * step)) {
                b += step;
                f = fn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return b;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(rows[r]));
    return out;
}

/// Lawson-Hanson active set for min 1/2 x'Ax - b'x, x >= 0, with A positive definite.
Eigen::VectorXd nonnegative_qp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index L = b.size();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(L);
    std::vector<bool> passive(static_cast<std::size_t>(L), false);
    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < L; ++j) {
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        }
        Eigen::VectorXd s = Eigen::VectorXd::Zero(L);
        if (idx.empty()) return s;
        const Eigen::MatrixXd sub = a(idx, idx);
        const Eigen::VectorXd rhs = b(idx);
        const Eigen::VectorXd sol = sub.ldlt().solve(rhs);
        for (std::size_t r = 0; r < idx.size(); ++r) s(idx[r]) = sol(static_cast<Eigen::Index>(r));
        return s;
    };
    const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
    const double add_tol = 1e-14 * scale;
    for (Eigen::Index outer = 0; outer < 10 * L + 10; ++outer) {
        const Eigen::VectorXd g = a * x - b;
        Eigen::Index enter = -1;
        double most = -add_tol;
        for (Eigen::Index j = 0; j < L; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && g(j) < most) {
                most = g(j);
                enter = j;
            }
        }
        if (enter < 0) break;
        passive[static_cast<std::size_t>(enter)] = true;
        for (Eigen::Index inner = 0; inner <= L; ++inner) {
            const Eigen::VectorXd s = solve_passive();
            bool feasible = true;
            double step = 1.0;
            for (Eigen::Index j = 0; j < L; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    feasible = false;
                    const double denom = x(j) - s(j);
                    if (denom > 0.0) step = std::min(step, x(j) / denom);
                }
            }
            if (feasible) {
                x = s;
                break;
            }
            x += step * (s - x);
            const double floor = 1e-15 * std::max(1.0, x.maxCoeff());
            for (Eigen::Index j = 0; j < L; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x(j) <= floor) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
    }
    return x;
}

}  // namespace

double meta_regression_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& pi,
                                 double intercept, double reg) {
    const Eigen::VectorXd r = y - z * pi - Eigen::VectorXd::Constant(y.size(), intercept);
    return 0.5 * r.squaredNorm() / static_cast<double>(y.size()) + reg * pi.squaredNorm();
}

Eigen::VectorXd meta_regression_gradient(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& pi, double intercept, double reg) {
    const Eigen::VectorXd r = y - z * pi - Eigen::VectorXd::Constant(y.size(), intercept);
    return -z.transpose() * r / static_cast<double>(y.size()) + 2.0 * reg * pi;
}

double meta_logistic_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& t, const Eigen::VectorXd& pi,
                               double intercept, double reg) {
    const Eigen::VectorXd eta = (z * pi).array() + intercept;
    return mean_logistic_loss(eta, t) + reg * pi.squaredNorm();
}

Eigen::VectorXd meta_logistic_gradient(const Eigen::MatrixXd& z, const Eigen::VectorXd& t,
                                       const Eigen::VectorXd& pi, double intercept, double reg) {
    const Eigen::Index n = t.size();
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid(i) = sigmoid(z.row(i).dot(pi) + intercept) - t(i);
    Eigen::VectorXd g(pi.size() + 1);
    g(0) = resid.mean();
    g.tail(pi.size()) = z.transpose() * resid / static_cast<double>(n) + 2.0 * reg * pi;
    return g;
}

double projected_gradient_norm(const Eigen::VectorXd& gradient_with_intercept, const Eigen::VectorXd& pi) {
    double total = gradient_with_intercept(0) * gradient_with_intercept(0);
    for (Eigen::Index l = 0; l < pi.size(); ++l) {
        const double g = gradient_with_intercept(l + 1);
        const double pg = pi(l) > 0.0 ? g : std::min(g, 0.0);
        total += pg * pg;
    }
    return std::sqrt(total);
}

double meta_regression_vertex_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, Eigen::Index l,
                                        double reg) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(z.cols());
    e(l) = 1.0;
    return meta_regression_objective(z, y, e, y.mean() - z.col(l).mean(), reg);
}

double meta_logistic_vertex_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& t, Eigen::Index l,
                                      double reg) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(z.cols());
    e(l) = 1.0;
    return meta_logistic_objective(z, t, e, best_intercept(z.col(l), t), reg);
}

MetaWeights solve_meta_regression(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double reg) {
    const auto n = static_cast<double>(y.size());
    if (y.size() == 0 || z.rows() != y.size()) throw DataError("meta regression: empty or mismatched inputs");
    const Eigen::RowVectorXd zbar = z.colwise().mean();
    const double ybar = y.mean();
    const Eigen::MatrixXd zc = z.rowwise() - zbar;
    const Eigen::VectorXd yc = y.array() - ybar;
    Eigen::MatrixXd a = zc.transpose() * zc / n;
    a.diagonal().array() += 2.0 * reg;
    const Eigen::VectorXd b = zc.transpose() * yc / n;

    MetaWeights w;
    w.reg = reg;
    w.pi = nonnegative_qp(a, b);
    w.intercept = ybar - zbar.dot(w.pi);

    const Eigen::VectorXd g = a * w.pi - b;
    for (Eigen::Index l = 0; l < g.size(); ++l) {
        const bool violated = w.pi(l) > 0.0 ? std::abs(g(l)) > kKktTolerance : g(l) < -kKktTolerance;
        if (violated) {
            throw NumericError(fmt::format("meta regression failed to reach KKT tolerance (column {}, gradient {:g})",
                                           l, g(l)));
        }
    }
    return w;
}

MetaWeights solve_meta_logistic(const Eigen::MatrixXd& z, const Eigen::VectorXd& t, double reg) {
    const Eigen::Index n = t.size();
    const Eigen::Index L = z.cols();
    if (n == 0 || z.rows() != n) throw DataError("meta classification: empty or mismatched inputs");
    MetaWeights w;
    w.reg = reg;
    w.pi = Eigen::VectorXd::Zero(L);
    w.intercept = best_intercept(Eigen::VectorXd::Zero(n), t);

    Eigen::MatrixXd design(n, L + 1);
    design.col(0).setOnes();
    design.rightCols(L) = z;
    Eigen::VectorXd x(L + 1);
    x(0) = w.intercept;
    x.tail(L) = w.pi;
    auto objective = [&](const Eigen::VectorXd& v) { return meta_logistic_objective(z, t, v.tail(L), v(0), reg); };
    double f = objective(x);
    double pg_norm = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 500; ++iter) {
        const Eigen::VectorXd g = meta_logistic_gradient(z, t, x.tail(L), x(0), reg);
        pg_norm = projected_gradient_norm(g, x.tail(L));
        if (pg_norm <= kProjectedGradientTarget) break;

        std::vector<Eigen::Index> free{0};
        for (Eigen::Index l = 0; l < L; ++l) {
            if (x(l + 1) > 0.0 || g(l + 1) < 0.0) free.push_back(l + 1);
        }
        Eigen::VectorXd weight(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = sigmoid(design.row(i).dot(x));
            weight(i) = p * (1.0 - p);
        }
        const Eigen::MatrixXd df = design(Eigen::all, free);
        Eigen::MatrixXd h = df.transpose() * weight.asDiagonal() * df / static_cast<double>(n);
        for (std::size_t r = 1; r < free.size(); ++r) h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) += 2.0 * reg;
        h.diagonal().array() += 1e-12;
        const Eigen::VectorXd step_free = -h.ldlt().solve(g(free));
        Eigen::VectorXd d = Eigen::VectorXd::Zero(L + 1);
        d(free) = step_free;
        if (!d.allFinite() || g.dot(d) >= 0.0) {
            for (Eigen::Index j = 0; j <= L; ++j) d(j) = j == 0 || x(j) > 0.0 ? -g(j) : -std::min(g(j), 0.0);
        }

        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            Eigen::VectorXd xn = x + step * d;
            xn.tail(L) = xn.tail(L).cwiseMax(0.0);
            const double fn = objective(xn);
            if (fn <= f + 1e-4 * g.dot(xn - x) + 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f)) {
                moved = (xn - x).lpNorm<Eigen::Infinity>() > 0.0;
                x = xn;
                f = fn;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    const Eigen::VectorXd g = meta_logistic_gradient(z, t, x.tail(L), x(0), reg);
    pg_norm = projected_gradient_norm(g, x.tail(L));
    if (!(pg_norm <= kProjectedGradientLimit)) {
        throw NumericError(fmt::format("meta classification did not converge (projected gradient {:g})", pg_norm));
    }
    w.intercept = x(0);
    w.pi = x.tail(L);
    return w;
}

MetaWeights fit_meta_regression(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const std::vector<double>& grid,
                                const FoldPlan& plan) {
    if (grid.empty()) throw UsageError("empty meta regularization grid");
    std::vector<double> loss(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double sse = 0.0;
        std::size_t count = 0;
        for (int k = 0; k < plan.k; ++k) {
            const auto train = plan.train_indices(k);
            const auto test = plan.test_indices(k);
            if (train.empty() || test.empty()) continue;
            const MetaWeights w = solve_meta_regression(take_rows(z, train), take(y, train), grid[g]);
            const Eigen::VectorXd pred = (take_rows(z, test) * w.pi).array() + w.intercept;
            sse += (pred - take(y, test)).squaredNorm();
            count += test.size();
        }
        loss[g] = count > 0 ? sse / static_cast<double>(count) : std::numeric_limits<double>::infinity();
    }
    const auto best = static_cast<std::size_t>(std::min_element(loss.begin(), loss.end()) - loss.begin());
    MetaWeights w = solve_meta_regression(z, y, grid[best]);
    w.cv_loss = loss;
    return w;
}

std::vector<MetaWeights> fit_meta_classification(const std::vector<Eigen::MatrixXd>& slices, const Eigen::VectorXd& y,
                                                 const Task& task, const std::vector<double>& grid,
                                                 const FoldPlan& plan, std::vector<std::string>* warnings) {
    if (grid.empty()) throw UsageError("empty meta regularization grid");
    if (!task.is_classification()) throw UsageError("meta classification needs a classification task");
    const int problems = task.kind == TaskKind::binary ? 1 : task.n_classes;
    if (static_cast<int>(slices.size()) != problems) throw DataError("meta classification: slice count mismatch");
    std::vector<MetaWeights> out;
    for (int j = 0; j < problems; ++j) {
        const double positive = task.kind == TaskKind::binary ? 1.0 : static_cast<double>(j);
        const Eigen::VectorXd t = (y.array() == positive).cast<double>();
        const Eigen::MatrixXd& z = slices[static_cast<std::size_t>(j)];
        std::vector<double> loss(grid.size(), 0.0);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double total = 0.0;
            std::size_t count = 0;
            for (int k = 0; k < plan.k; ++k) {
                const auto train = plan.train_indices(k);
                const auto test = plan.test_indices(k);
                const Eigen::VectorXd tt = take(t, train);
                if (test.empty() || tt.minCoeff() == tt.maxCoeff()) {
                    if (warnings && g == 0) {
                        warnings->push_back(fmt::format("meta CV: class {} fold {} has a single-class training part; skipped", j, k));
                    }
                    continue;
                }
                const MetaWeights w = solve_meta_logistic(take_rows(z, train), tt, grid[g]);
                const Eigen::VectorXd eta = (take_rows(z, test) * w.pi).array() + w.intercept;
                total += mean_logistic_loss(eta, take(t, test)) * static_cast<double>(test.size());
                count += test.size();
            }
            loss[g] = count > 0 ? total / static_cast<double>(count) : std::numeric_limits<double>::infinity();
        }
        const auto best = static_cast<std::size_t>(std::min_element(loss.begin(), loss.end()) - loss.begin());
        MetaWeights w = solve_meta_logistic(z, t, grid[best]);
        w.cv_loss = loss;
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace statsformer::stacking
