#include "statsformer/learners/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "statsformer/error.hpp"
#include "statsformer/random.hpp"
#include "statsformer/stacking/folds.hpp"

namespace statsformer::learners {
namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }
double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}
double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

double null_intercept(const Eigen::VectorXd& y, GlmLoss loss) {
    const double m = y.mean();
    if (loss == GlmLoss::gaussian) return m;
    const double clipped = std::clamp(m, 1e-10, 1.0 - 1e-10);
    return std::log(clipped / (1.0 - clipped));
}

double mean_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& eta, GlmLoss loss) {
    const auto n = static_cast<double>(y.size());
    if (loss == GlmLoss::gaussian) return 0.5 * (y - eta).squaredNorm() / n;
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) total += softplus(eta(i)) - y(i) * eta(i);
    return total / n;
}

/// Warm-startable coordinate-descent state for one (x, y, penalty) problem.
class Solver {
public:
    Solver(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty, GlmLoss loss,
           const LassoOptions& options)
        : x_(x), y_(y), w_(penalty), loss_(loss), opt_(options),
          n_(static_cast<double>(x.rows())), beta_(Eigen::VectorXd::Zero(x.cols())),
          in_working_(static_cast<std::size_t>(x.cols()), 0) {
        if (y.size() != x.rows()) throw DataError("lasso: target length does not match rows");
        if (w_.size() != x.cols()) throw DataError("lasso: penalty length does not match columns");
        for (Eigen::Index j = 0; j < w_.size(); ++j) {
            if (!(w_(j) > 0.0) || !std::isfinite(w_(j))) throw DataError("lasso: penalty factors must be positive");
        }
        b0_ = null_intercept(y_, loss_);
        if (loss_ == GlmLoss::gaussian) {
            col_sq_ = x_.colwise().squaredNorm().transpose() / n_;
        }
        last_lambda_ = std::numeric_limits<double>::infinity();
    }

    LassoSolution solve(double lambda) {
        sweeps_ = 0;
        // Sequential strong rule: screen with the gradient at the previous solution.
        const Eigen::VectorXd grad = full_gradient();
        const double prev = std::isfinite(last_lambda_) ? last_lambda_ : lambda;
        for (Eigen::Index j = 0; j < x_.cols(); ++j) {
            if (beta_(j) != 0.0 || std::abs(grad(j)) >= w_(j) * (2.0 * lambda - prev)) add_to_working(j);
        }
        for (;;) {
            if (loss_ == GlmLoss::gaussian) {
                solve_gaussian(lambda);
            } else {
                solve_logistic(lambda);
            }
            const Eigen::VectorXd g = full_gradient();
            bool violated = false;
            for (Eigen::Index j = 0; j < x_.cols(); ++j) {
                if (!in_working_[static_cast<std::size_t>(j)] && std::abs(g(j)) > lambda * w_(j)) {
                    add_to_working(j);
                    violated = true;
                }
            }
            if (!violated) break;
        }
        last_lambda_ = lambda;
        return {beta_, b0_, lambda, sweeps_};
    }

private:
    void add_to_working(Eigen::Index j) {
        auto& flag = in_working_[static_cast<std::size_t>(j)];
        if (!flag) {
            flag = 1;
            working_.push_back(j);
        }
    }

    Eigen::VectorXd linear_predictor() const {
        Eigen::VectorXd eta = Eigen::VectorXd::Constant(x_.rows(), b0_);
        for (Eigen::Index j = 0; j < x_.cols(); ++j) {
            if (beta_(j) != 0.0) eta.noalias() += beta_(j) * x_.col(j);
        }
        return eta;
    }

    /// (1/n) X^T (y - mu): the negative loss gradient.
    Eigen::VectorXd full_gradient() const {
        const Eigen::VectorXd eta = linear_predictor();
        Eigen::VectorXd resid(x_.rows());
        if (loss_ == GlmLoss::gaussian) {
            resid = y_ - eta;
        } else {
            for (Eigen::Index i = 0; i < x_.rows(); ++i) resid(i) = y_(i) - sigmoid(eta(i));
        }
        return x_.transpose() * resid / n_;
    }

    double penalty_term(double lambda) const {
        return lambda * (w_.array() * beta_.array().abs()).sum();
    }

    void count_sweep() {
        if (++sweeps_ > opt_.max_sweeps) {
            throw NumericError(fmt::format("lasso did not converge after {} sweeps (lambda={:g}, working set {})",
                                           opt_.max_sweeps, last_lambda_, working_.size()));
        }
    }

    // One pass over `set` for (1/2n) sum v_i (z_i - eta_i)^2 + lambda sum w_j |b_j|,
    // with rw = v .* (z - eta) maintained in place.
    template <class Weights>
    double cd_pass(const std::vector<Eigen::Index>& set, double lambda, Eigen::VectorXd& rw, const Weights& v,
                   double v_sum, const Eigen::VectorXd& col_sq) {
        double max_delta = 0.0;
        const double d0 = rw.sum() / v_sum;
        if (d0 != 0.0) {
            b0_ += d0;
            rw.noalias() -= d0 * v;
            max_delta = std::abs(d0);
        }
        for (Eigen::Index j : set) {
            const double c = col_sq(j);
            if (!(c > 0.0)) continue;
            const double old = beta_(j);
            const double g = x_.col(j).dot(rw) / n_;
            const double updated = soft_threshold(c * old + g, lambda * w_(j)) / c;
            const double delta = updated - old;
            if (delta == 0.0) continue;
            beta_(j) = updated;
            rw.noalias() -= delta * x_.col(j).cwiseProduct(v);
            max_delta = std::max(max_delta, std::abs(delta));
        }
        count_sweep();
        return max_delta;
    }

    template <class Weights>
    void inner_solve(double lambda, Eigen::VectorXd& rw, const Weights& v, double v_sum,
                     const Eigen::VectorXd& col_sq) {
        for (;;) {
            if (cd_pass(working_, lambda, rw, v, v_sum, col_sq) <= opt_.tolerance) return;
            for (;;) {
                active_.clear();
                for (Eigen::Index j : working_) {
                    if (beta_(j) != 0.0) active_.push_back(j);
                }
                if (cd_pass(active_, lambda, rw, v, v_sum, col_sq) <= opt_.tolerance) break;
            }
        }
    }

    void solve_gaussian(double lambda) {
        Eigen::VectorXd rw = y_ - linear_predictor();
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(x_.rows());
        inner_solve(lambda, rw, ones, n_, col_sq_);
    }

    // Proximal Newton: weighted least-squares CD on the quadratic model,
    // followed by backtracking on the exact penalized objective.
    void solve_logistic(double lambda) {
        const Eigen::Index n = x_.rows();
        Eigen::VectorXd v(n);
        Eigen::VectorXd col_sq = Eigen::VectorXd::Zero(x_.cols());
        for (int outer = 0; outer < 1000; ++outer) {
            Eigen::VectorXd eta = linear_predictor();
            Eigen::VectorXd rw(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double mu = sigmoid(eta(i));
                v(i) = std::max(mu * (1.0 - mu), 1e-5);
                rw(i) = y_(i) - mu;  // v .* (z - eta) with z the working response
            }
            for (Eigen::Index j : working_) col_sq(j) = x_.col(j).cwiseAbs2().dot(v) / n_;
            const Eigen::VectorXd old_beta = beta_;
            const double old_b0 = b0_;
            const double old_obj = mean_loss(y_, eta, loss_) + penalty_term(lambda);
            inner_solve(lambda, rw, v, v.sum(), col_sq);

            double obj = mean_loss(y_, linear_predictor(), loss_) + penalty_term(lambda);
            const Eigen::VectorXd step_beta = beta_ - old_beta;
            const double step_b0 = b0_ - old_b0;
            double t = 1.0;
            int halvings = 0;
            while (obj > old_obj + 1e-13 * std::max(1.0, std::abs(old_obj)) && halvings < 40) {
                t *= 0.5;
                ++halvings;
                beta_ = old_beta + t * step_beta;
                b0_ = old_b0 + t * step_b0;
                obj = mean_loss(y_, linear_predictor(), loss_) + penalty_term(lambda);
            }
            if (halvings == 40) {
                beta_ = old_beta;
                b0_ = old_b0;
                return;
            }
            const double change = std::max(t * step_beta.cwiseAbs().maxCoeff(), t * std::abs(step_b0));
            if (change <= opt_.tolerance) return;
        }
        throw NumericError(fmt::format("logistic lasso: Newton iterations did not converge (lambda={:g})", lambda));
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    const Eigen::VectorXd& w_;
    GlmLoss loss_;
    LassoOptions opt_;
    double n_;
    Eigen::VectorXd beta_;
    double b0_ = 0.0;
    Eigen::VectorXd col_sq_;
    std::vector<char> in_working_;
    std::vector<Eigen::Index> working_;
    std::vector<Eigen::Index> active_;
    long sweeps_ = 0;
    double last_lambda_;
};

Eigen::VectorXd ones_if_empty(const Eigen::VectorXd& penalty, Eigen::Index p) {
    return penalty.size() == 0 ? Eigen::VectorXd::Ones(p) : penalty;
}

}  // namespace

Eigen::MatrixXd LassoState::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != coefficients.rows()) {
        throw DataError(fmt::format("lasso expects {} columns, got {}", coefficients.rows(), x.cols()));
    }
    Eigen::MatrixXd out = x * coefficients;
    out.rowwise() += intercepts.transpose();
    return out;
}

double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                  GlmLoss loss) {
    const double b0 = null_intercept(y, loss);
    Eigen::VectorXd resid(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) resid(i) = loss == GlmLoss::gaussian ? y(i) - b0 : y(i) - sigmoid(b0);
    const Eigen::VectorXd g = x.transpose() * resid / static_cast<double>(x.rows());
    double lmax = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) lmax = std::max(lmax, std::abs(g(j)) / penalty(j));
    return lmax;
}

std::vector<double> lambda_path(double lmax, int n, double ratio) {
    std::vector<double> path(static_cast<std::size_t>(std::max(n, 1)));
    if (n <= 1) {
        path[0] = lmax;
        return path;
    }
    const double log_hi = std::log(lmax);
    const double log_lo = std::log(lmax * ratio);
    for (int i = 0; i < n; ++i) {
        path[static_cast<std::size_t>(i)] = std::exp(log_hi + (log_lo - log_hi) * i / (n - 1));
    }
    path.front() = lmax;
    return path;
}

std::vector<LassoSolution> solve_lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                            const Eigen::VectorXd& penalty, const std::vector<double>& path,
                                            GlmLoss loss, const LassoOptions& options) {
    const Eigen::VectorXd w = ones_if_empty(penalty, x.cols());
    Solver solver(x, y, w, loss, options);
    std::vector<LassoSolution> out;
    out.reserve(path.size());
    for (double lambda : path) out.push_back(solver.solve(lambda));
    return out;
}

LassoSolution solve_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                          double lambda, GlmLoss loss, const LassoOptions& options) {
    const Eigen::VectorXd w = ones_if_empty(penalty, x.cols());
    Solver solver(x, y, w, loss, options);
    return solver.solve(lambda);
}

Eigen::VectorXd lasso_loss_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoSolution& s,
                                    GlmLoss loss) {
    Eigen::VectorXd eta = x * s.coefficients;
    eta.array() += s.intercept;
    Eigen::VectorXd mu(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) mu(i) = loss == GlmLoss::gaussian ? eta(i) : sigmoid(eta(i));
    return x.transpose() * (mu - y) / static_cast<double>(x.rows());
}

double lasso_kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                          const LassoSolution& s, GlmLoss loss) {
    const Eigen::VectorXd w = ones_if_empty(penalty, x.cols());
    const Eigen::VectorXd g = lasso_loss_gradient(x, y, s, loss);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        const double bound = s.lambda * w(j);
        const double b = s.coefficients(j);
        const double r = b == 0.0 ? std::max(0.0, std::abs(g(j)) - bound)
                                  : std::abs(g(j) + bound * (b > 0 ? 1.0 : -1.0));
        worst = std::max(worst, r);
    }
    return worst;
}

LassoSolution fit_lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                           GlmLoss loss, bool stratify, const LassoOptions& options) {
    const Eigen::VectorXd w = ones_if_empty(penalty, x.cols());
    const Eigen::Index n = x.rows();
    const double lmax = lambda_max(x, y, w, loss);
    if (!(lmax > 0.0)) {
        // Intercept-only data (constant target or all-zero features).
        return solve_lasso(x, y, w, 1.0, loss, options);
    }
    const std::vector<double> path = lambda_path(lmax, options.n_lambda, options.lambda_min_ratio);

    int k = std::min<int>(options.folds_internal, static_cast<int>(n));
    if (stratify) {
        const auto positives = static_cast<int>(y.sum());
        k = std::min({k, positives, static_cast<int>(n) - positives});
    }
    std::size_t best = path.size() - 1;
    if (k >= 2) {
        const auto plan = stacking::make_folds(y, stratify ? 2 : 0, k, options.seed);
        std::vector<double> cv_loss(path.size(), 0.0);
        for (int fold = 0; fold < k; ++fold) {
            const auto train = plan.train_indices(fold);
            const auto test = plan.test_indices(fold);
            Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), x.cols());
            Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
            for (std::size_t r = 0; r < train.size(); ++r) {
                xt.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(train[r]));
                yt(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(train[r]));
            }
            Eigen::MatrixXd xv(static_cast<Eigen::Index>(test.size()), x.cols());
            Eigen::VectorXd yv(static_cast<Eigen::Index>(test.size()));
            for (std::size_t r = 0; r < test.size(); ++r) {
                xv.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(test[r]));
                yv(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(test[r]));
            }
            const auto sols = solve_lasso_path(xt, yt, w, path, loss, options);
            for (std::size_t l = 0; l < path.size(); ++l) {
                Eigen::VectorXd eta = xv * sols[l].coefficients;
                eta.array() += sols[l].intercept;
                cv_loss[l] += mean_loss(yv, eta, loss) * static_cast<double>(test.size());
            }
        }
        best = static_cast<std::size_t>(std::min_element(cv_loss.begin(), cv_loss.end()) - cv_loss.begin());
    }
    const std::vector<double> prefix(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(best + 1));
    return solve_lasso_path(x, y, w, prefix, loss, options).back();
}

LassoState fit_lasso(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, const Eigen::VectorXd& penalty,
                     const Task& task, const LassoOptions& options) {
    LassoState state;
    state.penalty_factors = ones_if_empty(penalty, x_std.cols());
    const int k = task.output_columns();
    state.coefficients.resize(x_std.cols(), k);
    state.intercepts.resize(k);
    state.lambdas.resize(k);
    state.loss = task.is_classification() ? GlmLoss::logistic : GlmLoss::gaussian;
    for (int c = 0; c < k; ++c) {
        Eigen::VectorXd target = y;
        if (task.kind == TaskKind::binary) {
            target = (y.array() == 1.0).cast<double>();
        } else if (task.kind == TaskKind::multiclass) {
            target = (y.array() == static_cast<double>(c)).cast<double>();
        }
        LassoOptions opt = options;
        opt.seed = derive_seed(options.seed, "lasso-class", {static_cast<std::uint64_t>(c)});
        const LassoSolution sol = fit_lasso_cv(x_std, target, state.penalty_factors, state.loss,
                                               task.is_classification(), opt);
        state.coefficients.col(c) = sol.coefficients;
        state.intercepts(c) = sol.intercept;
        state.lambdas(c) = sol.lambda;
    }
    return state;
}

}  // namespace statsformer::learners
