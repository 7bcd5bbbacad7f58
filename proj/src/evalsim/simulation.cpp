#include "statsformer/evalsim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>

#include <fmt/core.h>

#include "statsformer/error.hpp"
#include "statsformer/parallel.hpp"
#include "statsformer/priors/transforms.hpp"
#include "statsformer/random.hpp"
#include "statsformer/stacking/model.hpp"

namespace statsformer::evalsim {
namespace {

constexpr int kMaxAttempts = 10;

/// Linear-interpolation empirical quantile.
double quantile(std::vector<double> x, double q) {
    std::sort(x.begin(), x.end());
    const double pos = q * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double stddev(const Eigen::VectorXd& v) {
    return std::sqrt((v.array() - v.mean()).square().mean());
}

std::optional<OracleProblem> try_generate(const SyntheticSpec& spec, std::uint64_t sub_seed) {
    Rng rng(sub_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = spec.n;
    const int p = spec.p;

    Eigen::VectorXd mu(p);
    Eigen::VectorXd sigma(p);
    for (int j = 0; j < p; ++j) mu(j) = -10.0 + 20.0 * unif(rng);
    for (int j = 0; j < p; ++j) sigma(j) = 0.5 + 4.5 * unif(rng);
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = mu(j) + sigma(j) * normal(rng);
    }

    std::vector<int> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> informative(perm.begin(), perm.begin() + spec.p_hat);
    std::sort(informative.begin(), informative.end());

    Eigen::VectorXd v(p);
    for (int j = 0; j < p; ++j) v(j) = 0.1 * normal(rng);
    for (int j : informative) {
        const double magnitude = 0.5 + 4.5 * unif(rng);
        const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
        v(j) += sign * magnitude;
    }

    const Eigen::VectorXd signal = x.array().tanh().matrix() * v;
    const double sd = stddev(signal);
    if (!(sd > 0.0)) return std::nullopt;
    std::vector<double> noisy(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) noisy[static_cast<std::size_t>(i)] = signal(i) + 0.1 * sd * normal(rng);
    const double threshold = quantile(noisy, 1.0 - spec.c);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = noisy[static_cast<std::size_t>(i)] > threshold ? 1.0 : 0.0;
    const double positives = y.sum();
    if (positives < 1.0 || positives > n - 1.0) return std::nullopt;

    std::vector<std::string> names(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) names[static_cast<std::size_t>(j)] = fmt::format("x{}", j);
    Dataset data(std::move(x), std::move(y), std::move(names), Task::binary(), {"0", "1"});
    return OracleProblem{std::move(data), v, FeaturePrior(v.cwiseAbs()), std::move(informative), signal, 1};
}

std::size_t outer_workers(const RunConfig& rc) { return rc.workers == 0 ? default_workers() : rc.workers; }

/// Runs `count` independent cells, giving each a single-threaded pipeline when
/// the outer pool is parallel, and concatenates results in index order.
std::vector<ExperimentRecord> run_cells(std::size_t count, const RunConfig& rc,
                                        const std::function<std::vector<ExperimentRecord>(std::size_t, const RunConfig&)>& cell) {
    RunConfig inner = rc;
    const std::size_t workers = std::min(outer_workers(rc), std::max<std::size_t>(count, 1));
    if (workers > 1) inner.workers = 1;
    std::vector<std::vector<ExperimentRecord>> parts(count);
    parallel_for(count, workers, [&](std::size_t i) { parts[i] = cell(i, inner); });
    std::vector<ExperimentRecord> out;
    for (auto& part : parts) out.insert(out.end(), part.begin(), part.end());
    return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

/// Row indices grouped by class (a single group for regression), each shuffled.
std::vector<std::vector<std::size_t>> shuffled_groups(const Dataset& d, std::uint64_t seed) {
    Rng rng(seed);
    const int groups = d.task().is_classification() ? d.task().n_classes : 1;
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(groups));
    for (std::size_t i = 0; i < d.n(); ++i) {
        out[d.task().is_classification() ? static_cast<std::size_t>(d.label(i)) : 0].push_back(i);
    }
    for (auto& g : out) std::shuffle(g.begin(), g.end(), rng);
    return out;
}

std::size_t round_count(double fraction, std::size_t size) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(size)));
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n < 2 || p < 1) throw UsageError("synthetic setting needs n >= 2 and p >= 1");
    if (p_hat < 1 || p_hat > p) throw UsageError("synthetic setting needs 1 <= p_hat <= p");
    if (!(c > 0.0 && c < 1.0)) throw UsageError("balance coefficient c must lie in (0, 1)");
}

std::string SyntheticSpec::name() const { return fmt::format("oracle(n={},p={},phat={},c={:g})", n, p, p_hat, c); }

OracleProblem generate_oracle_problem(const SyntheticSpec& spec) {
    spec.validate();
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        auto problem = try_generate(spec, derive_seed(spec.seed, "oracle-problem", {static_cast<std::uint64_t>(attempt)}));
        if (problem) {
            problem->attempts = attempt + 1;
            return std::move(*problem);
        }
    }
    throw NumericError(fmt::format("oracle generator produced a degenerate signal {} times", kMaxAttempts));
}

std::string Split::fingerprint() const {
    std::uint64_t h = mix64(train.size() * 0x9e37ULL + test.size());
    for (std::size_t i : train) h = mix64(h ^ i);
    h = mix64(h ^ 0xa5a5a5a5ULL);
    for (std::size_t i : test) h = mix64(h ^ i);
    return fmt::format("{:016x}", h);
}

Split stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
    Split s;
    for (const auto& g : shuffled_groups(d, seed)) {
        const std::size_t k = round_count(train_fraction, g.size());
        s.train.insert(s.train.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(k));
        s.test.insert(s.test.end(), g.begin() + static_cast<std::ptrdiff_t>(k), g.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

FeaturePrior method_prior(const std::string& method, const FeaturePrior& v) {
    if (method == kMethodStatsformer) return v;
    if (method == kMethodNoPrior) return FeaturePrior::uniform(v.size());
    if (method == kMethodAdversarial) return priors::invert_prior(v);
    throw UsageError(fmt::format("unknown method '{}' (expected statsformer, noprior or adversarial)", method));
}

std::vector<ExperimentRecord> run_method(const Dataset& d, const FeaturePrior& v, const Split& split,
                                         const std::string& method, const std::string& dataset_id,
                                         double train_ratio, std::uint64_t seed, const RunConfig& rc) {
    const Dataset train = d.subset(split.train);
    const Eigen::MatrixXd x_test = take_rows(d.features(), split.test);
    Eigen::VectorXd y_test(static_cast<Eigen::Index>(split.test.size()));
    for (std::size_t r = 0; r < split.test.size(); ++r) y_test(static_cast<Eigen::Index>(r)) = d.targets()(static_cast<Eigen::Index>(split.test[r]));

    RunConfig cfg = rc;
    if (train.task().is_classification()) {
        std::vector<int> counts(static_cast<std::size_t>(train.task().n_classes), 0);
        for (std::size_t i = 0; i < train.n(); ++i) ++counts[static_cast<std::size_t>(train.label(i))];
        cfg.k_folds = std::max(2, std::min(cfg.k_folds, *std::min_element(counts.begin(), counts.end())));
    }
    const auto fit = stacking::fit_statsformer(train, method_prior(method, v), cfg);
    const auto pred = stacking::predict_model(fit.model, x_test);
    std::vector<ExperimentRecord> out;
    auto add = [&](const std::string& metric, double value) {
        out.push_back({dataset_id, method, train_ratio, seed, metric, value});
    };
    switch (d.task().kind) {
        case TaskKind::regression:
            add("mse", mse(y_test, pred.values));
            break;
        case TaskKind::binary: {
            Eigen::VectorXd labels(static_cast<Eigen::Index>(pred.labels.size()));
            for (std::size_t i = 0; i < pred.labels.size(); ++i) labels(static_cast<Eigen::Index>(i)) = pred.labels[i];
            add("accuracy", accuracy(y_test, labels));
            add("auroc", auroc(y_test, pred.scores.col(0)));
            break;
        }
        case TaskKind::multiclass: {
            Eigen::VectorXd labels(static_cast<Eigen::Index>(pred.labels.size()));
            for (std::size_t i = 0; i < pred.labels.size(); ++i) labels(static_cast<Eigen::Index>(i)) = pred.labels[i];
            add("accuracy", accuracy(y_test, labels));
            break;
        }
    }
    return out;
}

std::vector<ExperimentRecord> run_oracle_experiment(const SyntheticSpec& spec, int replicates, const RunConfig& rc) {
    if (replicates < 1) throw UsageError("replicates must be >= 1");
    return run_cells(static_cast<std::size_t>(replicates), rc, [&](std::size_t r, const RunConfig& inner) {
        SyntheticSpec s = spec;
        s.seed = spec.seed + r;
        const OracleProblem problem = generate_oracle_problem(s);
        const Split split = stratified_split(problem.data, 0.5, derive_seed(s.seed, "oracle-split"));
        RunConfig cfg = inner;
        cfg.seed = derive_seed(s.seed, "oracle-pipeline");
        auto out = run_method(problem.data, problem.prior, split, kMethodStatsformer, spec.name(), 0.5, s.seed, cfg);
        auto base = run_method(problem.data, problem.prior, split, kMethodNoPrior, spec.name(), 0.5, s.seed, cfg);
        out.insert(out.end(), base.begin(), base.end());
        return out;
    });
}

std::vector<ExperimentRecord> run_adversarial_experiment(const Dataset& d, const FeaturePrior& v,
                                                         const std::vector<std::uint64_t>& seeds, const RunConfig& rc,
                                                         const std::string& dataset_id) {
    if (seeds.empty()) throw UsageError("adversarial experiment needs at least one seed");
    return run_cells(seeds.size(), rc, [&](std::size_t r, const RunConfig& inner) {
        const std::uint64_t seed = seeds[r];
        const Split split = stratified_split(d, 0.5, derive_seed(seed, "adversarial-split"));
        RunConfig cfg = inner;
        cfg.seed = derive_seed(seed, "adversarial-pipeline");
        auto out = run_method(d, v, split, kMethodAdversarial, dataset_id, 0.5, seed, cfg);
        auto base = run_method(d, v, split, kMethodNoPrior, dataset_id, 0.5, seed, cfg);
        out.insert(out.end(), base.begin(), base.end());
        return out;
    });
}

std::vector<ExperimentRecord> run_adversarial_oracle_experiment(const SyntheticSpec& spec, int replicates,
                                                                const RunConfig& rc) {
    if (replicates < 1) throw UsageError("replicates must be >= 1");
    return run_cells(static_cast<std::size_t>(replicates), rc, [&](std::size_t r, const RunConfig& inner) {
        SyntheticSpec s = spec;
        s.seed = spec.seed + r;
        const OracleProblem problem = generate_oracle_problem(s);
        const Split split = stratified_split(problem.data, 0.5, derive_seed(s.seed, "oracle-split"));
        RunConfig cfg = inner;
        cfg.seed = derive_seed(s.seed, "oracle-pipeline");
        auto out = run_method(problem.data, problem.prior, split, kMethodAdversarial, spec.name(), 0.5, s.seed, cfg);
        auto base = run_method(problem.data, problem.prior, split, kMethodNoPrior, spec.name(), 0.5, s.seed, cfg);
        out.insert(out.end(), base.begin(), base.end());
        return out;
    });
}

SweepPlan plan_sweep(const Dataset& d, const SplitSpec& spec) {
    if (!(spec.test_ratio > 0.0 && spec.test_ratio < 1.0)) throw UsageError("test ratio must lie in (0, 1)");
    SweepPlan plan;
    const bool classify = d.task().is_classification();
    for (double ratio : spec.train_ratios) {
        if (!(ratio > 0.0) || ratio + spec.test_ratio > 1.0 + 1e-12) {
            plan.skipped.push_back(fmt::format("ratio {:g}: exceeds 1 - test ratio {:g}", ratio, spec.test_ratio));
            continue;
        }
        std::string reason;
        std::vector<SweepPlan::Cell> cells;
        for (std::uint64_t seed : spec.seeds) {
            Split s;
            const auto groups = shuffled_groups(d, derive_seed(seed, "sweep-split"));
            for (std::size_t g = 0; g < groups.size() && reason.empty(); ++g) {
                const auto& rows = groups[g];
                const std::size_t n_test = round_count(spec.test_ratio, rows.size());
                const std::size_t n_train = std::min(round_count(ratio, rows.size()), rows.size() - n_test);
                if (classify && (n_test < static_cast<std::size_t>(spec.min_per_class) ||
                                 n_train < static_cast<std::size_t>(spec.min_per_class))) {
                    reason = fmt::format("ratio {:g}: class {} would have {} train / {} test samples (< {})", ratio, g,
                                         n_train, n_test, spec.min_per_class);
                    break;
                }
                s.test.insert(s.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
                s.train.insert(s.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test),
                               rows.begin() + static_cast<std::ptrdiff_t>(n_test + n_train));
            }
            if (!reason.empty()) break;
            if (s.train.size() < 2 || s.test.empty()) {
                reason = fmt::format("ratio {:g}: too few samples", ratio);
                break;
            }
            std::sort(s.train.begin(), s.train.end());
            std::sort(s.test.begin(), s.test.end());
            cells.push_back({ratio, seed, std::move(s)});
        }
        if (!reason.empty()) {
            plan.skipped.push_back(reason);
            continue;
        }
        plan.cells.insert(plan.cells.end(), cells.begin(), cells.end());
    }
    return plan;
}

std::vector<ExperimentRecord> run_sweep(const Dataset& d, const FeaturePrior& v, const SplitSpec& spec,
                                        const std::vector<std::string>& methods, const RunConfig& rc,
                                        const std::string& dataset_id, std::vector<std::string>* skipped) {
    if (methods.empty()) throw UsageError("no methods to evaluate");
    for (const auto& m : methods) method_prior(m, v);
    const SweepPlan plan = plan_sweep(d, spec);
    if (skipped) *skipped = plan.skipped;
    if (plan.cells.empty()) throw DataError("no feasible training ratios");
    return run_cells(plan.cells.size(), rc, [&](std::size_t i, const RunConfig& inner) {
        const auto& cell = plan.cells[i];
        RunConfig cfg = inner;
        cfg.seed = derive_seed(rc.seed, "sweep-pipeline", {cell.seed});
        std::vector<ExperimentRecord> out;
        for (const auto& m : methods) {
            auto part = run_method(d, v, cell.split, m, dataset_id, cell.train_ratio, cell.seed, cfg);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    });
}

}  // namespace statsformer::evalsim
