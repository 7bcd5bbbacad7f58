#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/config.hpp"
#include "statsformer/core/dataset.hpp"
#include "statsformer/evalsim/metrics.hpp"

namespace statsformer::evalsim {

struct SyntheticSpec {
    int n = 100;
    int p = 1000;
    int p_hat = 20;  ///< number of informative features
    double c = 0.2;  ///< target fraction of positive labels
    std::uint64_t seed = 0;

    void validate() const;
    std::string name() const;
};

struct OracleProblem {
    Dataset data;
    Eigen::VectorXd v_star;        ///< signed generating coefficients
    FeaturePrior prior;            ///< |V*|
    std::vector<int> informative;  ///< sorted informative indices
    Eigen::VectorXd signal;        ///< tanh(X) V*
    int attempts = 1;
};

/// Draws X ~ N(mu, diag sigma^2) with mu ~ U[-10, 10], sigma ~ U[0.5, 5];
/// V*_i ~ U([-5,-0.5] u [0.5,5]) + N(0, 0.1) on the informative set and
/// N(0, 0.1) elsewhere; labels 1{tanh(X) V* + noise > (1-c)-quantile}.
OracleProblem generate_oracle_problem(const SyntheticSpec& spec);

/// Row indices of a train/test split.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    /// Hex digest of both index lists.
    std::string fingerprint() const;
};

/// Per-class shuffle, then the first round(fraction * n_c) rows of each class
/// train and the rest test (one block for regression).
Split stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed);

/// Method identifiers understood by the experiment runners.
inline constexpr const char* kMethodStatsformer = "statsformer";
inline constexpr const char* kMethodNoPrior = "noprior";
inline constexpr const char* kMethodAdversarial = "adversarial";

/// Prior used by a method: v, the uniform prior, or invert_prior(v).
FeaturePrior method_prior(const std::string& method, const FeaturePrior& v);

/// Fits the pipeline on `split.train` with the method's prior and scores `split.test`.
/// Classification caps the fold count at the smallest training class (at least 2).
std::vector<ExperimentRecord> run_method(const Dataset& d, const FeaturePrior& v, const Split& split,
                                         const std::string& method, const std::string& dataset_id,
                                         double train_ratio, std::uint64_t seed, const RunConfig& rc);

/// Replicate r uses problem seed spec.seed + r and a 50/50 stratified split;
/// both arms share the split and the pipeline seed.
std::vector<ExperimentRecord> run_oracle_experiment(const SyntheticSpec& spec, int replicates, const RunConfig& rc);

/// Inverted prior against the uniform prior on 50/50 stratified splits,
/// one per seed in `seeds`.
std::vector<ExperimentRecord> run_adversarial_experiment(const Dataset& d, const FeaturePrior& v,
                                                         const std::vector<std::uint64_t>& seeds, const RunConfig& rc,
                                                         const std::string& dataset_id = "dataset");

/// Synthetic variant: each replicate draws an oracle problem and compares
/// invert_prior(|V*|) with the uniform prior.
std::vector<ExperimentRecord> run_adversarial_oracle_experiment(const SyntheticSpec& spec, int replicates,
                                                                const RunConfig& rc);

struct SplitSpec {
    std::vector<double> train_ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double test_ratio = 0.2;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int min_per_class = 4;
};

/// Per seed: a fixed stratified test set of test_ratio, and nested stratified
/// training subsets for each ratio. Infeasible ratios are skipped and
/// reported through `skipped` (each entry names the ratio and reason).
struct SweepPlan {
    struct Cell {
        double train_ratio = 0.0;
        std::uint64_t seed = 0;
        Split split;
    };
    std::vector<Cell> cells;
    std::vector<std::string> skipped;
};

SweepPlan plan_sweep(const Dataset& d, const SplitSpec& spec);

/// Runs every method on every feasible (ratio, seed) cell.
std::vector<ExperimentRecord> run_sweep(const Dataset& d, const FeaturePrior& v, const SplitSpec& spec,
                                        const std::vector<std::string>& methods, const RunConfig& rc,
                                        const std::string& dataset_id = "dataset",
                                        std::vector<std::string>* skipped = nullptr);

}  // namespace statsformer::evalsim
