#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace statsformer {

/// Nonnegative per-feature importance scores aligned with Dataset::feature_names().
class FeaturePrior {
public:
    FeaturePrior() = default;
    explicit FeaturePrior(Eigen::VectorXd values);

    /// All-ones prior of length p; carries no relative information.
    static FeaturePrior uniform(Eigen::Index p);

    const Eigen::VectorXd& values() const { return values_; }
    Eigen::Index size() const { return values_.size(); }
    double operator[](Eigen::Index j) const { return values_(j); }

    /// True when every entry equals the first; such a prior cannot rank features.
    bool is_constant() const;

    /// Hex digest of the exact bit patterns, used for provenance logging.
    std::string fingerprint() const;

private:
    Eigen::VectorXd values_;
};

enum class LearnerKind { lasso, random_forest, gbt, kernel_svm };
enum class AdapterKind { penalty, feature_scale, feature_sample, instance_weight };

std::string to_string(LearnerKind kind);
std::string to_string(AdapterKind kind);
LearnerKind parse_learner_kind(const std::string& text);

/// Adapters a learner admits: lasso -> penalty, gbt -> feature_sample,
/// random_forest -> {feature_sample, instance_weight}, kernel_svm -> feature_scale.
std::vector<AdapterKind> admissible_adapters(LearnerKind kind);
bool supports_instance_weights(LearnerKind kind);

/// One column of the ensemble dictionary.
///
/// `adapters` lists the injection routes this configuration uses; random
/// forests carry both feature sampling (driven by alpha) and instance weights
/// (driven by beta). (alpha, beta) = (0, 0) is the prior-free learner.
struct LearnerConfig {
    LearnerKind learner = LearnerKind::lasso;
    std::vector<AdapterKind> adapters;
    double alpha = 0.0;
    double beta = 0.0;
    std::map<std::string, double> hyper;

    bool is_null() const { return alpha == 0.0 && beta == 0.0; }
    double hyper_or(const std::string& key, double fallback) const;
    std::string label() const;

    bool operator==(const LearnerConfig&) const = default;
};

enum class TiltMode { affine_blend, exact_tilt };
enum class StandardizeScope { global, per_fold };

struct RunConfig {
    int k_folds = 5;
    std::vector<double> alpha_grid{0.0, 1.0, 2.0};
    std::vector<double> beta_grid{0.0, 0.75, 1.0};
    std::vector<LearnerKind> learners{LearnerKind::lasso, LearnerKind::random_forest, LearnerKind::gbt,
                                      LearnerKind::kernel_svm};
    std::vector<double> meta_reg_grid = default_meta_reg_grid();
    std::uint64_t seed = 0;
    double epsilon = 1e-8;
    int q = 1;
    TiltMode tilt_mode = TiltMode::affine_blend;
    double tilt_target_fraction = 0.25;
    StandardizeScope standardize_scope = StandardizeScope::per_fold;
    std::size_t workers = 0;  ///< 0 = hardware concurrency

    /// 10 log-spaced values in [1e-4, 1e1].
    static std::vector<double> default_meta_reg_grid();

    /// Throws UsageError on any violated invariant.
    void validate() const;
};

/// Cartesian product of learners x alpha x beta (beta only for learners that
/// accept instance weights), deduplicated and ordered by (learner, alpha, beta).
std::vector<LearnerConfig> enumerate_dictionary(const RunConfig& rc);

/// Default learner hyperparameters recorded into each LearnerConfig.
std::map<std::string, double> default_hyper(LearnerKind kind);

/// Reads an INI-style file with [core], [priors] and [stacking] sections.
/// Keys not belonging to RunConfig are rejected.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

std::string to_string(TiltMode mode);
std::string to_string(StandardizeScope scope);

}  // namespace statsformer
