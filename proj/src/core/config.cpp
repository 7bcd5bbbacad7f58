#include "statsformer/core/config.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>
#include <fmt/format.h>

#include "statsformer/error.hpp"
#include "statsformer/random.hpp"

namespace statsformer {

FeaturePrior::FeaturePrior(Eigen::VectorXd values) : values_(std::move(values)) {
    for (Eigen::Index j = 0; j < values_.size(); ++j) {
        if (!std::isfinite(values_(j)) || values_(j) < 0.0) {
            throw DataError(fmt::format("feature prior entry {} is {} (must be finite and >= 0)", j, values_(j)));
        }
    }
}

FeaturePrior FeaturePrior::uniform(Eigen::Index p) { return FeaturePrior(Eigen::VectorXd::Ones(p)); }

bool FeaturePrior::is_constant() const {
    for (Eigen::Index j = 1; j < values_.size(); ++j) {
        if (values_(j) != values_(0)) return false;
    }
    return true;
}

std::string FeaturePrior::fingerprint() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(values_.size()));
    for (Eigen::Index j = 0; j < values_.size(); ++j) {
        h = mix64(h ^ std::bit_cast<std::uint64_t>(values_(j)));
    }
    return fmt::format("{:016x}", h);
}

std::string to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::lasso: return "lasso";
        case LearnerKind::random_forest: return "random_forest";
        case LearnerKind::gbt: return "gbt";
        case LearnerKind::kernel_svm: return "kernel_svm";
    }
    return "lasso";
}

std::string to_string(AdapterKind kind) {
    switch (kind) {
        case AdapterKind::penalty: return "penalty";
        case AdapterKind::feature_scale: return "feature_scale";
        case AdapterKind::feature_sample: return "feature_sample";
        case AdapterKind::instance_weight: return "instance_weight";
    }
    return "penalty";
}

LearnerKind parse_learner_kind(const std::string& text) {
    if (text == "lasso") return LearnerKind::lasso;
    if (text == "random_forest" || text == "rf") return LearnerKind::random_forest;
    if (text == "gbt" || text == "xgboost") return LearnerKind::gbt;
    if (text == "kernel_svm" || text == "svm") return LearnerKind::kernel_svm;
    throw UsageError(fmt::format("unknown learner '{}'", text));
}

std::string to_string(TiltMode mode) {
    return mode == TiltMode::exact_tilt ? "exact_tilt" : "affine_blend";
}

std::string to_string(StandardizeScope scope) {
    return scope == StandardizeScope::global ? "global" : "per_fold";
}

std::vector<AdapterKind> admissible_adapters(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::lasso: return {AdapterKind::penalty};
        case LearnerKind::random_forest: return {AdapterKind::feature_sample, AdapterKind::instance_weight};
        case LearnerKind::gbt: return {AdapterKind::feature_sample};
        case LearnerKind::kernel_svm: return {AdapterKind::feature_scale};
    }
    return {};
}

bool supports_instance_weights(LearnerKind kind) { return kind == LearnerKind::random_forest; }

double LearnerConfig::hyper_or(const std::string& key, double fallback) const {
    const auto it = hyper.find(key);
    return it == hyper.end() ? fallback : it->second;
}

std::string LearnerConfig::label() const {
    return fmt::format("{}(alpha={:g},beta={:g})", to_string(learner), alpha, beta);
}

std::map<std::string, double> default_hyper(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::lasso: return {{"folds_internal", 5}, {"n_lambda", 100}, {"lambda_min_ratio", 1e-2}};
        case LearnerKind::random_forest: return {{"n_trees", 50}, {"oversample_factor", 1}, {"leaf_smoothing", 1}};
        case LearnerKind::gbt:
            return {{"n_rounds", 50}, {"max_depth", 6}, {"learning_rate", 0.3}, {"reg_lambda", 1},
                    {"min_child_weight", 1}};
        case LearnerKind::kernel_svm: return {{"C", 1}, {"gamma", 0}, {"svr_epsilon", 0.1}};
    }
    return {};
}

std::vector<double> RunConfig::default_meta_reg_grid() {
    std::vector<double> grid(10);
    for (int i = 0; i < 10; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -4.0 + 5.0 * i / 9.0);
    return grid;
}

void RunConfig::validate() const {
    if (k_folds < 2) throw UsageError("k_folds must be >= 2");
    if (std::find(alpha_grid.begin(), alpha_grid.end(), 0.0) == alpha_grid.end()) {
        throw UsageError("alpha_grid must contain 0 (null configuration)");
    }
    if (std::find(beta_grid.begin(), beta_grid.end(), 0.0) == beta_grid.end()) {
        throw UsageError("beta_grid must contain 0 (null configuration)");
    }
    for (double a : alpha_grid) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw UsageError("alpha values must be finite and >= 0");
    }
    for (double b : beta_grid) {
        if (!(b >= 0.0 && b <= 1.0)) throw UsageError("beta values must lie in [0, 1]");
    }
    if (learners.empty()) throw UsageError("empty learner set");
    if (meta_reg_grid.empty()) throw UsageError("meta_reg_grid must not be empty");
    for (double r : meta_reg_grid) {
        if (!(r > 0.0) || !std::isfinite(r)) throw UsageError("meta_reg_grid values must be positive");
    }
    if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
    if (q < 1) throw UsageError("q must be >= 1");
    if (!(tilt_target_fraction > 0.0 && tilt_target_fraction <= 1.0)) {
        throw UsageError("tilt_target_fraction must lie in (0, 1]");
    }
}

std::vector<LearnerConfig> enumerate_dictionary(const RunConfig& rc) {
    if (rc.learners.empty()) throw UsageError("empty learner set");
    const std::set<LearnerKind> learners(rc.learners.begin(), rc.learners.end());
    std::set<double> alphas(rc.alpha_grid.begin(), rc.alpha_grid.end());
    std::set<double> betas(rc.beta_grid.begin(), rc.beta_grid.end());
    alphas.insert(0.0);
    betas.insert(0.0);

    std::vector<LearnerConfig> out;
    for (LearnerKind kind : learners) {
        const std::set<double> kind_betas = supports_instance_weights(kind) ? betas : std::set<double>{0.0};
        for (double a : alphas) {
            for (double b : kind_betas) {
                LearnerConfig cfg;
                cfg.learner = kind;
                cfg.adapters = admissible_adapters(kind);
                cfg.alpha = a;
                cfg.beta = b;
                cfg.hyper = default_hyper(kind);
                out.push_back(std::move(cfg));
            }
        }
    }
    return out;
}

namespace {

std::vector<double> parse_number_list(const std::string& key, const std::string& text) {
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(","));
    std::vector<double> out;
    for (auto& part : parts) {
        boost::trim(part);
        if (part.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw UsageError(fmt::format("config key '{}': '{}' is not a number", key, part));
        }
    }
    return out;
}

template <class T>
T parse_scalar(const std::string& key, const std::string& text) {
    std::istringstream in(boost::trim_copy(text));
    T value{};
    if (!(in >> value) || !in.eof()) {
        throw UsageError(fmt::format("config key '{}': cannot parse '{}'", key, text));
    }
    return value;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw UsageError(fmt::format("malformed config file: {}", e.message()));
    }
    static const std::map<std::string, std::set<std::string>> schema{
        {"core", {"seed", "learners", "workers"}},
        {"priors", {"alpha_grid", "beta_grid", "epsilon", "q", "tilt_mode", "tilt_target_fraction"}},
        {"stacking", {"k_folds", "meta_reg_grid", "standardize_scope"}},
    };
    RunConfig rc;
    for (const auto& [section, body] : tree) {
        const auto it = schema.find(section);
        if (it == schema.end() || body.empty()) {
            throw UsageError(fmt::format("unknown config section '{}'", section));
        }
        for (const auto& [key, node] : body) {
            if (!it->second.contains(key)) {
                throw UsageError(fmt::format("unknown config key '{}' in section [{}]", key, section));
            }
            const std::string value = node.get_value<std::string>();
            if (key == "seed") {
                rc.seed = parse_scalar<std::uint64_t>(key, value);
            } else if (key == "workers") {
                rc.workers = parse_scalar<std::size_t>(key, value);
            } else if (key == "learners") {
                std::vector<std::string> names;
                boost::split(names, value, boost::is_any_of(","));
                rc.learners.clear();
                for (auto& name : names) {
                    boost::trim(name);
                    if (!name.empty()) rc.learners.push_back(parse_learner_kind(name));
                }
            } else if (key == "alpha_grid") {
                rc.alpha_grid = parse_number_list(key, value);
            } else if (key == "beta_grid") {
                rc.beta_grid = parse_number_list(key, value);
            } else if (key == "epsilon") {
                rc.epsilon = parse_scalar<double>(key, value);
            } else if (key == "q") {
                rc.q = parse_scalar<int>(key, value);
            } else if (key == "tilt_mode") {
                const std::string mode = boost::trim_copy(value);
                if (mode == "affine_blend") rc.tilt_mode = TiltMode::affine_blend;
                else if (mode == "exact_tilt") rc.tilt_mode = TiltMode::exact_tilt;
                else throw UsageError(fmt::format("unknown tilt_mode '{}'", mode));
            } else if (key == "tilt_target_fraction") {
                rc.tilt_target_fraction = parse_scalar<double>(key, value);
            } else if (key == "k_folds") {
                rc.k_folds = parse_scalar<int>(key, value);
            } else if (key == "meta_reg_grid") {
                rc.meta_reg_grid = parse_number_list(key, value);
            } else if (key == "standardize_scope") {
                const std::string scope = boost::trim_copy(value);
                if (scope == "global") rc.standardize_scope = StandardizeScope::global;
                else if (scope == "per_fold") rc.standardize_scope = StandardizeScope::per_fold;
                else throw UsageError(fmt::format("unknown standardize_scope '{}'", scope));
            }
        }
    }
    rc.validate();
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError(fmt::format("cannot open config file '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

}  // namespace statsformer
