#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/config.hpp"

namespace statsformer::scores {

/// Substrings of `text` that form brace-balanced objects, outermost first,
/// in order of appearance. Braces inside JSON strings are ignored.
std::vector<std::string_view> balanced_objects(std::string_view text);

struct BatchScores {
    bool ok = false;
    std::vector<double> values;       ///< aligned with the expected names when ok
    std::vector<std::string> notes;   ///< out-of-range values and similar remarks
    std::string error;                ///< reason for rejection when not ok
};

/// Returns the first embedded object of shape {"scores": {name: number}}
/// whose lowercased keys cover every expected name. Never throws.
BatchScores parse_and_validate(std::string_view raw_text, const std::vector<std::string>& expected_names) noexcept;

/// Reads {"scores": {...}} and aligns it to `feature_names` case-insensitively.
/// Negative values are clamped to 0 and reported through `warnings`.
FeaturePrior load_scores_file(const std::filesystem::path& path, const std::vector<std::string>& feature_names,
                              std::vector<std::string>* warnings = nullptr);
FeaturePrior parse_scores_document(const std::string& text, const std::vector<std::string>& feature_names,
                                   std::vector<std::string>* warnings = nullptr);

/// Writes {"scores": {...}} in feature order with round-trip precision.
void write_scores_file(const std::filesystem::path& path, const std::vector<std::string>& feature_names,
                       const Eigen::VectorXd& values);
std::string scores_document(const std::vector<std::string>& feature_names, const Eigen::VectorXd& values);

std::string to_lower(std::string_view s);

}  // namespace statsformer::scores
