#include "statsformer/scores/parse.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "statsformer/error.hpp"

namespace statsformer::scores {
namespace {

using nlohmann::json;

/// Lowercased name -> score, or an error string when the schema does not hold.
struct SchemaCheck {
    std::map<std::string, double> scores;
    std::string error;
};

SchemaCheck check_schema(const json& doc) {
    SchemaCheck out;
    if (!doc.is_object()) {
        out.error = "top-level value is not an object";
        return out;
    }
    const auto it = doc.find("scores");
    if (it == doc.end() || !it->is_object()) {
        out.error = "missing \"scores\" object";
        return out;
    }
    for (const auto& [key, value] : it->items()) {
        if (!value.is_number() || value.is_boolean()) {
            out.error = fmt::format("score for \"{}\" is not a number", key);
            return out;
        }
        const double v = value.get<double>();
        if (!std::isfinite(v)) {
            out.error = fmt::format("score for \"{}\" is not finite", key);
            return out;
        }
        out.scores[to_lower(key)] = v;
    }
    return out;
}

}  // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string_view> balanced_objects(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t j = i;
        for (; j < text.size(); ++j) {
            const char c = text[j];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) break;
        }
        if (j >= text.size()) {
            ++i;  // unbalanced from here; try the next opening brace
            continue;
        }
        out.push_back(text.substr(i, j - i + 1));
        i = j + 1;
    }
    return out;
}

BatchScores parse_and_validate(std::string_view raw_text, const std::vector<std::string>& expected_names) noexcept {
    BatchScores result;
    try {
        std::vector<std::string> expected;
        expected.reserve(expected_names.size());
        for (const auto& name : expected_names) expected.push_back(to_lower(name));

        std::vector<std::string_view> pending = balanced_objects(raw_text);
        std::string last_error = "no JSON object found";
        for (std::size_t k = 0; k < pending.size(); ++k) {
            const std::string_view candidate = pending[k];
            json doc = json::parse(candidate.begin(), candidate.end(), nullptr, false);
            if (doc.is_discarded()) {
                // Not valid JSON as a whole; objects nested inside may still be.
                const auto inner = balanced_objects(candidate.substr(1, candidate.size() - 2));
                pending.insert(pending.begin() + static_cast<std::ptrdiff_t>(k) + 1, inner.begin(), inner.end());
                last_error = "invalid JSON";
                continue;
            }
            SchemaCheck check = check_schema(doc);
            if (!check.error.empty()) {
                last_error = check.error;
                continue;
            }
            std::vector<std::string> missing;
            for (const auto& name : expected) {
                if (!check.scores.count(name)) missing.push_back(name);
            }
            if (!missing.empty()) {
                last_error = fmt::format("missing {} expected feature(s), first \"{}\"", missing.size(), missing.front());
                continue;
            }
            result.values.reserve(expected.size());
            for (std::size_t j = 0; j < expected.size(); ++j) {
                const double v = check.scores[expected[j]];
                if (v < 0.1 || v > 1.0) {
                    result.notes.push_back(fmt::format("score {:g} for \"{}\" outside [0.1, 1]", v, expected_names[j]));
                }
                result.values.push_back(v);
            }
            result.ok = true;
            return result;
        }
        result.error = last_error;
    } catch (const std::exception& e) {
        result = BatchScores{};
        result.error = e.what();
    } catch (...) {
        result = BatchScores{};
        result.error = "unexpected parse failure";
    }
    return result;
}

FeaturePrior parse_scores_document(const std::string& text, const std::vector<std::string>& feature_names,
                                   std::vector<std::string>* warnings) {
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw DataError("scores file is not valid JSON");
    const SchemaCheck check = check_schema(doc);
    if (!check.error.empty()) throw DataError(fmt::format("malformed scores file: {}", check.error));
    std::vector<std::string> missing;
    Eigen::VectorXd values(static_cast<Eigen::Index>(feature_names.size()));
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        const auto it = check.scores.find(to_lower(feature_names[j]));
        if (it == check.scores.end()) {
            missing.push_back(feature_names[j]);
            continue;
        }
        double v = it->second;
        if (v < 0.0) {
            if (warnings) warnings->push_back(fmt::format("negative score {:g} for \"{}\" clamped to 0", v, feature_names[j]));
            v = 0.0;
        }
        values(static_cast<Eigen::Index>(j)) = v;
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t k = 0; k < missing.size(); ++k) list += (k ? ", " : "") + missing[k];
        throw DataError(fmt::format("scores file lacks {} feature(s): {}", missing.size(), list));
    }
    return FeaturePrior(std::move(values));
}

FeaturePrior load_scores_file(const std::filesystem::path& path, const std::vector<std::string>& feature_names,
                              std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open scores file {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scores_document(buf.str(), feature_names, warnings);
}

std::string scores_document(const std::vector<std::string>& feature_names, const Eigen::VectorXd& values) {
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (std::size_t j = 0; j < feature_names.size(); ++j) scores[feature_names[j]] = values(static_cast<Eigen::Index>(j));
    nlohmann::ordered_json doc;
    doc["scores"] = scores;
    return doc.dump(2) + "\n";
}

void write_scores_file(const std::filesystem::path& path, const std::vector<std::string>& feature_names,
                       const Eigen::VectorXd& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out << scores_document(feature_names, values);
}

}  // namespace statsformer::scores
