#include "statsformer/scores/prompts.hpp"

#include <fstream>
#include <sstream>
#include <string_view>
#include <utility>

#include <fmt/core.h>

#include "statsformer/error.hpp"

namespace statsformer::scores {
namespace {

std::string python_repr(const std::string& s) {
    const char quote = s.find('\'') != std::string::npos && s.find('"') == std::string::npos ? '"' : '\'';
    std::string out(1, quote);
    for (char c : s) {
        if (c == '\\' || c == quote) out += '\\';
        out += c;
    }
    out += quote;
    return out;
}

}  // namespace

const std::string& default_system_prompt() {
    static const std::string text =
        "You are an expert statistical reasoning assistant trained in both machine learning and scientific "
        "literature interpretation. Your task is to estimate feature importance for predictive modeling problems in "
        "high-dimensional, low-sample-size settings (such as biomedical prediction, genomics, or other sparse data "
        "domains).\n"
        "\n"
        "Your goals are:\n"
        "- **Scientific caution**: Prioritize well-established knowledge and plausible domain-specific/statistical "
        "rationale. Do not invent evidence or cite specific studies unless they are well-known and generalizable.\n"
        "- **Analytical rigor**: Reason about each feature in the context of the task using mechanistic, statistical, "
        "or empirical justification. Avoid overconfidence.\n"
        "- **Score calibration**: Assign scores conservatively. It is acceptable (and often desirable) that many "
        "features receive low scores if evidence of importance is weak or unclear.\n"
        "- **Faithful formatting**: Output strictly valid JSON in the exact format requested by the user prompt.\n"
        "\n"
        "Avoid:\n"
        "- Speculation or fabricated evidence.\n"
        "- Extraneous commentary or explanations outside of the JSON output.\n"
        "- Mentioning uncertainty explicitly in text (reflect uncertainty through the magnitude of scores).\n"
        "\n"
        "Your goal is to produce reasoned, evidence-based feature importance scores that can serve as priors for "
        "statistical modeling.\n";
    return text;
}

const std::string& default_user_template() {
    static const std::string text =
        "**Context**: {{context}}\n"
        "\n"
        "**Prediction Task**: {{task}}\n"
        "\n"
        "You are asked to assign importance scores to a set of features for use in a statistical prediction model "
        "(e.g., Lasso, XGBoost, or logistic regression). The data are high-dimensional with limited samples, so "
        "parsimony and caution are critical.\n"
        "\n"
        "**Objective**:\n"
        "For each feature in the provided list, assign an importance score between 0.1 and 1.0 (inclusive).\n"
        "- A score closer to 1.0 indicates strong, well-established relevance or a robust mechanistic rationale for "
        "predicting \"{{task}}\".\n"
        "- A score near 0.1 indicates weak, uncertain, or unsupported relevance.\n"
        "- Most features may appropriately receive low scores.\n"
        "\n"
        "**Reasoning Guidelines**:\n"
        "1. Base your assessment on established knowledge, logical domain reasoning, or widely accepted statistical "
        "principles.\n"
        "2. Avoid speculation or over-interpretation.\n"
        "3. You may reason internally but must output only the final scores.\n"
        "4. Do not skip any features.\n"
        "\n"
        "**Output Requirements**:\n"
        "- Output strictly valid JSON and nothing else.\n"
        "- Use the format provided below.\n"
        "\n"
        "**Output Format**:\n"
        "{\"scores\": {\n"
        "        \"FEATURE_NAME_01\": floating_point_score_value,\n"
        "        \"FEATURE_NAME_02\": floating_point_score_value,\n"
        "        ...one score per feature name.\n"
        "    }}\n"
        "\n"
        "**Features**:\n"
        "{{features}}\n";
    return text;
}

PromptBundle PromptBundle::defaults(std::string context, std::string task) {
    return {default_system_prompt(), default_user_template(), std::move(context), std::move(task)};
}

void PromptBundle::validate() const {
    for (const char* placeholder : {"{{context}}", "{{task}}", "{{features}}"}) {
        if (user_template.find(placeholder) == std::string::npos) {
            throw UsageError(fmt::format("user prompt template lacks the {} placeholder", placeholder));
        }
    }
}

std::string PromptBundle::render(const std::vector<std::string>& features, int attempt) const {
    const std::pair<std::string_view, std::string> fills[] = {
        {"{{context}}", context}, {"{{task}}", task}, {"{{features}}", python_list(features)}};
    std::string out = attempt > 0 ? fmt::format("Retry {}:\n", attempt) : std::string();
    const std::string_view tmpl = user_template;
    for (std::size_t pos = 0; pos < tmpl.size();) {
        bool matched = false;
        for (const auto& [key, value] : fills) {
            if (tmpl.substr(pos, key.size()) == key) {
                out += value;
                pos += key.size();
                matched = true;
                break;
            }
        }
        if (!matched) out += tmpl[pos++];
    }
    return out;
}

std::string python_list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += python_repr(items[i]);
    }
    return out + "]";
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace statsformer::scores
