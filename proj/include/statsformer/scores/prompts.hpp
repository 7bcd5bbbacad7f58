#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace statsformer::scores {

/// System prompt and user template; the template uses {{context}},
/// {{task}} and {{features}} placeholders.
struct PromptBundle {
    std::string system_prompt;
    std::string user_template;
    std::string context;
    std::string task;

    /// Default system prompt and user template with the given descriptions.
    static PromptBundle defaults(std::string context, std::string task);

    /// Throws UsageError unless each placeholder appears in the template.
    void validate() const;

    /// Fills the template; `attempt` > 0 prefixes the retry index.
    std::string render(const std::vector<std::string>& features, int attempt = 0) const;
};

const std::string& default_system_prompt();
const std::string& default_user_template();

/// ['a', 'b'] with Python string quoting.
std::string python_list(const std::vector<std::string>& items);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace statsformer::scores
