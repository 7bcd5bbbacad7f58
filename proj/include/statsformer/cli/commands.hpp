#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "statsformer/core/config.hpp"
#include "statsformer/core/dataset.hpp"

namespace statsformer::cli {

struct DataArgs {
    std::filesystem::path dataset;
    std::string target;
    TaskKind task = TaskKind::binary;
};

/// Run configuration shared by fit, evaluate and simulate: an optional INI
/// file, then flag overrides.
struct RunArgs {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
};

struct ScoresArgs {
    DataArgs data;
    std::filesystem::path context;
    std::filesystem::path task_description;
    std::filesystem::path system_prompt;  ///< empty = built-in prompt
    std::filesystem::path user_template;  ///< empty = built-in template
    std::filesystem::path out;
    std::filesystem::path cache_dir;      ///< empty = <out>.cache
    bool from_cache = false;
    bool sqrt_batches = false;
    int batch_size = 40;
    int trials = 5;
    int retries = 5;
    int concurrency = 5;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o";
    std::optional<double> temperature = 0.0;
    std::string api_key_env = "STATSFORMER_API_KEY";
    double timeout_seconds = 120.0;
};

struct FitArgs {
    DataArgs data;
    RunArgs run;
    std::filesystem::path scores;
    bool no_prior = false;
    bool invert = false;
    std::filesystem::path out;
};

struct PredictArgs {
    std::filesystem::path model;
    std::filesystem::path input;
    std::filesystem::path out;
};

struct EvaluateArgs {
    DataArgs data;
    RunArgs run;
    std::filesystem::path scores;            ///< required unless every method is prior-free
    std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double test_ratio = 0.2;
    int seeds = 10;
    std::vector<std::string> methods{"statsformer", "noprior"};
    std::string baseline = "noprior";
    std::filesystem::path records_out;
    std::filesystem::path summary_out;
};

struct SimulateArgs {
    std::string experiment = "oracle";       ///< oracle | adversarial
    RunArgs run;
    std::string setting = "100,1000,20,0.2";  ///< n,p,phat,c
    int replicates = 20;
    std::uint64_t seed = 0;                   ///< replicate r uses seed + r
    std::filesystem::path records_out;
    std::filesystem::path summary_out;
};

/// Each command writes its summary to `out` and warnings to `err`.
/// Errors are thrown as statsformer::Error subclasses.
void cmd_scores(const ScoresArgs& args, std::ostream& out, std::ostream& err);
void cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
void cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err);
void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);
void cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

/// "0.3:0.7" (inclusive, step 0.1), "a:b:step", or a comma list.
std::vector<double> parse_ratios(const std::string& text);

/// "n,p,phat,c".
struct SyntheticSetting {
    int n = 0;
    int p = 0;
    int p_hat = 0;
    double c = 0.0;
};
SyntheticSetting parse_setting(const std::string& text);

RunConfig resolve_run_config(const RunArgs& args);

}  // namespace statsformer::cli
