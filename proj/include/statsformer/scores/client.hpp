#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statsformer/core/config.hpp"
#include "statsformer/scores/prompts.hpp"

namespace statsformer::scores {

struct ScoreRequestPlan {
    std::vector<std::vector<std::string>> batches;
    int batch_size = 40;
    int trials = 5;
    int retries_per_batch = 5;  ///< total attempts per (trial, batch)
    int concurrency = 5;

    std::size_t feature_count() const;
};

/// ceil(p / batch_size) order-preserving batches.
ScoreRequestPlan plan_batches(const std::vector<std::string>& feature_names, int batch_size);

/// ceil(p / ceil(sqrt(p))), giving at most about sqrt(p) batches.
int sqrt_batch_size(std::size_t p);

/// Outcome of one HTTP exchange.
struct TransportResponse {
    int status = 0;            ///< HTTP status, 0 when the request never completed
    std::string body;
    std::string error;         ///< transport-level failure description
};

/// Sends a chat-completion request body and returns the raw response.
/// Implementations must be safe to call from several threads.
class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportResponse post(const std::string& request_body) = 0;
};

struct ClientOptions {
    std::string model = "gpt-4o";
    std::optional<double> temperature = 0.0;
    std::filesystem::path cache_dir;   ///< empty disables caching
    std::string dataset_fingerprint;   ///< recorded in and checked against cache entries
    bool cache_only = false;           ///< fail instead of issuing requests on a cache miss
};

struct Attempt {
    int attempt = 0;
    int status = 0;
    std::string response;
    std::string outcome;  ///< "ok" or the failure reason
};

struct BatchTranscript {
    int trial = 0;
    int batch = 0;
    std::vector<std::string> features;
    std::string system_prompt;
    std::vector<std::string> prompts;  ///< one per attempt
    std::vector<Attempt> attempts;
    std::vector<double> scores;
    bool from_cache = false;
};

struct FetchResult {
    Eigen::VectorXd values;                   ///< trial means, feature order of the plan
    std::vector<BatchTranscript> transcripts; ///< (trial, batch) order
    std::size_t requests = 0;                 ///< network requests issued
    std::vector<std::string> warnings;
};

/// Builds the OpenAI-compatible chat-completion request body.
std::string chat_request_body(const std::string& model, const std::string& system_prompt, const std::string& user_prompt,
                              const std::optional<double>& temperature);

/// Extracts choices[0].message.content; empty optional when absent.
std::optional<std::string> chat_response_content(const std::string& body);

/// Queries every (trial, batch) with retries, averages trials, and caches
/// transcripts as t{trial}_b{batch}.json. Throws NetworkError when a batch
/// exhausts its attempts or authentication fails.
FetchResult fetch_scores(const ScoreRequestPlan& plan, const PromptBundle& prompts, const ClientOptions& options,
                         Transport* transport);

std::filesystem::path cache_file(const std::filesystem::path& dir, int trial, int batch);

}  // namespace statsformer::scores
