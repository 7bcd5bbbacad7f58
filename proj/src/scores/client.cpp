#include "statsformer/scores/client.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "statsformer/error.hpp"
#include "statsformer/parallel.hpp"
#include "statsformer/scores/parse.hpp"

namespace statsformer::scores {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

void write_cache(const std::filesystem::path& path, const BatchTranscript& t, const ClientOptions& options) {
    ordered doc;
    doc["dataset_fingerprint"] = options.dataset_fingerprint;
    doc["model"] = options.model;
    doc["trial"] = t.trial;
    doc["batch"] = t.batch;
    doc["features"] = t.features;
    doc["system_prompt"] = t.system_prompt;
    ordered attempts = ordered::array();
    for (std::size_t a = 0; a < t.attempts.size(); ++a) {
        attempts.push_back({{"attempt", t.attempts[a].attempt},
                            {"request", t.prompts[a]},
                            {"status", t.attempts[a].status},
                            {"response", t.attempts[a].response},
                            {"outcome", t.attempts[a].outcome}});
    }
    doc["attempts"] = attempts;
    doc["scores"] = t.scores;
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError(fmt::format("cannot write cache file {}", tmp.string()));
        out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::optional<BatchTranscript> read_cache(const std::filesystem::path& path, int trial, int batch,
                                          const std::vector<std::string>& features, const ClientOptions& options) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const json doc = json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw DataError(fmt::format("corrupt cache file {}", path.string()));
    try {
        if (doc.at("dataset_fingerprint").get<std::string>() != options.dataset_fingerprint ||
            doc.at("model").get<std::string>() != options.model ||
            doc.at("features").get<std::vector<std::string>>() != features) {
            throw DataError(fmt::format("cache file {} belongs to a different dataset, model or batching; "
                                        "use a separate cache directory",
                                        path.string()));
        }
        BatchTranscript t;
        t.trial = trial;
        t.batch = batch;
        t.features = features;
        t.system_prompt = doc.value("system_prompt", "");
        for (const auto& a : doc.at("attempts")) {
            t.prompts.push_back(a.at("request").get<std::string>());
            t.attempts.push_back({a.at("attempt").get<int>(), a.at("status").get<int>(),
                                  a.at("response").get<std::string>(), a.at("outcome").get<std::string>()});
        }
        t.scores = doc.at("scores").get<std::vector<double>>();
        if (t.scores.size() != features.size()) throw DataError(fmt::format("cache file {} has wrong score count", path.string()));
        t.from_cache = true;
        return t;
    } catch (const json::exception& e) {
        throw DataError(fmt::format("corrupt cache file {}: {}", path.string(), e.what()));
    }
}

}  // namespace

std::size_t ScoreRequestPlan::feature_count() const {
    std::size_t total = 0;
    for (const auto& b : batches) total += b.size();
    return total;
}

ScoreRequestPlan plan_batches(const std::vector<std::string>& feature_names, int batch_size) {
    if (batch_size < 1) throw UsageError("batch size must be >= 1");
    ScoreRequestPlan plan;
    plan.batch_size = batch_size;
    for (std::size_t start = 0; start < feature_names.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(feature_names.size(), start + static_cast<std::size_t>(batch_size));
        plan.batches.emplace_back(feature_names.begin() + static_cast<std::ptrdiff_t>(start),
                                  feature_names.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return plan;
}

int sqrt_batch_size(std::size_t p) {
    if (p == 0) return 1;
    const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    return static_cast<int>((p + root - 1) / root);
}

std::filesystem::path cache_file(const std::filesystem::path& dir, int trial, int batch) {
    return dir / fmt::format("t{}_b{}.json", trial, batch);
}

std::string chat_request_body(const std::string& model, const std::string& system_prompt, const std::string& user_prompt,
                              const std::optional<double>& temperature) {
    ordered body;
    body["model"] = model;
    body["messages"] = ordered::array({ordered{{"role", "system"}, {"content", system_prompt}},
                                       ordered{{"role", "user"}, {"content", user_prompt}}});
    if (temperature) body["temperature"] = *temperature;
    return body.dump();
}

std::optional<std::string> chat_response_content(const std::string& body) {
    const json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    const auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) return std::nullopt;
    const json& first = (*choices)[0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) return std::nullopt;
    const json& message = first["message"];
    if (!message.contains("content") || !message["content"].is_string()) return std::nullopt;
    return message["content"].get<std::string>();
}

FetchResult fetch_scores(const ScoreRequestPlan& plan, const PromptBundle& prompts, const ClientOptions& options,
                         Transport* transport) {
    prompts.validate();
    if (plan.batches.empty()) throw UsageError("score plan has no batches");
    if (plan.trials < 1 || plan.retries_per_batch < 1 || plan.concurrency < 1) {
        throw UsageError("trials, retries and concurrency must be >= 1");
    }
    const auto n_batches = static_cast<int>(plan.batches.size());
    const std::size_t jobs = static_cast<std::size_t>(plan.trials) * plan.batches.size();
    std::vector<BatchTranscript> transcripts(jobs);
    std::atomic<std::size_t> requests{0};

    parallel_for(jobs, static_cast<std::size_t>(plan.concurrency), [&](std::size_t job) {
        const int trial = static_cast<int>(job / plan.batches.size());
        const int batch = static_cast<int>(job % plan.batches.size());
        const auto& features = plan.batches[static_cast<std::size_t>(batch)];
        const std::filesystem::path path = options.cache_dir.empty() ? std::filesystem::path{}
                                                                      : cache_file(options.cache_dir, trial, batch);
        if (!path.empty()) {
            if (auto cached = read_cache(path, trial, batch, features, options)) {
                transcripts[job] = std::move(*cached);
                return;
            }
        }
        if (options.cache_only || transport == nullptr) {
            throw NetworkError(fmt::format("no cached response for trial {} batch {} and network use is disabled",
                                           trial, batch));
        }
        BatchTranscript t;
        t.trial = trial;
        t.batch = batch;
        t.features = features;
        t.system_prompt = prompts.system_prompt;
        for (int attempt = 0; attempt < plan.retries_per_batch; ++attempt) {
            const std::string user = prompts.render(features, attempt);
            t.prompts.push_back(user);
            const TransportResponse resp =
                transport->post(chat_request_body(options.model, prompts.system_prompt, user, options.temperature));
            requests.fetch_add(1);
            Attempt a{attempt, resp.status, resp.body, ""};
            if (resp.status == 401 || resp.status == 403) {
                throw NetworkError(fmt::format("authentication failed (HTTP {}); check the API key", resp.status));
            }
            if (resp.status != 200) {
                a.outcome = resp.status == 0 ? fmt::format("transport error: {}", resp.error)
                                             : fmt::format("HTTP {}", resp.status);
            } else if (const auto content = chat_response_content(resp.body); !content) {
                a.outcome = "response lacks choices[0].message.content";
            } else {
                BatchScores parsed = parse_and_validate(*content, features);
                if (parsed.ok) {
                    a.outcome = "ok";
                    t.scores = std::move(parsed.values);
                } else {
                    a.outcome = parsed.error;
                }
            }
            t.attempts.push_back(std::move(a));
            if (!t.scores.empty() || features.empty()) break;
        }
        if (t.scores.size() != features.size()) {
            throw NetworkError(fmt::format("trial {} batch {} failed after {} attempts; last: {}", trial, batch,
                                           t.attempts.size(), t.attempts.back().outcome));
        }
        if (!path.empty()) write_cache(path, t, options);
        transcripts[job] = std::move(t);
    });

    FetchResult result;
    result.requests = requests.load();
    result.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(plan.feature_count()));
    for (int trial = 0; trial < plan.trials; ++trial) {
        Eigen::Index offset = 0;
        for (int batch = 0; batch < n_batches; ++batch) {
            const auto& t = transcripts[static_cast<std::size_t>(trial) * plan.batches.size() + static_cast<std::size_t>(batch)];
            for (std::size_t j = 0; j < t.scores.size(); ++j) result.values(offset + static_cast<Eigen::Index>(j)) += t.scores[j];
            offset += static_cast<Eigen::Index>(t.scores.size());
        }
    }
    result.values /= static_cast<double>(plan.trials);
    Eigen::Index offset = 0;
    for (const auto& batch : plan.batches) {
        for (const auto& name : batch) {
            if (result.values(offset) < 0.0) {
                result.warnings.push_back(fmt::format("negative mean score for \"{}\" clamped to 0", name));
                result.values(offset) = 0.0;
            }
            ++offset;
        }
    }
    result.transcripts = std::move(transcripts);
    return result;
}

}  // namespace statsformer::scores
