#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <httplib.h>
#include <json.hpp>

namespace testing {

/// Local OpenAI-compatible chat-completions endpoint. Each request's feature
/// list is recovered from the rendered prompt and passed to `reply`, which
/// returns the assistant message content (or an HTTP status via `status`).
class MockChatServer {
public:
    struct Request {
        std::vector<std::string> features;
        int attempt = 0;        ///< from the "Retry {a}:" prefix
        int call = 0;           ///< per feature-list call counter
        std::string user_prompt;
    };
    struct Reply {
        int status = 200;
        std::string content;
        bool raw_body = false;  ///< send `content` as the whole body
    };
    using Handler = std::function<Reply(const Request&)>;

    explicit MockChatServer(Handler reply, std::string api_key = "test-key")
        : reply_(std::move(reply)), api_key_(std::move(api_key)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            requests_.fetch_add(1);
            if (req.get_header_value("Authorization") != "Bearer " + api_key_) {
                res.status = 401;
                res.set_content(R"({"error":"bad key"})", "application/json");
                return;
            }
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            Request r;
            r.user_prompt = body.at("messages").at(1).at("content").get<std::string>();
            static const std::regex retry(R"(^Retry (\d+):)");
            std::smatch m;
            if (std::regex_search(r.user_prompt, m, retry)) r.attempt = std::stoi(m[1]);
            const auto open = r.user_prompt.rfind('[');
            const auto close = r.user_prompt.rfind(']');
            const std::string list = r.user_prompt.substr(open, close - open + 1);
            static const std::regex item(R"('([^']*)')");
            for (auto it = std::sregex_iterator(list.begin(), list.end(), item); it != std::sregex_iterator(); ++it) {
                r.features.push_back((*it)[1]);
            }
            {
                std::lock_guard lock(mutex_);
                r.call = calls_[list]++;
            }
            const Reply reply = reply_(r);
            res.status = reply.status;
            if (reply.raw_body) {
                res.set_content(reply.content, "application/json");
                return;
            }
            nlohmann::json out = {{"id", "mock"},
                                  {"object", "chat.completion"},
                                  {"choices", {{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", reply.content}}},
                                                {"finish_reason", "stop"}}}}};
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockChatServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    int requests() const { return requests_.load(); }
    const std::string& api_key() const { return api_key_; }

    /// Deterministic score in [0.1, 1] for a feature and call index.
    static double score_for(const std::string& feature, int call) {
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : feature) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
        h ^= static_cast<std::uint64_t>(call) * 0x9e3779b97f4a7c15ULL;
        h = (h ^ (h >> 31)) * 0xbf58476d1ce4e5b9ULL;
        return 0.1 + 0.9 * static_cast<double>(h % 1000) / 999.0;
    }

    static std::string scores_json(const std::vector<std::string>& features, int call) {
        nlohmann::ordered_json scores = nlohmann::ordered_json::object();
        for (const auto& f : features) scores[f] = score_for(f, call);
        return nlohmann::ordered_json{{"scores", scores}}.dump();
    }

private:
    Handler reply_;
    std::string api_key_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> requests_{0};
    std::mutex mutex_;
    std::map<std::string, int> calls_;
};

}  // namespace testing
