#include "statsformer/scores/http.hpp"

#include <chrono>
#include <regex>

#include <fmt/core.h>
#include <httplib.h>

#include "statsformer/error.hpp"

namespace statsformer::scores {

HttpTransport::HttpTransport(std::string url, std::string api_key, double timeout_seconds)
    : api_key_(std::move(api_key)), timeout_(timeout_seconds) {
    static const std::regex pattern(R"(^(https?)://([^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) throw UsageError(fmt::format("invalid endpoint URL \"{}\"", url));
    if (m[1] == "https" && !https_supported()) {
        throw UsageError("https endpoints need a build with OpenSSL; use an http endpoint or rebuild");
    }
    if (timeout_ <= 0.0) throw UsageError("request timeout must be positive");
    origin_ = m[1].str() + "://" + m[2].str();
    path_ = m[3].matched ? m[3].str() : "/";
}

TransportResponse HttpTransport::post(const std::string& request_body) {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    TransportResponse out;
    auto res = client.Post(path_, headers, request_body, "application/json");
    if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

bool https_supported() {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    return true;
#else
    return false;
#endif
}

}  // namespace statsformer::scores
