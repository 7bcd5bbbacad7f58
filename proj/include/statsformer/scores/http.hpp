#pragma once

#include <string>

#include "statsformer/scores/client.hpp"

namespace statsformer::scores {

/// POSTs to an OpenAI-compatible chat-completions URL with a bearer token.
/// https URLs require a build with OpenSSL.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string url, std::string api_key, double timeout_seconds = 120.0);
    TransportResponse post(const std::string& request_body) override;

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    double timeout_;
};

/// True when the library was built with TLS support.
bool https_supported();

}  // namespace statsformer::scores
