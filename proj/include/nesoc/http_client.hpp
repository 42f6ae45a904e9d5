#pragma once

// Remote completion transport. Kept separate from cti.hpp so the heavy
// socket/TLS dependency is only paid by binaries that actually talk to an
// endpoint.

#ifdef NESOC_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <ostream>
#include <string>

#include "nesoc/cti.hpp"
#include "nesoc/error.hpp"

namespace nesoc::cti {

struct RemoteConfig {
    std::string endpoint_url;  // scheme://host[:port]/path
    std::string api_key;       // sent as a Bearer token, never logged
};

/// Text-completion endpoint: POST {"prompt": ...} -> {"completion": ...}.
/// One in-flight request per instance; the optional audit stream receives
/// request and reply bodies with credentials redacted.
class HttpCompletionBackend : public CompletionBackend {
public:
    explicit HttpCompletionBackend(RemoteConfig config, std::ostream* audit = nullptr)
        : config_(std::move(config)), audit_(audit) {
        if (config_.endpoint_url.empty()) throw Error("remote endpoint URL not configured");
        auto scheme_end = config_.endpoint_url.find("://");
        if (scheme_end == std::string::npos)
            throw Error("remote endpoint URL must include a scheme: " + config_.endpoint_url);
        auto path_start = config_.endpoint_url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            origin_ = config_.endpoint_url;
            path_ = "/";
        } else {
            origin_ = config_.endpoint_url.substr(0, path_start);
            path_ = config_.endpoint_url.substr(path_start);
        }
    }

    std::string complete(const std::string& prompt) override {
        nlohmann::json body{{"prompt", prompt}};
        std::string payload = body.dump();
        if (audit_) *audit_ << "request " << path_ << " " << payload << "\n";

        httplib::Client client(origin_);
        client.set_connection_timeout(10);
        client.set_read_timeout(30);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);

        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res)
            throw TransportError("completion request failed: " + httplib::to_string(res.error()));
        if (audit_) *audit_ << "response " << res->status << " " << res->body << "\n";
        if (res->status != 200)
            throw TransportError("completion endpoint returned HTTP " +
                                 std::to_string(res->status));

        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("completion") ||
            !reply["completion"].is_string())
            throw TransportError("completion endpoint reply is not {\"completion\": ...}");
        return reply["completion"].get<std::string>();
    }

private:
    RemoteConfig config_;
    std::ostream* audit_;
    std::string origin_;
    std::string path_;
};

} // namespace nesoc::cti
