#include "groundwork/http_client.hpp"

#include <httplib.h>

namespace groundwork {

std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

Json post_json(const RemoteEndpoint& endpoint, const Json& body) {
    const auto [base, path] = split_url(endpoint.url);
    httplib::Client client(base);
    client.set_connection_timeout(endpoint.timeout_seconds, 0);
    client.set_read_timeout(endpoint.timeout_seconds, 0);
    httplib::Headers headers;
    if (!endpoint.auth_token.empty()) {
        headers.emplace("Authorization", "Bearer " + endpoint.auth_token);
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("request to " + base + path + " failed: " + httplib::to_string(res.error()),
                             true);
    }
    if (res->status >= 500) {
        throw TransportError("server error " + std::to_string(res->status) + " from " + base + path, true);
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + base + path, false);
    }
    try {
        return Json::parse(res->body);
    } catch (const Json::parse_error&) {
        throw TransportError("unparsable reply from " + base + path, false);
    }
}

}  // namespace groundwork
