#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ragcal/gateway.hpp"

namespace ragcal {
namespace {

struct SplitUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = url.find('/', host_begin);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

}  // namespace

HttpTransport::HttpTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

HttpResponse HttpTransport::post(const HttpRequest& request) {
    const SplitUrl url = split_url(request.base_url);
    // A client per call keeps the transport safe to share across workers.
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    httplib::Headers headers;
    if (!request.api_key.empty()) headers.emplace("Authorization", "Bearer " + request.api_key);

    auto res = client.Post(url.path_prefix + request.path, headers, request.body.dump(), "application/json");
    if (!res) return HttpResponse{0, {}, httplib::to_string(res.error())};
    return HttpResponse{res->status, res->body, res->status == 200 ? std::string() : res->body.substr(0, 500)};
}

}  // namespace ragcal
