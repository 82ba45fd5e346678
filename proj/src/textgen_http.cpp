// Eigen must come before httplib: <resolv.h> defines a _res macro that clashes
// with Eigen parameter names.
#include "salesopt/explain.hpp"

#include <fmt/format.h>

#include "httplib.h"
#include "json.hpp"
#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError(fmt::format("text generation url '{}' has no scheme", url));
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

ExternalHttp::ExternalHttp(ExternalHttpConfig config) : config_(std::move(config)) {
  split_url(config_.url);
  if (config_.timeout_ms <= 0) throw ConfigError("text generation timeout must be > 0");
}

std::string ExternalHttp::generate(const std::string& prompt) {
  const ParsedUrl u = split_url(config_.url);
  httplib::Client client(u.origin);
  const auto sec = config_.timeout_ms / 1000;
  const auto usec = (config_.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  httplib::Headers headers;
  if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);
  const nlohmann::json body{{"prompt", prompt}};
  auto res = client.Post(u.path, headers, body.dump(), "application/json");
  if (!res) throw Error("textgen_unavailable", fmt::format("request failed: {}", httplib::to_string(res.error())));
  if (res->status != 200) throw Error("textgen_unavailable", fmt::format("status {}", res->status));
  const auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("text") || !reply.at("text").is_string())
    throw Error("textgen_bad_reply", "reply has no string field 'text'");
  return reply.at("text").get<std::string>();
}

}  // namespace salesopt
