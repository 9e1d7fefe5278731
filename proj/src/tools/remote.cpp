#include "compsearch/tools/remote.hpp"

#include "compsearch/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace compsearch {

namespace {

nlohmann::json post_json(const Endpoint& endpoint, std::chrono::milliseconds timeout, const std::string& route,
                         const nlohmann::json& body, Errc unavailable) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const auto path = endpoint.path_prefix + route;
  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw Error(unavailable, endpoint.origin + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(unavailable, endpoint.origin + path + ": HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(unavailable, endpoint.origin + path + ": malformed response: " + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& j, const char* key, Errc unavailable) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(unavailable, std::string("response lacks '") + key + "': " + e.what());
  }
}

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

Endpoint Endpoint::parse(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.compare(0, scheme_end, "http") != 0) {
    throw Error(Errc::InvalidConfig, "endpoint must be an http:// URL: '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  if (e.origin.size() == scheme_end + 3) throw Error(Errc::InvalidConfig, "endpoint has no host: '" + url + "'");
  if (path_start != std::string::npos) e.path_prefix = url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

RemoteLlm::RemoteLlm(const std::string& url, std::chrono::milliseconds timeout)
    : endpoint_(Endpoint::parse(url)), timeout_(timeout) {}

std::string RemoteLlm::complete(const std::string& prompt) {
  const auto j = post_json(endpoint_, timeout_, "/complete", {{"prompt", prompt}}, Errc::LlmUnavailable);
  return field<std::string>(j, "text", Errc::LlmUnavailable);
}

RemoteEmbedder::RemoteEmbedder(const std::string& url, std::chrono::milliseconds timeout)
    : endpoint_(Endpoint::parse(url)), timeout_(timeout) {}

Embedding RemoteEmbedder::embed_composed(std::string_view image, std::string_view text) {
  const auto j = post_json(endpoint_, timeout_, "/embed", {{"image_b64", base64_encode(image)}, {"text", text}},
                           Errc::EmbedderUnavailable);
  const auto values = field<std::vector<double>>(j, "embedding", Errc::EmbedderUnavailable);
  try {
    return normalize(std::span<const double>(values));
  } catch (const Error& e) {
    throw Error(Errc::EmbedderUnavailable, std::string("unusable embedding: ") + e.what());
  }
}

RemoteVqa::RemoteVqa(const std::string& url, std::chrono::milliseconds timeout)
    : endpoint_(Endpoint::parse(url)), timeout_(timeout) {}

std::string RemoteVqa::ask(std::string_view image, const std::string& question) {
  const auto j = post_json(endpoint_, timeout_, "/vqa", {{"image_b64", base64_encode(image)}, {"question", question}},
                           Errc::VqaUnavailable);
  return field<std::string>(j, "answer", Errc::VqaUnavailable);
}

std::string base64_encode(std::string_view bytes) {
  return httplib::detail::base64_encode(std::string(bytes));
}

std::string base64_decode(std::string_view text) {
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (const char c : text) {
    if (c == '=') break;
    const auto pos = kAlphabet.find(c);
    if (pos == std::string_view::npos) throw Error(Errc::InvalidConfig, "invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(pos);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xFF);
    }
  }
  return out;
}

}  // namespace compsearch
