#pragma once

#include "compsearch/tools/backends.hpp"

#include <chrono>
#include <string>

namespace compsearch {

inline constexpr std::chrono::seconds kRemoteTimeout{30};

/// Endpoint base such as "http://host:8000" or "http://host:8000/prefix".
struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path_prefix;

  /// Throws InvalidConfig.
  static Endpoint parse(const std::string& url);
};

/// POST <base>/complete {prompt} -> {text}.
class RemoteLlm : public LlmBackend {
 public:
  explicit RemoteLlm(const std::string& url, std::chrono::milliseconds timeout = kRemoteTimeout);
  std::string complete(const std::string& prompt) override;

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

/// POST <base>/embed {image_b64, text} -> {embedding}.
class RemoteEmbedder : public EmbedderBackend {
 public:
  explicit RemoteEmbedder(const std::string& url, std::chrono::milliseconds timeout = kRemoteTimeout);
  Embedding embed_composed(std::string_view image, std::string_view text) override;

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

/// POST <base>/vqa {image_b64, question} -> {answer}.
class RemoteVqa : public VqaBackend {
 public:
  explicit RemoteVqa(const std::string& url, std::chrono::milliseconds timeout = kRemoteTimeout);
  std::string ask(std::string_view image, const std::string& question) override;

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

std::string base64_encode(std::string_view bytes);
/// Throws InvalidConfig on characters outside the alphabet.
std::string base64_decode(std::string_view text);

}  // namespace compsearch
