#include "compsearch/service/config.hpp"

#include "compsearch/error.hpp"
#include "compsearch/kv_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace compsearch {

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(Errc::InvalidConfig, key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

BackendKind parse_backend(const std::string& key, const std::string& v) {
  if (v == "scripted") return BackendKind::Scripted;
  if (v == "remote") return BackendKind::Remote;
  throw Error(Errc::InvalidConfig, key + ": expected scripted or remote, got '" + v + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

ServerConfig ServerConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  ServerConfig c;
  for (const auto& kv : parse_key_values(text)) {
    const auto& k = kv.key;
    const auto& v = kv.value;
    if (k == "host") {
      c.host = v;
    } else if (k == "port") {
      const auto port = parse_size(k, v);
      if (port > 65535) throw Error(Errc::InvalidConfig, "port out of range");
      c.port = static_cast<int>(port);
    } else if (k == "data_dir") {
      c.data_dir = resolve(base_dir, v);
    } else if (k == "mode") {
      c.mode = syntax_mode_from_name(v);
    } else if (k == "token_budget") {
      c.token_budget = parse_size(k, v);
    } else if (k == "k") {
      c.k = parse_size(k, v);
    } else if (k == "max_connections") {
      c.max_connections = parse_size(k, v);
    } else if (k == "gallery") {
      c.gallery = resolve(base_dir, v);
    } else if (k == "prompt_dir") {
      c.prompt_dir = resolve(base_dir, v);
    } else if (k == "embedder") {
      if (v == "oracle") {
        c.embedder = EmbedderKind::Oracle;
      } else if (v == "remote") {
        c.embedder = EmbedderKind::Remote;
      } else {
        throw Error(Errc::InvalidConfig, "embedder: expected oracle or remote, got '" + v + "'");
      }
    } else if (k == "llm") {
      c.llm = parse_backend(k, v);
    } else if (k == "vqa") {
      c.vqa = parse_backend(k, v);
    } else if (k == "llm_script") {
      c.llm_script = resolve(base_dir, v);
    } else if (k == "vqa_script") {
      c.vqa_script = resolve(base_dir, v);
    } else if (k == "llm_url") {
      c.llm_url = v;
    } else if (k == "vqa_url") {
      c.vqa_url = v;
    } else if (k == "embed_url") {
      c.embed_url = v;
    } else {
      throw Error(Errc::InvalidConfig, "line " + std::to_string(kv.line) + ": unknown key '" + k + "'");
    }
  }
  return c;
}

ServerConfig ServerConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto c = parse(ss.str(), path.parent_path());
  c.apply_environment();
  c.validate();
  return c;
}

void ServerConfig::apply_environment() {
  if (const char* v = std::getenv("COMPSEARCH_DATA_DIR"); v && *v) data_dir = v;
  if (const char* v = std::getenv("COMPSEARCH_LLM_URL"); v && *v) llm_url = v;
  if (const char* v = std::getenv("COMPSEARCH_VQA_URL"); v && *v) vqa_url = v;
  if (const char* v = std::getenv("COMPSEARCH_EMBED_URL"); v && *v) embed_url = v;
}

void ServerConfig::validate() const {
  if (k == 0) throw Error(Errc::InvalidConfig, "k must be at least 1");
  if (max_connections == 0) throw Error(Errc::InvalidConfig, "max_connections must be at least 1");
  if (gallery.empty()) throw Error(Errc::InvalidConfig, "gallery is required");
  if (data_dir.empty()) throw Error(Errc::InvalidConfig, "data_dir is required");
  if (llm == BackendKind::Remote && llm_url.empty()) throw Error(Errc::InvalidConfig, "llm = remote needs llm_url");
  if (vqa == BackendKind::Remote && vqa_url.empty()) throw Error(Errc::InvalidConfig, "vqa = remote needs vqa_url");
  if (embedder == EmbedderKind::Remote && embed_url.empty()) {
    throw Error(Errc::InvalidConfig, "embedder = remote needs embed_url");
  }
}

}  // namespace compsearch
