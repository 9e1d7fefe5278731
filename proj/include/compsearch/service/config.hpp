#pragma once

#include "compsearch/prompt/parser.hpp"
#include "compsearch/prompt/prompt.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

namespace compsearch {

enum class BackendKind { Scripted, Remote };
enum class EmbedderKind { Oracle, Remote };

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "data";
  SyntaxMode mode = SyntaxMode::FunctionCall;
  std::size_t token_budget = kDefaultTokenBudget;
  std::size_t k = 10;
  std::size_t max_connections = 8;
  std::filesystem::path gallery;
  std::optional<std::filesystem::path> prompt_dir;

  EmbedderKind embedder = EmbedderKind::Oracle;
  BackendKind llm = BackendKind::Scripted;
  BackendKind vqa = BackendKind::Scripted;
  /// JSON-lines {match, response} for the scripted LLM.
  std::optional<std::filesystem::path> llm_script;
  /// JSON-lines {question, answer} for the scripted VQA model.
  std::optional<std::filesystem::path> vqa_script;
  std::string llm_url;
  std::string vqa_url;
  std::string embed_url;

  /// key = value text; relative paths resolve against `base_dir`. Throws InvalidConfig.
  static ServerConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
  /// Reads the file, then applies the environment overrides. Throws Io / InvalidConfig.
  static ServerConfig load(const std::filesystem::path& path);

  /// COMPSEARCH_DATA_DIR, COMPSEARCH_LLM_URL, COMPSEARCH_VQA_URL and COMPSEARCH_EMBED_URL.
  void apply_environment();
  /// Throws InvalidConfig.
  void validate() const;
};

}  // namespace compsearch
