#pragma once

#include "compsearch/prompt/parser.hpp"
#include "compsearch/prompt/prompt.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace compsearch {

struct ChatOptions {
  std::filesystem::path gallery;
  /// Session storage; a fresh temporary folder when empty.
  std::filesystem::path data_dir;
  SyntaxMode mode = SyntaxMode::FunctionCall;
  std::size_t k = 10;
  std::size_t token_budget = kDefaultTokenBudget;
  /// JSON-lines transcript of the final session memory.
  std::optional<std::filesystem::path> transcript_out;
};

struct ChatReport {
  std::string session_id;
  std::size_t events = 0;
  std::size_t checks = 0;
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
};

/// Replays a JSON-lines conversation script against the oracle embedder and
/// scripted LLM/VQA backends, printing the conversation to `out`.
///
/// Events:
///   {"event":"config","mode":..,"k":..,"token_budget":..}   first line only
///   {"event":"upload","item":<gallery id>} or {"event":"upload","file":<path>}
///   {"event":"vqa","question":..,"answer":..}
///   {"event":"user","text":..,"llm":[<model output>, ...]}
///   {"event":"expect", <checks>}
/// Checks: filename, reply, reply_contains, failed, tool ({"name","args"} or
/// null), top_result, memory_tail (rendered lines), transcript (all rendered
/// lines). Unused scripted model outputs count as a failure.
/// Throws MalformedRecord for unreadable scripts.
ChatReport run_scripted_chat(const std::filesystem::path& script, const ChatOptions& options, std::ostream& out);

}  // namespace compsearch
