#pragma once

#include "compsearch/prompt/parser.hpp"
#include "compsearch/prompt/prompt.hpp"
#include "compsearch/prompt/session.hpp"
#include "compsearch/tools/backends.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace compsearch {

struct ToolResult {
  /// Text handed back to the model; search tools leave it empty and the
  /// "Top-N results are:" line is used instead.
  std::string observation;
  std::vector<ResultEntry> results;
  /// Reply shown to the user when no model-written closing reply is available.
  std::string closing_reply;
};

using ToolFn = std::function<ToolResult(Session&, const std::vector<std::string>&)>;

class ToolRegistry {
 public:
  /// Throws InvalidConfig for duplicate or unformattable names.
  void add(ToolSpec spec, ToolFn fn);

  std::vector<ToolSpec> specs() const;
  const ToolSpec* find(std::string_view name) const;
  /// Throws UnknownTool or ArityMismatch.
  void validate(const ToolCall& call) const;

  ToolResult invoke(Session& session, const ToolCall& call) const;

 private:
  struct Entry {
    ToolSpec spec;
    ToolFn fn;
  };
  std::vector<Entry> entries_;
};

/// Validates and runs one call. Search results are recorded in the session,
/// other observations are appended as a system line. Failures of the tool are
/// wrapped as ToolFailure; backend unavailability propagates unchanged.
ToolResult dispatch(const ToolCall& call, const ToolRegistry& registry, Session& session);

struct AssistantTurn {
  std::string reply;
  std::optional<std::string> thought;
  std::optional<ToolCall> tool_call;
  std::vector<ResultEntry> results;
  bool failed = false;
};

struct ManagerConfig {
  SyntaxMode mode = SyntaxMode::FunctionCall;
  std::size_t token_budget = kDefaultTokenBudget;
  PromptTemplate prompt = PromptTemplate::builtin(SyntaxMode::FunctionCall);

  static ManagerConfig for_mode(SyntaxMode mode, std::size_t budget = kDefaultTokenBudget);
};

inline constexpr std::string_view kParseFailureReply =
    "Sorry, I could not work out how to handle that request. Could you rephrase it?";

/// Line appended after a malformed answer before the single retry.
std::string_view format_reminder(SyntaxMode mode) noexcept;

/// Memory line recording an executed call: "Action: NAME(a;b)".
std::string action_trace_line(const ToolCall& call);

/// One user turn: prompt, model, parse (one retry on malformed output), at
/// most one tool run, closing reply. The session is left unchanged when an
/// exception escapes (LlmUnavailable and the other *Unavailable codes).
AssistantTurn handle_text_input(Session& session, std::string_view user_input, LlmBackend& llm,
                                const ToolRegistry& registry, const ManagerConfig& config);

}  // namespace compsearch
