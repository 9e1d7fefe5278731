#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace compsearch {

enum class SyntaxMode { Langchain, FunctionCall };

std::string_view syntax_mode_name(SyntaxMode m) noexcept;
/// "langchain" or "function_call"; throws InvalidConfig.
SyntaxMode syntax_mode_from_name(std::string_view name);

struct ToolCall {
  std::string tool_name;
  std::vector<std::string> args;

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct ParsedOutput {
  std::optional<std::string> thought;
  std::optional<ToolCall> action;
  std::optional<std::string> final_reply;

  friend bool operator==(const ParsedOutput&, const ParsedOutput&) = default;
};

inline constexpr std::string_view kToolQuestion = "Do I need to use a tool?";

/// Splits LLM output into thought, a single action, or a final reply.
///
/// langchain:      Thought: Do I need to use a tool? Yes|No, then
///                 Action: <name> / Action Input: a;b;c  or  [AI:] reply
/// function_call:  any number of "Thought:" lines, then NAME(a;b;c) (an
///                 "Action:" prefix is allowed) or plain reply text.
/// Arguments are trimmed; empty arguments, arguments containing ':' and
/// content after an action are rejected. Throws ParseError only.
ParsedOutput parse_llm_output(std::string_view text, SyntaxMode mode);

/// Canonical text of a call; parse_llm_output(format_tool_call(c, m), m)
/// yields c. Throws IllegalCharacter for names or arguments the syntax cannot
/// carry.
std::string format_tool_call(const ToolCall& call, SyntaxMode mode);

/// Canonical text of a whole output (thought lines plus action or reply).
std::string format_output(const ParsedOutput& output, SyntaxMode mode);

/// Checks a single argument: non-empty, trimmed, no ';', ':' or line breaks.
bool is_valid_tool_argument(std::string_view arg) noexcept;
bool is_valid_tool_name(std::string_view name, SyntaxMode mode) noexcept;

}  // namespace compsearch
