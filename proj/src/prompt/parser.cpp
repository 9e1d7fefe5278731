#include "compsearch/prompt/parser.hpp"

#include "compsearch/error.hpp"

namespace compsearch {

namespace {

constexpr std::string_view kThought = "Thought:";
constexpr std::string_view kAction = "Action:";
constexpr std::string_view kActionInput = "Action Input:";
constexpr std::string_view kAi = "AI:";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::vector<std::string_view> nonblank_lines(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    if (!line.empty()) out.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

bool is_ident_start(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

// Length of a leading identifier immediately followed by '(' (0 when absent).
std::size_t call_prefix(std::string_view line) {
  if (line.empty() || !is_ident_start(line[0])) return 0;
  std::size_t i = 1;
  while (i < line.size() && is_ident_char(line[i])) ++i;
  return i < line.size() && line[i] == '(' ? i : 0;
}

std::vector<std::string> split_args(std::string_view raw, std::string_view line) {
  std::vector<std::string> args;
  const auto body = trim(raw);
  if (body.empty()) return args;
  std::size_t start = 0;
  while (true) {
    const auto semi = body.find(';', start);
    const auto arg = trim(body.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start));
    if (arg.empty()) throw ParseError("empty argument", std::string(line));
    if (arg.find(':') != std::string_view::npos) {
      throw ParseError("arguments must be positional values separated by ';'", std::string(line));
    }
    args.emplace_back(arg);
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  return args;
}

std::string join_lines(const std::vector<std::string_view>& lines, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < lines.size(); ++i) {
    if (i > from) out += '\n';
    out += lines[i];
  }
  return out;
}

ParsedOutput parse_langchain(const std::vector<std::string_view>& lines) {
  ParsedOutput out;
  const auto first = lines.front();
  if (!starts_with(first, kThought)) throw ParseError("expected 'Thought:'", std::string(first));
  const auto question = trim(first.substr(kThought.size()));
  if (!starts_with(question, kToolQuestion)) {
    throw ParseError("expected the tool question after 'Thought:'", std::string(first));
  }
  const auto answer = trim(question.substr(kToolQuestion.size()));
  out.thought = std::string(question);
  if (answer == "Yes") {
    if (lines.size() < 2 || !starts_with(lines[1], kAction) || starts_with(lines[1], kActionInput)) {
      throw ParseError("expected 'Action:' after Yes", lines.size() < 2 ? std::string() : std::string(lines[1]));
    }
    const auto name = trim(lines[1].substr(kAction.size()));
    if (name.empty()) throw ParseError("empty tool name", std::string(lines[1]));
    if (lines.size() < 3 || !starts_with(lines[2], kActionInput)) {
      throw ParseError("expected 'Action Input:'", lines.size() < 3 ? std::string() : std::string(lines[2]));
    }
    ToolCall call{std::string(name), split_args(lines[2].substr(kActionInput.size()), lines[2])};
    if (lines.size() > 3) throw ParseError("unexpected content after the action", std::string(lines[3]));
    out.action = std::move(call);
    return out;
  }
  if (answer == "No") {
    if (lines.size() < 2) throw ParseError("missing reply after No", std::string(first));
    std::vector<std::string_view> rest(lines.begin() + 1, lines.end());
    if (starts_with(rest.front(), kAi)) rest.front() = trim(rest.front().substr(kAi.size()));
    for (const auto l : rest) {
      if (starts_with(l, kAction)) throw ParseError("action after a No answer", std::string(l));
    }
    auto reply = join_lines(rest, 0);
    if (trim(reply).empty()) throw ParseError("empty reply", std::string(lines[1]));
    out.final_reply = std::move(reply);
    return out;
  }
  throw ParseError("tool question must be answered Yes or No", std::string(first));
}

ParsedOutput parse_function_call(const std::vector<std::string_view>& lines) {
  ParsedOutput out;
  std::size_t i = 0;
  std::string thought;
  for (; i < lines.size() && starts_with(lines[i], kThought); ++i) {
    if (!thought.empty()) thought += '\n';
    thought += trim(lines[i].substr(kThought.size()));
  }
  if (i > 0) out.thought = std::move(thought);
  if (i == lines.size()) throw ParseError("no action or reply after thoughts", std::string(lines.back()));

  auto line = lines[i];
  const bool has_action_prefix = starts_with(line, kAction);
  if (has_action_prefix) line = trim(line.substr(kAction.size()));
  const auto name_len = call_prefix(line);
  if (name_len > 0) {
    if (line.back() != ')') throw ParseError("unterminated tool call", std::string(lines[i]));
    const auto inner = line.substr(name_len + 1, line.size() - name_len - 2);
    out.action = ToolCall{std::string(line.substr(0, name_len)), split_args(inner, lines[i])};
    if (i + 1 < lines.size()) throw ParseError("unexpected content after the action", std::string(lines[i + 1]));
    return out;
  }
  if (has_action_prefix) throw ParseError("'Action:' must be followed by NAME(args)", std::string(lines[i]));

  std::vector<std::string_view> rest(lines.begin() + static_cast<std::ptrdiff_t>(i), lines.end());
  if (starts_with(rest.front(), kAi)) rest.front() = trim(rest.front().substr(kAi.size()));
  for (std::size_t j = 0; j < rest.size(); ++j) {
    if (starts_with(rest[j], kThought) || starts_with(rest[j], kAction) ||
        (j > 0 && call_prefix(rest[j]) > 0 && rest[j].back() == ')')) {
      throw ParseError("reply mixed with structured output", std::string(rest[j]));
    }
  }
  auto reply = join_lines(rest, 0);
  if (trim(reply).empty()) throw ParseError("empty reply", std::string(lines[i]));
  out.final_reply = std::move(reply);
  return out;
}

}  // namespace

std::string_view syntax_mode_name(SyntaxMode m) noexcept {
  return m == SyntaxMode::Langchain ? "langchain" : "function_call";
}

SyntaxMode syntax_mode_from_name(std::string_view name) {
  if (name == "langchain") return SyntaxMode::Langchain;
  if (name == "function_call") return SyntaxMode::FunctionCall;
  throw Error(Errc::InvalidConfig, "unknown prompt mode '" + std::string(name) + "'");
}

ParsedOutput parse_llm_output(std::string_view text, SyntaxMode mode) {
  const auto lines = nonblank_lines(text);
  if (lines.empty()) throw ParseError("empty output", std::string(text.substr(0, 80)));
  return mode == SyntaxMode::Langchain ? parse_langchain(lines) : parse_function_call(lines);
}

bool is_valid_tool_argument(std::string_view arg) noexcept {
  if (arg.empty() || trim(arg) != arg) return false;
  return arg.find_first_of(";:\n\r") == std::string_view::npos;
}

bool is_valid_tool_name(std::string_view name, SyntaxMode mode) noexcept {
  if (name.empty()) return false;
  if (mode == SyntaxMode::FunctionCall) {
    if (!is_ident_start(name[0])) return false;
    for (const char c : name) {
      if (!is_ident_char(c)) return false;
    }
    return true;
  }
  return trim(name) == name && name.find_first_of("\n\r") == std::string_view::npos;
}

std::string format_tool_call(const ToolCall& call, SyntaxMode mode) {
  if (!is_valid_tool_name(call.tool_name, mode)) {
    throw Error(Errc::IllegalCharacter, "tool name cannot be written in this syntax: '" + call.tool_name + "'");
  }
  std::string args;
  for (std::size_t i = 0; i < call.args.size(); ++i) {
    if (!is_valid_tool_argument(call.args[i])) {
      throw Error(Errc::IllegalCharacter, "tool argument cannot be written: '" + call.args[i] + "'");
    }
    if (i) args += ';';
    args += call.args[i];
  }
  if (mode == SyntaxMode::Langchain) {
    return "Thought: " + std::string(kToolQuestion) + " Yes\nAction: " + call.tool_name + "\nAction Input: " + args;
  }
  return call.tool_name + "(" + args + ")";
}

std::string format_output(const ParsedOutput& output, SyntaxMode mode) {
  if (output.action.has_value() == output.final_reply.has_value()) {
    throw Error(Errc::ShapeMismatch, "exactly one of action and final_reply must be set");
  }
  if (mode == SyntaxMode::Langchain) {
    if (output.action) return format_tool_call(*output.action, mode);
    return "Thought: " + std::string(kToolQuestion) + " No\nAI: " + *output.final_reply;
  }
  std::string out;
  if (output.thought) {
    std::string_view rest = *output.thought;
    while (true) {
      const auto nl = rest.find('\n');
      out += "Thought: ";
      out += rest.substr(0, nl);
      out += '\n';
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  out += output.action ? "Action: " + format_tool_call(*output.action, mode) : *output.final_reply;
  return out;
}

}  // namespace compsearch
