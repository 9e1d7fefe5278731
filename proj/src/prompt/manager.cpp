#include "compsearch/prompt/manager.hpp"

#include "compsearch/error.hpp"

namespace compsearch {

namespace {

bool is_unavailable(Errc code) {
  return code == Errc::LlmUnavailable || code == Errc::VqaUnavailable || code == Errc::EmbedderUnavailable;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ';';
    out += args[i];
  }
  return out;
}

std::string tool_failure_reply(const ToolCall& call) {
  return "Sorry, something went wrong while running " + call.tool_name + ". Please try again.";
}

// Parses and checks the call against the registry; any failure is reported as
// std::nullopt so the caller can retry.
std::optional<ParsedOutput> try_parse(const std::string& text, SyntaxMode mode, const ToolRegistry& registry) {
  try {
    auto parsed = parse_llm_output(text, mode);
    if (parsed.action) registry.validate(*parsed.action);
    return parsed;
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError || e.code() == Errc::UnknownTool || e.code() == Errc::ArityMismatch) {
      return std::nullopt;
    }
    throw;
  }
}

}  // namespace

void ToolRegistry::add(ToolSpec spec, ToolFn fn) {
  if (!is_valid_tool_name(spec.name, SyntaxMode::Langchain)) {
    throw Error(Errc::InvalidConfig, "invalid tool name '" + spec.name + "'");
  }
  if (find(spec.name)) throw Error(Errc::InvalidConfig, "duplicate tool name '" + spec.name + "'");
  if (!fn) throw Error(Errc::InvalidConfig, "tool '" + spec.name + "' has no implementation");
  entries_.push_back({std::move(spec), std::move(fn)});
}

std::vector<ToolSpec> ToolRegistry::specs() const {
  std::vector<ToolSpec> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.spec);
  return out;
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.spec.name == name) return &e.spec;
  }
  return nullptr;
}

void ToolRegistry::validate(const ToolCall& call) const {
  const auto* spec = find(call.tool_name);
  if (!spec) throw Error(Errc::UnknownTool, "no tool named '" + call.tool_name + "'");
  if (spec->arity != call.args.size()) {
    throw Error(Errc::ArityMismatch, call.tool_name + " takes " + std::to_string(spec->arity) + " arguments, got " +
                                         std::to_string(call.args.size()));
  }
}

ToolResult ToolRegistry::invoke(Session& session, const ToolCall& call) const {
  validate(call);
  for (const auto& e : entries_) {
    if (e.spec.name == call.tool_name) return e.fn(session, call.args);
  }
  throw Error(Errc::UnknownTool, call.tool_name);
}

ToolResult dispatch(const ToolCall& call, const ToolRegistry& registry, Session& session) {
  registry.validate(call);
  ToolResult result;
  try {
    result = registry.invoke(session, call);
  } catch (const Error& e) {
    if (is_unavailable(e.code())) throw;
    throw Error(Errc::ToolFailure, call.tool_name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::ToolFailure, call.tool_name + ": " + e.what());
  }
  if (!result.results.empty()) {
    record_search_results(session, result.results);
    result.observation = session.memory.back().text;
  } else if (!result.observation.empty()) {
    session.append(Speaker::System, result.observation);
  }
  return result;
}

ManagerConfig ManagerConfig::for_mode(SyntaxMode mode, std::size_t budget) {
  ManagerConfig c;
  c.mode = mode;
  c.token_budget = budget;
  c.prompt = PromptTemplate::builtin(mode);
  return c;
}

std::string_view format_reminder(SyntaxMode mode) noexcept {
  if (mode == SyntaxMode::Langchain) {
    return "Reminder: start with \"Thought: Do I need to use a tool? Yes\" followed by \"Action:\" and \"Action "
           "Input:\" lines, or \"Thought: Do I need to use a tool? No\" followed by an \"AI:\" line.";
  }
  return "Reminder: answer with optional \"Thought:\" lines and then either one NAME(argument;argument) line or a "
         "plain reply.";
}

std::string action_trace_line(const ToolCall& call) {
  return "Action: " + call.tool_name + "(" + join_args(call.args) + ")";
}

AssistantTurn handle_text_input(Session& session, std::string_view user_input, LlmBackend& llm,
                                const ToolRegistry& registry, const ManagerConfig& config) {
  const auto saved_memory = session.memory;
  const auto saved_results = session.last_results;
  try {
    const auto prompt = assemble_prompt(session, user_input, registry.specs(), config.token_budget, config.prompt);
    std::string output = llm.complete(prompt);
    auto parsed = try_parse(output, config.mode, registry);
    if (!parsed) {
      output = llm.complete(prompt + "\n" + std::string(format_reminder(config.mode)) + "\n");
      parsed = try_parse(output, config.mode, registry);
    }

    AssistantTurn turn;
    session.append(Speaker::Human, user_input);
    if (!parsed) {
      turn.reply = std::string(kParseFailureReply);
      turn.failed = true;
      session.append(Speaker::AI, turn.reply);
      return turn;
    }
    turn.thought = parsed->thought;
    if (parsed->final_reply) {
      turn.reply = *parsed->final_reply;
      session.append(Speaker::AI, turn.reply);
      return turn;
    }

    const auto& call = *parsed->action;
    turn.tool_call = call;
    session.append(Speaker::System, action_trace_line(call));
    ToolResult result;
    try {
      result = dispatch(call, registry, session);
    } catch (const Error& e) {
      if (e.code() != Errc::ToolFailure) throw;
      turn.reply = tool_failure_reply(call);
      turn.failed = true;
      session.append(Speaker::AI, turn.reply);
      return turn;
    }
    turn.results = result.results;
    turn.reply = result.closing_reply;

    if (config.mode == SyntaxMode::Langchain) {
      const auto followup = prompt + "\n" + output + "\nObservation: " + result.observation + "\n";
      try {
        const auto closing = parse_llm_output(llm.complete(followup), config.mode);
        if (closing.final_reply) turn.reply = *closing.final_reply;
      } catch (const Error& e) {
        if (e.code() != Errc::ParseError && e.code() != Errc::LlmUnavailable) throw;
      }
    }
    if (turn.reply.empty()) turn.reply = "Done.";
    session.append(Speaker::AI, turn.reply);
    return turn;
  } catch (...) {
    session.memory = saved_memory;
    session.last_results = saved_results;
    throw;
  }
}

}  // namespace compsearch
