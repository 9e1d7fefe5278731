#include "compsearch/prompt/prompt.hpp"

#include "compsearch/error.hpp"
#include "prompt_templates.hpp"

#include <fstream>
#include <sstream>

namespace compsearch {

namespace {

constexpr std::string_view kPlaceholders[] = {"{tools}", "{examples}", "{memory}", "{input}"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fold_newlines(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text, std::string examples)
    : text_(std::move(text)), examples_(std::move(examples)) {
  for (const auto ph : kPlaceholders) {
    const auto pos = text_.find(ph);
    if (pos == std::string::npos) throw Error(Errc::InvalidConfig, "prompt template lacks " + std::string(ph));
    if (text_.find(ph, pos + 1) != std::string::npos) {
      throw Error(Errc::InvalidConfig, "prompt template repeats " + std::string(ph));
    }
    const auto end = pos + ph.size();
    if ((pos > 0 && !is_space(text_[pos - 1])) || (end < text_.size() && !is_space(text_[end]))) {
      throw Error(Errc::InvalidConfig, "placeholder " + std::string(ph) + " must be surrounded by whitespace");
    }
  }
}

PromptTemplate PromptTemplate::builtin(SyntaxMode mode) {
  if (mode == SyntaxMode::Langchain) {
    return PromptTemplate(std::string(prompt_text::kLangchain), std::string(prompt_text::kLangchainExamples));
  }
  return PromptTemplate(std::string(prompt_text::kFunctionCall), std::string(prompt_text::kFunctionCallExamples));
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& dir, SyntaxMode mode) {
  const std::string stem(syntax_mode_name(mode));
  return PromptTemplate(read_file(dir / (stem + ".txt")), read_file(dir / (stem + "_examples.txt")));
}

std::string PromptTemplate::render(const std::string& tools, const std::string& memory, const std::string& input) const {
  const std::string* values[] = {&tools, &examples_, &memory, &input};
  std::string out;
  out.reserve(text_.size() + tools.size() + examples_.size() + memory.size() + input.size());
  std::size_t at = 0;
  while (at < text_.size()) {
    const auto brace = text_.find('{', at);
    if (brace == std::string::npos) break;
    bool replaced = false;
    for (std::size_t k = 0; k < 4; ++k) {
      if (text_.compare(brace, kPlaceholders[k].size(), kPlaceholders[k]) == 0) {
        out.append(text_, at, brace - at);
        out += *values[k];
        at = brace + kPlaceholders[k].size();
        replaced = true;
        break;
      }
    }
    if (!replaced) {
      out.append(text_, at, brace + 1 - at);
      at = brace + 1;
    }
  }
  out.append(text_, at, std::string::npos);
  return out;
}

std::string render_tool_specs(const std::vector<ToolSpec>& tools) {
  std::string out;
  for (std::size_t i = 0; i < tools.size(); ++i) {
    const auto& t = tools[i];
    if (i) out += '\n';
    out += "> " + t.name + ": " + t.description;
    out += " Arguments (" + std::to_string(t.arity) + "):";
    if (t.arg_descriptions.empty()) out += " none.";
    for (std::size_t a = 0; a < t.arg_descriptions.size(); ++a) {
      out += (a ? "; " : " ") + t.arg_descriptions[a];
    }
    if (!t.arg_descriptions.empty()) out += '.';
  }
  return out;
}

std::string assemble_prompt(Session& session, std::string_view user_input, const std::vector<ToolSpec>& tools,
                            std::size_t budget, const PromptTemplate& tmpl) {
  const std::string tool_text = render_tool_specs(tools);
  const std::string input = fold_newlines(user_input);
  const std::size_t fixed_words = count_words(tmpl.render(tool_text, "", input));
  const auto tokens_for = [](std::size_t words) { return (words * 4 + 2) / 3; };
  if (tokens_for(fixed_words) > budget) {
    throw Error(Errc::BudgetTooSmall, "fixed prompt sections need " + std::to_string(tokens_for(fixed_words)) +
                                          " tokens, budget is " + std::to_string(budget));
  }

  // Word counts are additive because placeholders are whitespace-delimited
  // and memory lines are joined by newlines.
  std::size_t memory_words = 0;
  for (const auto& line : session.memory) memory_words += line.word_count();
  if (tokens_for(fixed_words + memory_words) > budget) {
    const auto starts = exchange_starts(session.memory);
    std::size_t drop_until = session.memory.size();
    std::size_t dropped_words = 0;
    for (std::size_t g = 0; g < starts.size(); ++g) {
      const std::size_t end = g + 1 < starts.size() ? starts[g + 1] : session.memory.size();
      for (std::size_t i = starts[g]; i < end; ++i) dropped_words += session.memory[i].word_count();
      if (tokens_for(fixed_words + memory_words - dropped_words) <= budget) {
        drop_until = end;
        break;
      }
    }
    session.memory.erase(session.memory.begin(), session.memory.begin() + static_cast<std::ptrdiff_t>(drop_until));
  }
  auto prompt = tmpl.render(tool_text, session.render_memory(), input);
  if (estimate_tokens(prompt) > budget) {
    throw Error(Errc::BudgetTooSmall, "prompt exceeds the budget after truncation");
  }
  return prompt;
}

}  // namespace compsearch
