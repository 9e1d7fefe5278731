#pragma once

#include "compsearch/prompt/parser.hpp"
#include "compsearch/prompt/session.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace compsearch {

struct ToolSpec {
  std::string name;
  std::string description;
  std::size_t arity = 0;
  std::vector<std::string> arg_descriptions;
};

inline constexpr std::size_t kDefaultTokenBudget = 4000;

/// Prompt text with {tools}, {examples}, {memory} and {input} placeholders.
/// Every placeholder must appear exactly once and be delimited by whitespace
/// or the ends of the text, so that substituted text never merges with the
/// neighbouring words.
class PromptTemplate {
 public:
  /// Throws InvalidConfig.
  PromptTemplate(std::string text, std::string examples);

  /// Shipped defaults for a syntax mode.
  static PromptTemplate builtin(SyntaxMode mode);
  /// Reads <dir>/<mode>.txt and <dir>/<mode>_examples.txt. Throws Io / InvalidConfig.
  static PromptTemplate load(const std::filesystem::path& dir, SyntaxMode mode);

  const std::string& text() const noexcept { return text_; }
  const std::string& examples() const noexcept { return examples_; }

  std::string render(const std::string& tools, const std::string& memory, const std::string& input) const;

 private:
  std::string text_;
  std::string examples_;
};

/// "NAME: description" blocks, one per tool, with argument descriptions.
std::string render_tool_specs(const std::vector<ToolSpec>& tools);

/// Builds the prompt for `user_input`. When the estimate exceeds `budget`,
/// whole exchanges are dropped from the front of session.memory until it
/// fits. Throws BudgetTooSmall when even an empty memory does not fit.
std::string assemble_prompt(Session& session, std::string_view user_input, const std::vector<ToolSpec>& tools,
                            std::size_t budget, const PromptTemplate& tmpl);

}  // namespace compsearch
