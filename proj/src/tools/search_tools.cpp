#include "compsearch/tools/search_tools.hpp"

#include "compsearch/error.hpp"

#include <fstream>
#include <sstream>

namespace compsearch {

namespace {

bool is_image_filename(std::string_view name) {
  constexpr std::string_view prefix = "IMG_";
  constexpr std::string_view suffix = ".png";
  if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) || !name.ends_with(suffix)) {
    return false;
  }
  const auto digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  for (char c : digits) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

std::string example_call(const ToolCall& call, SyntaxMode mode) {
  if (mode == SyntaxMode::FunctionCall) return format_tool_call(call, mode);
  std::string out = "Action Input: ";
  for (std::size_t i = 0; i < call.args.size(); ++i) out += (i ? ";" : "") + call.args[i];
  return out;
}

std::string describe_top(const std::vector<ResultEntry>& results) {
  return "Here is what I found. The best match is " + results.front().description + ".";
}

}  // namespace

std::vector<ResultEntry> to_result_entries(const SearchResult& result, const Index& index) {
  std::vector<ResultEntry> out;
  out.reserve(result.ranked.size());
  for (const auto& r : result.ranked) {
    const auto* item = index.find(r.id);
    out.push_back(ResultEntry{r.id, item ? item->description : std::string(), r.score});
  }
  return out;
}

std::vector<ResultEntry> tool_image_search(std::string_view image, EmbedderBackend& embedder, const Index& index,
                                           std::size_t k) {
  return to_result_entries(index.search(embedder.embed_image(image), k), index);
}

std::vector<ResultEntry> tool_multimodal_search(std::string_view image, std::string_view original_attribute,
                                                std::string_view target_attribute, EmbedderBackend& embedder,
                                                const Index& index, std::size_t k) {
  const auto text = build_query_text(original_attribute, target_attribute);
  return to_result_entries(index.search(embedder.embed_composed(image, text), k), index);
}

std::string tool_vqa(std::string_view image, const std::string& question, VqaBackend& vqa) {
  return vqa.ask(image, question);
}

std::string vqa_memory_line(std::string_view question, std::string_view answer) {
  return "VQA(" + std::string(question) + ") = " + std::string(answer);
}

std::string read_session_image(const Session& session, std::string_view filename) {
  if (!is_image_filename(filename)) {
    throw Error(Errc::ToolFailure, "'" + std::string(filename) + "' is not an uploaded image name");
  }
  const auto path = session.image_dir / std::string(filename);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ToolFailure, "no uploaded image named " + std::string(filename));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ToolNames tool_names(SyntaxMode mode) {
  if (mode == SyntaxMode::Langchain) return {"Multimodal search", "Image search", "Visual question answering"};
  return {"SEARCH", "IMAGE_SEARCH", "VQA"};
}

ToolRegistry make_default_registry(SyntaxMode mode, const ToolContext& context) {
  if (!context.embedder || !context.index || !context.vqa) {
    throw Error(Errc::InvalidConfig, "tool context needs an embedder, an index and a VQA backend");
  }
  if (context.k == 0) throw Error(Errc::InvalidConfig, "k must be at least 1");
  const auto names = tool_names(mode);
  const ToolContext ctx = context;
  ToolRegistry registry;

  registry.add(
      ToolSpec{names.multimodal_search,
               "Searches the catalogue for products that look like an uploaded image with one attribute changed. "
               "Example: " + example_call({names.multimodal_search, {"IMG_001.png", "white", "black"}}, mode),
               3,
               {"image file name", "attribute value of the product in the image", "desired attribute value"}},
      [ctx](Session& session, const std::vector<std::string>& args) {
        const auto image = read_session_image(session, args[0]);
        ToolResult r;
        r.results = tool_multimodal_search(image, args[1], args[2], *ctx.embedder, *ctx.index, ctx.k);
        r.closing_reply = describe_top(r.results);
        return r;
      });

  registry.add(
      ToolSpec{names.image_search,
               "Searches the catalogue for products similar to an uploaded image. Example: " +
                   example_call({names.image_search, {"IMG_001.png"}}, mode),
               1,
               {"image file name"}},
      [ctx](Session& session, const std::vector<std::string>& args) {
        const auto image = read_session_image(session, args[0]);
        ToolResult r;
        r.results = tool_image_search(image, *ctx.embedder, *ctx.index, ctx.k);
        r.closing_reply = describe_top(r.results);
        return r;
      });

  registry.add(
      ToolSpec{names.vqa,
               "Answers a question about an uploaded image, for example its color or material. Example: " +
                   example_call({names.vqa, {"IMG_001.png", "what color is the dress?"}}, mode),
               2,
               {"image file name", "question about the image"}},
      [ctx](Session& session, const std::vector<std::string>& args) {
        const auto image = read_session_image(session, args[0]);
        const auto answer = tool_vqa(image, args[1], *ctx.vqa);
        ToolResult r;
        r.observation = vqa_memory_line(args[1], answer);
        r.closing_reply = "The answer is: " + answer + ".";
        return r;
      });
  return registry;
}

}  // namespace compsearch
