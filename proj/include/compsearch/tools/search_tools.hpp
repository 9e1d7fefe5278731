#pragma once

#include "compsearch/prompt/manager.hpp"
#include "compsearch/retrieval.hpp"
#include "compsearch/tools/backends.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace compsearch {

/// Ranked results with gallery descriptions.
std::vector<ResultEntry> to_result_entries(const SearchResult& result, const Index& index);

std::vector<ResultEntry> tool_image_search(std::string_view image, EmbedderBackend& embedder, const Index& index,
                                           std::size_t k);

/// Throws EmptyAttribute / IllegalCharacter for unusable attributes.
std::vector<ResultEntry> tool_multimodal_search(std::string_view image, std::string_view original_attribute,
                                                std::string_view target_attribute, EmbedderBackend& embedder,
                                                const Index& index, std::size_t k);

std::string tool_vqa(std::string_view image, const std::string& question, VqaBackend& vqa);

/// "VQA(question) = answer".
std::string vqa_memory_line(std::string_view question, std::string_view answer);

/// Bytes of a file previously saved by record_image_upload. Only names of
/// the form IMG_<digits>.png inside the session folder are accepted
/// (ToolFailure otherwise).
std::string read_session_image(const Session& session, std::string_view filename);

struct ToolContext {
  EmbedderBackend* embedder = nullptr;
  const Index* index = nullptr;
  VqaBackend* vqa = nullptr;
  std::size_t k = 10;
};

/// Names used in each syntax mode.
struct ToolNames {
  std::string multimodal_search;
  std::string image_search;
  std::string vqa;
};
ToolNames tool_names(SyntaxMode mode);

/// The multimodal search, image search and VQA tools. The context must
/// outlive the registry.
ToolRegistry make_default_registry(SyntaxMode mode, const ToolContext& context);

}  // namespace compsearch
