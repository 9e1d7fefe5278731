#include "compsearch/tools/backends.hpp"

#include "compsearch/error.hpp"
#include "compsearch/retrieval.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace compsearch {

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read image " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string current_input_segment(std::string_view prompt) {
  constexpr std::string_view marker = "Human: ";
  std::size_t found = std::string_view::npos;
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    if (prompt.substr(pos, marker.size()) == marker) found = pos;
    const auto nl = prompt.find('\n', pos);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (found == std::string_view::npos) return {};
  const auto start = found + marker.size();
  const auto end = prompt.find('\n', start);
  return std::string(prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

std::string ScriptedLlm::complete(const std::string& prompt) {
  std::lock_guard lock(mutex_);
  prompts_.push_back(prompt);
  if (cursor_ >= entries_.size()) throw Error(Errc::LlmUnavailable, "scripted responses exhausted");
  const auto& entry = entries_[cursor_];
  const auto input = current_input_segment(prompt);
  if (input.compare(0, entry.match.size(), entry.match) != 0) {
    throw Error(Errc::LlmUnavailable,
                "scripted response " + std::to_string(cursor_) + " expects input '" + entry.match + "', got '" + input + "'");
  }
  ++cursor_;
  return entry.response;
}

void ScriptedLlm::append(std::vector<ScriptedLlmEntry> entries) {
  std::lock_guard lock(mutex_);
  for (auto& e : entries) entries_.push_back(std::move(e));
}

std::size_t ScriptedLlm::consumed() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

std::size_t ScriptedLlm::remaining() const {
  std::lock_guard lock(mutex_);
  return entries_.size() - cursor_;
}

std::vector<std::string> ScriptedLlm::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

AttributeOracleEmbedder::AttributeOracleEmbedder(const std::vector<GalleryRecord>& records) {
  if (records.empty()) throw Error(Errc::EmptyGallery, "oracle embedder needs at least one record");
  const auto width = records.front().attributes.size();
  if (width == 0) throw Error(Errc::ShapeMismatch, "records carry no attributes");
  std::vector<std::set<std::string>> values(width);
  for (const auto& r : records) {
    if (r.attributes.size() != width) {
      throw Error(Errc::ShapeMismatch, "record " + r.id + " has " + std::to_string(r.attributes.size()) +
                                           " attributes, expected " + std::to_string(width));
    }
    for (std::size_t s = 0; s < width; ++s) values[s].insert(r.attributes[s]);
  }
  slots_.resize(width);
  for (std::size_t s = 0; s < width; ++s) {
    offsets_.push_back(dim_);
    std::size_t i = 0;
    for (const auto& v : values[s]) slots_[s][v] = i++;
    dim_ += values[s].size();
  }
  for (const auto& r : records) {
    by_image_.insert_or_assign(image_key(r), r.attributes);
  }
}

std::string AttributeOracleEmbedder::image_key(const GalleryRecord& record) {
  if (record.image_path) return read_bytes(*record.image_path);
  return "item:" + record.id;
}

Embedding AttributeOracleEmbedder::encode(const std::vector<std::string>& attributes) const {
  if (attributes.size() != slots_.size()) {
    throw Error(Errc::ShapeMismatch, "expected " + std::to_string(slots_.size()) + " attributes");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    const auto it = slots_[s].find(attributes[s]);
    if (it != slots_[s].end()) v[static_cast<Eigen::Index>(offsets_[s] + it->second)] = 1.0;
  }
  return normalize(v);
}

std::vector<std::string> AttributeOracleEmbedder::apply_edit(std::vector<std::string> attributes,
                                                             std::string_view text) const {
  if (text.empty()) return attributes;
  const auto edit = parse_query_text(text);
  if (!edit) throw Error(Errc::ToolFailure, "oracle embedder cannot interpret '" + std::string(text) + "'");
  for (auto& a : attributes) {
    if (a == edit->original) {
      a = edit->target;
      return attributes;
    }
  }
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    if (slots_[s].count(edit->target)) {
      attributes[s] = edit->target;
      return attributes;
    }
  }
  return attributes;
}

const std::vector<std::string>& AttributeOracleEmbedder::attributes_of(std::string_view image) const {
  const auto it = by_image_.find(image);
  if (it == by_image_.end()) throw Error(Errc::NotFound, "image is not part of the oracle gallery");
  return it->second;
}

Embedding AttributeOracleEmbedder::embed_composed(std::string_view image, std::string_view text) {
  return encode(apply_edit(attributes_of(image), text));
}

std::vector<GalleryItem> AttributeOracleEmbedder::build_gallery(const std::vector<GalleryRecord>& records) const {
  std::vector<GalleryItem> items;
  items.reserve(records.size());
  for (const auto& r : records) {
    items.push_back(GalleryItem{r.id, encode(r.attributes), r.description, r.image_path, r.attributes});
  }
  return items;
}

std::string ScriptedVqa::ask(std::string_view, const std::string& question) {
  std::lock_guard lock(mutex_);
  const auto it = answers_.find(question);
  if (it == answers_.end()) throw Error(Errc::VqaUnavailable, "no scripted answer for '" + question + "'");
  return it->second;
}

void ScriptedVqa::set(const std::string& question, const std::string& answer) {
  std::lock_guard lock(mutex_);
  answers_[question] = answer;
}

}  // namespace compsearch
