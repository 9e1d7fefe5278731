#pragma once

#include "compsearch/dataset.hpp"
#include "compsearch/embedding.hpp"

#include <cstddef>
#include <initializer_list>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace compsearch {

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Throws LlmUnavailable.
  virtual std::string complete(const std::string& prompt) = 0;
};

struct ScriptedLlmEntry {
  /// Prefix of the prompt's current user input; empty matches anything.
  std::string match;
  std::string response;
};

/// Replays responses in order. Each call consumes the next entry, whose match
/// must be a prefix of the text after the last "Human: " line of the prompt.
class ScriptedLlm : public LlmBackend {
 public:
  ScriptedLlm() = default;
  explicit ScriptedLlm(std::vector<ScriptedLlmEntry> entries) : entries_(std::move(entries)) {}
  ScriptedLlm(std::initializer_list<ScriptedLlmEntry> entries) : entries_(entries) {}

  std::string complete(const std::string& prompt) override;

  void append(std::vector<ScriptedLlmEntry> entries);
  std::size_t consumed() const;
  std::size_t remaining() const;
  /// Every prompt seen so far, in call order.
  std::vector<std::string> prompts() const;

 private:
  mutable std::mutex mutex_;
  std::vector<ScriptedLlmEntry> entries_;
  std::size_t cursor_ = 0;
  std::vector<std::string> prompts_;
};

/// Text after the last line starting with "Human: ", up to the end of that line.
std::string current_input_segment(std::string_view prompt);

class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;
  /// Embedding of an image edited by `text`. Throws EmbedderUnavailable.
  virtual Embedding embed_composed(std::string_view image, std::string_view text) = 0;
  Embedding embed_image(std::string_view image) { return embed_composed(image, ""); }
};

/// Normalized one-hot concatenation of attribute tuples. Images are looked up
/// by their bytes; items without an image file use the key "item:<id>".
class AttributeOracleEmbedder : public EmbedderBackend {
 public:
  /// Every record needs the same number of attributes (ShapeMismatch).
  /// Image files are read from disk (Io).
  explicit AttributeOracleEmbedder(const std::vector<GalleryRecord>& records);

  Embedding embed_composed(std::string_view image, std::string_view text) override;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t slot_count() const noexcept { return slots_.size(); }
  /// Throws ShapeMismatch; unknown values leave their slot empty.
  Embedding encode(const std::vector<std::string>& attributes) const;
  /// Applies "replace X with Y": the slot holding X becomes Y; when no slot
  /// holds X, the slot whose vocabulary knows Y is set. Throws ToolFailure for
  /// any other text.
  std::vector<std::string> apply_edit(std::vector<std::string> attributes, std::string_view text) const;
  /// Throws NotFound.
  const std::vector<std::string>& attributes_of(std::string_view image) const;
  /// Gallery items embedded with embed_image.
  std::vector<GalleryItem> build_gallery(const std::vector<GalleryRecord>& records) const;

  static std::string image_key(const GalleryRecord& record);

 private:
  std::vector<std::map<std::string, std::size_t>> slots_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<std::string>, std::less<>> by_image_;
};

class VqaBackend {
 public:
  virtual ~VqaBackend() = default;
  /// Throws VqaUnavailable.
  virtual std::string ask(std::string_view image, const std::string& question) = 0;
};

/// Answers looked up by question; unknown questions are unavailable.
class ScriptedVqa : public VqaBackend {
 public:
  explicit ScriptedVqa(std::map<std::string, std::string> answers = {}) : answers_(std::move(answers)) {}
  std::string ask(std::string_view image, const std::string& question) override;
  void set(const std::string& question, const std::string& answer);

 private:
  std::mutex mutex_;
  std::map<std::string, std::string> answers_;
};

}  // namespace compsearch
