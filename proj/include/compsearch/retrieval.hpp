#pragma once

#include "compsearch/embedding.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace compsearch {

struct GalleryItem {
  std::string id;
  Embedding embedding;
  std::string description;
  std::optional<std::string> image_path;
  // Categorical attribute tuple, when the catalogue provides one.
  std::vector<std::string> attributes;
};

struct Triplet {
  std::string ref_id;
  std::string trg_id;
  std::string modifying_text;
};

/// Throws MalformedRecord(line) when the triplet breaks its invariants.
void validate_triplet(const Triplet& t, std::size_t line = 0);

struct ScoredId {
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

struct SearchResult {
  std::vector<ScoredId> ranked;  // score desc, then id asc
  std::optional<std::string> query_id;
};

/// Immutable exact-search index over a gallery.
class Index {
 public:
  /// Throws EmptyGallery, DuplicateId, DimMismatch.
  static Index build(std::vector<GalleryItem> items);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<GalleryItem>& items() const noexcept { return items_; }
  const GalleryItem& item(std::size_t row) const { return items_.at(row); }
  const GalleryItem* find(std::string_view id) const;

  /// Top-k by inner product with `query`, excluded ids omitted, ties broken by
  /// ascending id. Scores are clamped to [-1, 1]. Throws DimMismatch.
  SearchResult search(const Embedding& query, std::size_t k,
                      const std::set<std::string>& exclude_ids = {}) const;

  /// Inner product of the query with gallery row `row`, summed in index order.
  double score(std::size_t row, const Eigen::VectorXd& query) const;

 private:
  Index() = default;

  std::vector<GalleryItem> items_;
  std::vector<double> rows_;  // row-major copy of all embeddings
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> by_id_;
};

inline Index build_index(std::vector<GalleryItem> items) { return Index::build(std::move(items)); }

/// Fraction of results whose ground-truth target is within the first k ranks.
/// Every result needs a query_id present in `ground_truth` (MissingGroundTruth).
double recall_at_k(const std::vector<SearchResult>& results,
                   const std::map<std::string, std::string>& ground_truth, std::size_t k);

/// Recall where gallery items sharing a product key count as one entry: ranks
/// are collapsed to distinct products before taking the top k. Ids absent from
/// `product_of` are their own product.
double recall_at_k_by_product(const std::vector<SearchResult>& results,
                              const std::map<std::string, std::string>& ground_truth,
                              const std::map<std::string, std::string>& product_of,
                              std::size_t k);

/// "replace <orig> with <target>". Attributes are trimmed; throws EmptyAttribute
/// or IllegalCharacter (newlines).
std::string build_query_text(std::string_view original_attribute, std::string_view target_attribute);

struct AttributeEdit {
  std::string original;
  std::string target;
};

/// Inverse of build_query_text; std::nullopt when `text` is not in that form.
std::optional<AttributeEdit> parse_query_text(std::string_view text);

}  // namespace compsearch
