#include "compsearch/retrieval.hpp"

#include "compsearch/error.hpp"

#include <algorithm>
#include <numeric>

namespace compsearch {

namespace {

constexpr std::string_view kReplace = "replace ";
constexpr std::string_view kWith = " with ";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

const std::string& lookup_truth(const SearchResult& r,
                                const std::map<std::string, std::string>& ground_truth) {
  if (!r.query_id) throw Error(Errc::MissingGroundTruth, "search result has no query id");
  const auto it = ground_truth.find(*r.query_id);
  if (it == ground_truth.end()) {
    throw Error(Errc::MissingGroundTruth, "no ground truth for query " + *r.query_id);
  }
  return it->second;
}

}  // namespace

void validate_triplet(const Triplet& t, std::size_t line) {
  if (t.ref_id.empty() || t.trg_id.empty()) throw MalformedRecord(line, "empty ref_id or trg_id");
  if (t.ref_id == t.trg_id) throw MalformedRecord(line, "ref_id equals trg_id (" + t.ref_id + ")");
  if (trim(t.modifying_text).empty()) throw MalformedRecord(line, "empty modifying_text");
}

Index Index::build(std::vector<GalleryItem> items) {
  if (items.empty()) throw Error(Errc::EmptyGallery, "cannot index an empty gallery");
  Index index;
  index.dim_ = items.front().embedding.dim();
  index.by_id_.reserve(items.size());
  index.rows_.reserve(items.size() * index.dim_);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (item.id.empty()) throw Error(Errc::DuplicateId, "gallery item " + std::to_string(i) + " has an empty id");
    if (item.embedding.dim() != index.dim_) {
      throw Error(Errc::DimMismatch, "item " + item.id + " has dim " +
                                         std::to_string(item.embedding.dim()) + ", expected " +
                                         std::to_string(index.dim_));
    }
    if (!index.by_id_.emplace(item.id, i).second) {
      throw Error(Errc::DuplicateId, "duplicate gallery id " + item.id);
    }
    const auto& v = item.embedding.values();
    index.rows_.insert(index.rows_.end(), v.data(), v.data() + v.size());
  }
  index.items_ = std::move(items);
  return index;
}

const GalleryItem* Index::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &items_[it->second];
}

double Index::score(std::size_t row, const Eigen::VectorXd& query) const {
  const double* r = rows_.data() + row * dim_;
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) s += r[i] * query[static_cast<Eigen::Index>(i)];
  return std::clamp(s, -1.0, 1.0);
}

SearchResult Index::search(const Embedding& query, std::size_t k,
                           const std::set<std::string>& exclude_ids) const {
  if (query.dim() != dim_) {
    throw Error(Errc::DimMismatch, "query dim " + std::to_string(query.dim()) + " vs index dim " +
                                       std::to_string(dim_));
  }
  std::vector<ScoredId> scored;
  scored.reserve(items_.size());
  for (std::size_t row = 0; row < items_.size(); ++row) {
    if (!exclude_ids.empty() && exclude_ids.contains(items_[row].id)) continue;
    scored.push_back({items_[row].id, score(row, query.values())});
  }
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    ranks_before);
  scored.resize(keep);
  return SearchResult{std::move(scored), std::nullopt};
}

double recall_at_k(const std::vector<SearchResult>& results,
                   const std::map<std::string, std::string>& ground_truth, std::size_t k) {
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : results) {
    const auto& target = lookup_truth(r, ground_truth);
    const std::size_t n = std::min(k, r.ranked.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (r.ranked[i].id == target) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double recall_at_k_by_product(const std::vector<SearchResult>& results,
                              const std::map<std::string, std::string>& ground_truth,
                              const std::map<std::string, std::string>& product_of,
                              std::size_t k) {
  if (results.empty()) return 0.0;
  const auto product = [&](const std::string& id) -> const std::string& {
    const auto it = product_of.find(id);
    return it == product_of.end() ? id : it->second;
  };
  std::size_t hits = 0;
  for (const auto& r : results) {
    const auto& target = product(lookup_truth(r, ground_truth));
    std::set<std::string> seen;
    for (const auto& entry : r.ranked) {
      if (seen.size() >= k) break;
      const auto& p = product(entry.id);
      if (!seen.insert(p).second) continue;
      if (p == target) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

std::string build_query_text(std::string_view original_attribute, std::string_view target_attribute) {
  const auto orig = trim(original_attribute);
  const auto target = trim(target_attribute);
  if (orig.empty() || target.empty()) throw Error(Errc::EmptyAttribute, "attributes must be non-empty");
  for (const auto s : {orig, target}) {
    if (s.find_first_of("\r\n") != std::string_view::npos) {
      throw Error(Errc::IllegalCharacter, "attribute contains a newline");
    }
  }
  std::string out;
  out.reserve(kReplace.size() + orig.size() + kWith.size() + target.size());
  out.append(kReplace).append(orig).append(kWith).append(target);
  return out;
}

std::optional<AttributeEdit> parse_query_text(std::string_view text) {
  if (!text.starts_with(kReplace)) return std::nullopt;
  const auto rest = text.substr(kReplace.size());
  const auto pos = rest.find(kWith);
  if (pos == std::string_view::npos) return std::nullopt;
  const auto orig = rest.substr(0, pos);
  const auto target = rest.substr(pos + kWith.size());
  if (orig.empty() || target.empty() || trim(orig) != orig || trim(target) != target) return std::nullopt;
  if (text.find_first_of("\r\n") != std::string_view::npos) return std::nullopt;
  return AttributeEdit{std::string(orig), std::string(target)};
}

}  // namespace compsearch
