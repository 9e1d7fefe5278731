#pragma once

#include "compsearch/retrieval.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace compsearch {

/// Gallery metadata without an embedding (one JSON-lines record).
struct GalleryRecord {
  std::string id;
  std::string description;
  std::optional<std::string> image_path;
  std::vector<std::string> attributes;
};

/// JSON-lines, keys ref_id, trg_id, modifying_text. Throws Io / MalformedRecord.
std::vector<Triplet> load_triplets(const std::filesystem::path& path);
void save_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets);

/// Sibling embedding file of a gallery: same stem, ".cse1" extension.
std::filesystem::path embeddings_path_for(const std::filesystem::path& gallery_path);

/// JSON-lines with keys id, description, image_path (optional) and attributes
/// (optional array of strings). Relative image paths resolve against the file's
/// directory. Duplicate ids are reported as MalformedRecord.
std::vector<GalleryRecord> load_gallery_records(const std::filesystem::path& path);

/// Gallery records joined row-by-row with the sibling "CSE1" file.
std::vector<GalleryItem> load_gallery(const std::filesystem::path& path);

/// Writes the JSON-lines file and its sibling embedding file.
void save_gallery(const std::filesystem::path& path, const std::vector<GalleryItem>& items);

}  // namespace compsearch
