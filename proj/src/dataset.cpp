#include "compsearch/dataset.hpp"

#include "compsearch/embedding_io.hpp"
#include "compsearch/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace compsearch {

namespace {

using nlohmann::json;

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw MalformedRecord(line_no, "record is not a JSON object");
    fn(record, line_no);
  }
}

std::string required_string(const json& record, const char* key, std::size_t line) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw MalformedRecord(line, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

}  // namespace

std::vector<Triplet> load_triplets(const std::filesystem::path& path) {
  std::vector<Triplet> out;
  for_each_record(path, [&](const json& r, std::size_t line) {
    Triplet t{required_string(r, "ref_id", line), required_string(r, "trg_id", line),
              required_string(r, "modifying_text", line)};
    validate_triplet(t, line);
    out.push_back(std::move(t));
  });
  return out;
}

void save_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets) {
  std::vector<json> records;
  records.reserve(triplets.size());
  for (const auto& t : triplets) {
    validate_triplet(t);
    records.push_back({{"ref_id", t.ref_id}, {"trg_id", t.trg_id}, {"modifying_text", t.modifying_text}});
  }
  write_lines(path, records);
}

std::filesystem::path embeddings_path_for(const std::filesystem::path& gallery_path) {
  auto p = gallery_path;
  p.replace_extension(".cse1");
  return p;
}

std::vector<GalleryRecord> load_gallery_records(const std::filesystem::path& path) {
  std::vector<GalleryRecord> out;
  std::set<std::string> ids;
  const auto base = path.parent_path();
  for_each_record(path, [&](const json& r, std::size_t line) {
    GalleryRecord rec;
    rec.id = required_string(r, "id", line);
    if (rec.id.empty()) throw MalformedRecord(line, "empty id");
    if (!ids.insert(rec.id).second) throw MalformedRecord(line, "duplicate id " + rec.id);
    rec.description = required_string(r, "description", line);
    if (const auto it = r.find("image_path"); it != r.end() && !it->is_null()) {
      if (!it->is_string()) throw MalformedRecord(line, "image_path must be a string");
      std::filesystem::path p = it->get<std::string>();
      rec.image_path = (p.is_relative() ? base / p : p).string();
    }
    if (const auto it = r.find("attributes"); it != r.end() && !it->is_null()) {
      if (!it->is_array()) throw MalformedRecord(line, "attributes must be an array of strings");
      for (const auto& a : *it) {
        if (!a.is_string() || a.get<std::string>().empty()) {
          throw MalformedRecord(line, "attributes must be non-empty strings");
        }
        rec.attributes.push_back(a.get<std::string>());
      }
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<GalleryItem> load_gallery(const std::filesystem::path& path) {
  auto records = load_gallery_records(path);
  auto embeddings = read_embeddings(embeddings_path_for(path));
  if (embeddings.size() != records.size()) {
    throw Error(Errc::CorruptState, path.string() + " has " + std::to_string(records.size()) +
                                        " records but the embedding file has " +
                                        std::to_string(embeddings.size()) + " rows");
  }
  std::vector<GalleryItem> items;
  items.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    items.push_back(GalleryItem{std::move(r.id), std::move(embeddings[i]), std::move(r.description),
                                std::move(r.image_path), std::move(r.attributes)});
  }
  return items;
}

void save_gallery(const std::filesystem::path& path, const std::vector<GalleryItem>& items) {
  std::vector<json> records;
  std::vector<Embedding> rows;
  records.reserve(items.size());
  rows.reserve(items.size());
  for (const auto& item : items) {
    json r{{"id", item.id}, {"description", item.description}};
    if (item.image_path) r["image_path"] = *item.image_path;
    if (!item.attributes.empty()) r["attributes"] = item.attributes;
    records.push_back(std::move(r));
    rows.push_back(item.embedding);
  }
  write_lines(path, records);
  write_embeddings(embeddings_path_for(path), rows);
}

}  // namespace compsearch
