#include "compsearch/dataset.hpp"
#include "compsearch/embedding_io.hpp"
#include "compsearch/error.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

using namespace compsearch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("compsearch_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Embedding random_embedding(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> d;
  return normalize(Eigen::VectorXd(Eigen::VectorXd::NullaryExpr(dim, [&] { return d(rng); })));
}

}  // namespace

TEST_CASE("load_triplets") {
  const auto dir = scratch("triplets");
  write_text(dir / "t.jsonl",
             "{\"ref_id\":\"a\",\"trg_id\":\"b\",\"modifying_text\":\"replace blue with red\"}\n\n"
             "{\"ref_id\":\"c\",\"trg_id\":\"d\",\"modifying_text\":\"replace x with y\"}\n");
  const auto t = load_triplets(dir / "t.jsonl");
  REQUIRE(t.size() == 2);
  CHECK(t[1].trg_id == "d");

  write_text(dir / "bad.jsonl",
             "{\"ref_id\":\"a\",\"trg_id\":\"b\",\"modifying_text\":\"m\"}\n"
             "{\"ref_id\":\"a\",\"trg_id\":\"a\",\"modifying_text\":\"m\"}\n");
  try {
    load_triplets(dir / "bad.jsonl");
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(e.line() == 2);
  }
  write_text(dir / "json.jsonl", "{not json\n");
  CHECK_THROWS_AS(load_triplets(dir / "json.jsonl"), MalformedRecord);
  write_text(dir / "missing.jsonl", "{\"ref_id\":\"a\"}\n");
  CHECK_THROWS_AS(load_triplets(dir / "missing.jsonl"), MalformedRecord);
  CHECK_THROWS_AS(load_triplets(dir / "nope.jsonl"), Error);

  save_triplets(dir / "rt.jsonl", t);
  const auto back = load_triplets(dir / "rt.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].modifying_text == "replace blue with red");
}

TEST_CASE("embedding file round trip and corruption") {
  const auto dir = scratch("cse1");
  std::mt19937_64 rng(4);
  std::vector<Embedding> rows;
  for (int i = 0; i < 7; ++i) rows.push_back(random_embedding(rng, 5));
  write_embeddings(dir / "e.cse1", rows);
  const auto back = read_embeddings(dir / "e.cse1");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK((back[i].values() - rows[i].values()).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(fs::file_size(dir / "e.cse1") == 12 + 7 * 5 * 4);

  const auto code_of = [&](const std::string& bytes) {
    write_text(dir / "bad.cse1", bytes);
    try {
      read_embeddings(dir / "bad.cse1");
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::NotFound;
  };
  std::ifstream in(dir / "e.cse1", std::ios::binary);
  const std::string good((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(code_of("CSE2" + good.substr(4)) == Errc::CorruptState);
  CHECK(code_of(good.substr(0, good.size() - 3)) == Errc::CorruptState);
  CHECK(code_of(good + "x") == Errc::CorruptState);
  std::string scaled = good;
  scaled[12 + 3] = static_cast<char>(scaled[12 + 3] ^ 0x01);  // perturb the first value's exponent
  CHECK(code_of(scaled) == Errc::CorruptState);
}

TEST_CASE("gallery round trip") {
  const auto dir = scratch("gallery");
  std::mt19937_64 rng(8);
  std::vector<GalleryItem> items;
  for (int i = 0; i < 25; ++i) {
    GalleryItem it{"item" + std::to_string(i), random_embedding(rng, 6), "desc " + std::to_string(i), {}, {}};
    if (i % 3 == 0) it.image_path = (dir / ("img" + std::to_string(i) + ".png")).string();
    if (i % 2 == 0) it.attributes = {"red", "silk", "dress"};
    items.push_back(std::move(it));
  }
  save_gallery(dir / "g.jsonl", items);
  CHECK(fs::exists(embeddings_path_for(dir / "g.jsonl")));
  CHECK(embeddings_path_for(dir / "g.jsonl").extension() == ".cse1");
  const auto back = load_gallery(dir / "g.jsonl");
  REQUIRE(back.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(back[i].id == items[i].id);
    CHECK(back[i].description == items[i].description);
    CHECK(back[i].image_path == items[i].image_path);
    CHECK(back[i].attributes == items[i].attributes);
    CHECK((back[i].embedding.values() - items[i].embedding.values()).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("gallery records resolve relative image paths and reject duplicates") {
  const auto dir = scratch("records");
  write_text(dir / "g.jsonl",
             "{\"id\":\"a\",\"description\":\"red dress\",\"image_path\":\"imgs/a.png\"}\n"
             "{\"id\":\"b\",\"description\":\"blue tee\",\"attributes\":[\"blue\",\"cotton\",\"tee\"]}\n");
  const auto recs = load_gallery_records(dir / "g.jsonl");
  REQUIRE(recs.size() == 2);
  REQUIRE(recs[0].image_path.has_value());
  CHECK(fs::path(*recs[0].image_path) == dir / "imgs" / "a.png");
  CHECK(recs[1].attributes.size() == 3);

  write_text(dir / "dup.jsonl", "{\"id\":\"a\",\"description\":\"x\"}\n{\"id\":\"a\",\"description\":\"y\"}\n");
  CHECK_THROWS_AS(load_gallery_records(dir / "dup.jsonl"), MalformedRecord);
}
