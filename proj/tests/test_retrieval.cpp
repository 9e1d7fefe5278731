#include "compsearch/error.hpp"
#include "compsearch/retrieval.hpp"

#include "doctest.h"

#include <algorithm>
#include <random>

using namespace compsearch;

namespace {

Embedding random_embedding(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> d;
  return normalize(Eigen::VectorXd(Eigen::VectorXd::NullaryExpr(dim, [&] { return d(rng); })));
}

Embedding axis(Eigen::Index dim, Eigen::Index i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  v[i] = 1.0;
  return normalize(v);
}

GalleryItem item(std::string id, Embedding e) { return GalleryItem{std::move(id), std::move(e), "", {}, {}}; }

int error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return static_cast<int>(e.code());
  }
  return -1;
}

}  // namespace

TEST_CASE("build_index validation") {
  std::mt19937_64 rng(1);
  CHECK(Index::build({item("a", axis(4, 0)), item("b", axis(4, 1)), item("c", axis(4, 2))}).size() == 3);
  CHECK(error_code([] { Index::build({}); }) == static_cast<int>(Errc::EmptyGallery));
  CHECK(error_code([] { Index::build({item("a", axis(4, 0)), item("a", axis(4, 1))}); }) ==
        static_cast<int>(Errc::DuplicateId));
  CHECK(error_code([&] { Index::build({item("a", random_embedding(rng, 8)), item("b", random_embedding(rng, 16))}); }) ==
        static_cast<int>(Errc::DimMismatch));
}

TEST_CASE("search self-match, k >= N, exclusions") {
  std::mt19937_64 rng(2);
  std::vector<GalleryItem> items;
  for (int i = 0; i < 20; ++i) items.push_back(item("id" + std::to_string(i), random_embedding(rng, 12)));
  const auto probe = items[7].embedding;
  const auto index = Index::build(items);

  auto r = index.search(probe, 3);
  REQUIRE(r.ranked.size() == 3);
  CHECK(r.ranked[0].id == "id7");
  CHECK(r.ranked[0].score == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(index.search(probe, 100).ranked.size() == 20);

  r = index.search(probe, 100, {"id7", "id3"});
  CHECK(r.ranked.size() == 18);
  CHECK(std::none_of(r.ranked.begin(), r.ranked.end(), [](const ScoredId& s) { return s.id == "id7" || s.id == "id3"; }));

  CHECK(error_code([&] { index.search(random_embedding(rng, 5), 1); }) == static_cast<int>(Errc::DimMismatch));
}

TEST_CASE("ties break by ascending id") {
  const auto e = axis(3, 0);
  const auto index = Index::build({item("b", e), item("c", e), item("a", e), item("d", axis(3, 1))});
  const auto r = index.search(e, 4);
  REQUIRE(r.ranked.size() == 4);
  CHECK(r.ranked[0].id == "a");
  CHECK(r.ranked[1].id == "b");
  CHECK(r.ranked[2].id == "c");
  CHECK(r.ranked[3].id == "d");
}

TEST_CASE("search equals a linear-scan sort oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<GalleryItem> items;
    const Eigen::Index dim = 1 + trial % 9;
    for (int i = 0; i < 50; ++i) {
      // Duplicated embeddings force ties.
      items.push_back(item("g" + std::to_string((i * 37) % 50),
                           i % 5 == 0 && i > 0 ? items.back().embedding : random_embedding(rng, dim)));
    }
    const auto query = random_embedding(rng, dim);
    std::vector<ScoredId> oracle;
    for (const auto& it : items) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < dim; ++j) s += it.embedding.values()[j] * query.values()[j];
      oracle.push_back({it.id, std::clamp(s, -1.0, 1.0)});
    }
    std::sort(oracle.begin(), oracle.end(), [](const ScoredId& a, const ScoredId& b) {
      return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    oracle.resize(5);
    CHECK(Index::build(items).search(query, 5).ranked == oracle);
  }
}

TEST_CASE("recall_at_k examples") {
  const auto result = [](std::string qid, std::vector<std::string> ids) {
    SearchResult r;
    for (auto& id : ids) r.ranked.push_back({std::move(id), 0.0});
    r.query_id = std::move(qid);
    return r;
  };
  const std::map<std::string, std::string> truth{{"q1", "a"}, {"q2", "b"}};
  CHECK(recall_at_k({result("q1", {"a", "x"}), result("q2", {"b", "y"})}, truth, 10) == 1.0);
  CHECK(recall_at_k({result("q1", {"x", "y"}), result("q2", {"a", "y"})}, truth, 10) == 0.0);
  CHECK(recall_at_k({result("q1", {"x", "a"}), result("q2", {"x", "y"})}, truth, 10) == 0.5);
  CHECK(recall_at_k({result("q1", {"x", "a"}), result("q2", {"b", "y"})}, truth, 1) == 0.5);
  CHECK(recall_at_k({}, truth, 10) == 0.0);
  CHECK(error_code([&] { recall_at_k({result("q9", {"a"})}, truth, 1); }) ==
        static_cast<int>(Errc::MissingGroundTruth));
  CHECK(error_code([&] {
          SearchResult r;
          recall_at_k({r}, truth, 1);
        }) == static_cast<int>(Errc::MissingGroundTruth));

  // a and a2 are the same product: the duplicate no longer pushes b out of the top 2.
  const std::map<std::string, std::string> product{{"a", "p"}, {"a2", "p"}};
  const std::map<std::string, std::string> truth_b{{"q", "b"}};
  CHECK(recall_at_k({result("q", {"a", "a2", "b"})}, truth_b, 2) == 0.0);
  CHECK(recall_at_k_by_product({result("q", {"a", "a2", "b"})}, truth_b, product, 2) == 1.0);
}

TEST_CASE("query text template") {
  CHECK(build_query_text("blue", "red") == "replace blue with red");
  CHECK(build_query_text("natural", "black") == "replace natural with black");
  CHECK(build_query_text("  gray ", "beige\t") == "replace gray with beige");
  CHECK(error_code([] { build_query_text("", "red"); }) == static_cast<int>(Errc::EmptyAttribute));
  CHECK(error_code([] { build_query_text("blue", "   "); }) == static_cast<int>(Errc::EmptyAttribute));
  CHECK(error_code([] { build_query_text("bl\nue", "red"); }) == static_cast<int>(Errc::IllegalCharacter));

  const auto edit = parse_query_text("replace light blue with dark red");
  REQUIRE(edit.has_value());
  CHECK(edit->original == "light blue");
  CHECK(edit->target == "dark red");
  CHECK_FALSE(parse_query_text("make it red").has_value());
  CHECK_FALSE(parse_query_text("replace  with red").has_value());
}

TEST_CASE("validate_triplet") {
  CHECK_NOTHROW(validate_triplet({"a", "b", "replace x with y"}, 1));
  CHECK_THROWS_AS(validate_triplet({"a", "a", "replace x with y"}, 3), MalformedRecord);
  CHECK_THROWS_AS(validate_triplet({"a", "b", "  "}, 3), MalformedRecord);
  try {
    validate_triplet({"", "b", "t"}, 4);
  } catch (const MalformedRecord& e) {
    CHECK(e.line() == 4);
  }
}
