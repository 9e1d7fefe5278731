#include "compsearch/service/assistant.hpp"
#include "compsearch/service/chat.hpp"
#include "compsearch/service/config.hpp"
#include "compsearch/service/http.hpp"
#include "compsearch/service/persistence.hpp"

#include "doctest.h"
#include "fixtures.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

using namespace compsearch;
using fixtures::code;
using fixtures::error_code;
namespace fs = std::filesystem;

namespace {

const fs::path kDemo = fs::path(COMPSEARCH_SOURCE_DIR) / "data" / "demo";

ServerConfig demo_config(const fs::path& data_dir, SyntaxMode mode = SyntaxMode::FunctionCall) {
  ServerConfig c;
  c.gallery = kDemo / "gallery.jsonl";
  c.data_dir = data_dir;
  c.mode = mode;
  c.k = 5;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> rendered(const std::vector<MemoryLine>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) out.push_back(l.render());
  return out;
}

ScriptedLlm& scripted(SearchAssistant& a) { return dynamic_cast<ScriptedLlm&>(a.llm()); }

struct RunningServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit RunningServer(SearchAssistant& assistant) {
    register_routes(server, assistant);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("server config parsing") {
  const auto c = ServerConfig::parse(
      "# demo\nport = 9000\nmode = langchain\nk = 3\ngallery = g.jsonl\ndata_dir = d\nllm = remote\n"
      "llm_url = http://x:1\n",
      "/base");
  CHECK(c.port == 9000);
  CHECK(c.mode == SyntaxMode::Langchain);
  CHECK(c.k == 3);
  CHECK(c.gallery == fs::path("/base/g.jsonl"));
  CHECK(c.data_dir == fs::path("/base/d"));
  CHECK(c.llm == BackendKind::Remote);
  CHECK_NOTHROW(c.validate());
  CHECK(error_code([] { ServerConfig::parse("colour = red"); }) == code(Errc::InvalidConfig));
  CHECK(error_code([] { ServerConfig::parse("k = -1"); }) == code(Errc::InvalidConfig));
  CHECK(error_code([] { ServerConfig::parse("mode = prose"); }) == code(Errc::InvalidConfig));
  CHECK(error_code([] { ServerConfig::parse("gallery = g\nk = 0").validate(); }) == code(Errc::InvalidConfig));
  CHECK(error_code([] { ServerConfig::parse("gallery = g\nvqa = remote").validate(); }) == code(Errc::InvalidConfig));

  ::setenv("COMPSEARCH_DATA_DIR", "/tmp/from-env", 1);
  ::setenv("COMPSEARCH_LLM_URL", "http://env:2", 1);
  auto e = ServerConfig::parse("gallery = g");
  e.apply_environment();
  CHECK(e.data_dir == fs::path("/tmp/from-env"));
  CHECK(e.llm_url == "http://env:2");
  ::unsetenv("COMPSEARCH_DATA_DIR");
  ::unsetenv("COMPSEARCH_LLM_URL");
}

TEST_CASE("session persistence round-trips") {
  const auto dir = fixtures::temp_dir("persist");
  auto s = start_session(dir);
  record_image_upload(s, "img", "gray wool dress");
  record_search_results(s, {{"a", "gray wool dress", 1.0}, {"b", "tee; cotton", 0.5}});
  s.append(Speaker::Human, "hello");
  s.append(Speaker::AI, "hi");
  save_session(dir, s);
  const auto loaded = load_session(dir, s.id);
  CHECK(loaded.memory == s.memory);
  CHECK(loaded.last_results == s.last_results);
  CHECK(loaded.image_counter == 1);
  CHECK(loaded.image_dir == s.image_dir);

  CHECK(error_code([&] { load_session(dir, "aaaaaaaaaaaaaaaaaaaaaaaaaa"); }) == code(Errc::NotFound));
  CHECK(error_code([&] { load_session(dir, "../x"); }) == code(Errc::NotFound));

  std::ofstream(session_file(dir, s.id)) << "{not json";
  CHECK(error_code([&] { load_session(dir, s.id); }) == code(Errc::CorruptState));
  save_session(dir, s);
  fs::remove(s.image_dir / "IMG_001.png");
  CHECK(error_code([&] { load_session(dir, s.id); }) == code(Errc::CorruptState));
}

TEST_CASE("a crash during a save keeps the last completed state") {
  const auto dir = fixtures::temp_dir("killpoint");
  auto s = start_session(dir);
  s.append(Speaker::Human, "first");
  s.append(Speaker::AI, "one");
  save_session(dir, s);
  auto next = s;
  next.append(Speaker::Human, "second");
  next.append(Speaker::AI, "two");
  struct Crash {};
  CHECK_THROWS_AS(save_session(dir, next, [] { throw Crash{}; }), Crash);
  CHECK(load_session(dir, s.id).memory == s.memory);
  // A torn temporary file from the crash does not affect loading either.
  auto tmp = session_file(dir, s.id);
  tmp += ".tmp";
  std::ofstream(tmp, std::ios::trunc) << "{\"version\": 1, \"id\"";
  CHECK(load_session(dir, s.id).memory == s.memory);
  save_session(dir, next);
  CHECK(load_session(dir, s.id).memory == next.memory);
}

TEST_CASE("assistant restarts from disk after a failed turn") {
  const auto dir = fixtures::temp_dir("restart");
  std::string id;
  std::vector<MemoryLine> after_first;
  {
    SearchAssistant a(demo_config(dir), make_backends(demo_config(dir)));
    id = a.create_session();
    a.upload_image(id, read_file(kDemo / "images" / "gray-wool-dress.png"));
    scripted(a).append({{"", "SEARCH(IMG_001.png;gray;beige)"}});
    a.send_message(id, "in beige");
    after_first = a.transcript(id);
    // The second turn dies inside the model call: nothing of it may persist.
    CHECK(error_code([&] { a.send_message(id, "and in red?"); }) == code(Errc::LlmUnavailable));
    CHECK(a.transcript(id) == after_first);
  }
  SearchAssistant b(demo_config(dir), make_backends(demo_config(dir)));
  CHECK(b.transcript(id) == after_first);
  CHECK(b.results(id).front().id == "beige-wool-dress");
  scripted(b).append({{"", "SEARCH(IMG_001.png;gray;red)"}});
  CHECK(b.send_message(id, "and in red?").results.front().id == "red-wool-dress");
  CHECK(error_code([&] { b.transcript("aaaaaaaaaaaaaaaaaaaaaaaaaa"); }) == code(Errc::NotFound));
}

TEST_CASE("distinct sessions run concurrently and stay separate") {
  const auto dir = fixtures::temp_dir("concurrent");
  auto config = demo_config(dir);
  SearchAssistant a(config, make_backends(config));
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(a.create_session());
  const auto tee = read_file(kDemo / "images" / "white-cotton-tee.png");
  std::vector<std::thread> threads;
  for (const auto& id : ids) {
    threads.emplace_back([&, id] {
      for (int j = 0; j < 5; ++j) a.upload_image(id, tee);
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& id : ids) {
    const auto lines = a.transcript(id);
    CHECK(lines.size() == 15);
    CHECK(lines[12].render() == "Human: I provided a figure named IMG_005.png. white cotton tee");
    CHECK(load_session(dir, id).image_counter == 5);
  }
}

TEST_CASE("http routes") {
  const auto dir = fixtures::temp_dir("http");
  auto config = demo_config(dir);
  SearchAssistant a(config, make_backends(config));
  RunningServer running(a);
  httplib::Client client("127.0.0.1", running.port);

  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(nlohmann::json::parse(health->body)["gallery_size"] == 36);

  auto created = client.Post("/sessions");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto id = nlohmann::json::parse(created->body)["session_id"].get<std::string>();

  const auto png = read_file(kDemo / "images" / "gray-wool-dress.png");
  httplib::MultipartFormDataItems form = {{"image", png, "dress.png", "image/png"}};
  auto uploaded = client.Post("/sessions/" + id + "/images", form);
  REQUIRE(uploaded);
  CHECK(uploaded->status == 200);
  const auto up = nlohmann::json::parse(uploaded->body);
  CHECK(up["filename"] == "IMG_001.png");
  CHECK(up["initial_results"][0]["id"] == "gray-wool-dress");
  CHECK(up["initial_results"][0]["image_url"] == "/gallery/gray-wool-dress");

  auto image = client.Get("/images/" + id + "/IMG_001.png");
  REQUIRE(image);
  CHECK(image->status == 200);
  CHECK(image->body == png);
  CHECK(client.Get("/images/" + id + "/IMG_002.png")->status == 404);
  CHECK(client.Get("/images/" + id + "/session.json")->status == 404);
  CHECK(client.Get("/gallery/gray-wool-dress")->body == png);
  CHECK(client.Get("/gallery/nothing")->status == 404);

  scripted(a).append({{"beige", "Thought: gray dress, user wants beige.\nSEARCH(IMG_001.png;gray;beige)"},
                      {"thanks", "You are welcome."}});
  auto msg = client.Post("/sessions/" + id + "/messages", R"({"text": "beige please"})", "application/json");
  REQUIRE(msg);
  CHECK(msg->status == 200);
  const auto turn = nlohmann::json::parse(msg->body);
  CHECK(turn["results"][0]["id"] == "beige-wool-dress");
  CHECK_FALSE(turn.contains("thought"));
  CHECK_FALSE(turn.contains("tool_trace"));
  const auto scores = turn["results"];
  for (std::size_t i = 1; i < scores.size(); ++i) CHECK(scores[i - 1]["score"] >= scores[i]["score"]);

  auto debug = client.Post("/sessions/" + id + "/messages?debug=true", R"({"text": "thanks"})", "application/json");
  REQUIRE(debug);
  const auto dj = nlohmann::json::parse(debug->body);
  CHECK(dj["reply"] == "You are welcome.");
  CHECK(dj.contains("thought"));
  CHECK(dj["tool_trace"].is_null());

  auto results = client.Get("/sessions/" + id + "/results");
  CHECK(nlohmann::json::parse(results->body)["results"][0]["id"] == "beige-wool-dress");
  auto transcript = client.Get("/sessions/" + id + "/transcript");
  const auto lines = nlohmann::json::parse(transcript->body)["lines"];
  CHECK(lines.size() == a.transcript(id).size());
  CHECK(lines[4]["text"] == "Action: SEARCH(IMG_001.png;gray;beige)");

  CHECK(client.Post("/sessions/aaaaaaaaaaaaaaaaaaaaaaaaaa/messages", R"({"text":"x"})", "application/json")->status ==
        404);
  CHECK(client.Get("/sessions/nope/results")->status == 404);
  CHECK(client.Post("/sessions/" + id + "/messages", "{bad", "application/json")->status == 400);
  CHECK(client.Post("/sessions/" + id + "/messages", R"({"text": "  "})", "application/json")->status == 400);
  CHECK(client.Post("/sessions/" + id + "/images", "raw", "image/png")->status == 400);
  auto offline = client.Post("/sessions/" + id + "/messages", R"({"text": "more"})", "application/json");
  CHECK(offline->status == 503);
  CHECK(nlohmann::json::parse(offline->body)["error"] == "LlmUnavailable");

  const std::string huge(kMaxUploadBytes + 1, 'x');
  httplib::MultipartFormDataItems big = {{"image", huge, "big.png", "image/png"}};
  auto too_big = client.Post("/sessions/" + id + "/images", big);
  REQUIRE(too_big);
  CHECK(too_big->status == 413);
}

TEST_CASE("error codes map to http statuses") {
  CHECK(http_status_for(Errc::NotFound) == 404);
  CHECK(http_status_for(Errc::MalformedRecord) == 400);
  CHECK(http_status_for(Errc::EmptyAttribute) == 422);
  CHECK(http_status_for(Errc::EmbedderUnavailable) == 503);
  CHECK(http_status_for(Errc::CorruptState) == 500);
}

TEST_CASE("scripted chat replays the demo conversation") {
  ChatOptions options;
  options.gallery = kDemo / "gallery.jsonl";
  options.data_dir = fixtures::temp_dir("chat");
  options.transcript_out = options.data_dir / "transcript.jsonl";
  std::ostringstream out;
  const auto report = run_scripted_chat(kDemo / "beige_dress_chat.jsonl", options, out);
  CAPTURE(out.str());
  CHECK(report.passed());
  CHECK(report.checks == 7);
  std::ifstream t(*options.transcript_out);
  CHECK(read_transcript(t).size() == 9);
}

TEST_CASE("scripted chat reports failed expectations") {
  const auto dir = fixtures::temp_dir("chat-fail");
  {
    std::ofstream s(dir / "script.jsonl");
    s << R"({"event": "config", "mode": "langchain", "k": 3})" << "\n"
      << R"({"event": "upload", "item": "natural-cotton-tee"})" << "\n"
      << R"({"event": "user", "text": "black", "llm": ["Thought: Do I need to use a tool? Yes\nAction: Multimodal search\nAction Input: IMG_001.png;natural;black", "Thought: Do I need to use a tool? No\nAI: Found it."]})"
      << "\n"
      << R"({"event": "expect", "reply": "Found it.", "top_result": "black-cotton-tee"})" << "\n"
      << R"({"event": "expect", "top_result": "red-cotton-tee"})" << "\n"
      << R"({"event": "user", "text": "hm", "llm": ["x(", "y(", "unused"]})" << "\n"
      << R"({"event": "expect", "failed": true})" << "\n";
  }
  ChatOptions options;
  options.gallery = kDemo / "gallery.jsonl";
  options.data_dir = dir / "data";
  std::ostringstream out;
  const auto report = run_scripted_chat(dir / "script.jsonl", options, out);
  CAPTURE(out.str());
  CHECK(report.failures.size() == 2);
  CHECK(report.checks == 4);

  std::ofstream(dir / "bad.jsonl") << "{\"event\": \"dance\"}\n";
  CHECK(error_code([&] { run_scripted_chat(dir / "bad.jsonl", options, out); }) == code(Errc::MalformedRecord));
}
