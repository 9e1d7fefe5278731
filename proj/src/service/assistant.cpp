#include "compsearch/service/assistant.hpp"

#include "compsearch/error.hpp"
#include "compsearch/service/persistence.hpp"
#include "compsearch/tools/remote.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace compsearch {

namespace {

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<ScriptedLlmEntry> load_llm_script(const std::filesystem::path& path) {
  std::vector<ScriptedLlmEntry> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back({j.value("match", std::string()), j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line, e.what());
    }
  }
  return out;
}

std::map<std::string, std::string> load_vqa_script(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out[j.at("question").get<std::string>()] = j.at("answer").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line, e.what());
    }
  }
  return out;
}

Backends make_backends(const ServerConfig& config) {
  Backends b;
  if (config.embedder == EmbedderKind::Oracle) {
    const auto records = load_gallery_records(config.gallery);
    auto oracle = std::make_unique<AttributeOracleEmbedder>(records);
    b.index = std::make_unique<Index>(Index::build(oracle->build_gallery(records)));
    b.embedder = std::move(oracle);
  } else {
    b.index = std::make_unique<Index>(Index::build(load_gallery(config.gallery)));
    b.embedder = std::make_unique<RemoteEmbedder>(config.embed_url);
  }
  if (config.llm == BackendKind::Remote) {
    b.llm = std::make_unique<RemoteLlm>(config.llm_url);
  } else {
    b.llm = std::make_unique<ScriptedLlm>(config.llm_script ? load_llm_script(*config.llm_script)
                                                            : std::vector<ScriptedLlmEntry>{});
  }
  if (config.vqa == BackendKind::Remote) {
    b.vqa = std::make_unique<RemoteVqa>(config.vqa_url);
  } else {
    b.vqa = std::make_unique<ScriptedVqa>(config.vqa_script ? load_vqa_script(*config.vqa_script)
                                                            : std::map<std::string, std::string>{});
  }
  return b;
}

SearchAssistant::SearchAssistant(const ServerConfig& config, Backends backends)
    : config_(config), backends_(std::move(backends)) {
  if (!backends_.llm || !backends_.embedder || !backends_.vqa || !backends_.index) {
    throw Error(Errc::InvalidConfig, "every backend and the index must be provided");
  }
  registry_ = make_default_registry(config_.mode,
                                    ToolContext{backends_.embedder.get(), backends_.index.get(), backends_.vqa.get(), config_.k});
  manager_ = ManagerConfig::for_mode(config_.mode, config_.token_budget);
  if (config_.prompt_dir) manager_.prompt = PromptTemplate::load(*config_.prompt_dir, config_.mode);
  std::error_code ec;
  std::filesystem::create_directories(config_.data_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + config_.data_dir.string() + ": " + ec.message());
}

std::shared_ptr<SearchAssistant::Slot> SearchAssistant::slot(const std::string& session_id) {
  std::lock_guard lock(slots_mutex_);
  if (const auto it = slots_.find(session_id); it != slots_.end()) return it->second;
  auto s = std::make_shared<Slot>();
  s->session = load_session(config_.data_dir, session_id);
  slots_.emplace(session_id, s);
  return s;
}

std::string SearchAssistant::create_session() {
  auto s = std::make_shared<Slot>();
  s->session = start_session(config_.data_dir);
  save_session(config_.data_dir, s->session);
  std::lock_guard lock(slots_mutex_);
  slots_.emplace(s->session.id, s);
  return s->session.id;
}

UploadResult SearchAssistant::upload_image(const std::string& session_id, std::string_view bytes) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  auto results = tool_image_search(bytes, *backends_.embedder, *backends_.index, config_.k);
  if (results.empty()) throw Error(Errc::EmptyResults, "image search returned nothing");
  Session next = s->session;
  UploadResult out;
  out.filename = record_image_upload(next, bytes, results.front().description);
  record_search_results(next, results);
  save_session(config_.data_dir, next);
  s->session = std::move(next);
  out.results = std::move(results);
  return out;
}

AssistantTurn SearchAssistant::send_message(const std::string& session_id, std::string_view text) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  Session next = s->session;
  auto turn = handle_text_input(next, text, *backends_.llm, registry_, manager_);
  save_session(config_.data_dir, next);
  s->session = std::move(next);
  return turn;
}

std::vector<ResultEntry> SearchAssistant::results(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  return s->session.last_results;
}

std::vector<MemoryLine> SearchAssistant::transcript(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  return s->session.memory;
}

}  // namespace compsearch
