#pragma once

#include "compsearch/dataset.hpp"
#include "compsearch/prompt/manager.hpp"
#include "compsearch/retrieval.hpp"
#include "compsearch/service/config.hpp"
#include "compsearch/tools/backends.hpp"
#include "compsearch/tools/search_tools.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace compsearch {

struct Backends {
  std::unique_ptr<LlmBackend> llm;
  std::unique_ptr<EmbedderBackend> embedder;
  std::unique_ptr<VqaBackend> vqa;
  std::unique_ptr<Index> index;
};

/// Backends and index described by the configuration. Throws Io / InvalidConfig.
Backends make_backends(const ServerConfig& config);

std::vector<ScriptedLlmEntry> load_llm_script(const std::filesystem::path& path);
std::map<std::string, std::string> load_vqa_script(const std::filesystem::path& path);

struct UploadResult {
  std::string filename;
  std::vector<ResultEntry> results;
};

/// Session lifecycle shared by the HTTP service and the terminal runner.
/// Turns on one session are serialized; distinct sessions run concurrently.
/// Every completed operation is persisted before it returns.
class SearchAssistant {
 public:
  SearchAssistant(const ServerConfig& config, Backends backends);

  std::string create_session();
  /// Throws NotFound, EmptyResults and backend errors.
  UploadResult upload_image(const std::string& session_id, std::string_view bytes);
  AssistantTurn send_message(const std::string& session_id, std::string_view text);
  std::vector<ResultEntry> results(const std::string& session_id);
  std::vector<MemoryLine> transcript(const std::string& session_id);

  const Index& index() const { return *backends_.index; }
  const ServerConfig& config() const { return config_; }
  LlmBackend& llm() { return *backends_.llm; }
  VqaBackend& vqa() { return *backends_.vqa; }

 private:
  struct Slot {
    std::mutex mutex;
    Session session;
  };
  std::shared_ptr<Slot> slot(const std::string& session_id);

  ServerConfig config_;
  Backends backends_;
  ToolRegistry registry_;
  ManagerConfig manager_;
  std::mutex slots_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace compsearch
