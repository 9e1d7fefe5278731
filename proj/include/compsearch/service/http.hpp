#pragma once

#include "compsearch/error.hpp"
#include "compsearch/prompt/manager.hpp"
#include "compsearch/retrieval.hpp"
#include "compsearch/service/assistant.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <functional>

namespace httplib {
class Server;
}

namespace compsearch {

inline constexpr std::size_t kMaxUploadBytes = 10 * 1024 * 1024;

/// 404 NotFound, 400 malformed input, 422 attribute validation, 503 backend
/// unavailable, 500 otherwise.
int http_status_for(Errc code) noexcept;

nlohmann::json results_to_json(const std::vector<ResultEntry>& results, const Index& index);
/// Thought and tool trace are included only when `debug` is set.
nlohmann::json turn_to_json(const AssistantTurn& turn, bool debug, const Index& index);
nlohmann::json transcript_to_json(const std::vector<MemoryLine>& lines);

/// Installs every route of the service on `server`.
void register_routes(httplib::Server& server, SearchAssistant& assistant);

/// Blocks until the server stops. `on_ready` receives the bound port.
void run_server(SearchAssistant& assistant, const std::function<void(int)>& on_ready = {});

}  // namespace compsearch
