#include "compsearch/service/http.hpp"

#include "compsearch/kv_config.hpp"

#include <httplib.h>

#include <fstream>
#include <regex>
#include <sstream>

namespace compsearch {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const Error& e) {
      send_error(res, http_status_for(e.code()), errc_name(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

bool debug_requested(const httplib::Request& req) {
  return req.has_param("debug") && (req.get_param_value("debug") == "true" || req.get_param_value("debug") == "1");
}

bool read_file(const std::filesystem::path& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::stringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool is_upload_name(const std::string& name) {
  static const std::regex pattern(R"(IMG_[0-9]+\.png)");
  return std::regex_match(name, pattern);
}

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/png";
}

}  // namespace

int http_status_for(Errc code) noexcept {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::ParseError:
    case Errc::InvalidConfig:
    case Errc::MalformedRecord: return 400;
    case Errc::EmptyAttribute:
    case Errc::IllegalCharacter:
    case Errc::EmptyResults: return 422;
    case Errc::LlmUnavailable:
    case Errc::VqaUnavailable:
    case Errc::EmbedderUnavailable: return 503;
    default: return 500;
  }
}

nlohmann::json results_to_json(const std::vector<ResultEntry>& results, const Index& index) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    const auto* item = index.find(r.id);
    nlohmann::json url = nullptr;
    if (item && item->image_path) url = "/gallery/" + r.id;
    out.push_back({{"id", r.id}, {"description", r.description}, {"image_url", url}, {"score", r.score}});
  }
  return out;
}

nlohmann::json turn_to_json(const AssistantTurn& turn, bool debug, const Index& index) {
  nlohmann::json j{{"reply", turn.reply}, {"results", results_to_json(turn.results, index)}, {"failed", turn.failed}};
  if (debug) {
    j["thought"] = turn.thought ? nlohmann::json(*turn.thought) : nlohmann::json(nullptr);
    j["tool_trace"] = turn.tool_call
                          ? nlohmann::json{{"tool", turn.tool_call->tool_name}, {"args", turn.tool_call->args}}
                          : nlohmann::json(nullptr);
  }
  return j;
}

nlohmann::json transcript_to_json(const std::vector<MemoryLine>& lines) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& l : lines) {
    out.push_back({{"speaker", speaker_name(l.speaker)}, {"text", l.text}, {"token_estimate", l.token_estimate}});
  }
  return out;
}

void register_routes(httplib::Server& server, SearchAssistant& assistant) {
  server.set_payload_max_length(kMaxUploadBytes);

  server.Get("/health", guarded([&](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200,
                         {{"status", "ok"},
                          {"gallery_size", assistant.index().size()},
                          {"mode", syntax_mode_name(assistant.config().mode)}});
             }));

  server.Post("/sessions", guarded([&](const httplib::Request&, httplib::Response& res) {
                send_json(res, 201, {{"session_id", assistant.create_session()}});
              }));

  server.Post(R"(/sessions/([^/]+)/images)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                if (!req.is_multipart_form_data() || !req.has_file("image")) {
                  assistant.results(id);
                  throw Error(Errc::MalformedRecord, "expected a multipart form with an 'image' file");
                }
                const auto file = req.get_file_value("image");
                if (file.content.empty()) throw Error(Errc::MalformedRecord, "empty image");
                const auto up = assistant.upload_image(id, file.content);
                send_json(res, 200,
                          {{"filename", up.filename},
                           {"image_url", "/images/" + id + "/" + up.filename},
                           {"initial_results", results_to_json(up.results, assistant.index())}});
              }));

  server.Post(R"(/sessions/([^/]+)/messages)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                std::string text;
                try {
                  const auto body = nlohmann::json::parse(req.body);
                  text = body.at("text").get<std::string>();
                } catch (const nlohmann::json::exception& e) {
                  assistant.results(id);
                  throw Error(Errc::MalformedRecord, std::string("expected {\"text\": string}: ") + e.what());
                }
                if (trim_view(text).empty()) throw Error(Errc::MalformedRecord, "text is empty");
                const auto turn = assistant.send_message(id, text);
                send_json(res, 200, turn_to_json(turn, debug_requested(req), assistant.index()));
              }));

  server.Get(R"(/sessions/([^/]+)/results)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               send_json(res, 200, {{"results", results_to_json(assistant.results(id), assistant.index())}});
             }));

  server.Get(R"(/sessions/([^/]+)/transcript)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               send_json(res, 200, {{"lines", transcript_to_json(assistant.transcript(id))}});
             }));

  server.Get(R"(/images/([^/]+)/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const std::string name = req.matches[2];
               assistant.results(id);
               std::string bytes;
               if (!is_upload_name(name)) throw Error(Errc::NotFound, "no image " + name);
               if (!read_file(assistant.config().data_dir / id / name, bytes)) {
                 throw Error(Errc::NotFound, "no image " + name);
               }
               res.set_content(bytes, "image/png");
             }));

  server.Get(R"(/gallery/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const auto* item = assistant.index().find(id);
               if (!item || !item->image_path) throw Error(Errc::NotFound, "no gallery image for " + id);
               std::string bytes;
               if (!read_file(*item->image_path, bytes)) throw Error(Errc::NotFound, "image file missing for " + id);
               res.set_content(bytes, content_type_for(*item->image_path));
             }));
}

void run_server(SearchAssistant& assistant, const std::function<void(int)>& on_ready) {
  httplib::Server server;
  const auto threads = assistant.config().max_connections;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  register_routes(server, assistant);
  const auto& cfg = assistant.config();
  int port = cfg.port;
  if (port == 0) {
    port = server.bind_to_any_port(cfg.host);
  } else if (!server.bind_to_port(cfg.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(Errc::Io, "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
  if (on_ready) on_ready(port);
  server.listen_after_bind();
}

}  // namespace compsearch
