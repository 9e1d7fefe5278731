#include "compsearch/service/chat.hpp"

#include "compsearch/error.hpp"
#include "compsearch/prompt/manager.hpp"
#include "compsearch/service/assistant.hpp"
#include "compsearch/tools/backends.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace compsearch {

namespace {

struct ScriptEvent {
  std::size_t line = 0;
  nlohmann::json body;
};

std::vector<ScriptEvent> read_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::vector<ScriptEvent> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(raw);
      if (!j.is_object() || !j.contains("event") || !j["event"].is_string()) {
        throw MalformedRecord(line, "every event needs an \"event\" string");
      }
      out.push_back({line, std::move(j)});
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line, e.what());
    }
  }
  return out;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_data_dir() {
  std::random_device rd;
  const auto dir = std::filesystem::temp_directory_path() / ("compsearch-chat-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::string render_results(const std::vector<ResultEntry>& results) {
  std::string out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i) out += ", ";
    out += results[i].id;
  }
  return out;
}

struct LastTurn {
  std::optional<std::string> filename;
  std::optional<AssistantTurn> turn;
  std::vector<ResultEntry> results;
};

}  // namespace

ChatReport run_scripted_chat(const std::filesystem::path& script, const ChatOptions& options, std::ostream& out) {
  auto events = read_script(script);
  ChatOptions opts = options;
  std::size_t first = 0;
  if (!events.empty() && events.front().body["event"] == "config") {
    const auto& c = events.front().body;
    try {
      if (c.contains("mode")) opts.mode = syntax_mode_from_name(c["mode"].get<std::string>());
      if (c.contains("k")) opts.k = c["k"].get<std::size_t>();
      if (c.contains("token_budget")) opts.token_budget = c["token_budget"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(events.front().line, e.what());
    }
    first = 1;
  }

  ServerConfig config;
  config.gallery = opts.gallery;
  config.data_dir = opts.data_dir.empty() ? fresh_data_dir() : opts.data_dir;
  config.mode = opts.mode;
  config.k = opts.k;
  config.token_budget = opts.token_budget;
  config.validate();
  const auto records = load_gallery_records(opts.gallery);
  SearchAssistant assistant(config, make_backends(config));
  auto& llm = dynamic_cast<ScriptedLlm&>(assistant.llm());
  auto& vqa = dynamic_cast<ScriptedVqa&>(assistant.vqa());

  ChatReport report;
  report.session_id = assistant.create_session();
  out << "[session] " << report.session_id << " (" << syntax_mode_name(opts.mode) << ")\n";
  LastTurn last;

  const auto fail = [&](const ScriptEvent& ev, const std::string& what) {
    const auto msg = "line " + std::to_string(ev.line) + ": " + what;
    report.failures.push_back(msg);
    out << "FAIL " << msg << "\n";
  };

  for (std::size_t i = first; i < events.size(); ++i) {
    const auto& ev = events[i];
    const auto& b = ev.body;
    const auto kind = b["event"].get<std::string>();
    ++report.events;
    try {
      if (kind == "upload") {
        std::string bytes;
        std::string label;
        if (b.contains("item")) {
          const auto id = b["item"].get<std::string>();
          const auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.id == id; });
          if (it == records.end()) throw MalformedRecord(ev.line, "unknown gallery item " + id);
          bytes = AttributeOracleEmbedder::image_key(*it);
          label = "item " + id;
        } else {
          const auto path = script.parent_path() / b.at("file").get<std::string>();
          bytes = read_bytes(path);
          label = path.filename().string();
        }
        const auto up = assistant.upload_image(report.session_id, bytes);
        last = LastTurn{up.filename, std::nullopt, up.results};
        out << "[upload] " << up.filename << " (" << label << ")\n";
        out << "[results] " << render_results(up.results) << "\n";
      } else if (kind == "vqa") {
        vqa.set(b.at("question").get<std::string>(), b.at("answer").get<std::string>());
      } else if (kind == "user") {
        const auto text = b.at("text").get<std::string>();
        std::vector<ScriptedLlmEntry> entries;
        for (const auto& r : b.value("llm", nlohmann::json::array())) entries.push_back({text, r.get<std::string>()});
        llm.append(std::move(entries));
        out << "[user] " << text << "\n";
        auto turn = assistant.send_message(report.session_id, text);
        if (turn.thought) out << "[thought] " << *turn.thought << "\n";
        if (turn.tool_call) out << "[" << action_trace_line(*turn.tool_call) << "]\n";
        out << "[assistant] " << turn.reply << "\n";
        if (!turn.results.empty()) out << "[results] " << render_results(turn.results) << "\n";
        last = LastTurn{std::nullopt, turn, turn.results};
      } else if (kind == "expect") {
        for (const auto& [key, want] : b.items()) {
          if (key == "event") continue;
          ++report.checks;
          const auto transcript = assistant.transcript(report.session_id);
          std::vector<std::string> lines;
          for (const auto& l : transcript) lines.push_back(l.render());
          if (key == "filename") {
            if (last.filename != want.get<std::string>()) fail(ev, "filename differs from " + want.dump());
          } else if (key == "reply") {
            if (!last.turn || last.turn->reply != want.get<std::string>()) fail(ev, "reply differs from " + want.dump());
          } else if (key == "reply_contains") {
            if (!last.turn || last.turn->reply.find(want.get<std::string>()) == std::string::npos) {
              fail(ev, "reply lacks " + want.dump());
            }
          } else if (key == "failed") {
            if (!last.turn || last.turn->failed != want.get<bool>()) fail(ev, "failed flag differs");
          } else if (key == "tool") {
            if (!last.turn) {
              fail(ev, "no assistant turn to check");
            } else if (want.is_null()) {
              if (last.turn->tool_call) fail(ev, "unexpected tool call " + last.turn->tool_call->tool_name);
            } else {
              const ToolCall expected{want.at("name").get<std::string>(), want.at("args").get<std::vector<std::string>>()};
              if (last.turn->tool_call != expected) fail(ev, "tool call differs from " + want.dump());
            }
          } else if (key == "top_result") {
            if (last.results.empty() || last.results.front().id != want.get<std::string>()) {
              fail(ev, "top result differs from " + want.dump());
            }
          } else if (key == "memory_tail") {
            const auto tail = want.get<std::vector<std::string>>();
            if (tail.size() > lines.size() || !std::equal(tail.begin(), tail.end(), lines.end() - static_cast<std::ptrdiff_t>(tail.size()))) {
              fail(ev, "memory tail differs");
            }
          } else if (key == "transcript") {
            if (want.get<std::vector<std::string>>() != lines) fail(ev, "transcript differs");
          } else {
            throw MalformedRecord(ev.line, "unknown check '" + key + "'");
          }
        }
      } else {
        throw MalformedRecord(ev.line, "unknown event '" + kind + "'");
      }
    } catch (const MalformedRecord&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(ev.line, e.what());
    } catch (const Error& e) {
      fail(ev, e.what());
    }
  }
  if (llm.remaining() != 0) {
    report.failures.push_back(std::to_string(llm.remaining()) + " scripted model outputs were never used");
    out << "FAIL " << report.failures.back() << "\n";
  }
  if (opts.transcript_out) {
    std::ofstream t(*opts.transcript_out);
    if (!t) throw Error(Errc::Io, "cannot write " + opts.transcript_out->string());
    write_transcript(t, assistant.transcript(report.session_id));
  }
  out << (report.passed() ? "PASS" : "FAIL") << " " << report.events << " events, " << report.checks << " checks, "
      << report.failures.size() << " failures\n";
  return report;
}

}  // namespace compsearch
