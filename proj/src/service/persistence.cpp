#include "compsearch/service/persistence.hpp"

#include "compsearch/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace compsearch {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json to_json(const Session& s) {
  nlohmann::json memory = nlohmann::json::array();
  for (const auto& l : s.memory) {
    memory.push_back({{"speaker", speaker_name(l.speaker)}, {"text", l.text}, {"token_estimate", l.token_estimate}});
  }
  nlohmann::json results = nlohmann::json::array();
  for (const auto& r : s.last_results) {
    results.push_back({{"id", r.id}, {"description", r.description}, {"score", r.score}});
  }
  return {{"version", kFormatVersion},
          {"id", s.id},
          {"image_counter", s.image_counter},
          {"memory", memory},
          {"last_results", results}};
}

}  // namespace

std::filesystem::path session_file(const std::filesystem::path& data_dir, const std::string& id) {
  return data_dir / id / "session.json";
}

void save_session(const std::filesystem::path& data_dir, const Session& session,
                  const std::function<void()>& before_commit) {
  const auto target = session_file(data_dir, session.id);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << to_json(session).dump(1) << '\n';
    out.flush();
    if (!out) throw Error(Errc::Io, "write failed for " + tmp.string());
  }
  if (before_commit) before_commit();
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(Errc::Io, "cannot replace " + target.string() + ": " + ec.message());
}

Session load_session(const std::filesystem::path& data_dir, const std::string& id) {
  if (!is_valid_session_id(id)) throw Error(Errc::NotFound, "no session '" + id + "'");
  const auto path = session_file(data_dir, id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::NotFound, "no session '" + id + "'");
  std::stringstream ss;
  ss << in.rdbuf();

  Session s;
  try {
    const auto j = nlohmann::json::parse(ss.str());
    if (j.at("version").get<int>() != kFormatVersion) throw Error(Errc::CorruptState, "unsupported version");
    s.id = j.at("id").get<std::string>();
    s.image_counter = j.at("image_counter").get<int>();
    for (const auto& l : j.at("memory")) {
      const auto text = l.at("text").get<std::string>();
      if (text.find_first_of("\r\n") != std::string::npos) {
        throw Error(Errc::CorruptState, "memory line contains a line break");
      }
      s.memory.push_back(MemoryLine::make(speaker_from_name(l.at("speaker").get<std::string>()), text));
    }
    for (const auto& r : j.at("last_results")) {
      s.last_results.push_back(
          {r.at("id").get<std::string>(), r.at("description").get<std::string>(), r.at("score").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptState, path.string() + ": " + e.what());
  }
  if (s.id != id) throw Error(Errc::CorruptState, path.string() + ": stored id differs");
  if (s.image_counter < 0) throw Error(Errc::CorruptState, path.string() + ": negative image counter");
  s.image_dir = data_dir / id;
  for (int i = 1; i <= s.image_counter; ++i) {
    if (!std::filesystem::exists(s.image_dir / image_filename(i))) {
      throw Error(Errc::CorruptState, "missing " + image_filename(i) + " for session " + id);
    }
  }
  return s;
}

}  // namespace compsearch
