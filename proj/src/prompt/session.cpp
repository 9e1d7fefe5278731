#include "compsearch/prompt/session.hpp"

#include "compsearch/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

namespace compsearch {

std::string_view speaker_name(Speaker s) noexcept {
  switch (s) {
    case Speaker::Human: return "Human";
    case Speaker::AI: return "AI";
    case Speaker::System: return "System";
  }
  return "System";
}

Speaker speaker_from_name(std::string_view name) {
  if (name == "Human") return Speaker::Human;
  if (name == "AI") return Speaker::AI;
  if (name == "System") return Speaker::System;
  throw Error(Errc::CorruptState, "unknown speaker '" + std::string(name) + "'");
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (const char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

std::size_t estimate_tokens(std::string_view text) { return (count_words(text) * 4 + 2) / 3; }

MemoryLine MemoryLine::make(Speaker speaker, std::string_view text) {
  MemoryLine line;
  line.speaker = speaker;
  line.text.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    line.text.push_back(c == '\n' || c == '\r' ? ' ' : c);
  }
  line.token_estimate = estimate_tokens(line.render());
  return line;
}

std::string MemoryLine::render() const {
  switch (speaker) {
    case Speaker::Human: return "Human: " + text;
    case Speaker::AI: return "AI: " + text;
    case Speaker::System: break;
  }
  return text;
}

std::size_t MemoryLine::word_count() const { return count_words(render()); }

std::string Session::render_memory() const {
  std::string out;
  for (std::size_t i = 0; i < memory.size(); ++i) {
    if (i) out += '\n';
    out += memory[i].render();
  }
  return out;
}

std::string encode_session_id(const SessionIdBytes& bytes) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz234567";
  std::string out;
  std::uint32_t buffer = 0;
  int bits = 0;
  for (const auto b : bytes) {
    buffer = (buffer << 8) | b;
    bits += 8;
    while (bits >= 5) {
      out.push_back(kAlphabet[(buffer >> (bits - 5)) & 31u]);
      bits -= 5;
    }
  }
  if (bits > 0) out.push_back(kAlphabet[(buffer << (5 - bits)) & 31u]);
  return out;
}

SessionIdBytes random_session_bytes() {
  static thread_local std::random_device device;
  SessionIdBytes out{};
  for (std::size_t i = 0; i < out.size(); i += 4) {
    const auto word = device();
    for (std::size_t j = 0; j < 4; ++j) out[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
  }
  return out;
}

bool is_valid_session_id(std::string_view id) {
  if (id.size() != 26) return false;
  for (const char c : id) {
    if (!((c >= 'a' && c <= 'z') || (c >= '2' && c <= '7'))) return false;
  }
  return true;
}

Session start_session(const std::filesystem::path& root, const EntropySource& entropy) {
  Session s;
  s.id = encode_session_id(entropy());
  s.image_dir = root / s.id;
  std::error_code ec;
  if (std::filesystem::exists(s.image_dir, ec)) {
    throw Error(Errc::Io, "session directory already exists: " + s.image_dir.string());
  }
  std::filesystem::create_directories(s.image_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + s.image_dir.string() + ": " + ec.message());
  return s;
}

std::string image_filename(int counter) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "IMG_%03d.png", counter);
  return buf;
}

std::string record_image_upload(Session& session, std::string_view image_bytes, std::string_view description) {
  const std::string name = image_filename(session.image_counter + 1);
  const auto path = session.image_dir / name;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out.write(image_bytes.data(), static_cast<std::streamsize>(image_bytes.size()));
    if (!out) throw Error(Errc::Io, "short write to " + path.string());
  }
  ++session.image_counter;
  std::string human = "I provided a figure named " + name + ".";
  if (!description.empty()) human += " " + std::string(description);
  session.append(Speaker::Human, human);
  session.append(Speaker::AI, kUploadAck);
  return name;
}

void record_search_results(Session& session, const std::vector<ResultEntry>& results) {
  if (results.empty()) throw Error(Errc::EmptyResults, "search returned no results");
  std::string line = "Top-" + std::to_string(results.size()) + " results are: ";
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i) line += ", ";
    line += results[i].description;
  }
  line += ".";
  session.append(Speaker::System, line);
  session.last_results = results;
}

std::vector<std::size_t> exchange_starts(const std::vector<MemoryLine>& memory) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < memory.size(); ++i) {
    if (i == 0 || memory[i].speaker == Speaker::Human) starts.push_back(i);
  }
  return starts;
}

void write_transcript(std::ostream& out, const std::vector<MemoryLine>& memory) {
  for (const auto& line : memory) {
    nlohmann::json j{{"speaker", speaker_name(line.speaker)}, {"text", line.text}, {"token_estimate", line.token_estimate}};
    out << j.dump() << '\n';
  }
}

std::vector<MemoryLine> read_transcript(std::istream& in) {
  std::vector<MemoryLine> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(raw);
      out.push_back(MemoryLine::make(speaker_from_name(j.at("speaker").get<std::string>()), j.at("text").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
  }
  return out;
}

}  // namespace compsearch
