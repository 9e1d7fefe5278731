#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace compsearch {

enum class Speaker { Human, AI, System };

std::string_view speaker_name(Speaker s) noexcept;
/// Inverse of speaker_name; throws CorruptState.
Speaker speaker_from_name(std::string_view name);

/// ceil(whitespace-separated words * 4 / 3).
std::size_t estimate_tokens(std::string_view text);
std::size_t count_words(std::string_view text);

struct MemoryLine {
  Speaker speaker = Speaker::System;
  std::string text;
  std::size_t token_estimate = 0;

  /// Newlines in `text` are folded into spaces.
  static MemoryLine make(Speaker speaker, std::string_view text);

  /// "Human: text", "AI: text", or the bare text for system lines.
  std::string render() const;
  std::size_t word_count() const;

  friend bool operator==(const MemoryLine&, const MemoryLine&) = default;
};

struct ResultEntry {
  std::string id;
  std::string description;
  double score = 0.0;

  friend bool operator==(const ResultEntry&, const ResultEntry&) = default;
};

struct Session {
  std::string id;
  std::vector<MemoryLine> memory;
  int image_counter = 0;
  std::filesystem::path image_dir;
  std::vector<ResultEntry> last_results;

  void append(Speaker speaker, std::string_view text) { memory.push_back(MemoryLine::make(speaker, text)); }
  /// Lines rendered and joined by '\n'; empty memory renders to "".
  std::string render_memory() const;
};

using SessionIdBytes = std::array<std::uint8_t, 16>;
using EntropySource = std::function<SessionIdBytes()>;

/// Lowercase RFC 4648 base32 without padding (26 characters).
std::string encode_session_id(const SessionIdBytes& bytes);
/// Draws from std::random_device.
SessionIdBytes random_session_bytes();
bool is_valid_session_id(std::string_view id);

/// Creates root/<id> and returns a fresh session stored there. Throws Io.
Session start_session(const std::filesystem::path& root, const EntropySource& entropy = random_session_bytes);

/// "IMG_001.png"; the counter widens past three digits ("IMG_1000.png").
std::string image_filename(int counter);

inline constexpr std::string_view kUploadAck = "Provide more details if you are not satisfied with the results.";

/// Saves the bytes as the next IMG_NNN.png and appends the upload exchange to
/// memory. Returns the file name. Throws Io.
std::string record_image_upload(Session& session, std::string_view image_bytes, std::string_view description);

/// Appends "Top-N results are: d1, d2." and remembers the results. Throws EmptyResults.
void record_search_results(Session& session, const std::vector<ResultEntry>& results);

/// Index of the first line of every exchange group: a Human line together with
/// the lines after it up to the next Human line. Lines before the first Human
/// line form their own group.
std::vector<std::size_t> exchange_starts(const std::vector<MemoryLine>& memory);

/// One JSON object per memory line: {"speaker", "text", "token_estimate"}.
void write_transcript(std::ostream& out, const std::vector<MemoryLine>& memory);
std::vector<MemoryLine> read_transcript(std::istream& in);

}  // namespace compsearch
