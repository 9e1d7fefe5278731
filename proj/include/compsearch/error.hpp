#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace compsearch {

enum class Errc {
  ZeroVector,
  NonFinite,
  DimMismatch,
  ShapeMismatch,
  DuplicateId,
  EmptyGallery,
  MissingGroundTruth,
  EmptyAttribute,
  IllegalCharacter,
  Io,
  MalformedRecord,
  BatchTooSmall,
  TokenOutOfRange,
  InvalidConfig,
  ParseError,
  UnknownTool,
  ArityMismatch,
  ToolFailure,
  BudgetTooSmall,
  EmptyResults,
  LlmUnavailable,
  VqaUnavailable,
  EmbedderUnavailable,
  CorruptState,
  NotFound,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the whole library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& message)
      : Error(Errc::MalformedRecord, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ParseError : public Error {
 public:
  ParseError(std::string reason, std::string offending_line)
      : Error(Errc::ParseError, reason + " [" + offending_line + "]"),
        reason_(std::move(reason)),
        offending_line_(std::move(offending_line)) {}

  const std::string& reason() const noexcept { return reason_; }
  const std::string& offending_line() const noexcept { return offending_line_; }

 private:
  std::string reason_;
  std::string offending_line_;
};

}  // namespace compsearch
