#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace compsearch {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// "key = value" lines; '#' starts a comment, blank lines are skipped.
/// Throws InvalidConfig for lines without '='.
std::vector<KeyValue> parse_key_values(std::string_view text);

std::string_view trim_view(std::string_view s) noexcept;

}  // namespace compsearch
