#pragma once

#include "compsearch/prompt/session.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace compsearch {

/// data_dir/<id>/session.json
std::filesystem::path session_file(const std::filesystem::path& data_dir, const std::string& id);

/// Writes a temporary file next to session.json and renames it into place.
/// `before_commit` runs between the two steps. Throws Io.
void save_session(const std::filesystem::path& data_dir, const Session& session,
                  const std::function<void()>& before_commit = {});

/// Throws NotFound for unknown ids and CorruptState for unreadable or
/// inconsistent state (including missing image files).
Session load_session(const std::filesystem::path& data_dir, const std::string& id);

}  // namespace compsearch
