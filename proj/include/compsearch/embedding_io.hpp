#pragma once

#include "compsearch/embedding.hpp"

#include <filesystem>
#include <vector>

namespace compsearch {

/// Writes the "CSE1" format: magic, u32 LE count, u32 LE dim, then count*dim
/// float32 LE values, row-major. Throws DimMismatch if rows disagree on dim.
void write_embeddings(const std::filesystem::path& path, const std::vector<Embedding>& rows);

/// Reads a "CSE1" file. Every row is checked for unit norm (float32 storage
/// keeps the norm within 1e-6). Throws Io / CorruptState.
std::vector<Embedding> read_embeddings(const std::filesystem::path& path);

}  // namespace compsearch
