#include "compsearch/embedding_io.hpp"

#include "compsearch/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace compsearch {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'S', 'E', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw Error(Errc::CorruptState, path.string() + ": truncated embedding file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_embeddings(const std::filesystem::path& path, const std::vector<Embedding>& rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().dim();
  for (const auto& r : rows) {
    if (r.dim() != dim) throw Error(Errc::DimMismatch, "rows have different dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rows.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) put_le<float>(out, static_cast<float>(r[i]));
  }
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

std::vector<Embedding> read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(Errc::CorruptState, path.string() + ": bad magic, expected CSE1");
  }
  const auto count = get_le<std::uint32_t>(in, path);
  const auto dim = get_le<std::uint32_t>(in, path);
  if (count > 0 && dim == 0) throw Error(Errc::CorruptState, path.string() + ": zero dimension");
  std::vector<Embedding> rows;
  rows.reserve(count);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t i = 0; i < dim; ++i) v[i] = static_cast<double>(get_le<float>(in, path));
    try {
      rows.push_back(Embedding::from_unit(v));
    } catch (const Error& e) {
      throw Error(Errc::CorruptState, path.string() + ": row " + std::to_string(r) + ": " + e.what());
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::CorruptState, path.string() + ": trailing bytes after " + std::to_string(count) + " rows");
  }
  return rows;
}

}  // namespace compsearch
