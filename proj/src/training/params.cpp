#include "compsearch/training/params.hpp"

#include "compsearch/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace compsearch::training {

std::size_t ParameterSet::add(std::string name, Eigen::MatrixXd value, bool trainable, bool decay) {
  for (const auto& b : blocks_) {
    if (b.name == name) throw Error(Errc::DuplicateId, "parameter block " + name + " already exists");
  }
  blocks_.push_back({std::move(name), std::move(value), trainable, decay});
  return blocks_.size() - 1;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  throw Error(Errc::NotFound, "no parameter block named " + std::string(name));
}

std::vector<Eigen::MatrixXd> ParameterSet::zeros_like() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) out.push_back(Eigen::MatrixXd::Zero(b.value.rows(), b.value.cols()));
  return out;
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) {
    if (b.trainable) n += static_cast<std::size_t>(b.value.size());
  }
  return n;
}

Eigen::VectorXd ParameterSet::flatten_trainable() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(trainable_count()));
  Eigen::Index at = 0;
  for (const auto& b : blocks_) {
    if (!b.trainable) continue;
    flat.segment(at, b.value.size()) = b.value.reshaped();
    at += b.value.size();
  }
  return flat;
}

void ParameterSet::assign_trainable(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != trainable_count()) {
    throw Error(Errc::ShapeMismatch, "flat parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  for (auto& b : blocks_) {
    if (!b.trainable) continue;
    b.value.reshaped() = flat.segment(at, b.value.size());
    at += b.value.size();
  }
}

Eigen::VectorXd ParameterSet::flatten_trainable(const ParameterSet& shape, const std::vector<Eigen::MatrixXd>& grads) {
  if (grads.size() != shape.size()) throw Error(Errc::ShapeMismatch, "one gradient per parameter block");
  Eigen::VectorXd flat(static_cast<Eigen::Index>(shape.trainable_count()));
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!shape[i].trainable) continue;
    flat.segment(at, grads[i].size()) = grads[i].reshaped();
    at += grads[i].size();
  }
  return flat;
}

namespace {

constexpr std::array<char, 4> kMagic{'C', 'S', 'K', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&value, bytes.data(), sizeof(T));
  return true;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  for (const auto& b : params.blocks()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.value.size()));
    for (const double v : b.value.reshaped()) put_le<double>(out, v);
  }
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(Errc::CorruptState, path.string() + ": bad magic, expected CSK1");
  }
  std::uint32_t name_len = 0;
  while (get_le(in, name_len)) {
    std::string name(name_len, '\0');
    std::uint32_t count = 0;
    if (!in.read(name.data(), name_len) || !get_le(in, count)) {
      throw Error(Errc::CorruptState, path.string() + ": truncated block header");
    }
    std::size_t idx = 0;
    try {
      idx = params.index_of(name);
    } catch (const Error&) {
      throw Error(Errc::CorruptState, path.string() + ": unknown block " + name);
    }
    auto& block = params[idx];
    if (static_cast<std::size_t>(block.value.size()) != count) {
      throw Error(Errc::CorruptState, path.string() + ": block " + name + " has " + std::to_string(count) +
                                          " values, expected " + std::to_string(block.value.size()));
    }
    for (double& v : block.value.reshaped()) {
      if (!get_le(in, v)) throw Error(Errc::CorruptState, path.string() + ": truncated block " + name);
    }
  }
}

}  // namespace compsearch::training
