#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace compsearch::training {

struct ParameterBlock {
  std::string name;
  Eigen::MatrixXd value;
  bool trainable = true;
  bool decay = true;  // subject to decoupled weight decay
};

/// Ordered set of named parameter blocks. Gradients are kept in a parallel
/// vector of matrices (see zeros_like).
class ParameterSet {
 public:
  std::size_t add(std::string name, Eigen::MatrixXd value, bool trainable, bool decay);

  std::size_t size() const noexcept { return blocks_.size(); }
  ParameterBlock& operator[](std::size_t i) { return blocks_.at(i); }
  const ParameterBlock& operator[](std::size_t i) const { return blocks_.at(i); }
  const std::vector<ParameterBlock>& blocks() const noexcept { return blocks_; }

  /// Index of a block by name; throws NotFound.
  std::size_t index_of(std::string_view name) const;

  std::vector<Eigen::MatrixXd> zeros_like() const;

  std::size_t trainable_count() const;
  /// Trainable blocks concatenated in order (column-major within a block).
  Eigen::VectorXd flatten_trainable() const;
  void assign_trainable(const Eigen::VectorXd& flat);
  static Eigen::VectorXd flatten_trainable(const ParameterSet& shape, const std::vector<Eigen::MatrixXd>& grads);

 private:
  std::vector<ParameterBlock> blocks_;
};

/// Writes a "CSK1" checkpoint: magic, then per block u32 name length, name
/// bytes, u32 value count, count float64 LE values (column-major).
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);

/// Loads values into blocks of matching name; throws CorruptState on unknown
/// names, count mismatches or truncation, Io when the file cannot be read.
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

}  // namespace compsearch::training
