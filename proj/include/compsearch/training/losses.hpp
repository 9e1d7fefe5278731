#pragma once

#include "compsearch/embedding.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace compsearch::training {

/// Learnable contrastive scale, stored in log space so tau = exp(log_tau) > 0.
struct Temperature {
  double log_tau = 0.0;

  double tau() const noexcept { return std::exp(log_tau); }
};

/// Fixed-capacity FIFO of detached target embeddings used as extra negatives.
class XbmBuffer {
 public:
  struct Entry {
    Eigen::VectorXd embedding;
    std::string key;
  };

  inline static constexpr std::size_t kDefaultCapacity = 65536;

  explicit XbmBuffer(std::size_t capacity = kDefaultCapacity, std::size_t dim = 0)
      : capacity_(capacity), dim_(dim) {}

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  /// 0 until the first enqueue fixes it (unless given at construction).
  std::size_t dim() const noexcept { return dim_; }

  /// i-th entry in arrival order, 0 = oldest.
  const Entry& at(std::size_t i) const;

  /// Appends copies of the rows of `embeddings` in order, evicting the oldest
  /// entries beyond capacity. `keys` may be empty (no keys) or one per row.
  /// Throws DimMismatch / ShapeMismatch.
  void enqueue(const Eigen::MatrixXd& embeddings, const std::vector<std::string>& keys = {});
  void enqueue(const std::vector<Embedding>& embeddings, const std::vector<std::string>& keys = {});

  void clear() noexcept {
    ring_.clear();
    size_ = 0;
    head_ = 0;
  }

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::vector<Entry> ring_;
  std::size_t head_ = 0;  // index of the oldest entry once the ring is full
  std::size_t size_ = 0;
};

struct InfoNceOptions {
  // Adds the target->query direction over the batch (memory excluded) and
  // averages the two directions.
  bool bidirectional = false;
};

struct InfoNceResult {
  double loss = 0.0;
  Eigen::MatrixXd d_queries;  // B x D
  Eigen::MatrixXd d_targets;  // B x D
  double d_log_tau = 0.0;
};

/// Contrastive loss of row-aligned query/target batches with cross-batch memory:
///   -(1/B) sum_i log( exp(tau S_ii) / sum_{j in batch + memory} exp(tau S_ij) )
/// with S_ij the inner product. Memory entries whose key equals target_keys[i]
/// are dropped from row i's denominator; memory receives no gradient.
/// Throws BatchTooSmall (B < 2), DimMismatch, ShapeMismatch.
InfoNceResult info_nce(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets,
                       const std::vector<std::string>& target_keys, const XbmBuffer& memory,
                       const Temperature& temperature, const InfoNceOptions& options = {});

InfoNceResult info_nce(const std::vector<Embedding>& queries, const std::vector<Embedding>& targets,
                       const XbmBuffer& memory, const Temperature& temperature);

struct LmLossResult {
  double loss = 0.0;
  Eigen::MatrixXd d_logits;  // T x V
};

/// Mean token cross-entropy of T x V logits against gold tokens.
/// Throws TokenOutOfRange, ShapeMismatch.
LmLossResult lm_loss(const Eigen::MatrixXd& logits, const std::vector<int>& target_tokens);

struct LossConfig {
  double omega = 1.0;
  std::size_t batch_size = 64;
  std::size_t memory_capacity = XbmBuffer::kDefaultCapacity;
  std::size_t vocab_size = 0;
};

/// lm + omega * infonce. Throws NonFinite.
double combined_loss(double lm, double infonce, const LossConfig& config);

}  // namespace compsearch::training
