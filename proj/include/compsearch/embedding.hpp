#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <span>

namespace compsearch {

inline constexpr std::size_t kDefaultEmbeddingDim = 768;
inline constexpr std::size_t kDefaultProjectionHidden = 1024;
inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kUnitNormTolerance = 1e-6;

/// A point on the unit hypersphere of the retrieval space.
///
/// Constructed only through normalize() or from_unit(), so every live instance
/// has finite entries and Euclidean norm 1 within kUnitNormTolerance.
class Embedding {
 public:
  /// Wraps a vector that is already unit-norm; throws NonFinite / ZeroVector /
  /// ShapeMismatch when it is not.
  static Embedding from_unit(Eigen::VectorXd values, double tolerance = kUnitNormTolerance);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  friend bool operator==(const Embedding& a, const Embedding& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  explicit Embedding(Eigen::VectorXd values) : values_(std::move(values)) {}
  friend Embedding normalize(const Eigen::VectorXd& v);

  Eigen::VectorXd values_;
};

/// v / ||v||_2. Throws ZeroVector when the norm is below 1e-12, NonFinite on
/// inf/nan entries.
Embedding normalize(const Eigen::VectorXd& v);
Embedding normalize(std::span<const double> v);

/// Inner product of two embeddings; equals cosine similarity on the sphere.
double similarity(const Embedding& a, const Embedding& b);

/// 1 - <a, b>, in [0, 2].
double cosine_distance(const Embedding& a, const Embedding& b);

/// Mean over rows, layer norm, Linear -> ReLU -> Linear, unit normalization.
struct ProjectionHead {
  Eigen::VectorXd ln_gain;  // H
  Eigen::VectorXd ln_bias;  // H
  Eigen::MatrixXd w1;       // hidden x H
  Eigen::VectorXd b1;       // hidden
  Eigen::MatrixXd w2;       // out x hidden
  Eigen::VectorXd b2;       // out

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(ln_gain.size()); }
  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(b1.size()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(b2.size()); }

  /// Throws ShapeMismatch / NonFinite.
  void validate() const;

  /// Gain 1, bias 0, linear weights ~ N(0, 1/fan_in), linear biases 0.
  static ProjectionHead random(std::size_t input_dim, std::size_t hidden_dim,
                               std::size_t output_dim, std::mt19937_64& rng);
};

/// Intermediate values of one head evaluation, kept for backpropagation.
struct HeadTrace {
  Eigen::VectorXd pooled;     // mean over rows
  Eigen::VectorXd xhat;       // standardized pooled vector
  double inv_std = 0.0;
  Eigen::VectorXd ln_out;     // gain * xhat + bias
  Eigen::VectorXd pre_relu;   // w1 * ln_out + b1
  Eigen::VectorXd hidden;     // relu(pre_relu)
  Eigen::VectorXd projected;  // w2 * hidden + b2, before normalization
  double projected_norm = 0.0;
  Eigen::VectorXd output;     // projected / projected_norm
};

struct HeadGradients {
  Eigen::VectorXd ln_gain;
  Eigen::VectorXd ln_bias;
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static HeadGradients zeros_like(const ProjectionHead& head);
};

/// Layer normalization of a single vector (population variance, eps inside sqrt).
Eigen::VectorXd layer_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, double eps = kLayerNormEps);

/// Maps a T x H matrix of sequence features to a retrieval embedding.
Embedding pool_and_project(const Eigen::MatrixXd& hidden_states, const ProjectionHead& head);

/// Same arithmetic starting from an already-pooled vector, recording a trace.
HeadTrace project_pooled(const Eigen::VectorXd& pooled, const ProjectionHead& head);

/// Backpropagates dL/d(output) and dL/d(ln_out) (the latter may be empty) through
/// the head. Accumulates parameter gradients into `grads` and returns dL/d(pooled).
Eigen::VectorXd project_pooled_backward(const HeadTrace& trace, const ProjectionHead& head,
                                        const Eigen::VectorXd& d_output,
                                        const Eigen::VectorXd& d_ln_out, HeadGradients& grads);

}  // namespace compsearch
