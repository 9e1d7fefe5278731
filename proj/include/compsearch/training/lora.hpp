#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <random>

namespace compsearch::training {

/// Low-rank residual on a frozen linear map:
///   y = W x + (alpha / r) * B * A * dropout(x)
/// W is never written by any member function.
class LoraAdapter {
 public:
  inline static constexpr std::size_t kDefaultRank = 16;
  inline static constexpr double kDefaultAlpha = 32.0;
  inline static constexpr double kDefaultDropout = 0.5;
  inline static constexpr double kInitStd = 0.02;

  /// A ~ N(0, 0.02^2), B = 0, so the adapter starts at the frozen base.
  static LoraAdapter init(Eigen::MatrixXd base, std::size_t rank, double alpha, double dropout_p,
                          std::mt19937_64& rng);

  LoraAdapter(Eigen::MatrixXd base, Eigen::MatrixXd a, Eigen::MatrixXd b, double alpha, double dropout_p);

  std::size_t rank() const noexcept { return static_cast<std::size_t>(a_.rows()); }
  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(base_.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(base_.rows()); }
  double alpha() const noexcept { return alpha_; }
  double dropout() const noexcept { return dropout_p_; }
  double scale() const noexcept { return alpha_ / static_cast<double>(rank()); }

  const Eigen::MatrixXd& base() const noexcept { return base_; }
  const Eigen::MatrixXd& a() const noexcept { return a_; }
  const Eigen::MatrixXd& b() const noexcept { return b_; }
  Eigen::MatrixXd& a() noexcept { return a_; }
  Eigen::MatrixXd& b() noexcept { return b_; }

  /// r * (d_in + d_out).
  std::size_t trainable_parameter_count() const noexcept { return rank() * (in_dim() + out_dim()); }

  /// Saved inputs of a batched forward pass (columns are samples).
  struct Trace {
    Eigen::MatrixXd mask;     // empty when dropout was off
    Eigen::MatrixXd dropped;  // dropout(x), d_in x N
    Eigen::MatrixXd low;      // A * dropped, r x N
  };

  /// Batched forward on the columns of `x`. Inverted dropout is applied to the
  /// adapter input only when `training` is true. Throws ShapeMismatch.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training, std::mt19937_64* rng = nullptr,
                          Trace* trace = nullptr) const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  /// Accumulates dA, dB for upstream gradient `d_y` (d_out x N); returns dL/dx.
  Eigen::MatrixXd backward(const Trace& trace, const Eigen::MatrixXd& d_y, Eigen::MatrixXd& d_a,
                           Eigen::MatrixXd& d_b) const;

  /// W + (alpha / r) * B * A.
  Eigen::MatrixXd merge() const;

 private:
  Eigen::MatrixXd base_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
  double alpha_;
  double dropout_p_;
};

/// Inverted-dropout mask (entries 0 or 1/(1-p)) of the given shape.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng);

}  // namespace compsearch::training
