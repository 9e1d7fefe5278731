#pragma once

#include "compsearch/training/params.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace compsearch::training {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  std::int64_t step = 0;
};

/// One decoupled-weight-decay Adam update of `params` in place:
///   p <- p - lr * wd * p;  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are created on first use. Throws ShapeMismatch.
void adamw_step(Eigen::Ref<Eigen::MatrixXd> params, const Eigen::MatrixXd& grads, AdamWState& state,
                double lr, double weight_decay, const AdamWConfig& config = {});

/// base_lr * min(1, step / warmup_steps); warmup_steps == 0 means no warmup.
double warmup_lr(std::int64_t step, double base_lr, std::int64_t warmup_steps);

/// AdamW over the trainable blocks of a ParameterSet. Blocks with decay=false
/// get no weight decay; frozen blocks are never touched.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(ParameterSet& params, const std::vector<Eigen::MatrixXd>& grads, double lr, double weight_decay);

  std::int64_t steps_taken() const noexcept { return steps_; }

 private:
  AdamWConfig config_;
  std::vector<AdamWState> state_;
  std::int64_t steps_ = 0;
};

}  // namespace compsearch::training
