#include "compsearch/training/adamw.hpp"

#include "compsearch/error.hpp"

#include <algorithm>
#include <cmath>

namespace compsearch::training {

void adamw_step(Eigen::Ref<Eigen::MatrixXd> params, const Eigen::MatrixXd& grads, AdamWState& state,
                double lr, double weight_decay, const AdamWConfig& config) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols()) {
    throw Error(Errc::ShapeMismatch, "parameter and gradient shapes differ");
  }
  if (state.m.size() == 0) {
    state.m = Eigen::MatrixXd::Zero(params.rows(), params.cols());
    state.v = Eigen::MatrixXd::Zero(params.rows(), params.cols());
  } else if (state.m.rows() != params.rows() || state.m.cols() != params.cols()) {
    throw Error(Errc::ShapeMismatch, "optimizer state shape differs from parameters");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.cwiseProduct(grads);
  if (weight_decay != 0.0) params *= (1.0 - lr * weight_decay);
  params.array() -= lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + config.eps);
}

double warmup_lr(std::int64_t step, double base_lr, std::int64_t warmup_steps) {
  if (warmup_steps <= 0) return base_lr;
  const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) / static_cast<double>(warmup_steps);
  return base_lr * std::min(1.0, frac);
}

void AdamW::step(ParameterSet& params, const std::vector<Eigen::MatrixXd>& grads, double lr, double weight_decay) {
  if (grads.size() != params.size()) throw Error(Errc::ShapeMismatch, "one gradient per parameter block");
  state_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& block = params[i];
    if (!block.trainable) continue;
    adamw_step(block.value, grads[i], state_[i], lr, block.decay ? weight_decay : 0.0, config_);
  }
  ++steps_;
}

}  // namespace compsearch::training
