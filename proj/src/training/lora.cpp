#include "compsearch/training/lora.hpp"

#include "compsearch/error.hpp"

#include <string>

namespace compsearch::training {

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return Eigen::MatrixXd::Ones(rows, cols);
  if (p >= 1.0) return Eigen::MatrixXd::Zero(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return u(rng) < p ? 0.0 : keep_scale; });
}

LoraAdapter LoraAdapter::init(Eigen::MatrixXd base, std::size_t rank, double alpha, double dropout_p,
                              std::mt19937_64& rng) {
  if (rank == 0) throw Error(Errc::ShapeMismatch, "LoRA rank must be positive");
  std::normal_distribution<double> n(0.0, kInitStd);
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(rank), base.cols(),
                                                   [&] { return n(rng); });
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(base.rows(), static_cast<Eigen::Index>(rank));
  return LoraAdapter(std::move(base), std::move(a), std::move(b), alpha, dropout_p);
}

LoraAdapter::LoraAdapter(Eigen::MatrixXd base, Eigen::MatrixXd a, Eigen::MatrixXd b, double alpha,
                         double dropout_p)
    : base_(std::move(base)), a_(std::move(a)), b_(std::move(b)), alpha_(alpha), dropout_p_(dropout_p) {
  if (a_.rows() == 0 || a_.cols() != base_.cols() || b_.rows() != base_.rows() || b_.cols() != a_.rows()) {
    throw Error(Errc::ShapeMismatch, "LoRA factors do not match the base weight");
  }
  if (!(dropout_p_ >= 0.0 && dropout_p_ < 1.0)) throw Error(Errc::ShapeMismatch, "dropout must be in [0, 1)");
}

Eigen::MatrixXd LoraAdapter::forward(const Eigen::MatrixXd& x, bool training, std::mt19937_64* rng,
                                     Trace* trace) const {
  if (x.rows() != base_.cols()) {
    throw Error(Errc::ShapeMismatch, "input dim " + std::to_string(x.rows()) + " vs adapter d_in " +
                                         std::to_string(base_.cols()));
  }
  Eigen::MatrixXd mask;
  Eigen::MatrixXd dropped;
  if (training && dropout_p_ > 0.0) {
    if (rng == nullptr) throw Error(Errc::ShapeMismatch, "training-mode dropout needs an rng");
    mask = dropout_mask(x.rows(), x.cols(), dropout_p_, *rng);
    dropped = x.cwiseProduct(mask);
  } else {
    dropped = x;
  }
  Eigen::MatrixXd low = a_ * dropped;
  Eigen::MatrixXd y = base_ * x;
  y.noalias() += scale() * (b_ * low);
  if (trace != nullptr) {
    trace->mask = std::move(mask);
    trace->dropped = std::move(dropped);
    trace->low = std::move(low);
  }
  return y;
}

Eigen::VectorXd LoraAdapter::forward(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x), false).col(0);
}

Eigen::MatrixXd LoraAdapter::backward(const Trace& trace, const Eigen::MatrixXd& d_y, Eigen::MatrixXd& d_a,
                                      Eigen::MatrixXd& d_b) const {
  const double s = scale();
  d_b.noalias() += s * d_y * trace.low.transpose();
  const Eigen::MatrixXd d_low = s * (b_.transpose() * d_y);
  d_a.noalias() += d_low * trace.dropped.transpose();
  Eigen::MatrixXd d_x = base_.transpose() * d_y;
  if (trace.mask.size() != 0) {
    d_x += trace.mask.cwiseProduct(a_.transpose() * d_low);
  } else {
    d_x.noalias() += a_.transpose() * d_low;
  }
  return d_x;
}

Eigen::MatrixXd LoraAdapter::merge() const { return base_ + scale() * (b_ * a_); }

}  // namespace compsearch::training
