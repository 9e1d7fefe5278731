#include "compsearch/embedding.hpp"

#include "compsearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace compsearch {

namespace {

constexpr double kZeroNorm = 1e-12;

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw Error(Errc::NonFinite, std::string(what) + " has non-finite entries");
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::NonFinite, std::string(what) + " has non-finite entries");
}

}  // namespace

Embedding Embedding::from_unit(Eigen::VectorXd values, double tolerance) {
  if (values.size() == 0) throw Error(Errc::ShapeMismatch, "embedding must have at least one entry");
  require_finite(values, "embedding");
  const double norm = values.norm();
  if (norm < kZeroNorm) throw Error(Errc::ZeroVector, "embedding is all-zero");
  if (std::abs(norm - 1.0) > tolerance) {
    throw Error(Errc::ShapeMismatch, "embedding norm " + std::to_string(norm) + " is not 1");
  }
  return Embedding(std::move(values));
}

Embedding normalize(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw Error(Errc::ShapeMismatch, "cannot normalize an empty vector");
  require_finite(v, "vector");
  const double norm = v.norm();
  if (norm < kZeroNorm) throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
  return Embedding(v / norm);
}

Embedding normalize(std::span<const double> v) {
  return normalize(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))));
}

double similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(Errc::DimMismatch, std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  return a.values().dot(b.values());
}

double cosine_distance(const Embedding& a, const Embedding& b) {
  const double d = 1.0 - similarity(a, b);
  return std::clamp(d, 0.0, 2.0);
}

void ProjectionHead::validate() const {
  const auto h = ln_gain.size();
  if (h == 0 || ln_bias.size() != h || w1.cols() != h || w1.rows() != b1.size() ||
      w2.cols() != w1.rows() || w2.rows() != b2.size() || b2.size() == 0) {
    throw Error(Errc::ShapeMismatch, "projection head shapes are inconsistent");
  }
  require_finite(ln_gain, "ln_gain");
  require_finite(ln_bias, "ln_bias");
  require_finite(w1, "w1");
  require_finite(b1, "b1");
  require_finite(w2, "w2");
  require_finite(b2, "b2");
}

ProjectionHead ProjectionHead::random(std::size_t input_dim, std::size_t hidden_dim,
                                      std::size_t output_dim, std::mt19937_64& rng) {
  const auto h = static_cast<Eigen::Index>(input_dim);
  const auto m = static_cast<Eigen::Index>(hidden_dim);
  const auto o = static_cast<Eigen::Index>(output_dim);
  std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  std::normal_distribution<double> n2(0.0, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  ProjectionHead head;
  head.ln_gain = Eigen::VectorXd::Ones(h);
  head.ln_bias = Eigen::VectorXd::Zero(h);
  head.w1 = Eigen::MatrixXd::NullaryExpr(m, h, [&] { return n1(rng); });
  head.b1 = Eigen::VectorXd::Zero(m);
  head.w2 = Eigen::MatrixXd::NullaryExpr(o, m, [&] { return n2(rng); });
  head.b2 = Eigen::VectorXd::Zero(o);
  return head;
}

HeadGradients HeadGradients::zeros_like(const ProjectionHead& head) {
  return HeadGradients{Eigen::VectorXd::Zero(head.ln_gain.size()),
                       Eigen::VectorXd::Zero(head.ln_bias.size()),
                       Eigen::MatrixXd::Zero(head.w1.rows(), head.w1.cols()),
                       Eigen::VectorXd::Zero(head.b1.size()),
                       Eigen::MatrixXd::Zero(head.w2.rows(), head.w2.cols()),
                       Eigen::VectorXd::Zero(head.b2.size())};
}

Eigen::VectorXd layer_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, double eps) {
  if (x.size() == 0 || gain.size() != x.size() || bias.size() != x.size()) {
    throw Error(Errc::ShapeMismatch, "layer_norm shapes");
  }
  const double mean = x.mean();
  const Eigen::ArrayXd centered = x.array() - mean;
  const double var = centered.square().mean();
  const Eigen::ArrayXd xhat = centered / std::sqrt(var + eps);
  return (gain.array() * xhat + bias.array()).matrix();
}

HeadTrace project_pooled(const Eigen::VectorXd& pooled, const ProjectionHead& head) {
  if (static_cast<std::size_t>(pooled.size()) != head.input_dim()) {
    throw Error(Errc::ShapeMismatch, "pooled width " + std::to_string(pooled.size()) +
                                         " does not match head input " +
                                         std::to_string(head.input_dim()));
  }
  HeadTrace t;
  t.pooled = pooled;
  const double mean = pooled.mean();
  const Eigen::ArrayXd centered = pooled.array() - mean;
  const double var = centered.square().mean();
  t.inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
  t.xhat = (centered * t.inv_std).matrix();
  t.ln_out = (head.ln_gain.array() * t.xhat.array() + head.ln_bias.array()).matrix();
  t.pre_relu = head.w1 * t.ln_out + head.b1;
  t.hidden = t.pre_relu.cwiseMax(0.0);
  t.projected = head.w2 * t.hidden + head.b2;
  if (!t.projected.allFinite()) throw Error(Errc::NonFinite, "projection output");
  t.projected_norm = t.projected.norm();
  if (t.projected_norm < kZeroNorm) throw Error(Errc::ZeroVector, "projection output is all-zero");
  t.output = t.projected / t.projected_norm;
  return t;
}

Embedding pool_and_project(const Eigen::MatrixXd& hidden_states, const ProjectionHead& head) {
  if (hidden_states.rows() < 1) throw Error(Errc::ShapeMismatch, "need at least one row to pool");
  if (static_cast<std::size_t>(hidden_states.cols()) != head.input_dim()) {
    throw Error(Errc::ShapeMismatch, "hidden width " + std::to_string(hidden_states.cols()) +
                                         " does not match head input " +
                                         std::to_string(head.input_dim()));
  }
  require_finite(hidden_states, "hidden_states");
  const Eigen::VectorXd pooled = hidden_states.colwise().mean().transpose();
  return normalize(project_pooled(pooled, head).output);
}

Eigen::VectorXd project_pooled_backward(const HeadTrace& t, const ProjectionHead& head,
                                        const Eigen::VectorXd& d_output,
                                        const Eigen::VectorXd& d_ln_out, HeadGradients& grads) {
  // d(u/|u|)/du applied to d_output.
  const Eigen::VectorXd d_projected =
      (d_output - t.output * t.output.dot(d_output)) / t.projected_norm;
  grads.w2.noalias() += d_projected * t.hidden.transpose();
  grads.b2 += d_projected;
  const Eigen::VectorXd d_hidden = head.w2.transpose() * d_projected;
  const Eigen::VectorXd d_pre =
      (t.pre_relu.array() > 0.0).select(d_hidden.array(), 0.0).matrix();
  grads.w1.noalias() += d_pre * t.ln_out.transpose();
  grads.b1 += d_pre;
  Eigen::VectorXd d_ln = head.w1.transpose() * d_pre;
  if (d_ln_out.size() != 0) d_ln += d_ln_out;

  grads.ln_gain += (d_ln.array() * t.xhat.array()).matrix();
  grads.ln_bias += d_ln;
  const Eigen::ArrayXd d_xhat = d_ln.array() * head.ln_gain.array();
  const double mean_d = d_xhat.mean();
  const double mean_dx = (d_xhat * t.xhat.array()).mean();
  return (t.inv_std * (d_xhat - mean_d - t.xhat.array() * mean_dx)).matrix();
}

}  // namespace compsearch
