#include "compsearch/training/losses.hpp"

#include "compsearch/error.hpp"

#include <algorithm>
#include <limits>

namespace compsearch::training {

const XbmBuffer::Entry& XbmBuffer::at(std::size_t i) const {
  if (i >= size_) throw Error(Errc::ShapeMismatch, "xbm index out of range");
  return ring_[(head_ + i) % ring_.size()];
}

void XbmBuffer::enqueue(const Eigen::MatrixXd& embeddings, const std::vector<std::string>& keys) {
  if (!keys.empty() && keys.size() != static_cast<std::size_t>(embeddings.rows())) {
    throw Error(Errc::ShapeMismatch, "one key per embedding row is required");
  }
  if (embeddings.rows() == 0) return;
  const auto cols = static_cast<std::size_t>(embeddings.cols());
  if (dim_ == 0) dim_ = cols;
  if (cols != dim_) {
    throw Error(Errc::DimMismatch, "memory dim " + std::to_string(dim_) + " vs " + std::to_string(cols));
  }
  if (capacity_ == 0) return;
  for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
    Entry entry{embeddings.row(r).transpose(), keys.empty() ? std::string() : keys[static_cast<std::size_t>(r)]};
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(entry));
      ++size_;
    } else {
      ring_[head_] = std::move(entry);
      head_ = (head_ + 1) % capacity_;
    }
  }
}

void XbmBuffer::enqueue(const std::vector<Embedding>& embeddings, const std::vector<std::string>& keys) {
  if (embeddings.empty()) return;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(embeddings.size()),
                    static_cast<Eigen::Index>(embeddings.front().dim()));
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].dim() != embeddings.front().dim()) {
      throw Error(Errc::DimMismatch, "embeddings in one enqueue must share a dimension");
    }
    m.row(static_cast<Eigen::Index>(i)) = embeddings[i].values().transpose();
  }
  enqueue(m, keys);
}

namespace {

// Softmax cross-entropy of one row of logits with the positive at `positive`;
// entries with mask false are excluded. Writes dL/dlogit (scaled by `weight`)
// into `grad` and returns the loss term.
double row_xent(const Eigen::Ref<const Eigen::RowVectorXd>& logits, const std::vector<char>& mask,
                Eigen::Index positive, double weight,
                Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> grad) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) max_logit = std::max(max_logit, logits[j]);
  }
  double denom = 0.0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) denom += std::exp(logits[j] - max_logit);
  }
  const double log_denom = max_logit + std::log(denom);
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    grad[j] = mask[static_cast<std::size_t>(j)] ? weight * std::exp(logits[j] - log_denom) : 0.0;
  }
  grad[positive] -= weight;
  return log_denom - logits[positive];
}

}  // namespace

InfoNceResult info_nce(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets,
                       const std::vector<std::string>& target_keys, const XbmBuffer& memory,
                       const Temperature& temperature, const InfoNceOptions& options) {
  const Eigen::Index batch = queries.rows();
  if (batch < 2) throw Error(Errc::BatchTooSmall, "InfoNCE needs at least two pairs");
  if (targets.rows() != batch) throw Error(Errc::ShapeMismatch, "queries and targets differ in batch size");
  if (queries.cols() != targets.cols()) throw Error(Errc::DimMismatch, "query/target dims differ");
  if (!target_keys.empty() && target_keys.size() != static_cast<std::size_t>(batch)) {
    throw Error(Errc::ShapeMismatch, "one key per target is required");
  }
  if (!memory.empty() && memory.dim() != static_cast<std::size_t>(queries.cols())) {
    throw Error(Errc::DimMismatch, "memory dim differs from batch dim");
  }

  const auto mem = static_cast<Eigen::Index>(memory.size());
  const Eigen::Index dim = queries.cols();
  const double tau = temperature.tau();

  // Candidates: batch targets first, then memory oldest to newest.
  Eigen::MatrixXd candidates(batch + mem, dim);
  candidates.topRows(batch) = targets;
  for (Eigen::Index m = 0; m < mem; ++m) {
    candidates.row(batch + m) = memory.at(static_cast<std::size_t>(m)).embedding.transpose();
  }
  const Eigen::MatrixXd scores = queries * candidates.transpose();  // B x (B + M)
  const Eigen::MatrixXd logits = tau * scores;

  const double weight = options.bidirectional ? 0.5 / static_cast<double>(batch)
                                              : 1.0 / static_cast<double>(batch);
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(batch, batch + mem);
  std::vector<char> mask(static_cast<std::size_t>(batch + mem), 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    std::fill(mask.begin(), mask.end(), 1);
    if (!target_keys.empty()) {
      const auto& key = target_keys[static_cast<std::size_t>(i)];
      for (Eigen::Index m = 0; m < mem; ++m) {
        if (memory.at(static_cast<std::size_t>(m)).key == key) mask[static_cast<std::size_t>(batch + m)] = 0;
      }
    }
    loss += weight * row_xent(logits.row(i), mask, i, weight, d_logits.row(i));
  }

  InfoNceResult out;
  // dL/dS = tau * dL/dlogit; dL/dlog_tau = sum dL/dlogit * logit.
  Eigen::MatrixXd d_scores = tau * d_logits;
  out.d_log_tau = (d_logits.array() * logits.array()).sum();

  if (options.bidirectional) {
    // Target -> query over the batch only.
    const Eigen::MatrixXd logits_t = logits.leftCols(batch).transpose();
    Eigen::MatrixXd d_logits_t = Eigen::MatrixXd::Zero(batch, batch);
    std::vector<char> all(static_cast<std::size_t>(batch), 1);
    for (Eigen::Index i = 0; i < batch; ++i) {
      loss += weight * row_xent(logits_t.row(i), all, i, weight, d_logits_t.row(i));
    }
    d_scores.leftCols(batch) += tau * d_logits_t.transpose();
    out.d_log_tau += (d_logits_t.array() * logits_t.array()).sum();
  }

  out.loss = loss;
  out.d_queries = d_scores * candidates;
  out.d_targets = d_scores.leftCols(batch).transpose() * queries;
  return out;
}

InfoNceResult info_nce(const std::vector<Embedding>& queries, const std::vector<Embedding>& targets,
                       const XbmBuffer& memory, const Temperature& temperature) {
  const auto to_matrix = [](const std::vector<Embedding>& rows) {
    if (rows.empty()) return Eigen::MatrixXd();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().dim()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].dim() != rows.front().dim()) throw Error(Errc::DimMismatch, "batch dims differ");
      m.row(static_cast<Eigen::Index>(i)) = rows[i].values().transpose();
    }
    return m;
  };
  return info_nce(to_matrix(queries), to_matrix(targets), {}, memory, temperature);
}

LmLossResult lm_loss(const Eigen::MatrixXd& logits, const std::vector<int>& target_tokens) {
  const Eigen::Index steps = logits.rows();
  const Eigen::Index vocab = logits.cols();
  if (steps == 0 || vocab == 0) throw Error(Errc::ShapeMismatch, "empty logits");
  if (target_tokens.size() != static_cast<std::size_t>(steps)) {
    throw Error(Errc::ShapeMismatch, "need one target token per logit row");
  }
  for (const int t : target_tokens) {
    if (t < 0 || t >= vocab) {
      throw Error(Errc::TokenOutOfRange, "token " + std::to_string(t) + " outside [0, " + std::to_string(vocab) + ")");
    }
  }
  LmLossResult out;
  out.d_logits.resize(steps, vocab);
  const double weight = 1.0 / static_cast<double>(steps);
  std::vector<char> all(static_cast<std::size_t>(vocab), 1);
  for (Eigen::Index t = 0; t < steps; ++t) {
    out.loss += weight * row_xent(logits.row(t), all, target_tokens[static_cast<std::size_t>(t)], weight,
                                  out.d_logits.row(t));
  }
  return out;
}

double combined_loss(double lm, double infonce, const LossConfig& config) {
  if (!std::isfinite(lm) || !std::isfinite(infonce) || !std::isfinite(config.omega)) {
    throw Error(Errc::NonFinite, "loss terms and omega must be finite");
  }
  return lm + config.omega * infonce;
}

}  // namespace compsearch::training
