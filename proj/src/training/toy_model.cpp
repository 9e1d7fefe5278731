#include "compsearch/training/toy_model.hpp"

#include "compsearch/error.hpp"
#include "compsearch/retrieval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace compsearch::training {

namespace {

const std::array<std::array<const char*, 8>, 3> kNamedWords{{
    {"black", "white", "gray", "beige", "red", "blue", "green", "natural"},
    {"cotton", "silk", "denim", "leather", "wool", "linen", "jersey", "lace"},
    {"dress", "tee", "skirt", "jacket", "coat", "blouse", "sweater", "shorts"},
}};

constexpr std::size_t kTemplateTokens = 4;  // replace <orig> with <target>

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return n(rng); });
}

}  // namespace

SyntheticCatalog::SyntheticCatalog(std::size_t slots, std::size_t values_per_slot)
    : slots_(slots), values_(values_per_slot), item_count_(1) {
  if (slots == 0 || values_per_slot < 2) throw Error(Errc::InvalidConfig, "need >= 1 slot and >= 2 values");
  for (std::size_t s = 0; s < slots; ++s) item_count_ *= values_per_slot;
  const bool named = slots <= kNamedWords.size() && values_per_slot <= kNamedWords[0].size();
  words_.resize(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    for (std::size_t v = 0; v < values_per_slot; ++v) {
      words_[s].push_back(named ? std::string(kNamedWords[s][v])
                                : "s" + std::to_string(s) + "v" + std::to_string(v));
    }
  }
}

std::vector<std::size_t> SyntheticCatalog::attributes_of(std::size_t item) const {
  if (item >= item_count_) throw Error(Errc::ShapeMismatch, "item index out of range");
  std::vector<std::size_t> attrs(slots_);
  for (std::size_t s = slots_; s-- > 0;) {
    attrs[s] = item % values_;
    item /= values_;
  }
  return attrs;
}

std::size_t SyntheticCatalog::item_of(const std::vector<std::size_t>& attributes) const {
  if (attributes.size() != slots_) throw Error(Errc::ShapeMismatch, "attribute tuple has the wrong arity");
  std::size_t item = 0;
  for (const auto a : attributes) {
    if (a >= values_) throw Error(Errc::ShapeMismatch, "attribute value out of range");
    item = item * values_ + a;
  }
  return item;
}

std::string SyntheticCatalog::item_id(std::size_t item) const {
  const int width = static_cast<int>(std::to_string(item_count_ - 1).size());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "item_%0*zu", width, item);
  return buf;
}

const std::string& SyntheticCatalog::word(std::size_t slot, std::size_t value) const {
  return words_.at(slot).at(value);
}

int SyntheticCatalog::find_word(std::string_view word) const {
  for (std::size_t s = 0; s < slots_; ++s) {
    for (std::size_t v = 0; v < values_; ++v) {
      if (words_[s][v] == word) return word_id(s, v);
    }
  }
  return -1;
}

std::string SyntheticCatalog::caption(std::size_t item) const {
  const auto attrs = attributes_of(item);
  std::string out;
  for (std::size_t s = 0; s < slots_; ++s) {
    if (s) out += ' ';
    out += words_[s][attrs[s]];
  }
  return out;
}

SyntheticSplit make_synthetic_triplets(const SyntheticCatalog& catalog, double held_out_fraction,
                                       std::mt19937_64& rng) {
  if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0)) {
    throw Error(Errc::InvalidConfig, "held_out_fraction must be in [0, 1)");
  }
  std::vector<SyntheticTriplet> all;
  for (std::size_t item = 0; item < catalog.item_count(); ++item) {
    const auto attrs = catalog.attributes_of(item);
    for (std::size_t s = 0; s < catalog.slots(); ++s) {
      for (std::size_t v = 0; v < catalog.values_per_slot(); ++v) {
        if (v == attrs[s]) continue;
        auto edited = attrs;
        edited[s] = v;
        all.push_back({item, catalog.item_of(edited), s,
                       build_query_text(catalog.word(s, attrs[s]), catalog.word(s, v))});
      }
    }
  }
  std::shuffle(all.begin(), all.end(), rng);
  const auto held = static_cast<std::size_t>(std::round(held_out_fraction * static_cast<double>(all.size())));
  SyntheticSplit split;
  split.held_out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(held));
  split.train.assign(all.begin() + static_cast<std::ptrdiff_t>(held), all.end());
  const auto by_ref = [](const SyntheticTriplet& a, const SyntheticTriplet& b) {
    return a.ref != b.ref ? a.ref < b.ref : a.trg < b.trg;
  };
  std::sort(split.train.begin(), split.train.end(), by_ref);
  std::sort(split.held_out.begin(), split.held_out.end(), by_ref);
  return split;
}

ToyEncoder::ToyEncoder(const SyntheticCatalog& catalog, const ToyModelConfig& config, std::mt19937_64& rng)
    : catalog_(catalog), config_(config) {
  if (config.feature_dim == 0 || config.hidden_dim == 0 || config.lora_rank == 0 || config.head_hidden == 0 ||
      config.embed_dim == 0) {
    throw Error(Errc::InvalidConfig, "toy model dimensions must be positive");
  }
  const auto d = static_cast<Eigen::Index>(config.feature_dim);
  const auto h = static_cast<Eigen::Index>(config.hidden_dim);
  const auto vocab = static_cast<Eigen::Index>(catalog.vocab_size());
  const auto text_rows_total = static_cast<Eigen::Index>(kTemplateTokens * text_vocab());

  // Frozen "pretrained" parts.
  ix_.attribute_features = params_.add("features.attribute", gaussian(d, vocab, 1.0, rng), false, false);
  ix_.text_features = params_.add("features.text", gaussian(d, text_rows_total, 1.0, rng), false, false);
  auto adapter = LoraAdapter::init(gaussian(h, d, 1.0 / std::sqrt(static_cast<double>(d)), rng),
                                   config.lora_rank, config.lora_alpha, config.lora_dropout, rng);
  ix_.lora_base = params_.add("lora.base", adapter.base(), false, false);
  ix_.lora_a = params_.add("lora.A", adapter.a(), true, true);
  ix_.lora_b = params_.add("lora.B", adapter.b(), true, true);

  const auto head = ProjectionHead::random(config.hidden_dim, config.head_hidden, config.embed_dim, rng);
  ix_.ln_gain = params_.add("head.ln_gain", head.ln_gain, true, false);
  ix_.ln_bias = params_.add("head.ln_bias", head.ln_bias, true, false);
  ix_.w1 = params_.add("head.w1", head.w1, true, true);
  ix_.b1 = params_.add("head.b1", head.b1, true, false);
  ix_.w2 = params_.add("head.w2", head.w2, true, true);
  ix_.b2 = params_.add("head.b2", head.b2, true, false);
  ix_.log_tau = params_.add("temperature.log_tau", Eigen::MatrixXd::Constant(1, 1, config.init_log_tau), true, false);

  ix_.lm_feat = params_.add("lm.w_feat", gaussian(vocab, h, 1.0 / std::sqrt(static_cast<double>(h)), rng), true, true);
  ix_.lm_prev = params_.add("lm.w_prev", Eigen::MatrixXd::Zero(vocab, vocab + 1), true, true);
  ix_.lm_bias = params_.add("lm.bias", Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(catalog.slots()), vocab), true, false);
}

Temperature ToyEncoder::temperature() const { return Temperature{params_[ix_.log_tau].value(0, 0)}; }

LoraAdapter ToyEncoder::adapter() const {
  return LoraAdapter(params_[ix_.lora_base].value, params_[ix_.lora_a].value, params_[ix_.lora_b].value,
                     config_.lora_alpha, config_.lora_dropout);
}

ProjectionHead ToyEncoder::head() const {
  ProjectionHead h;
  h.ln_gain = params_[ix_.ln_gain].value.reshaped();
  h.ln_bias = params_[ix_.ln_bias].value.reshaped();
  h.w1 = params_[ix_.w1].value;
  h.b1 = params_[ix_.b1].value.reshaped();
  h.w2 = params_[ix_.w2].value;
  h.b2 = params_[ix_.b2].value.reshaped();
  return h;
}

std::vector<std::size_t> ToyEncoder::text_rows(std::string_view text) const {
  if (text.empty()) return {};
  const auto edit = parse_query_text(text);
  if (!edit) throw Error(Errc::TokenOutOfRange, "unsupported query text: " + std::string(text));
  const int orig = catalog_.find_word(edit->original);
  const int target = catalog_.find_word(edit->target);
  if (orig < 0 || target < 0) throw Error(Errc::TokenOutOfRange, "unknown attribute word in: " + std::string(text));
  const std::size_t v = text_vocab();
  const std::size_t replace_tok = catalog_.vocab_size();
  const std::size_t with_tok = replace_tok + 1;
  return {0 * v + replace_tok, 1 * v + static_cast<std::size_t>(orig), 2 * v + with_tok,
          3 * v + static_cast<std::size_t>(target)};
}

Eigen::MatrixXd ToyEncoder::sequence_features(std::size_t item, std::string_view text) const {
  if (item >= catalog_.item_count()) throw Error(Errc::ShapeMismatch, "item index out of range");
  const auto rows = text_rows(text);
  const auto& attrs = params_[ix_.attribute_features].value;
  const auto& words = params_[ix_.text_features].value;
  Eigen::MatrixXd x(attrs.rows(), static_cast<Eigen::Index>(1 + rows.size()));
  x.col(0).setZero();
  for (const int w : caption_tokens(item)) x.col(0) += attrs.col(w);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    x.col(static_cast<Eigen::Index>(t + 1)) = words.col(static_cast<Eigen::Index>(rows[t]));
  }
  return x;
}

Embedding ToyEncoder::embed(std::size_t item, std::string_view text) const {
  const Eigen::MatrixXd hidden = adapter().forward(sequence_features(item, text), false);
  return pool_and_project(hidden.transpose(), head());
}

std::vector<Embedding> ToyEncoder::embed_all(const std::vector<std::size_t>& items,
                                             const std::vector<std::string>& texts) const {
  if (items.size() != texts.size()) throw Error(Errc::ShapeMismatch, "one text per item is required");
  const LoraAdapter lora = adapter();
  const ProjectionHead proj = head();
  std::vector<Embedding> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Eigen::MatrixXd hidden = lora.forward(sequence_features(items[i], texts[i]), false);
    out.push_back(pool_and_project(hidden.transpose(), proj));
  }
  return out;
}

std::vector<int> ToyEncoder::caption_tokens(std::size_t item) const {
  const auto attrs = catalog_.attributes_of(item);
  std::vector<int> out(attrs.size());
  for (std::size_t s = 0; s < attrs.size(); ++s) out[s] = catalog_.word_id(s, attrs[s]);
  return out;
}

BatchLoss ToyEncoder::forward_backward(const std::vector<SyntheticTriplet>& batch, const XbmBuffer& memory,
                                       const LossConfig& loss_config, std::mt19937_64* rng,
                                       std::vector<Eigen::MatrixXd>* grads, Eigen::MatrixXd* target_embeddings,
                                       const InfoNceOptions& infonce_options) const {
  const auto b = static_cast<Eigen::Index>(batch.size());
  if (b < 2) throw Error(Errc::BatchTooSmall, "toy batch needs at least two triplets");

  // Gather every sequence row of the batch: queries first, then targets.
  std::vector<Eigen::Index> query_start(batch.size());
  std::vector<Eigen::Index> query_len(batch.size());
  std::vector<Eigen::MatrixXd> pieces;
  pieces.reserve(batch.size() * 2);
  Eigen::Index total_rows = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    pieces.push_back(sequence_features(batch[i].ref, batch[i].text));
    query_start[i] = total_rows;
    query_len[i] = pieces.back().cols();
    total_rows += query_len[i];
  }
  const Eigen::Index target_start = total_rows;
  for (const auto& t : batch) {
    pieces.push_back(sequence_features(t.trg, ""));
    total_rows += 1;
  }
  const Eigen::Index d = params_[ix_.attribute_features].value.rows();
  Eigen::MatrixXd x(d, total_rows);
  {
    Eigen::Index at = 0;
    for (const auto& p : pieces) {
      x.middleCols(at, p.cols()) = p;
      at += p.cols();
    }
  }

  const LoraAdapter lora = adapter();
  const ProjectionHead proj = head();
  LoraAdapter::Trace lora_trace;
  const Eigen::MatrixXd hidden = lora.forward(x, rng != nullptr, rng, &lora_trace);  // H x R

  std::vector<HeadTrace> query_traces(batch.size());
  std::vector<HeadTrace> target_traces(batch.size());
  const Eigen::Index dim = static_cast<Eigen::Index>(config_.embed_dim);
  Eigen::MatrixXd queries(b, dim);
  Eigen::MatrixXd targets(b, dim);
  std::vector<std::string> keys(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd pooled = hidden.middleCols(query_start[i], query_len[i]).rowwise().mean();
    query_traces[i] = project_pooled(pooled, proj);
    queries.row(ii) = query_traces[i].output.transpose();
    target_traces[i] = project_pooled(hidden.col(target_start + ii), proj);
    targets.row(ii) = target_traces[i].output.transpose();
    keys[i] = catalog_.item_id(batch[i].trg);
  }
  if (target_embeddings != nullptr) *target_embeddings = targets;

  const auto nce = info_nce(queries, targets, keys, memory, temperature(), infonce_options);

  // Teacher-forced caption prediction of the target from each composed query.
  const auto& w_feat = params_[ix_.lm_feat].value;
  const auto& w_prev = params_[ix_.lm_prev].value;
  const auto& lm_bias = params_[ix_.lm_bias].value;
  const Eigen::Index vocab = w_feat.rows();
  const Eigen::Index steps = lm_bias.rows();
  const Eigen::Index bos = vocab;
  double lm_total = 0.0;
  std::vector<Eigen::MatrixXd> lm_d_logits(batch.size());
  std::vector<std::vector<int>> lm_prev(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto gold = caption_tokens(batch[i].trg);
    Eigen::MatrixXd logits(steps, vocab);
    auto& prev = lm_prev[i];
    prev.resize(static_cast<std::size_t>(steps));
    for (Eigen::Index t = 0; t < steps; ++t) {
      prev[static_cast<std::size_t>(t)] = t == 0 ? static_cast<int>(bos) : gold[static_cast<std::size_t>(t - 1)];
      logits.row(t) = (w_feat * query_traces[i].ln_out + w_prev.col(prev[static_cast<std::size_t>(t)]) +
                       lm_bias.row(t).transpose())
                          .transpose();
    }
    auto lm = lm_loss(logits, gold);
    lm_total += lm.loss;
    lm_d_logits[i] = std::move(lm.d_logits);
  }
  const double inv_b = 1.0 / static_cast<double>(b);

  BatchLoss out;
  out.lm = lm_total * inv_b;
  out.infonce = nce.loss;
  out.total = combined_loss(out.lm, out.infonce, loss_config);
  if (grads == nullptr) return out;

  auto& g = *grads;
  g = params_.zeros_like();
  const double omega = loss_config.omega;
  HeadGradients hg = HeadGradients::zeros_like(proj);
  Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(hidden.rows(), hidden.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::MatrixXd d_logits = lm_d_logits[i] * inv_b;
    Eigen::VectorXd d_fused = Eigen::VectorXd::Zero(query_traces[i].ln_out.size());
    for (Eigen::Index t = 0; t < steps; ++t) {
      const Eigen::VectorXd dl = d_logits.row(t).transpose();
      d_fused.noalias() += w_feat.transpose() * dl;
      g[ix_.lm_feat].noalias() += dl * query_traces[i].ln_out.transpose();
      g[ix_.lm_prev].col(lm_prev[i][static_cast<std::size_t>(t)]) += dl;
      g[ix_.lm_bias].row(t) += dl.transpose();
    }
    const Eigen::VectorXd d_pooled_q = project_pooled_backward(
        query_traces[i], proj, omega * nce.d_queries.row(ii).transpose(), d_fused, hg);
    const double share = 1.0 / static_cast<double>(query_len[i]);
    for (Eigen::Index c = 0; c < query_len[i]; ++c) d_hidden.col(query_start[i] + c) = share * d_pooled_q;
    d_hidden.col(target_start + ii) = project_pooled_backward(
        target_traces[i], proj, omega * nce.d_targets.row(ii).transpose(), Eigen::VectorXd(), hg);
  }
  lora.backward(lora_trace, d_hidden, g[ix_.lora_a], g[ix_.lora_b]);

  g[ix_.ln_gain] = hg.ln_gain;
  g[ix_.ln_bias] = hg.ln_bias;
  g[ix_.w1] = hg.w1;
  g[ix_.b1] = hg.b1;
  g[ix_.w2] = hg.w2;
  g[ix_.b2] = hg.b2;
  g[ix_.log_tau](0, 0) = omega * nce.d_log_tau;
  return out;
}

}  // namespace compsearch::training
