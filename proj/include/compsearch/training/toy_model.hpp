#pragma once

#include "compsearch/embedding.hpp"
#include "compsearch/training/lora.hpp"
#include "compsearch/training/losses.hpp"
#include "compsearch/training/params.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace compsearch::training {

/// Products as tuples of categorical attributes (one value per slot). Item
/// index i enumerates tuples in mixed radix, slot 0 most significant.
class SyntheticCatalog {
 public:
  SyntheticCatalog(std::size_t slots, std::size_t values_per_slot);

  std::size_t slots() const noexcept { return slots_; }
  std::size_t values_per_slot() const noexcept { return values_; }
  std::size_t item_count() const noexcept { return item_count_; }
  std::size_t vocab_size() const noexcept { return slots_ * values_; }

  std::vector<std::size_t> attributes_of(std::size_t item) const;
  std::size_t item_of(const std::vector<std::size_t>& attributes) const;
  /// Zero-padded so that lexical order equals index order.
  std::string item_id(std::size_t item) const;

  const std::string& word(std::size_t slot, std::size_t value) const;
  int word_id(std::size_t slot, std::size_t value) const {
    return static_cast<int>(slot * values_ + value);
  }
  /// Word id of an attribute word, -1 when unknown.
  int find_word(std::string_view word) const;
  /// Attribute words of an item joined by spaces, e.g. "gray jersey dress".
  std::string caption(std::size_t item) const;

 private:
  std::size_t slots_;
  std::size_t values_;
  std::size_t item_count_;
  std::vector<std::vector<std::string>> words_;
};

/// Reference item, target item differing in exactly one slot, and the
/// "replace <orig> with <target>" text describing the change.
struct SyntheticTriplet {
  std::size_t ref = 0;
  std::size_t trg = 0;
  std::size_t slot = 0;
  std::string text;
};

struct SyntheticSplit {
  std::vector<SyntheticTriplet> train;
  std::vector<SyntheticTriplet> held_out;
};

/// Every single-attribute edit of every item, split at random.
SyntheticSplit make_synthetic_triplets(const SyntheticCatalog& catalog, double held_out_fraction,
                                       std::mt19937_64& rng);

struct ToyModelConfig {
  std::size_t feature_dim = 64;
  std::size_t hidden_dim = 16;
  std::size_t lora_rank = LoraAdapter::kDefaultRank;
  double lora_alpha = LoraAdapter::kDefaultAlpha;
  double lora_dropout = LoraAdapter::kDefaultDropout;
  std::size_t head_hidden = 64;
  std::size_t embed_dim = 32;
  double init_log_tau = 0.0;
};

struct BatchLoss {
  double lm = 0.0;
  double infonce = 0.0;
  double total = 0.0;
};

/// Differentiable stand-in for the composed encoder F and the image encoder
/// G(x) = F(x, ""):
///   rows    = item feature (sum of frozen per-attribute vectors), plus frozen
///             features of the query tokens
///             [replace, <orig>, with, <target>] when text is present
///   hidden  = LoRA-adapted linear map of every row (frozen base)
///   output  = pool_and_project(hidden, head)
/// A linear next-token predictor reads the layer-normed pooled features and the
/// gold previous token to emit the target caption (teacher forcing).
/// Trainable: LoRA factors, projection head, temperature and predictor.
class ToyEncoder {
 public:
  ToyEncoder(const SyntheticCatalog& catalog, const ToyModelConfig& config, std::mt19937_64& rng);

  const SyntheticCatalog& catalog() const noexcept { return catalog_; }
  const ToyModelConfig& config() const noexcept { return config_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  Temperature temperature() const;
  LoraAdapter adapter() const;
  ProjectionHead head() const;

  /// Frozen sequence features for (item, text): one column per row.
  Eigen::MatrixXd sequence_features(std::size_t item, std::string_view text) const;

  /// Inference-mode embedding of (item, text); text "" gives the image embedding.
  Embedding embed(std::size_t item, std::string_view text) const;

  /// embed() over many (item, text) pairs, sharing one adapter/head snapshot.
  std::vector<Embedding> embed_all(const std::vector<std::size_t>& items,
                                   const std::vector<std::string>& texts) const;

  /// Loss of one batch of triplets against in-batch targets and `memory`.
  /// When `grads` is non-null it receives gradients aligned with parameters().
  /// `target_embeddings` (B x D) receives the detached target embeddings.
  /// Dropout is active iff `rng` is non-null.
  BatchLoss forward_backward(const std::vector<SyntheticTriplet>& batch, const XbmBuffer& memory,
                             const LossConfig& loss_config, std::mt19937_64* rng,
                             std::vector<Eigen::MatrixXd>* grads,
                             Eigen::MatrixXd* target_embeddings = nullptr,
                             const InfoNceOptions& infonce_options = {}) const;

  /// Target caption token ids of an item, one per slot.
  std::vector<int> caption_tokens(std::size_t item) const;

 private:
  struct Blocks {
    std::size_t attribute_features, text_features, lora_base, lora_a, lora_b;
    std::size_t ln_gain, ln_bias, w1, b1, w2, b2, log_tau;
    std::size_t lm_feat, lm_prev, lm_bias;
  };

  std::size_t text_vocab() const noexcept { return catalog_.vocab_size() + 2; }
  std::vector<std::size_t> text_rows(std::string_view text) const;

  SyntheticCatalog catalog_;
  ToyModelConfig config_;
  ParameterSet params_;
  Blocks ix_{};
};

}  // namespace compsearch::training
