#pragma once

#include "compsearch/training/losses.hpp"
#include "compsearch/training/toy_model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace compsearch::training {

struct TrainConfig {
  LossConfig loss{};
  ToyModelConfig model{};

  double learning_rate = 1e-5;
  double weight_decay = 0.5;
  std::int64_t warmup_steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool bidirectional = false;
  // log_tau is clamped to at most this value after every step.
  double max_log_tau = 4.605170185988092;  // ln 100

  std::size_t epochs = 300;
  std::size_t slots = 3;
  std::size_t values_per_slot = 8;
  double held_out_fraction = 0.1;
  // Training triplets drawn per epoch; 0 means one full pass.
  std::size_t triplets_per_epoch = 0;
  // Stop once held-out recall reaches both targets (0 disables).
  double stop_r_at_1 = 0.0;
  double stop_r_at_10 = 0.0;

  /// Flat "key = value" text, one field per line; '#' starts a comment.
  /// Unknown keys and unparsable values throw InvalidConfig.
  static TrainConfig parse(std::string_view text);
  /// Settings tuned for the 512-item synthetic task at desk scale.
  static TrainConfig toy();
  static TrainConfig load(const std::filesystem::path& path);
  std::string serialize() const;
  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double lm_loss = 0.0;
  double infonce_loss = 0.0;
  double total = 0.0;
  double r_at_1 = 0.0;
  double r_at_10 = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::unique_ptr<ToyEncoder> encoder;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Held-out recall of composed queries against the image embeddings of every
/// catalog item.
struct HeldOutRecall {
  double r_at_1 = 0.0;
  double r_at_10 = 0.0;
};
HeldOutRecall evaluate_held_out(const ToyEncoder& encoder, const std::vector<SyntheticTriplet>& held_out);

TrainResult train_toy(const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_epoch = {});

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history);

}  // namespace compsearch::training
