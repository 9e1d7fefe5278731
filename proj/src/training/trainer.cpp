#include "compsearch/training/trainer.hpp"

#include "compsearch/error.hpp"
#include "compsearch/kv_config.hpp"
#include "compsearch/retrieval.hpp"
#include "compsearch/training/adamw.hpp"

#include <algorithm>
#include <cmath>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace compsearch::training {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  std::string s(v);
  try {
    std::size_t used = 0;
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(s, &used);
    } else if constexpr (std::is_signed_v<T>) {
      out = static_cast<T>(std::stoll(s, &used));
    } else {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, "bad value for " + std::string(key) + ": '" + s + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(Errc::InvalidConfig, "bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

// Every config field, by key, as a reader and a writer.
struct Field {
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    const auto real = [&t](std::string key, auto getter) {
      t.push_back({key, Field{[getter, key](TrainConfig& c, std::string_view v) {
                                getter(c) = parse_number<double>(key, v);
                              },
                              [getter](const TrainConfig& c) {
                                auto copy = c;
                                return fmt(getter(copy));
                              }}});
    };
    const auto count = [&t](std::string key, auto getter) {
      t.push_back({key, Field{[getter, key](TrainConfig& c, std::string_view v) {
                                getter(c) = parse_number<std::size_t>(key, v);
                              },
                              [getter](const TrainConfig& c) {
                                auto copy = c;
                                return std::to_string(getter(copy));
                              }}});
    };
    real("omega", [](TrainConfig& c) -> double& { return c.loss.omega; });
    count("batch_size", [](TrainConfig& c) -> std::size_t& { return c.loss.batch_size; });
    count("memory_capacity", [](TrainConfig& c) -> std::size_t& { return c.loss.memory_capacity; });
    count("vocab_size", [](TrainConfig& c) -> std::size_t& { return c.loss.vocab_size; });
    real("max_log_tau", [](TrainConfig& c) -> double& { return c.max_log_tau; });
    real("learning_rate", [](TrainConfig& c) -> double& { return c.learning_rate; });
    real("weight_decay", [](TrainConfig& c) -> double& { return c.weight_decay; });
    t.push_back({"warmup_steps", Field{[](TrainConfig& c, std::string_view v) {
                                         c.warmup_steps = parse_number<std::int64_t>("warmup_steps", v);
                                       },
                                       [](const TrainConfig& c) { return std::to_string(c.warmup_steps); }}});
    real("beta1", [](TrainConfig& c) -> double& { return c.beta1; });
    real("beta2", [](TrainConfig& c) -> double& { return c.beta2; });
    real("adam_eps", [](TrainConfig& c) -> double& { return c.adam_eps; });
    t.push_back({"bidirectional", Field{[](TrainConfig& c, std::string_view v) {
                                          c.bidirectional = parse_bool("bidirectional", v);
                                        },
                                        [](const TrainConfig& c) { return std::string(c.bidirectional ? "true" : "false"); }}});
    count("epochs", [](TrainConfig& c) -> std::size_t& { return c.epochs; });
    count("slots", [](TrainConfig& c) -> std::size_t& { return c.slots; });
    count("values_per_slot", [](TrainConfig& c) -> std::size_t& { return c.values_per_slot; });
    real("held_out_fraction", [](TrainConfig& c) -> double& { return c.held_out_fraction; });
    count("triplets_per_epoch", [](TrainConfig& c) -> std::size_t& { return c.triplets_per_epoch; });
    real("stop_r_at_1", [](TrainConfig& c) -> double& { return c.stop_r_at_1; });
    real("stop_r_at_10", [](TrainConfig& c) -> double& { return c.stop_r_at_10; });
    count("feature_dim", [](TrainConfig& c) -> std::size_t& { return c.model.feature_dim; });
    count("hidden_dim", [](TrainConfig& c) -> std::size_t& { return c.model.hidden_dim; });
    count("lora_rank", [](TrainConfig& c) -> std::size_t& { return c.model.lora_rank; });
    real("lora_alpha", [](TrainConfig& c) -> double& { return c.model.lora_alpha; });
    real("lora_dropout", [](TrainConfig& c) -> double& { return c.model.lora_dropout; });
    count("head_hidden", [](TrainConfig& c) -> std::size_t& { return c.model.head_hidden; });
    count("embed_dim", [](TrainConfig& c) -> std::size_t& { return c.model.embed_dim; });
    real("init_log_tau", [](TrainConfig& c) -> double& { return c.model.init_log_tau; });
    return t;
  }();
  return table;
}

}  // namespace

TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig config;
  const auto& table = fields();
  for (const auto& kv : parse_key_values(text)) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == kv.key; });
    if (it == table.end()) throw Error(Errc::InvalidConfig, "unknown key '" + kv.key + "'");
    it->second.set(config, kv.value);
  }
  config.validate();
  return config;
}

TrainConfig TrainConfig::toy() {
  TrainConfig c;
  c.loss.memory_capacity = 512;
  c.learning_rate = 1e-3;
  c.weight_decay = 1e-4;
  c.warmup_steps = 100;
  c.model.lora_dropout = 0.1;
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string TrainConfig::serialize() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

void TrainConfig::validate() const {
  const auto fail = [](const std::string& m) { throw Error(Errc::InvalidConfig, m); };
  if (!(loss.omega >= 0.0) || !std::isfinite(loss.omega)) fail("omega must be finite and >= 0");
  if (loss.batch_size < 2) fail("batch_size must be >= 2");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (warmup_steps < 0) fail("warmup_steps must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
  if (!std::isfinite(max_log_tau)) fail("max_log_tau must be finite");
  if (epochs == 0) fail("epochs must be >= 1");
  if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0)) fail("held_out_fraction must be in (0, 1)");
  if (!(model.lora_dropout >= 0.0 && model.lora_dropout < 1.0)) fail("lora_dropout must be in [0, 1)");
  if (loss.vocab_size != 0 && loss.vocab_size != slots * values_per_slot) {
    fail("vocab_size must be 0 or slots * values_per_slot");
  }
}

HeldOutRecall evaluate_held_out(const ToyEncoder& encoder, const std::vector<SyntheticTriplet>& held_out) {
  const auto& catalog = encoder.catalog();
  std::vector<std::size_t> items(catalog.item_count());
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
  auto gallery_embeddings = encoder.embed_all(items, std::vector<std::string>(items.size()));
  std::vector<GalleryItem> gallery;
  gallery.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    gallery.push_back(GalleryItem{catalog.item_id(i), std::move(gallery_embeddings[i]), catalog.caption(i), {}, {}});
  }
  const Index index = Index::build(std::move(gallery));

  std::vector<std::size_t> refs;
  std::vector<std::string> texts;
  for (const auto& t : held_out) {
    refs.push_back(t.ref);
    texts.push_back(t.text);
  }
  const auto queries = encoder.embed_all(refs, texts);
  std::vector<SearchResult> results;
  std::map<std::string, std::string> truth;
  for (std::size_t q = 0; q < held_out.size(); ++q) {
    auto r = index.search(queries[q], 10);
    r.query_id = "q" + std::to_string(q);
    truth[*r.query_id] = catalog.item_id(held_out[q].trg);
    results.push_back(std::move(r));
  }
  return {recall_at_k(results, truth, 1), recall_at_k(results, truth, 10)};
}

TrainResult train_toy(const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_epoch) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  const SyntheticCatalog catalog(config.slots, config.values_per_slot);
  const auto split = make_synthetic_triplets(catalog, config.held_out_fraction, rng);
  if (split.train.size() < config.loss.batch_size) throw Error(Errc::InvalidConfig, "fewer training triplets than one batch");

  TrainResult result;
  result.encoder = std::make_unique<ToyEncoder>(catalog, config.model, rng);
  ToyEncoder& encoder = *result.encoder;
  LossConfig loss_config = config.loss;
  loss_config.vocab_size = catalog.vocab_size();

  AdamW optimizer(AdamWConfig{config.beta1, config.beta2, config.adam_eps});
  XbmBuffer memory(config.loss.memory_capacity, config.model.embed_dim);
  const InfoNceOptions nce_options{config.bidirectional};

  std::vector<std::size_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t per_epoch =
      config.triplets_per_epoch == 0 ? order.size() : std::min(config.triplets_per_epoch, order.size());

  const std::size_t tau_block = encoder.parameters().index_of("temperature.log_tau");
  std::vector<Eigen::MatrixXd> grads;
  std::vector<SyntheticTriplet> batch;
  Eigen::MatrixXd target_embeddings;
  std::int64_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics m;
    m.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t at = 0; at + config.loss.batch_size <= per_epoch; at += config.loss.batch_size) {
      batch.clear();
      std::vector<std::string> keys;
      for (std::size_t i = at; i < at + config.loss.batch_size; ++i) {
        batch.push_back(split.train[order[i]]);
        keys.push_back(catalog.item_id(batch.back().trg));
      }
      const auto loss = encoder.forward_backward(batch, memory, loss_config, &rng, &grads, &target_embeddings,
                                                 nce_options);
      optimizer.step(encoder.parameters(), grads, warmup_lr(step + 1, config.learning_rate, config.warmup_steps),
                     config.weight_decay);
      ++step;
      auto& log_tau = encoder.parameters()[tau_block].value(0, 0);
      log_tau = std::min(log_tau, config.max_log_tau);
      memory.enqueue(target_embeddings, keys);
      m.lm_loss += loss.lm;
      m.infonce_loss += loss.infonce;
      m.total += loss.total;
      ++batches;
    }
    if (batches > 0) {
      m.lm_loss /= static_cast<double>(batches);
      m.infonce_loss /= static_cast<double>(batches);
      m.total /= static_cast<double>(batches);
    }
    const auto recall = evaluate_held_out(encoder, split.held_out);
    m.r_at_1 = recall.r_at_1;
    m.r_at_10 = recall.r_at_10;
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
    const bool stop_enabled = config.stop_r_at_1 > 0.0 || config.stop_r_at_10 > 0.0;
    if (stop_enabled && m.r_at_1 >= config.stop_r_at_1 && m.r_at_10 >= config.stop_r_at_10) break;
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history) {
  out << "epoch,lm_loss,infonce_loss,total,r_at_1,r_at_10\n";
  out << std::setprecision(10);
  for (const auto& m : history) {
    out << m.epoch << ',' << m.lm_loss << ',' << m.infonce_loss << ',' << m.total << ',' << m.r_at_1 << ','
        << m.r_at_10 << '\n';
  }
}

}  // namespace compsearch::training
