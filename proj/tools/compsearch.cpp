#include "compsearch/dataset.hpp"
#include "compsearch/embedding_io.hpp"
#include "compsearch/error.hpp"
#include "compsearch/retrieval.hpp"
#include "compsearch/service/assistant.hpp"
#include "compsearch/service/chat.hpp"
#include "compsearch/service/config.hpp"
#include "compsearch/service/http.hpp"
#include "compsearch/tools/backends.hpp"
#include "compsearch/tools/remote.hpp"
#include "compsearch/training/params.hpp"
#include "compsearch/training/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace compsearch;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != part.size() || v == 0) throw Error(Errc::InvalidConfig, "bad k value '" + part + "'");
    ks.push_back(v);
  }
  if (ks.empty()) throw Error(Errc::InvalidConfig, "no k values given");
  return ks;
}

int cmd_serve(const fs::path& config_path, int port_override) {
  auto config = ServerConfig::load(config_path);
  if (port_override >= 0) config.port = port_override;
  SearchAssistant assistant(config, make_backends(config));
  run_server(assistant, [&](int port) {
    std::cout << "listening on http://" << config.host << ":" << port << std::endl;
  });
  return 0;
}

int cmd_chat(const fs::path& script, ChatOptions options) {
  const auto report = run_scripted_chat(script, options, std::cout);
  return report.passed() ? 0 : 1;
}

int cmd_index_build(const fs::path& gallery, const fs::path& out, const std::string& embedder,
                    const std::string& embed_url) {
  const auto records = load_gallery_records(gallery);
  std::vector<GalleryItem> items;
  if (embedder == "oracle") {
    items = AttributeOracleEmbedder(records).build_gallery(records);
  } else {
    RemoteEmbedder remote(embed_url);
    for (const auto& r : records) {
      if (!r.image_path) throw Error(Errc::InvalidConfig, "record " + r.id + " has no image_path");
      items.push_back({r.id, remote.embed_image(read_file(*r.image_path)), r.description, r.image_path, r.attributes});
    }
  }
  const auto index = Index::build(items);
  save_gallery(out, items);
  std::cout << "indexed " << index.size() << " items of dimension " << index.dim() << " into " << out.string() << "\n";
  return 0;
}

int cmd_eval_recall(const fs::path& index_path, const fs::path& triplets_path, const std::string& k_text,
                    const std::optional<fs::path>& queries_path, const std::optional<fs::path>& records_path,
                    bool exclude_reference) {
  const auto ks = parse_k_list(k_text);
  const auto index = Index::build(load_gallery(index_path));
  const auto triplets = load_triplets(triplets_path);
  std::vector<Embedding> queries;
  if (queries_path) {
    queries = read_embeddings(*queries_path);
    if (queries.size() != triplets.size()) {
      throw Error(Errc::ShapeMismatch, "query embeddings and triplets differ in count");
    }
  } else {
    const auto records = load_gallery_records(records_path ? *records_path : index_path);
    AttributeOracleEmbedder oracle(records);
    for (const auto& t : triplets) {
      const auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.id == t.ref_id; });
      if (it == records.end()) throw Error(Errc::MissingGroundTruth, "reference " + t.ref_id + " not in gallery");
      queries.push_back(oracle.embed_composed(AttributeOracleEmbedder::image_key(*it), t.modifying_text));
    }
  }
  const auto max_k = *std::max_element(ks.begin(), ks.end());
  std::vector<SearchResult> results;
  std::map<std::string, std::string> truth;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    std::set<std::string> exclude;
    if (exclude_reference) exclude.insert(triplets[i].ref_id);
    auto r = index.search(queries[i], max_k, exclude);
    r.query_id = "q" + std::to_string(i);
    truth[*r.query_id] = triplets[i].trg_id;
    results.push_back(std::move(r));
  }
  double sum = 0.0;
  std::cout << std::fixed << std::setprecision(4);
  for (const auto k : ks) {
    const auto r = recall_at_k(results, truth, k);
    sum += r;
    std::cout << "R@" << k << " " << r << "\n";
  }
  std::cout << "average " << sum / static_cast<double>(ks.size()) << "\n";
  return 0;
}

int cmd_train_toy(const std::optional<fs::path>& config_path, std::uint64_t seed, const fs::path& out) {
  const auto config = config_path ? training::TrainConfig::load(*config_path) : training::TrainConfig::toy();
  fs::create_directories(out);
  std::ofstream csv(out / "metrics.csv");
  if (!csv) throw Error(Errc::Io, "cannot write " + (out / "metrics.csv").string());
  training::write_metrics_csv(csv, {});
  const auto result = training::train_toy(config, seed, [&](const training::EpochMetrics& m) {
    csv << m.epoch << ',' << m.lm_loss << ',' << m.infonce_loss << ',' << m.total << ',' << m.r_at_1 << ','
        << m.r_at_10 << '\n';
    csv.flush();
    std::cout << "epoch " << m.epoch << " lm " << m.lm_loss << " infonce " << m.infonce_loss << " R@1 " << m.r_at_1
              << " R@10 " << m.r_at_10 << std::endl;
  });
  training::save_checkpoint(out / "model.csk", result.encoder->parameters());
  std::ofstream(out / "config.conf") << config.serialize();
  const auto& last = result.history.back();
  std::cout << "finished " << result.history.size() << " epochs in " << result.seconds << " s, R@1 " << last.r_at_1
            << " R@10 " << last.r_at_10 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed image search assistant"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  fs::path serve_config;
  int port_override = -1;
  serve->add_option("--config", serve_config, "key = value configuration file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port_override, "Override the configured port (0 picks a free one)");

  auto* chat = app.add_subcommand("chat", "Replay a scripted conversation in the terminal");
  fs::path chat_script;
  ChatOptions chat_options;
  std::string chat_mode = "function_call";
  std::string chat_transcript;
  chat->add_option("--scripted", chat_script, "JSON-lines conversation script")->required()->check(CLI::ExistingFile);
  chat->add_option("--gallery", chat_options.gallery, "Gallery JSON-lines with attributes")
      ->required()
      ->check(CLI::ExistingFile);
  chat->add_option("--mode", chat_mode, "function_call or langchain");
  chat->add_option("--k", chat_options.k, "Results per search");
  chat->add_option("--budget", chat_options.token_budget, "Prompt token budget");
  chat->add_option("--data-dir", chat_options.data_dir, "Session storage folder");
  chat->add_option("--transcript-out", chat_transcript, "Write the final memory as JSON lines");

  auto* index_cmd = app.add_subcommand("index", "Gallery index tools");
  index_cmd->require_subcommand(1);
  auto* build = index_cmd->add_subcommand("build", "Embed a gallery and write it with its CSE1 file");
  fs::path build_gallery, build_out;
  std::string build_embedder = "oracle";
  std::string build_url;
  build->add_option("--gallery", build_gallery, "Gallery records (JSON lines)")->required()->check(CLI::ExistingFile);
  build->add_option("--out", build_out, "Output gallery path")->required();
  build->add_option("--embedder", build_embedder, "oracle or remote")->check(CLI::IsMember({"oracle", "remote"}));
  build->add_option("--embed-url", build_url, "Remote embedder base URL")->envname("COMPSEARCH_EMBED_URL");

  auto* eval = app.add_subcommand("eval", "Evaluation tools");
  eval->require_subcommand(1);
  auto* recall = eval->add_subcommand("recall", "Recall@k of composed queries");
  fs::path eval_index, eval_triplets;
  std::string eval_k = "10,50";
  std::optional<fs::path> eval_queries, eval_records;
  bool exclude_reference = false;
  recall->add_option("--index", eval_index, "Gallery with sibling CSE1 file")->required()->check(CLI::ExistingFile);
  recall->add_option("--triplets", eval_triplets, "Triplets (JSON lines)")->required()->check(CLI::ExistingFile);
  recall->add_option("--k", eval_k, "Comma-separated cutoffs");
  recall->add_option("--queries", eval_queries, "CSE1 query embeddings, one row per triplet");
  recall->add_option("--records", eval_records, "Gallery records for the oracle embedder (default: --index)");
  recall->add_flag("--exclude-reference", exclude_reference, "Drop the reference item from its own ranking");

  auto* train = app.add_subcommand("train-toy", "Train the toy composed encoder");
  std::optional<fs::path> train_config;
  std::uint64_t train_seed = 0;
  fs::path train_out;
  train->add_option("--config", train_config, "key = value training configuration")->check(CLI::ExistingFile);
  train->add_option("--seed", train_seed, "Random seed");
  train->add_option("--out", train_out, "Output folder")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(serve_config, port_override);
    if (*chat) {
      chat_options.mode = syntax_mode_from_name(chat_mode);
      if (!chat_transcript.empty()) chat_options.transcript_out = chat_transcript;
      return cmd_chat(chat_script, chat_options);
    }
    if (*build) return cmd_index_build(build_gallery, build_out, build_embedder, build_url);
    if (*recall) {
      return cmd_eval_recall(eval_index, eval_triplets, eval_k, eval_queries, eval_records, exclude_reference);
    }
    if (*train) return cmd_train_toy(train_config, train_seed, train_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
