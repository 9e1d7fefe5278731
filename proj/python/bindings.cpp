#include "compsearch/embedding.hpp"
#include "compsearch/error.hpp"
#include "compsearch/prompt/parser.hpp"
#include "compsearch/prompt/session.hpp"
#include "compsearch/retrieval.hpp"
#include "compsearch/service/chat.hpp"
#include "compsearch/training/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace compsearch;

namespace {

Embedding to_embedding(const Eigen::VectorXd& v) { return Embedding::from_unit(v); }

class PyIndex {
 public:
  PyIndex(const std::vector<std::string>& ids, const Eigen::MatrixXd& rows,
          const std::optional<std::vector<std::string>>& descriptions) {
    if (static_cast<std::size_t>(rows.rows()) != ids.size()) {
      throw Error(Errc::ShapeMismatch, "one embedding row per id is required");
    }
    if (descriptions && descriptions->size() != ids.size()) {
      throw Error(Errc::ShapeMismatch, "one description per id is required");
    }
    std::vector<GalleryItem> items;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      items.push_back({ids[i], to_embedding(rows.row(static_cast<Eigen::Index>(i)).transpose()),
                       descriptions ? (*descriptions)[i] : std::string(), std::nullopt, {}});
    }
    index_ = std::make_unique<Index>(Index::build(std::move(items)));
  }

  std::vector<std::pair<std::string, double>> search(const Eigen::VectorXd& query, std::size_t k,
                                                     const std::set<std::string>& exclude) const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& r : index_->search(to_embedding(query), k, exclude).ranked) out.emplace_back(r.id, r.score);
    return out;
  }

  std::size_t size() const { return index_->size(); }
  std::size_t dim() const { return index_->dim(); }

 private:
  std::unique_ptr<Index> index_;
};

py::dict parsed_to_dict(const ParsedOutput& p) {
  py::dict d;
  d["thought"] = p.thought ? py::cast(*p.thought) : py::none();
  d["action"] = p.action ? py::cast(std::make_pair(p.action->tool_name, p.action->args)) : py::none();
  d["final_reply"] = p.final_reply ? py::cast(*p.final_reply) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Composed image search core";

  auto& error_type = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error_type.ptr());

  py::enum_<SyntaxMode>(m, "SyntaxMode")
      .value("LANGCHAIN", SyntaxMode::Langchain)
      .value("FUNCTION_CALL", SyntaxMode::FunctionCall);

  m.def("normalize", [](const Eigen::VectorXd& v) { return Eigen::VectorXd(normalize(v).values()); }, py::arg("v"),
        "Unit-length copy of v.");
  m.def("cosine_distance",
        [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return cosine_distance(normalize(a), normalize(b)); },
        py::arg("a"), py::arg("b"));

  py::class_<PyIndex>(m, "Index")
      .def(py::init<const std::vector<std::string>&, const Eigen::MatrixXd&,
                    const std::optional<std::vector<std::string>>&>(),
           py::arg("ids"), py::arg("embeddings"), py::arg("descriptions") = py::none(),
           "Exact index over unit-norm rows.")
      .def("search", &PyIndex::search, py::arg("query"), py::arg("k"), py::arg("exclude") = std::set<std::string>{},
           "Top-k (id, score) pairs, ties by ascending id.")
      .def_property_readonly("size", &PyIndex::size)
      .def_property_readonly("dim", &PyIndex::dim);

  m.def(
      "recall_at_k",
      [](const std::vector<std::vector<std::string>>& rankings, const std::vector<std::string>& targets, std::size_t k) {
        if (rankings.size() != targets.size()) throw Error(Errc::ShapeMismatch, "one target per ranking is required");
        std::vector<SearchResult> results;
        std::map<std::string, std::string> truth;
        for (std::size_t i = 0; i < rankings.size(); ++i) {
          SearchResult r;
          for (const auto& id : rankings[i]) r.ranked.push_back({id, 0.0});
          r.query_id = std::to_string(i);
          truth[*r.query_id] = targets[i];
          results.push_back(std::move(r));
        }
        return recall_at_k(results, truth, k);
      },
      py::arg("rankings"), py::arg("targets"), py::arg("k"));

  m.def("build_query_text", &build_query_text, py::arg("original"), py::arg("target"));
  m.def(
      "parse_query_text",
      [](const std::string& text) -> std::optional<std::pair<std::string, std::string>> {
        const auto e = parse_query_text(text);
        if (!e) return std::nullopt;
        return std::make_pair(e->original, e->target);
      },
      py::arg("text"));

  m.def(
      "parse_llm_output", [](const std::string& text, SyntaxMode mode) { return parsed_to_dict(parse_llm_output(text, mode)); },
      py::arg("text"), py::arg("mode"));
  m.def(
      "format_tool_call",
      [](const std::string& name, const std::vector<std::string>& args, SyntaxMode mode) {
        return format_tool_call(ToolCall{name, args}, mode);
      },
      py::arg("name"), py::arg("args"), py::arg("mode"));
  m.def("estimate_tokens", &estimate_tokens, py::arg("text"));

  m.def(
      "run_scripted_chat",
      [](const std::filesystem::path& script, const std::filesystem::path& gallery, const std::string& mode,
         std::size_t k, const std::optional<std::filesystem::path>& data_dir) {
        ChatOptions options;
        options.gallery = gallery;
        options.mode = syntax_mode_from_name(mode);
        options.k = k;
        if (data_dir) options.data_dir = *data_dir;
        std::ostringstream out;
        ChatReport report;
        {
          py::gil_scoped_release release;
          report = run_scripted_chat(script, options, out);
        }
        py::dict d;
        d["passed"] = report.passed();
        d["session_id"] = report.session_id;
        d["events"] = report.events;
        d["checks"] = report.checks;
        d["failures"] = report.failures;
        d["output"] = out.str();
        return d;
      },
      py::arg("script"), py::arg("gallery"), py::arg("mode") = "function_call", py::arg("k") = 10,
      py::arg("data_dir") = py::none());

  m.def(
      "train_toy",
      [](const std::string& config_text, std::uint64_t seed) {
        const auto config = training::TrainConfig::parse(config_text);
        training::TrainResult result;
        {
          py::gil_scoped_release release;
          result = training::train_toy(config, seed);
        }
        py::list history;
        for (const auto& h : result.history) {
          py::dict d;
          d["epoch"] = h.epoch;
          d["lm_loss"] = h.lm_loss;
          d["infonce_loss"] = h.infonce_loss;
          d["total"] = h.total;
          d["r_at_1"] = h.r_at_1;
          d["r_at_10"] = h.r_at_10;
          history.append(d);
        }
        return history;
      },
      py::arg("config"), py::arg("seed") = 0, "Trains the toy encoder; returns per-epoch metrics.");
}
