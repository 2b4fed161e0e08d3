#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "evallm/cli.hpp"
#include "evallm/image_similarity.hpp"
#include "evallm/metrics_code.hpp"
#include "evallm/metrics_representation.hpp"
#include "evallm/pipeline.hpp"
#include "evallm/report.hpp"

namespace py = pybind11;
using namespace evallm;

namespace {

Json outcome_json(const ExtractionOutcome& outcome) {
  Json out = {{"status", to_string(outcome.status)}, {"warnings", outcome.warnings}};
  if (outcome.spec) {
    out["spec"] = outcome.spec->raw_json;
    out["mark"] = outcome.spec->mark.name();
  } else {
    out["spec"] = nullptr;
  }
  if (outcome.source_span) out["source_span"] = {outcome.source_span->begin, outcome.source_span->end};
  return out;
}

VisSpec require_spec(const std::string& text, const char* which) {
  auto outcome = normalize_spec(Json::parse(text));
  if (!outcome.spec) throw py::value_error(std::string(which) + " spec is invalid: " + std::string(to_string(outcome.status)));
  return *outcome.spec;
}

std::string metrics(const std::string& gt_text, const std::string& gen_text) {
  const auto gt = require_spec(gt_text, "ground truth");
  const auto gen = require_spec(gen_text, "generated");
  Json out = Json::object();
  for (const auto& score : {code_similarity(gt, gen), grammar_similarity(gt, gen), data_mapping_score(data_mapping(gt, gen)),
                            mark_correctness(gt, gen), axes_quality(gt, gen)}) {
    out[std::string(to_string(score.level))] = to_json(score);
  }
  return out.dump();
}

std::string evaluate(const std::string& corpus_path, const std::string& bundle_text, int parallelism) {
  const auto load = load_corpus(corpus_path);
  auto parsed = parse_experiment_bundle(Json::parse(bundle_text));
  if (!parsed.bundle) throw py::value_error("experiment bundle is invalid");
  const auto& bundle = *parsed.bundle;
  const auto evaluation =
      evaluate_experiment(load.corpus, bundle.records, bundle.experiment_id, {}, parallelism, {load.corpus.root, {}});
  const auto report = aggregate(bundle.experiment_id, bundle.model_name, evaluation.results, {});
  Json results = Json::array();
  for (const auto& result : evaluation.results) results.push_back(to_json(result));
  return Json{{"results", results}, {"report", to_json(report)}}.dump();
}

py::tuple cli(const std::vector<std::string>& args, const std::string& input) {
  std::istringstream in(input);
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_cli(args, in, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_evallm, m) {
  m.doc() = "Native core of the evallm benchmarking engine.";
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const CorpusError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
  m.def("extract_spec", [](const std::string& text) { return outcome_json(extract_spec(text)).dump(); },
        py::arg("text"));
  m.def("normalize_mark", [](const std::string& raw) { return normalize_mark(raw).mark.name(); }, py::arg("raw"));
  m.def("canonical_json", [](const std::string& text) { return canonical_json(Json::parse(text)); }, py::arg("text"));
  m.def("metrics", &metrics, py::arg("ground_truth"), py::arg("generated"));
  m.def("ssim_files",
        [](const std::string& gt, const std::string& gen) { return to_json(ssim_score(load_gray(gt), load_gray(gen))).dump(); },
        py::arg("ground_truth"), py::arg("generated"));
  m.def("evaluate", &evaluate, py::arg("corpus"), py::arg("bundle"), py::arg("parallelism") = 1);
  m.def("run_cli", &cli, py::arg("args"), py::arg("input") = "");
}
