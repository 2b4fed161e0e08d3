#include <gtest/gtest.h>

#include "evallm/report.hpp"
#include "test_support.hpp"

using namespace evallm;
using testing_support::fixtures;
using testing_support::load_json;

namespace {

struct Recount {
  int instances = 0, valid = 0, mark = 0, x = 0, y = 0;
};

// Counts straight from the serialized results.
Recount recount(const std::vector<EvaluationResult>& results) {
  Recount r;
  for (const auto& result : results) {
    const Json j = to_json(result);
    ++r.instances;
    const Json& syntax = j["scores"]["syntax_correctness"];
    if (syntax["status"] != "computed" || syntax["value"] != 100.0) continue;
    ++r.valid;
    if (j["scores"]["mark_correctness"]["value"] == 100.0) ++r.mark;
    for (const auto& m : j["scores"]["data_mapping"]["details"]["per_channel"]) {
      if (m["property"] != "field" || !m["matched"].get<bool>()) continue;
      if (m["channel"] == "x") ++r.x;
      if (m["channel"] == "y") ++r.y;
    }
  }
  return r;
}

std::vector<EvaluationResult> evaluate_fixture(const char* file, ExperimentBundle* out = nullptr) {
  auto corpus = load_corpus(fixtures() / "nvbench50.json").corpus;
  auto bundle = *parse_experiment_bundle(load_json(fixtures() / file)).bundle;
  if (out) *out = bundle;
  return evaluate_experiment(corpus, bundle.records, bundle.experiment_id, {}, 4).results;
}

}  // namespace

TEST(Report, GptFixtureCounts) {
  ExperimentBundle bundle;
  auto results = evaluate_fixture("gpt35_zero_shot.json", &bundle);
  auto report = aggregate(bundle.experiment_id, bundle.model_name, results, {});
  EXPECT_EQ(report.n_instances, 50);
  EXPECT_EQ(report.n_valid, 48);
  EXPECT_EQ(report.mark_accuracy, (Accuracy{43, 48}));
  EXPECT_EQ(report.x_axis_field_accuracy, (Accuracy{33, 48}));
  EXPECT_EQ(report.y_axis_field_accuracy, (Accuracy{25, 48}));
  EXPECT_EQ(report.mark_accuracy_all, (Accuracy{43, 50}));

  auto r = recount(results);
  EXPECT_EQ(report.n_valid, r.valid);
  EXPECT_EQ(report.mark_accuracy->correct, r.mark);
  EXPECT_EQ(report.x_axis_field_accuracy->correct, r.x);
  EXPECT_EQ(report.y_axis_field_accuracy->correct, r.y);
}

TEST(Report, LlamaFixtureCounts) {
  ExperimentBundle bundle;
  auto results = evaluate_fixture("llama2_70b_zero_shot.json", &bundle);
  auto report = aggregate(bundle.experiment_id, bundle.model_name, results, {});
  EXPECT_EQ(report.n_valid, 34);
  EXPECT_EQ(report.mark_accuracy, (Accuracy{29, 34}));
  auto r = recount(results);
  EXPECT_EQ(report.x_axis_field_accuracy->correct, r.x);
  EXPECT_EQ(report.y_axis_field_accuracy->correct, r.y);
}

TEST(Report, LevelSummariesAndRadar) {
  ExperimentBundle bundle;
  auto results = evaluate_fixture("gpt35_zero_shot.json", &bundle);
  auto report = aggregate(bundle.experiment_id, bundle.model_name, results, {});
  const auto& syntax = report.levels.at(LevelId::syntax_correctness);
  EXPECT_EQ(syntax.computed, 50);
  EXPECT_DOUBLE_EQ(*syntax.mean_all, 100.0 * 48 / 50);
  const auto& mark = report.levels.at(LevelId::mark_correctness);
  EXPECT_EQ(mark.computed, 48);
  EXPECT_EQ(mark.skipped, 2);
  EXPECT_DOUBLE_EQ(*mark.mean_valid, 100.0 * 43 / 48);
  EXPECT_EQ(report.levels.at(LevelId::color_mapping).needs_human, 50);

  ASSERT_EQ(report.radar.size(), std::size(kRadarDimensions));
  EXPECT_EQ(report.radar[0].dimension, LevelId::mark_correctness);
  EXPECT_DOUBLE_EQ(*report.radar[0].value, 100.0 * 43 / 48);
  EXPECT_EQ(report.radar[2].dimension, LevelId::syntax_correctness);
  EXPECT_DOUBLE_EQ(*report.radar[2].value, 96.0);
}

TEST(Report, EmptyResults) {
  auto report = aggregate("e", "m", {}, {});
  EXPECT_EQ(report.n_instances, 0);
  EXPECT_FALSE(report.mark_accuracy);
  EXPECT_FALSE(report.mark_accuracy_all);
  for (const auto& point : report.radar) EXPECT_FALSE(point.value);
  EXPECT_EQ(model_report_from_json(to_json(report)), report);
}

TEST(Report, MixedExperimentsRejected) {
  auto results = evaluate_fixture("gpt35_zero_shot.json");
  results[5].experiment_id = "other";
  EXPECT_THROW(aggregate("gpt35-zero-shot", "m", results, {}), std::invalid_argument);
}

TEST(Report, OnlyAcceptedConsensusCounted) {
  std::vector<ConsensusResult> consensus = {
      {"nv001", "missed-ordering-error", AnnotationTarget::generated, 2, true},
      {"nv002", "missed-ordering-error", AnnotationTarget::generated, 3, true},
      {"nv003", "visualization-hallucination", AnnotationTarget::generated, 1, false},
      {"nv004", "visualization-hallucination", AnnotationTarget::ground_truth, 2, true},
  };
  auto report = aggregate("e", "m", {}, consensus);
  EXPECT_EQ(report.error_label_counts, (std::map<std::string, int>{{"missed-ordering-error", 2}}));
  EXPECT_EQ(report.ground_truth_label_counts, (std::map<std::string, int>{{"visualization-hallucination", 1}}));
}

TEST(Report, JsonRoundTrip) {
  ExperimentBundle bundle;
  auto results = evaluate_fixture("gpt35_zero_shot.json", &bundle);
  auto report = aggregate(bundle.experiment_id, bundle.model_name, results, {});
  const Json json = to_json(report);
  EXPECT_EQ(json["format_version"], 1);
  EXPECT_EQ(json["mark_accuracy"]["correct"], 43);
  auto again = model_report_from_json(json);
  EXPECT_EQ(canonical_json(to_json(again)), canonical_json(json));
}

TEST(Report, CompareOrdersByModelThenExperiment) {
  ModelReport a, b, c;
  a.model_name = "zeta";
  a.experiment_id = "1";
  b.model_name = "alpha";
  b.experiment_id = "9";
  c.model_name = "alpha";
  c.experiment_id = "2";
  auto comparison = compare({a, b, c});
  ASSERT_EQ(comparison.reports.size(), 3u);
  EXPECT_EQ(comparison.reports[0].experiment_id, "2");
  EXPECT_EQ(comparison.reports[1].experiment_id, "9");
  EXPECT_EQ(comparison.reports[2].model_name, "zeta");
  const Json json = to_json(comparison);
  EXPECT_EQ(json["rows"].size(), 3u);
  EXPECT_EQ(json["dimensions"].size(), std::size(kRadarDimensions));
  EXPECT_EQ(to_json(compare({c, a, b})), json);
}

TEST(Report, TableMentionsCounts) {
  ExperimentBundle bundle;
  auto results = evaluate_fixture("gpt35_zero_shot.json", &bundle);
  auto table = render_table(aggregate(bundle.experiment_id, bundle.model_name, results, {}));
  EXPECT_NE(table.find("43/48"), std::string::npos);
  EXPECT_NE(table.find("33/48"), std::string::npos);
  EXPECT_NE(table.find("25/48"), std::string::npos);
}
