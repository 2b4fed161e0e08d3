// Per-model aggregation, cross-model comparison and radar data.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evallm/annotation.hpp"
#include "evallm/level_score.hpp"
#include "evallm/pipeline.hpp"

namespace evallm {

inline constexpr int kReportFormatVersion = 1;

/// Radar axes, in display order.
inline constexpr LevelId kRadarDimensions[] = {LevelId::mark_correctness, LevelId::data_mapping,
                                               LevelId::syntax_correctness, LevelId::grammar_similarity,
                                               LevelId::code_similarity};

struct Accuracy {
  int correct = 0;
  int denominator = 0;

  std::optional<double> rate() const;
  friend bool operator==(const Accuracy&, const Accuracy&) = default;
};

struct LevelSummary {
  std::optional<double> mean_valid;  // over computed scores of valid instances
  std::optional<double> mean_all;    // over every computed score
  int computed = 0;
  int skipped = 0;
  int needs_human = 0;

  friend bool operator==(const LevelSummary&, const LevelSummary&) = default;
};

struct RadarPoint {
  LevelId dimension;
  std::optional<double> value;

  friend bool operator==(const RadarPoint&, const RadarPoint&) = default;
};

struct ModelReport {
  std::string experiment_id;
  std::string model_name;
  int n_instances = 0;
  int n_valid = 0;
  // Denominator n_valid; absent when there are no valid instances.
  std::optional<Accuracy> mark_accuracy;
  std::optional<Accuracy> x_axis_field_accuracy;
  std::optional<Accuracy> y_axis_field_accuracy;
  // Same numerators over n_instances; absent when there are no instances.
  std::optional<Accuracy> mark_accuracy_all;
  std::optional<Accuracy> x_axis_field_accuracy_all;
  std::optional<Accuracy> y_axis_field_accuracy_all;
  std::map<LevelId, LevelSummary> levels;
  std::map<std::string, int> error_label_counts;
  std::map<std::string, int> ground_truth_label_counts;
  std::vector<RadarPoint> radar;

  friend bool operator==(const ModelReport&, const ModelReport&) = default;
};

/// Throws std::invalid_argument when a result belongs to another experiment.
/// Only accepted consensus entries are counted.
ModelReport aggregate(const std::string& experiment_id, const std::string& model_name,
                      const std::vector<EvaluationResult>& results, const std::vector<ConsensusResult>& consensus);

/// True when the x (or y) channel's field key matched in the data mapping.
bool axis_field_matched(const EvaluationResult& result, Channel channel);

Json to_json(const ModelReport& report);
ModelReport model_report_from_json(const Json& json);

struct Comparison {
  std::vector<ModelReport> reports;  // sorted by model name, then experiment id
};

Comparison compare(std::vector<ModelReport> reports);

Json to_json(const Comparison& comparison);

std::string render_table(const ModelReport& report);
std::string render_table(const Comparison& comparison);

}  // namespace evallm
