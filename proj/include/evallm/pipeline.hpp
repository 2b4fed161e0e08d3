// Per-instance evaluation across the stack, and experiment-level batching.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evallm/corpus.hpp"
#include "evallm/generation.hpp"
#include "evallm/level_score.hpp"
#include "evallm/metrics_code.hpp"

namespace evallm {

inline constexpr int kPipelineConfigVersion = 1;

struct PipelineConfig {
  std::set<LevelId> levels{std::begin(kAllLevels), std::end(kAllLevels)};
  std::optional<RendererHook> renderer;
  bool allow_axis_swap = false;
  EffortConfig effort;
  int quorum = 2;
  /// Per-level wall-clock timings make results run-dependent, so they are
  /// only serialized when asked for.
  bool record_timings = false;
};

Json to_json(const PipelineConfig& config);
/// Throws ConfigError on malformed documents.
PipelineConfig pipeline_config_from_json(const Json& json);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Roots that relative image paths resolve against.
struct EvaluationContext {
  std::filesystem::path corpus_root;
  std::filesystem::path bundle_root;
};

struct EvaluationResult {
  std::string instance_id;
  std::string experiment_id;
  std::map<LevelId, LevelScore> scores;
  std::optional<VisSpec> generated_spec;
  std::map<LevelId, double> timings_ms;

  const LevelScore* score(LevelId level) const;
};

Json to_json(const EvaluationResult& result);
EvaluationResult evaluation_result_from_json(const Json& json);

/// Evaluates bottom-up in stack order. A failed syntax check skips every
/// other automatic level except effort; human levels are always needs_human.
EvaluationResult evaluate_instance(const BenchmarkInstance& instance, const GenerationRecord& record,
                                   const std::string& experiment_id, const PipelineConfig& config,
                                   const EvaluationContext& context = {});

struct EvaluationIssue {
  std::string instance_id;
  std::string code;  // orphan_record | duplicate_record
  std::string message;
};

struct ExperimentEvaluation {
  std::vector<EvaluationResult> results;  // corpus order
  std::vector<EvaluationIssue> issues;
};

ExperimentEvaluation evaluate_experiment(const Corpus& corpus, const std::vector<GenerationRecord>& records,
                                         const std::string& experiment_id, const PipelineConfig& config,
                                         int parallelism, const EvaluationContext& context = {});

/// One canonical JSON document per line.
std::string results_to_jsonl(const std::vector<EvaluationResult>& results);
std::vector<EvaluationResult> results_from_jsonl(std::string_view text);

}  // namespace evallm
