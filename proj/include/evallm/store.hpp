// File-backed store. The CLI and the HTTP service both go through Workspace,
// so offline and online numbers come from the same code.
//
// Layout under the root:
//   corpora/<name>/corpus.json        corpus bundle (+ referenced images)
//   experiments/<id>/bundle.json      experiment bundle (+ referenced images)
//   experiments/<id>/results.jsonl    evaluation results, corpus order
//   experiments/<id>/annotations.jsonl annotation log
//   taxonomy.json                     error labels
#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evallm/annotation.hpp"
#include "evallm/corpus.hpp"
#include "evallm/generation.hpp"
#include "evallm/pipeline.hpp"
#include "evallm/report.hpp"

namespace evallm {

inline constexpr int kExportFormatVersion = 1;

class StoreError : public std::runtime_error {
 public:
  /// code: not_found, conflict, invalid, not_evaluated, io.
  StoreError(std::string code, const std::string& message, Json detail = nullptr)
      : std::runtime_error(message), code_(std::move(code)), detail_(std::move(detail)) {}
  const std::string& code() const { return code_; }
  const Json& detail() const { return detail_; }

 private:
  std::string code_;
  Json detail_;
};

/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

struct ExperimentSummary {
  std::string experiment_id;
  std::string model_name;
  Strategy strategy = Strategy::zero_shot;
  std::string corpus_name;
  int n_records = 0;
  bool evaluated = false;
  std::optional<int> n_valid;
};

Json to_json(const ExperimentSummary& summary);

struct InstanceFilter {
  std::string query;                   // case-insensitive substring of the utterance
  std::optional<LevelId> level;        // with status: that level has that status
  std::optional<ScoreStatus> status;   // without level: any level has that status
  std::optional<std::string> label_id; // instance has an active vote for the label
};

struct EvaluateOutcome {
  std::size_t n_results = 0;
  std::vector<EvaluationIssue> issues;
};

class Workspace {
 public:
  /// Creates the layout if missing and loads taxonomy and annotation logs.
  explicit Workspace(std::filesystem::path root, PipelineConfig config = {});

  const std::filesystem::path& root() const { return root_; }
  const PipelineConfig& config() const { return config_; }

  // Corpora.
  /// Validates and installs; re-ingesting an identical corpus is a no-op,
  /// a different corpus under the same name is a conflict.
  Corpus ingest_corpus(const std::filesystem::path& path);
  Corpus install_corpus(const Corpus& corpus);
  std::vector<std::string> corpus_names() const;
  Corpus corpus(const std::string& name) const;

  // Experiments.
  /// bundle_root is where relative image paths in the bundle resolve.
  ExperimentSummary import_bundle(const Json& bundle, const std::filesystem::path& bundle_root = {});
  ExperimentSummary save_experiment(const ExperimentBundle& bundle, const std::filesystem::path& bundle_root = {});
  std::vector<ExperimentSummary> experiments() const;
  ExperimentSummary experiment_summary(const std::string& experiment_id) const;
  ExperimentBundle experiment(const std::string& experiment_id) const;
  bool has_experiment(const std::string& experiment_id) const;
  bool has_results(const std::string& experiment_id) const;

  EvaluateOutcome evaluate(const std::string& experiment_id, int parallelism);
  std::vector<EvaluationResult> results(const std::string& experiment_id) const;

  // Reports.
  ModelReport report(const std::string& experiment_id) const;
  Comparison compare(const std::vector<std::string>& experiment_ids) const;

  // Review.
  Json instances(const std::string& experiment_id, const InstanceFilter& filter) const;
  Json instance_detail(const std::string& experiment_id, const std::string& instance_id) const;
  /// Stored PNG for one side of an instance; not_found when absent or outside the store.
  std::filesystem::path instance_image(const std::string& experiment_id, const std::string& instance_id,
                                       AnnotationTarget side) const;

  // Annotation.
  bool seed_taxonomy();
  std::vector<ErrorLabel> labels() const;
  AnnotateOutcome annotate(const AnnotationRequest& request);
  bool retract(const std::string& experiment_id, const std::string& instance_id, const std::string& label_id,
               const std::string& assessor_id, AnnotationTarget target);
  std::vector<ConsensusResult> consensus(const std::string& experiment_id) const;

  // Export / import of a self-contained experiment document.
  Json export_experiment(const std::string& experiment_id) const;
  ExperimentSummary import_export(const Json& document);

 private:
  std::filesystem::path corpus_dir(const std::string& name) const;
  std::filesystem::path experiment_dir(const std::string& experiment_id) const;
  void require_experiment(const std::string& experiment_id) const;
  void persist_taxonomy_locked();
  void persist_annotations_locked(const std::string& experiment_id);
  void copy_images(const std::vector<std::string>& relative_paths, const std::filesystem::path& from,
                   const std::filesystem::path& to) const;

  std::filesystem::path root_;
  PipelineConfig config_;
  AnnotationBook book_;
  mutable std::mutex write_mutex_;
};

}  // namespace evallm
