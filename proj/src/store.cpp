#include "evallm/store.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "text_util.hpp"

namespace evallm {

namespace fs = std::filesystem;

namespace {

constexpr const char* kExportKind = "evallm-experiment-export";

bool safe_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
           c == '.';
  });
}

void require_safe(std::string_view kind, const std::string& name) {
  if (!safe_name(name)) {
    throw StoreError("invalid", std::string(kind) + " '" + name + "' must match [A-Za-z0-9._-]+ and not start with '.'");
  }
}

Json parse_json_file(const fs::path& path) {
  Json json = Json::parse(read_file(path), nullptr, false);
  if (json.is_discarded()) throw StoreError("invalid", "not valid JSON: " + path.string());
  return json;
}

std::vector<Annotation> read_annotation_log(const fs::path& path) {
  std::vector<Annotation> entries;
  if (!fs::exists(path)) return entries;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    entries.push_back(annotation_from_json(Json::parse(line)));
  }
  return entries;
}

Json issues_json(const std::vector<RecordIssue>& issues) {
  Json detail = Json::array();
  for (const auto& issue : issues) detail.push_back({{"record", issue.index}, {"message", issue.message}});
  return detail;
}

Json load_errors_json(const std::vector<LoadError>& errors) {
  Json detail = Json::array();
  for (const auto& error : errors) {
    detail.push_back(
        {{"index", error.index}, {"instance_id", error.instance_id}, {"code", error.code}, {"message", error.message}});
  }
  return detail;
}

bool level_has_status(const EvaluationResult& result, const InstanceFilter& filter) {
  if (!filter.status) {
    return !filter.level || result.scores.contains(*filter.level);
  }
  if (filter.level) {
    const LevelScore* score = result.score(*filter.level);
    return score && score->status == *filter.status;
  }
  return std::any_of(result.scores.begin(), result.scores.end(),
                     [&](const auto& entry) { return entry.second.status == *filter.status; });
}

Json scores_json(const EvaluationResult& result) {
  Json scores = Json::object();
  for (const auto& [level, score] : result.scores) scores[std::string(to_string(level))] = to_json(score);
  return scores;
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  fs::path temp = path;
  temp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("io", "cannot write " + temp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(temp, ignored);
      throw StoreError("io", "short write to " + temp.string());
    }
  }
  std::error_code error;
  fs::rename(temp, path, error);
  if (error) {
    fs::remove(temp, error);
    throw StoreError("io", "cannot replace " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("io", "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Json to_json(const ExperimentSummary& summary) {
  return {{"experiment_id", summary.experiment_id},
          {"model_name", summary.model_name},
          {"strategy", to_string(summary.strategy)},
          {"corpus_name", summary.corpus_name},
          {"n_records", summary.n_records},
          {"evaluated", summary.evaluated},
          {"n_valid", summary.n_valid ? Json(*summary.n_valid) : Json(nullptr)}};
}

Workspace::Workspace(fs::path root, PipelineConfig config) : root_(std::move(root)), config_(std::move(config)) {
  fs::create_directories(root_ / "corpora");
  fs::create_directories(root_ / "experiments");
  const fs::path taxonomy = root_ / "taxonomy.json";
  if (fs::exists(taxonomy)) {
    const Json labels = parse_json_file(taxonomy);
    for (const auto& label : labels.at("labels")) book_.restore_label(error_label_from_json(label));
  }
  for (const auto& entry : fs::directory_iterator(root_ / "experiments")) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "bundle.json")) continue;
    const std::string id = entry.path().filename().string();
    const ExperimentBundle bundle = experiment(id);
    std::vector<std::string> ids;
    for (const auto& record : bundle.records) ids.push_back(record.instance_id);
    book_.register_instances(id, ids);
    for (const auto& annotation : read_annotation_log(entry.path() / "annotations.jsonl")) book_.replay(annotation);
  }
}

fs::path Workspace::corpus_dir(const std::string& name) const { return root_ / "corpora" / name; }
fs::path Workspace::experiment_dir(const std::string& id) const { return root_ / "experiments" / id; }

void Workspace::require_experiment(const std::string& experiment_id) const {
  if (!has_experiment(experiment_id)) throw StoreError("not_found", "unknown experiment '" + experiment_id + "'");
}

void Workspace::copy_images(const std::vector<std::string>& relative_paths, const fs::path& from,
                            const fs::path& to) const {
  if (from.empty()) return;
  for (const auto& relative : relative_paths) {
    const fs::path path(relative);
    if (path.is_absolute()) continue;
    const fs::path source = from / path;
    const fs::path target = to / path;
    if (!fs::exists(source)) continue;
    if (fs::weakly_canonical(source) == fs::weakly_canonical(target)) continue;
    fs::create_directories(target.parent_path());
    fs::copy_file(source, target, fs::copy_options::overwrite_existing);
  }
}

Corpus Workspace::ingest_corpus(const fs::path& path) {
  CorpusLoad load;
  try {
    load = load_corpus(path);
  } catch (const CorpusError& e) {
    throw StoreError("invalid", e.what());
  }
  if (!load.errors.empty()) {
    throw StoreError("invalid", "corpus has " + std::to_string(load.errors.size()) + " invalid instance(s)",
                     load_errors_json(load.errors));
  }
  return install_corpus(load.corpus);
}

Corpus Workspace::install_corpus(const Corpus& corpus) {
  require_safe("corpus name", corpus.name);
  std::lock_guard lock(write_mutex_);
  const fs::path dir = corpus_dir(corpus.name);
  const std::string content = canonical_json(corpus_to_json(corpus)) + "\n";
  if (fs::exists(dir / "corpus.json")) {
    if (read_file(dir / "corpus.json") != content) {
      throw StoreError("conflict", "a different corpus named '" + corpus.name + "' is already installed");
    }
  } else {
    std::vector<std::string> images;
    for (const auto& instance : corpus.instances) {
      if (instance.ground_truth_image) images.push_back(*instance.ground_truth_image);
    }
    copy_images(images, corpus.root, dir);
    write_file_atomic(dir / "corpus.json", content);
  }
  return this->corpus(corpus.name);
}

std::vector<std::string> Workspace::corpus_names() const {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(root_ / "corpora")) {
    if (fs::exists(entry.path() / "corpus.json")) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

Corpus Workspace::corpus(const std::string& name) const {
  if (!safe_name(name) || !fs::exists(corpus_dir(name) / "corpus.json")) {
    throw StoreError("not_found", "unknown corpus '" + name + "'");
  }
  CorpusLoad load = corpus_from_json(parse_json_file(corpus_dir(name) / "corpus.json"), corpus_dir(name));
  if (!load.errors.empty()) throw StoreError("invalid", "stored corpus '" + name + "' is corrupt");
  return std::move(load.corpus);
}

ExperimentSummary Workspace::import_bundle(const Json& json, const fs::path& bundle_root) {
  BundleParse parse = parse_experiment_bundle(json);
  if (!parse.bundle) throw StoreError("invalid", "malformed experiment bundle", issues_json(parse.issues));
  return save_experiment(*parse.bundle, bundle_root);
}

ExperimentSummary Workspace::save_experiment(const ExperimentBundle& bundle, const fs::path& bundle_root) {
  require_safe("experiment id", bundle.experiment_id);
  const Corpus corpus = this->corpus(bundle.corpus_name);
  Json unknown = Json::array();
  for (const auto& record : bundle.records) {
    if (!corpus.find(record.instance_id)) unknown.push_back(record.instance_id);
  }
  if (!unknown.empty()) {
    throw StoreError("invalid", "bundle references instances missing from corpus '" + bundle.corpus_name + "'",
                     {{"unknown_instances", unknown}});
  }
  {
    std::lock_guard lock(write_mutex_);
    const fs::path dir = experiment_dir(bundle.experiment_id);
    if (fs::exists(dir / "bundle.json")) {
      throw StoreError("conflict", "experiment '" + bundle.experiment_id + "' already exists");
    }
    std::vector<std::string> images;
    for (const auto& record : bundle.records) {
      if (record.image) images.push_back(*record.image);
    }
    copy_images(images, bundle_root, dir);
    write_file_atomic(dir / "bundle.json", canonical_json(to_json(bundle)) + "\n");
    std::vector<std::string> ids;
    for (const auto& record : bundle.records) ids.push_back(record.instance_id);
    book_.register_instances(bundle.experiment_id, ids);
  }
  return experiment_summary(bundle.experiment_id);
}

bool Workspace::has_experiment(const std::string& experiment_id) const {
  return safe_name(experiment_id) && fs::exists(experiment_dir(experiment_id) / "bundle.json");
}

bool Workspace::has_results(const std::string& experiment_id) const {
  return has_experiment(experiment_id) && fs::exists(experiment_dir(experiment_id) / "results.jsonl");
}

ExperimentBundle Workspace::experiment(const std::string& experiment_id) const {
  require_experiment(experiment_id);
  BundleParse parse = parse_experiment_bundle(parse_json_file(experiment_dir(experiment_id) / "bundle.json"));
  if (!parse.bundle) {
    throw StoreError("invalid", "stored experiment '" + experiment_id + "' is corrupt", issues_json(parse.issues));
  }
  return std::move(*parse.bundle);
}

ExperimentSummary Workspace::experiment_summary(const std::string& experiment_id) const {
  const ExperimentBundle bundle = experiment(experiment_id);
  ExperimentSummary summary{bundle.experiment_id, bundle.model_name, bundle.strategy, bundle.corpus_name,
                            static_cast<int>(bundle.records.size()), has_results(experiment_id), std::nullopt};
  if (summary.evaluated) summary.n_valid = report(experiment_id).n_valid;
  return summary;
}

std::vector<ExperimentSummary> Workspace::experiments() const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_ / "experiments")) {
    if (fs::exists(entry.path() / "bundle.json")) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  std::vector<ExperimentSummary> summaries;
  for (const auto& id : ids) summaries.push_back(experiment_summary(id));
  return summaries;
}

EvaluateOutcome Workspace::evaluate(const std::string& experiment_id, int parallelism) {
  const ExperimentBundle bundle = experiment(experiment_id);
  const Corpus corpus = this->corpus(bundle.corpus_name);
  const EvaluationContext context{corpus_dir(bundle.corpus_name), experiment_dir(experiment_id)};
  ExperimentEvaluation evaluation =
      evaluate_experiment(corpus, bundle.records, experiment_id, config_, parallelism, context);
  {
    std::lock_guard lock(write_mutex_);
    write_file_atomic(experiment_dir(experiment_id) / "results.jsonl", results_to_jsonl(evaluation.results));
  }
  return {evaluation.results.size(), std::move(evaluation.issues)};
}

std::vector<EvaluationResult> Workspace::results(const std::string& experiment_id) const {
  require_experiment(experiment_id);
  if (!has_results(experiment_id)) {
    throw StoreError("not_evaluated", "experiment '" + experiment_id + "' has not been evaluated");
  }
  try {
    return results_from_jsonl(read_file(experiment_dir(experiment_id) / "results.jsonl"));
  } catch (const Json::exception& e) {
    throw StoreError("invalid", "stored results for '" + experiment_id + "' are corrupt: " + e.what());
  }
}

std::vector<ConsensusResult> Workspace::consensus(const std::string& experiment_id) const {
  require_experiment(experiment_id);
  return book_.consensus(experiment_id, config_.quorum);
}

ModelReport Workspace::report(const std::string& experiment_id) const {
  const ExperimentBundle bundle = experiment(experiment_id);
  return aggregate(experiment_id, bundle.model_name, results(experiment_id), consensus(experiment_id));
}

Comparison Workspace::compare(const std::vector<std::string>& experiment_ids) const {
  if (experiment_ids.empty()) throw StoreError("invalid", "compare needs at least one experiment");
  std::vector<ModelReport> reports;
  for (const auto& id : experiment_ids) reports.push_back(report(id));
  return evallm::compare(std::move(reports));
}

Json Workspace::instances(const std::string& experiment_id, const InstanceFilter& filter) const {
  const ExperimentBundle bundle = experiment(experiment_id);
  const Corpus corpus = this->corpus(bundle.corpus_name);
  std::map<std::string, EvaluationResult> by_id;
  if (has_results(experiment_id)) {
    for (auto& result : results(experiment_id)) by_id.emplace(result.instance_id, std::move(result));
  }
  std::set<std::string> labelled;
  if (filter.label_id) {
    for (const auto& entry : book_.consensus(experiment_id, 1)) {
      if (entry.label_id == *filter.label_id) labelled.insert(entry.instance_id);
    }
  }
  Json rows = Json::array();
  for (const auto& record : bundle.records) {
    const BenchmarkInstance* instance = corpus.find(record.instance_id);
    if (!instance) continue;
    if (!filter.query.empty() && !detail::contains_case_insensitive(instance->utterance, filter.query)) continue;
    if (filter.label_id && !labelled.contains(record.instance_id)) continue;
    const auto result = by_id.find(record.instance_id);
    if ((filter.level || filter.status) && (result == by_id.end() || !level_has_status(result->second, filter))) {
      continue;
    }
    Json statuses = Json::object();
    Json syntax = nullptr;
    if (result != by_id.end()) {
      for (const auto& [level, score] : result->second.scores) {
        statuses[std::string(to_string(level))] = to_string(score.status);
      }
      if (const LevelScore* s = result->second.score(LevelId::syntax_correctness); s && s->value) syntax = *s->value;
    }
    rows.push_back({{"instance_id", instance->id},
                    {"utterance", instance->utterance},
                    {"difficulty", instance->difficulty ? Json(*instance->difficulty) : Json(nullptr)},
                    {"syntax_correctness", syntax},
                    {"statuses", statuses}});
  }
  return {{"experiment_id", experiment_id}, {"instances", rows}};
}

fs::path Workspace::instance_image(const std::string& experiment_id, const std::string& instance_id,
                                  AnnotationTarget side) const {
  const ExperimentBundle bundle = experiment(experiment_id);
  std::optional<std::string> relative;
  fs::path base;
  if (side == AnnotationTarget::ground_truth) {
    const Corpus corpus = this->corpus(bundle.corpus_name);
    if (const auto* instance = corpus.find(instance_id)) relative = instance->ground_truth_image;
    base = corpus_dir(bundle.corpus_name);
  } else {
    for (const auto& record : bundle.records)
      if (record.instance_id == instance_id) relative = record.image;
    base = experiment_dir(experiment_id);
  }
  if (!relative) throw StoreError("not_found", "no " + std::string(to_string(side)) + " image for '" + instance_id + "'");
  const fs::path path = fs::weakly_canonical(base / *relative);
  const fs::path root = fs::weakly_canonical(root_);
  const auto [end, _] = std::mismatch(root.begin(), root.end(), path.begin(), path.end());
  if (end != root.end() || !fs::is_regular_file(path)) {
    throw StoreError("not_found", "image for '" + instance_id + "' is not in the store");
  }
  return path;
}

Json Workspace::instance_detail(const std::string& experiment_id, const std::string& instance_id) const {
  const ExperimentBundle bundle = experiment(experiment_id);
  const Corpus corpus = this->corpus(bundle.corpus_name);
  auto record = std::find_if(bundle.records.begin(), bundle.records.end(),
                             [&](const GenerationRecord& r) { return r.instance_id == instance_id; });
  const BenchmarkInstance* instance = corpus.find(instance_id);
  if (record == bundle.records.end() || !instance) {
    throw StoreError("not_found", "unknown instance '" + instance_id + "' in experiment '" + experiment_id + "'");
  }
  Json scores = Json::object();
  if (has_results(experiment_id)) {
    for (const auto& result : results(experiment_id)) {
      if (result.instance_id == instance_id) scores = scores_json(result);
    }
  }
  Json annotations = Json::array();
  for (const auto& entry : book_.consensus(experiment_id, config_.quorum)) {
    if (entry.instance_id != instance_id) continue;
    const auto label = book_.find_label(entry.label_id);
    annotations.push_back({{"label_id", entry.label_id},
                           {"name", label ? Json(label->name) : Json(nullptr)},
                           {"level", label ? Json(to_string(label->level)) : Json(nullptr)},
                           {"target", to_string(entry.target)},
                           {"vote_count", entry.vote_count},
                           {"accepted", entry.accepted},
                           {"voters", book_.voters(experiment_id, instance_id, entry.label_id, entry.target)}});
  }
  return {{"experiment_id", experiment_id},
          {"instance_id", instance_id},
          {"utterance", instance->utterance},
          {"difficulty", instance->difficulty ? Json(*instance->difficulty) : Json(nullptr)},
          {"dataset", instance->dataset.name},
          {"ground_truth", {{"spec", instance->ground_truth.raw_json},
                            {"image", instance->ground_truth_image ? Json(*instance->ground_truth_image) : Json(nullptr)}}},
          {"generated", {{"raw_output", record->raw_output},
                         {"spec", record->extraction.spec ? record->extraction.spec->raw_json : Json(nullptr)},
                         {"extraction_status", to_string(record->extraction.status)},
                         {"image", record->image ? Json(*record->image) : Json(nullptr)}}},
          {"scores", scores},
          {"annotations", annotations}};
}

bool Workspace::seed_taxonomy() {
  std::lock_guard lock(write_mutex_);
  const bool seeded = book_.seed_taxonomy();
  if (seeded) persist_taxonomy_locked();
  return seeded;
}

std::vector<ErrorLabel> Workspace::labels() const { return book_.labels(); }

AnnotateOutcome Workspace::annotate(const AnnotationRequest& request) {
  require_experiment(request.experiment_id);
  std::lock_guard lock(write_mutex_);
  AnnotateOutcome outcome;
  try {
    outcome = book_.annotate(request);
  } catch (const AnnotationError& e) {
    throw StoreError(e.code() == "invalid_request" ? "invalid" : "not_found", e.what());
  }
  if (outcome.label_created) persist_taxonomy_locked();
  if (outcome.vote_added) persist_annotations_locked(request.experiment_id);
  return outcome;
}

bool Workspace::retract(const std::string& experiment_id, const std::string& instance_id, const std::string& label_id,
                        const std::string& assessor_id, AnnotationTarget target) {
  require_experiment(experiment_id);
  std::lock_guard lock(write_mutex_);
  const bool retracted = book_.retract(instance_id, experiment_id, label_id, assessor_id, target);
  if (retracted) persist_annotations_locked(experiment_id);
  return retracted;
}

void Workspace::persist_taxonomy_locked() {
  Json labels = Json::array();
  for (const auto& label : book_.labels()) labels.push_back(to_json(label));
  write_file_atomic(root_ / "taxonomy.json", canonical_json(Json{{"labels", labels}}) + "\n");
}

void Workspace::persist_annotations_locked(const std::string& experiment_id) {
  std::string content;
  for (const auto& entry : book_.log(experiment_id)) content += canonical_json(to_json(entry)) + "\n";
  write_file_atomic(experiment_dir(experiment_id) / "annotations.jsonl", content);
}

Json Workspace::export_experiment(const std::string& experiment_id) const {
  const ExperimentBundle bundle = experiment(experiment_id);
  Json results = Json::array();
  for (const auto& result : this->results(experiment_id)) results.push_back(to_json(result));
  Json annotations = Json::array();
  for (const auto& entry : book_.log(experiment_id)) annotations.push_back(to_json(entry));
  Json taxonomy = Json::array();
  for (const auto& label : book_.labels()) taxonomy.push_back(to_json(label));
  Json consensus = Json::array();
  for (const auto& entry : this->consensus(experiment_id)) consensus.push_back(to_json(entry));
  return {{"kind", kExportKind},
          {"format_version", kExportFormatVersion},
          {"exported_at", utc_timestamp()},
          {"quorum", config_.quorum},
          {"corpus", corpus_to_json(corpus(bundle.corpus_name))},
          {"experiment", to_json(bundle)},
          {"results", results},
          {"annotations", annotations},
          {"taxonomy", taxonomy},
          {"consensus", consensus},
          {"report", to_json(report(experiment_id))}};
}

ExperimentSummary Workspace::import_export(const Json& document) {
  if (!document.is_object() || document.value("kind", "") != kExportKind) {
    throw StoreError("invalid", "not an experiment export document");
  }
  if (document.value("format_version", 0) != kExportFormatVersion) {
    throw StoreError("invalid", "unsupported export format_version");
  }
  std::vector<EvaluationResult> results;
  std::vector<Annotation> annotations;
  std::vector<ErrorLabel> taxonomy;
  try {
    for (const auto& result : document.at("results")) results.push_back(evaluation_result_from_json(result));
    for (const auto& entry : document.at("annotations")) annotations.push_back(annotation_from_json(entry));
    for (const auto& label : document.at("taxonomy")) taxonomy.push_back(error_label_from_json(label));
  } catch (const std::exception& e) {
    throw StoreError("invalid", std::string("malformed export: ") + e.what());
  }
  const std::string experiment_id = document.at("experiment").value("experiment_id", "");
  if (has_experiment(experiment_id)) {
    throw StoreError("conflict", "experiment '" + experiment_id + "' already exists");
  }
  for (const auto& result : results) {
    if (result.experiment_id != experiment_id) throw StoreError("invalid", "export mixes experiment ids");
  }

  CorpusLoad load = corpus_from_json(document.at("corpus"));
  if (!load.errors.empty()) {
    throw StoreError("invalid", "export carries an invalid corpus", load_errors_json(load.errors));
  }
  install_corpus(load.corpus);
  import_bundle(document.at("experiment"));

  {
    std::lock_guard lock(write_mutex_);
    bool taxonomy_changed = false;
    for (const auto& label : taxonomy) {
      if (book_.find_label(label.label_id)) continue;
      try {
        book_.restore_label(label);
      } catch (const AnnotationError& e) {
        throw StoreError("conflict", e.what());
      }
      taxonomy_changed = true;
    }
    if (taxonomy_changed) persist_taxonomy_locked();
    for (const auto& entry : annotations) book_.replay(entry);
    persist_annotations_locked(experiment_id);
    write_file_atomic(experiment_dir(experiment_id) / "results.jsonl", results_to_jsonl(results));
  }
  return experiment_summary(experiment_id);
}

}  // namespace evallm
