#include "evallm/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>

#include "text_util.hpp"

namespace evallm {

namespace {

std::string slugify(std::string_view normalized) {
  std::string slug;
  for (char c : normalized) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      slug += c;
    } else if (!slug.empty() && slug.back() != '-') {
      slug += '-';
    }
  }
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  return slug.empty() ? "label" : slug;
}

}  // namespace

bool is_annotatable_level(LevelId level) {
  switch (level) {
    case LevelId::color_mapping:
    case LevelId::perceptual_quality:
    case LevelId::visualization_literacy:
    case LevelId::significance:
    case LevelId::mark_correctness:
    case LevelId::axes_quality:
      return true;
    default:
      return false;
  }
}

std::string normalize_label_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (char c : detail::trim(name)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<ErrorLabel> default_taxonomy() {
  auto label = [](std::string name, LevelId level, std::string description) {
    return ErrorLabel{slugify(normalize_label_name(name)), std::move(name), level, std::move(description), true};
  };
  return {
      label("Missed Ordering Error", LevelId::axes_quality,
            "The explicit or expected ordering of the data is not applied."),
      label("Wrong Stacked Bar Chart", LevelId::mark_correctness,
            "A stacked bar chart is split into sub-charts or loses stacked components."),
      label("Visualization Hallucination", LevelId::mark_correctness,
            "A known chart type is rendered with an invented, aberrant structure."),
      label("Unnecessary Color coding", LevelId::color_mapping,
            "Color, gradients or other color properties are added without purpose."),
      label("Inability of Incorporation of Data Values", LevelId::significance,
            "The chart plots no data values or ignores the provided data."),
      label("Largely Structured Prompts Ignored", LevelId::significance,
            "The model echoes the prompt or returns blank output for data-heavy prompts."),
      label("Low Visualization Significance", LevelId::significance,
            "The chart carries little or no insight for the query and data."),
      label("Incorrect or missing Sorting", LevelId::axes_quality,
            "Requested sorting is missing or applied in the wrong order."),
  };
}

AnnotationBook::AnnotationBook(Clock clock) : clock_(clock ? std::move(clock) : Clock(utc_timestamp)) {}

bool AnnotationBook::seed_taxonomy() {
  std::lock_guard lock(mutex_);
  if (!labels_.empty()) return false;
  for (const auto& label : default_taxonomy()) {
    bool created = false;
    add_label_locked({label.name, label.level, label.description}, true, created);
  }
  return true;
}

ErrorLabel AnnotationBook::add_label(const NewLabel& label, bool seeded) {
  std::lock_guard lock(mutex_);
  bool created = false;
  return add_label_locked(label, seeded, created);
}

ErrorLabel AnnotationBook::add_label_locked(const NewLabel& label, bool seeded, bool& created) {
  const std::string normalized = normalize_label_name(label.name);
  if (normalized.empty()) throw AnnotationError("invalid_request", "label name is empty after normalization");
  if (!is_annotatable_level(label.level)) {
    throw AnnotationError("invalid_request",
                          "level '" + std::string(to_string(label.level)) + "' does not accept error labels");
  }
  if (auto it = label_by_normalized_name_.find(normalized); it != label_by_normalized_name_.end()) {
    created = false;
    return *std::find_if(labels_.begin(), labels_.end(), [&](const auto& l) { return l.label_id == it->second; });
  }
  const std::string base = slugify(normalized);
  std::string id = base;
  for (int suffix = 2; std::any_of(labels_.begin(), labels_.end(), [&](const auto& l) { return l.label_id == id; });
       ++suffix) {
    id = base + "-" + std::to_string(suffix);
  }
  labels_.push_back({id, std::string(detail::trim(label.name)), label.level, label.description, seeded});
  label_by_normalized_name_[normalized] = id;
  created = true;
  return labels_.back();
}

void AnnotationBook::restore_label(const ErrorLabel& label) {
  std::lock_guard lock(mutex_);
  const std::string normalized = normalize_label_name(label.name);
  if (normalized.empty()) throw AnnotationError("invalid_request", "label name is empty after normalization");
  if (label_by_normalized_name_.contains(normalized)) return;
  if (std::any_of(labels_.begin(), labels_.end(), [&](const auto& l) { return l.label_id == label.label_id; })) {
    throw AnnotationError("invalid_request", "label id '" + label.label_id + "' already used by another label");
  }
  labels_.push_back(label);
  label_by_normalized_name_[normalized] = label.label_id;
}

void AnnotationBook::register_instances(const std::string& experiment_id, const std::vector<std::string>& ids) {
  std::lock_guard lock(mutex_);
  instances_[experiment_id].insert(ids.begin(), ids.end());
}

void AnnotationBook::apply_locked(const Annotation& entry) {
  VoteKey key{entry.experiment_id, entry.instance_id, entry.label_id, entry.target};
  if (entry.kind == AnnotationKind::vote) {
    active_votes_[key].insert(entry.assessor_id);
  } else if (auto it = active_votes_.find(key); it != active_votes_.end()) {
    it->second.erase(entry.assessor_id);
  }
  log_.push_back(entry);
}

AnnotateOutcome AnnotationBook::annotate(const AnnotationRequest& request) {
  std::lock_guard lock(mutex_);
  if (detail::trim(request.assessor_id).empty()) throw AnnotationError("invalid_request", "assessor_id is required");
  const auto experiment = instances_.find(request.experiment_id);
  if (experiment == instances_.end() || !experiment->second.contains(request.instance_id)) {
    throw AnnotationError("unknown_instance",
                          "unknown instance '" + request.instance_id + "' in experiment '" + request.experiment_id + "'");
  }

  AnnotateOutcome outcome;
  if (request.label_id) {
    auto it = std::find_if(labels_.begin(), labels_.end(), [&](const auto& l) { return l.label_id == *request.label_id; });
    if (it == labels_.end()) throw AnnotationError("unknown_label", "unknown label '" + *request.label_id + "'");
    outcome.label = *it;
  } else if (request.new_label) {
    outcome.label = add_label_locked(*request.new_label, false, outcome.label_created);
  } else {
    throw AnnotationError("invalid_request", "either label_id or a new label is required");
  }

  Annotation entry{request.instance_id, request.experiment_id, outcome.label.label_id, request.assessor_id,
                   request.target,      AnnotationKind::vote,  {}};
  const VoteKey key{entry.experiment_id, entry.instance_id, entry.label_id, entry.target};
  auto& voters = active_votes_[key];
  if (voters.contains(entry.assessor_id)) {
    auto previous = std::find_if(log_.rbegin(), log_.rend(), [&](const Annotation& a) {
      return a.kind == AnnotationKind::vote && a.experiment_id == entry.experiment_id &&
             a.instance_id == entry.instance_id && a.label_id == entry.label_id && a.target == entry.target &&
             a.assessor_id == entry.assessor_id;
    });
    if (previous != log_.rend()) entry.created_at = previous->created_at;
    outcome.annotation = entry;
    outcome.vote_count = static_cast<int>(voters.size());
    return outcome;
  }
  entry.created_at = clock_();
  apply_locked(entry);
  outcome.annotation = entry;
  outcome.vote_added = true;
  outcome.vote_count = static_cast<int>(active_votes_[key].size());
  return outcome;
}

bool AnnotationBook::retract(const std::string& instance_id, const std::string& experiment_id,
                             const std::string& label_id, const std::string& assessor_id, AnnotationTarget target) {
  std::lock_guard lock(mutex_);
  auto it = active_votes_.find(VoteKey{experiment_id, instance_id, label_id, target});
  if (it == active_votes_.end() || !it->second.contains(assessor_id)) return false;
  apply_locked({instance_id, experiment_id, label_id, assessor_id, target, AnnotationKind::retract, clock_()});
  return true;
}

void AnnotationBook::replay(const Annotation& entry) {
  std::lock_guard lock(mutex_);
  apply_locked(entry);
}

std::vector<ConsensusResult> AnnotationBook::consensus(const std::string& experiment_id, int quorum) const {
  if (quorum < 1) throw std::invalid_argument("quorum must be >= 1");
  std::lock_guard lock(mutex_);
  std::vector<ConsensusResult> results;
  for (const auto& [key, assessors] : active_votes_) {
    const auto& [experiment, instance, label, target] = key;
    if (experiment != experiment_id || assessors.empty()) continue;
    const int count = static_cast<int>(assessors.size());
    results.push_back({instance, label, target, count, count >= quorum});
  }
  return results;  // map order: (instance, label, target)
}

std::vector<ErrorLabel> AnnotationBook::labels() const {
  std::lock_guard lock(mutex_);
  return labels_;
}

std::optional<ErrorLabel> AnnotationBook::find_label(const std::string& label_id) const {
  std::lock_guard lock(mutex_);
  auto it = std::find_if(labels_.begin(), labels_.end(), [&](const auto& l) { return l.label_id == label_id; });
  if (it == labels_.end()) return std::nullopt;
  return *it;
}

std::vector<Annotation> AnnotationBook::log(const std::optional<std::string>& experiment_id) const {
  std::lock_guard lock(mutex_);
  if (!experiment_id) return log_;
  std::vector<Annotation> filtered;
  std::copy_if(log_.begin(), log_.end(), std::back_inserter(filtered),
               [&](const Annotation& a) { return a.experiment_id == *experiment_id; });
  return filtered;
}

std::vector<std::string> AnnotationBook::voters(const std::string& experiment_id, const std::string& instance_id,
                                                const std::string& label_id, AnnotationTarget target) const {
  std::lock_guard lock(mutex_);
  auto it = active_votes_.find(VoteKey{experiment_id, instance_id, label_id, target});
  if (it == active_votes_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

Json to_json(const ErrorLabel& label) {
  return {{"label_id", label.label_id},
          {"name", label.name},
          {"level_id", to_string(label.level)},
          {"description", label.description},
          {"seeded", label.seeded}};
}

ErrorLabel error_label_from_json(const Json& json) {
  ErrorLabel label;
  label.label_id = json.at("label_id").get<std::string>();
  label.name = json.at("name").get<std::string>();
  const auto level = parse_level_id(json.at("level_id").get<std::string>());
  if (!level || !is_annotatable_level(*level)) throw std::invalid_argument("label has an invalid level_id");
  label.level = *level;
  label.description = json.value("description", std::string{});
  label.seeded = json.value("seeded", false);
  return label;
}

Json to_json(const Annotation& annotation) {
  return {{"instance_id", annotation.instance_id},
          {"experiment_id", annotation.experiment_id},
          {"label_id", annotation.label_id},
          {"assessor_id", annotation.assessor_id},
          {"target", to_string(annotation.target)},
          {"kind", annotation.kind == AnnotationKind::vote ? "vote" : "retract"},
          {"created_at", annotation.created_at}};
}

Annotation annotation_from_json(const Json& json) {
  Annotation annotation;
  annotation.instance_id = json.at("instance_id").get<std::string>();
  annotation.experiment_id = json.at("experiment_id").get<std::string>();
  annotation.label_id = json.at("label_id").get<std::string>();
  annotation.assessor_id = json.at("assessor_id").get<std::string>();
  const auto target = parse_annotation_target(json.value("target", std::string{"generated"}));
  if (!target) throw std::invalid_argument("annotation has an invalid target");
  annotation.target = *target;
  const std::string kind = json.value("kind", std::string{"vote"});
  if (kind != "vote" && kind != "retract") throw std::invalid_argument("annotation has an invalid kind");
  annotation.kind = kind == "vote" ? AnnotationKind::vote : AnnotationKind::retract;
  annotation.created_at = json.value("created_at", std::string{});
  return annotation;
}

Json to_json(const ConsensusResult& result) {
  return {{"instance_id", result.instance_id},
          {"label_id", result.label_id},
          {"target", to_string(result.target)},
          {"vote_count", result.vote_count},
          {"accepted", result.accepted}};
}

std::string_view to_string(AnnotationTarget target) {
  return target == AnnotationTarget::generated ? "generated" : "ground_truth";
}

std::optional<AnnotationTarget> parse_annotation_target(std::string_view text) {
  if (text == "generated") return AnnotationTarget::generated;
  if (text == "ground_truth") return AnnotationTarget::ground_truth;
  return std::nullopt;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&seconds, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

}  // namespace evallm
