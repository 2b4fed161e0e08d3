// Human evaluation: error labels, assessor votes and consensus.
#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "evallm/level_score.hpp"

namespace evallm {

struct ErrorLabel {
  std::string label_id;
  std::string name;
  LevelId level = LevelId::significance;
  std::string description;
  bool seeded = false;

  friend bool operator==(const ErrorLabel&, const ErrorLabel&) = default;
};

/// Levels an error label may be filed under.
bool is_annotatable_level(LevelId level);

enum class AnnotationTarget { generated, ground_truth };
enum class AnnotationKind { vote, retract };

/// One append-only log entry. A retract is a tombstone for an earlier vote.
struct Annotation {
  std::string instance_id;
  std::string experiment_id;
  std::string label_id;
  std::string assessor_id;
  AnnotationTarget target = AnnotationTarget::generated;
  AnnotationKind kind = AnnotationKind::vote;
  std::string created_at;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct ConsensusResult {
  std::string instance_id;
  std::string label_id;
  AnnotationTarget target = AnnotationTarget::generated;
  int vote_count = 0;
  bool accepted = false;

  friend bool operator==(const ConsensusResult&, const ConsensusResult&) = default;
};

class AnnotationError : public std::runtime_error {
 public:
  /// code is one of unknown_instance, unknown_label, invalid_request.
  AnnotationError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// Trim, collapse internal whitespace, ASCII case-fold.
std::string normalize_label_name(std::string_view name);

/// The eight error classes observed in the use-case campaigns.
std::vector<ErrorLabel> default_taxonomy();

struct NewLabel {
  std::string name;
  LevelId level = LevelId::significance;
  std::string description;
};

struct AnnotationRequest {
  std::string instance_id;
  std::string experiment_id;
  std::optional<std::string> label_id;
  std::optional<NewLabel> new_label;
  std::string assessor_id;
  AnnotationTarget target = AnnotationTarget::generated;
};

struct AnnotateOutcome {
  Annotation annotation;
  ErrorLabel label;
  bool vote_added = false;
  bool label_created = false;
  int vote_count = 0;
};

/// Taxonomy plus annotation log. All members are thread-safe; votes and
/// label merges serialize on one mutex.
class AnnotationBook {
 public:
  using Clock = std::function<std::string()>;

  explicit AnnotationBook(Clock clock = {});

  /// Installs the default taxonomy into an empty book. Returns false (no-op)
  /// when labels already exist.
  bool seed_taxonomy();

  /// Adds a label unless its normalized name is already known; returns the
  /// stored label either way.
  ErrorLabel add_label(const NewLabel& label, bool seeded = false);
  void restore_label(const ErrorLabel& label);

  void register_instances(const std::string& experiment_id, const std::vector<std::string>& instance_ids);

  /// Idempotent per (instance, experiment, label, assessor, target).
  AnnotateOutcome annotate(const AnnotationRequest& request);

  /// Appends a tombstone. Returns false if there was no active vote.
  bool retract(const std::string& instance_id, const std::string& experiment_id, const std::string& label_id,
               const std::string& assessor_id, AnnotationTarget target);

  /// Replays a persisted log entry verbatim (no instance check).
  void replay(const Annotation& entry);

  std::vector<ConsensusResult> consensus(const std::string& experiment_id, int quorum) const;

  std::vector<ErrorLabel> labels() const;
  std::optional<ErrorLabel> find_label(const std::string& label_id) const;
  std::vector<Annotation> log(const std::optional<std::string>& experiment_id = std::nullopt) const;

  /// Active voters for one (instance, label, target).
  std::vector<std::string> voters(const std::string& experiment_id, const std::string& instance_id,
                                  const std::string& label_id, AnnotationTarget target) const;

 private:
  using VoteKey = std::tuple<std::string, std::string, std::string, AnnotationTarget>;  // experiment, instance, label, target

  ErrorLabel add_label_locked(const NewLabel& label, bool seeded, bool& created);
  void apply_locked(const Annotation& entry);

  mutable std::mutex mutex_;
  Clock clock_;
  std::vector<ErrorLabel> labels_;
  std::map<std::string, std::string> label_by_normalized_name_;
  std::map<std::string, std::set<std::string>> instances_;
  std::vector<Annotation> log_;
  std::map<VoteKey, std::set<std::string>> active_votes_;
};

Json to_json(const ErrorLabel& label);
ErrorLabel error_label_from_json(const Json& json);
Json to_json(const Annotation& annotation);
Annotation annotation_from_json(const Json& json);
Json to_json(const ConsensusResult& result);

std::string_view to_string(AnnotationTarget target);
std::optional<AnnotationTarget> parse_annotation_target(std::string_view text);

std::string utc_timestamp();

}  // namespace evallm
