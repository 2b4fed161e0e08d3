// Chart-grammar data model and extraction of specs from raw model output.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace evallm {

using Json = nlohmann::json;

enum class MarkKind { bar, line, point, arc, area, rect, boxplot, tick, other };

/// Normalized mark. `raw` holds the original spelling and is only
/// significant for MarkKind::other.
struct MarkId {
  MarkKind kind = MarkKind::other;
  std::string raw;

  /// "bar", "line", ... or the raw string for `other`.
  std::string name() const;

  friend bool operator==(const MarkId&, const MarkId&) = default;
};

enum class Channel { x, y, color, theta, size, shape, detail, order };
enum class DataType { quantitative, nominal, ordinal, temporal };
enum class Aggregate { count, sum, mean, median, min, max };
enum class SortDirection { ascending, descending };

/// Where a normalized dtype came from. `unrecognized` means the spec had a
/// type string outside the synonym table and it was folded to nominal.
enum class DataTypeSource { explicit_value, inferred, unrecognized };

struct SortDef {
  std::optional<SortDirection> direction;
  std::optional<Channel> by_channel;

  friend bool operator==(const SortDef&, const SortDef&) = default;
};

struct EncodingDef {
  std::string field;
  DataType dtype = DataType::nominal;
  DataTypeSource dtype_source = DataTypeSource::inferred;
  std::optional<Aggregate> aggregate;
  std::optional<SortDef> sort;
  std::optional<std::string> scale_type;
  std::optional<std::string> axis_title;
  std::optional<bool> bin;

  friend bool operator==(const EncodingDef&, const EncodingDef&) = default;
};

struct InlineRows {
  Json rows;
  friend bool operator==(const InlineRows&, const InlineRows&) = default;
};
struct NamedData {
  std::string name;
  friend bool operator==(const NamedData&, const NamedData&) = default;
};
using DataRef = std::variant<std::monostate, InlineRows, NamedData>;

struct VisSpec {
  MarkId mark;
  std::map<Channel, EncodingDef> encodings;
  DataRef data;
  Json raw_json;

  friend bool operator==(const VisSpec&, const VisSpec&) = default;
};

enum class ExtractionStatus { ok, no_json_found, json_parse_error, missing_required_fields };

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ExtractionOutcome {
  ExtractionStatus status = ExtractionStatus::no_json_found;
  std::optional<VisSpec> spec;
  std::vector<std::string> warnings;
  std::optional<SourceSpan> source_span;

  bool ok() const { return status == ExtractionStatus::ok; }
  friend bool operator==(const ExtractionOutcome&, const ExtractionOutcome&) = default;
};

struct MarkNormalization {
  MarkId mark;
  std::optional<std::string> warning;
};

/// Version of the mark synonym table. Bump whenever the table changes so
/// that reported mark accuracies stay traceable.
inline constexpr int kMarkSynonymTableVersion = 1;

MarkNormalization normalize_mark(std::string_view raw_mark);

/// Finds the first JSON object in free text (fenced blocks first, then the
/// first balanced top-level brace region) and normalizes it.
ExtractionOutcome extract_spec(std::string_view raw_llm_output);

/// Normalizes an already-parsed JSON document. Non-objects and documents
/// without a mark yield missing_required_fields.
ExtractionOutcome normalize_spec(const Json& document);

/// Sorted keys, minimal whitespace, UTF-8.
std::string canonical_json(const Json& document);
std::string canonical_json(const VisSpec& spec);

// Enum <-> string helpers, shared by every serializer in the project.
std::string_view to_string(MarkKind kind);
std::string_view to_string(Channel channel);
std::string_view to_string(DataType dtype);
std::string_view to_string(Aggregate aggregate);
std::string_view to_string(SortDirection direction);
std::string_view to_string(ExtractionStatus status);

std::optional<Channel> parse_channel(std::string_view text);
std::optional<DataType> parse_data_type(std::string_view text);
std::optional<Aggregate> parse_aggregate(std::string_view text);
std::optional<ExtractionStatus> parse_extraction_status(std::string_view text);

inline constexpr Channel kAllChannels[] = {Channel::x,     Channel::y,    Channel::color,  Channel::theta,
                                           Channel::size,  Channel::shape, Channel::detail, Channel::order};

}  // namespace evallm
