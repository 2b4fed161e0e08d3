#include "evallm/spec_model.hpp"

#include <array>
#include <utility>

#include "text_util.hpp"

namespace evallm {

namespace {

struct MarkSynonym {
  std::string_view spelling;
  MarkKind kind;
};

// Mark synonym table, version kMarkSynonymTableVersion.
constexpr std::array<MarkSynonym, 11> kMarkSynonyms{{
    {"bar", MarkKind::bar},
    {"line", MarkKind::line},
    {"point", MarkKind::point},
    {"scatter", MarkKind::point},
    {"circle", MarkKind::point},
    {"arc", MarkKind::arc},
    {"pie", MarkKind::arc},
    {"area", MarkKind::area},
    {"rect", MarkKind::rect},
    {"tick", MarkKind::tick},
    {"boxplot", MarkKind::boxplot},
}};

struct DataTypeSynonym {
  std::string_view spelling;
  DataType dtype;
};

constexpr std::array<DataTypeSynonym, 20> kDataTypeSynonyms{{
    {"quantitative", DataType::quantitative},
    {"q", DataType::quantitative},
    {"number", DataType::quantitative},
    {"numeric", DataType::quantitative},
    {"integer", DataType::quantitative},
    {"float", DataType::quantitative},
    {"continuous", DataType::quantitative},
    {"nominal", DataType::nominal},
    {"n", DataType::nominal},
    {"categorical", DataType::nominal},
    {"category", DataType::nominal},
    {"string", DataType::nominal},
    {"ordinal", DataType::ordinal},
    {"o", DataType::ordinal},
    {"temporal", DataType::temporal},
    {"t", DataType::temporal},
    {"time", DataType::temporal},
    {"date", DataType::temporal},
    {"datetime", DataType::temporal},
    {"timestamp", DataType::temporal},
}};

std::optional<Json> parse_object(std::string_view text) {
  Json parsed = Json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

// Index one past the '}' matching the '{' at `open`, honoring JSON string
// literals. npos when the region never closes.
std::size_t matching_brace_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

struct Candidate {
  Json document;
  SourceSpan span;
};

std::optional<Candidate> first_fenced_object(std::string_view text) {
  constexpr std::string_view kFence = "```";
  std::size_t search = 0;
  while (true) {
    const std::size_t open = text.find(kFence, search);
    if (open == std::string_view::npos) return std::nullopt;
    std::size_t body_begin = open + kFence.size();
    const std::size_t line_end = text.find('\n', body_begin);
    const std::size_t info_end = line_end == std::string_view::npos ? text.size() : line_end;
    // An info string ("json", "vega-lite") ends at the newline; a brace on
    // the fence line means the body starts inline.
    if (text.substr(body_begin, info_end - body_begin).find('{') == std::string_view::npos &&
        line_end != std::string_view::npos) {
      body_begin = line_end + 1;
    }
    const std::size_t close = text.find(kFence, body_begin);
    if (close == std::string_view::npos) return std::nullopt;

    std::string_view body = text.substr(body_begin, close - body_begin);
    const std::string_view trimmed = detail::trim(body);
    if (auto parsed = parse_object(trimmed)) {
      const std::size_t begin = body_begin + static_cast<std::size_t>(trimmed.data() - body.data());
      return Candidate{std::move(*parsed), {begin, begin + trimmed.size()}};
    }
    search = close + kFence.size();
  }
}

std::optional<Candidate> first_balanced_object(std::string_view text) {
  std::size_t search = 0;
  while (true) {
    const std::size_t open = text.find('{', search);
    if (open == std::string_view::npos) return std::nullopt;
    const std::size_t end = matching_brace_end(text, open);
    if (end == std::string_view::npos) return std::nullopt;
    if (auto parsed = parse_object(text.substr(open, end - open))) {
      return Candidate{std::move(*parsed), {open, end}};
    }
    search = end;
  }
}

std::optional<std::string> string_member(const Json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::optional<SortDirection> parse_direction(std::string_view text) {
  const std::string lowered = detail::ascii_lower(text);
  if (lowered == "ascending" || lowered == "asc") return SortDirection::ascending;
  if (lowered == "descending" || lowered == "desc") return SortDirection::descending;
  return std::nullopt;
}

std::optional<SortDef> parse_sort(const Json& sort, const std::string& where, std::vector<std::string>& warnings) {
  if (sort.is_null()) return std::nullopt;
  SortDef def;
  if (sort.is_string()) {
    std::string_view text = sort.get_ref<const std::string&>();
    if (auto direction = parse_direction(text)) {
      def.direction = direction;
    } else {
      const bool descending = !text.empty() && text.front() == '-';
      if (descending) text.remove_prefix(1);
      if (auto channel = parse_channel(text)) {
        def.by_channel = channel;
        def.direction = descending ? SortDirection::descending : SortDirection::ascending;
      } else {
        warnings.push_back(where + ": unrecognized sort '" + sort.get<std::string>() + "' ignored");
        return std::nullopt;
      }
    }
  } else if (sort.is_object()) {
    if (auto order = string_member(sort, "order")) def.direction = parse_direction(*order);
    if (auto channel_name = string_member(sort, "encoding")) def.by_channel = parse_channel(*channel_name);
  } else {
    warnings.push_back(where + ": custom sort order ignored");
    return std::nullopt;
  }
  if (!def.direction && !def.by_channel) return std::nullopt;
  return def;
}

std::optional<EncodingDef> parse_encoding(const Json& channel_json, const std::string& where,
                                          std::vector<std::string>& warnings) {
  if (!channel_json.is_object()) {
    warnings.push_back(where + ": encoding is not an object; channel excluded");
    return std::nullopt;
  }
  EncodingDef def;
  if (auto it = channel_json.find("field"); it != channel_json.end()) {
    if (it->is_string()) {
      def.field = it->get<std::string>();
    } else {
      warnings.push_back(where + ": non-string field ignored");
    }
  }
  if (auto aggregate = string_member(channel_json, "aggregate")) {
    def.aggregate = parse_aggregate(*aggregate);
    if (!def.aggregate) warnings.push_back(where + ": unknown aggregate '" + *aggregate + "' ignored");
  }
  if (def.field.empty() && def.aggregate != Aggregate::count) {
    warnings.push_back(where + ": no field and no count aggregate; channel excluded");
    return std::nullopt;
  }

  if (auto it = channel_json.find("bin"); it != channel_json.end()) {
    if (it->is_boolean()) {
      def.bin = it->get<bool>();
    } else if (it->is_object()) {
      def.bin = true;
    }
  }

  if (auto type = string_member(channel_json, "type")) {
    if (auto dtype = parse_data_type(*type)) {
      def.dtype = *dtype;
      def.dtype_source = DataTypeSource::explicit_value;
    } else {
      def.dtype = DataType::nominal;
      def.dtype_source = DataTypeSource::unrecognized;
      warnings.push_back(where + ": unknown type '" + *type + "' mapped to nominal");
    }
  } else {
    const bool numeric = def.aggregate.has_value() || def.bin.value_or(false);
    def.dtype = numeric ? DataType::quantitative : DataType::nominal;
    def.dtype_source = DataTypeSource::inferred;
    warnings.push_back(where + ": missing type inferred as " + std::string(to_string(def.dtype)));
  }

  if (auto it = channel_json.find("sort"); it != channel_json.end()) {
    def.sort = parse_sort(*it, where, warnings);
  }
  if (auto it = channel_json.find("scale"); it != channel_json.end() && it->is_object()) {
    def.scale_type = string_member(*it, "type");
  }
  if (auto it = channel_json.find("axis"); it != channel_json.end() && it->is_object()) {
    def.axis_title = string_member(*it, "title");
  }
  if (!def.axis_title) def.axis_title = string_member(channel_json, "title");
  return def;
}

DataRef parse_data(const Json& document) {
  auto it = document.find("data");
  if (it == document.end() || !it->is_object()) return std::monostate{};
  if (auto values = it->find("values"); values != it->end() && values->is_array()) {
    return InlineRows{*values};
  }
  if (auto name = string_member(*it, "name")) return NamedData{*name};
  if (auto url = string_member(*it, "url")) return NamedData{*url};
  return std::monostate{};
}

}  // namespace

std::string MarkId::name() const {
  return kind == MarkKind::other ? raw : std::string(to_string(kind));
}

MarkNormalization normalize_mark(std::string_view raw_mark) {
  const std::string lowered = detail::ascii_lower(detail::trim(raw_mark));
  for (const auto& synonym : kMarkSynonyms) {
    if (synonym.spelling == lowered) return {MarkId{synonym.kind, std::string(to_string(synonym.kind))}, std::nullopt};
  }
  return {MarkId{MarkKind::other, std::string(raw_mark)},
          "mark '" + std::string(raw_mark) + "' not in synonym table; kept as other"};
}

ExtractionOutcome normalize_spec(const Json& document) {
  ExtractionOutcome outcome;
  if (!document.is_object()) {
    outcome.status = ExtractionStatus::missing_required_fields;
    outcome.warnings.push_back("document is not a JSON object");
    return outcome;
  }

  std::optional<std::string> raw_mark;
  if (auto it = document.find("mark"); it != document.end()) {
    if (it->is_string()) {
      raw_mark = it->get<std::string>();
    } else if (it->is_object()) {
      raw_mark = string_member(*it, "type");
    }
  }
  if (!raw_mark || detail::trim(*raw_mark).empty()) {
    outcome.status = ExtractionStatus::missing_required_fields;
    outcome.warnings.push_back("missing required field: mark");
    return outcome;
  }

  VisSpec spec;
  auto mark = normalize_mark(*raw_mark);
  spec.mark = std::move(mark.mark);
  if (mark.warning) outcome.warnings.push_back(*mark.warning);

  if (auto it = document.find("encoding"); it != document.end()) {
    if (it->is_object()) {
      for (const auto& [key, value] : it->items()) {
        const std::string where = "encoding." + key;
        auto channel = parse_channel(key);
        if (!channel) {
          outcome.warnings.push_back(where + ": unknown channel kept in raw_json only");
          continue;
        }
        if (auto def = parse_encoding(value, where, outcome.warnings)) {
          spec.encodings.emplace(*channel, std::move(*def));
        }
      }
    } else {
      outcome.warnings.push_back("encoding is not an object; ignored");
    }
  }

  for (auto& [channel, def] : spec.encodings) {
    if (!def.sort || !def.sort->by_channel) continue;
    if (!spec.encodings.contains(*def.sort->by_channel)) {
      outcome.warnings.push_back("encoding." + std::string(to_string(channel)) + ": sort references absent channel '" +
                                 std::string(to_string(*def.sort->by_channel)) + "'; dropped");
      def.sort->by_channel.reset();
      if (!def.sort->direction) def.sort.reset();
    }
  }

  spec.data = parse_data(document);
  spec.raw_json = document;
  outcome.status = ExtractionStatus::ok;
  outcome.spec = std::move(spec);
  return outcome;
}

ExtractionOutcome extract_spec(std::string_view raw_llm_output) {
  std::optional<Candidate> candidate = first_fenced_object(raw_llm_output);
  if (!candidate) candidate = first_balanced_object(raw_llm_output);
  if (!candidate) {
    ExtractionOutcome outcome;
    const bool any_brace = raw_llm_output.find('{') != std::string_view::npos;
    outcome.status = any_brace ? ExtractionStatus::json_parse_error : ExtractionStatus::no_json_found;
    return outcome;
  }
  ExtractionOutcome outcome = normalize_spec(candidate->document);
  outcome.source_span = candidate->span;
  return outcome;
}

std::string canonical_json(const Json& document) {
  // nlohmann::json stores objects in a std::map, so keys come out sorted.
  return document.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string canonical_json(const VisSpec& spec) { return canonical_json(spec.raw_json); }

std::string_view to_string(MarkKind kind) {
  switch (kind) {
    case MarkKind::bar: return "bar";
    case MarkKind::line: return "line";
    case MarkKind::point: return "point";
    case MarkKind::arc: return "arc";
    case MarkKind::area: return "area";
    case MarkKind::rect: return "rect";
    case MarkKind::boxplot: return "boxplot";
    case MarkKind::tick: return "tick";
    case MarkKind::other: return "other";
  }
  return "other";
}

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::x: return "x";
    case Channel::y: return "y";
    case Channel::color: return "color";
    case Channel::theta: return "theta";
    case Channel::size: return "size";
    case Channel::shape: return "shape";
    case Channel::detail: return "detail";
    case Channel::order: return "order";
  }
  return "x";
}

std::string_view to_string(DataType dtype) {
  switch (dtype) {
    case DataType::quantitative: return "quantitative";
    case DataType::nominal: return "nominal";
    case DataType::ordinal: return "ordinal";
    case DataType::temporal: return "temporal";
  }
  return "nominal";
}

std::string_view to_string(Aggregate aggregate) {
  switch (aggregate) {
    case Aggregate::count: return "count";
    case Aggregate::sum: return "sum";
    case Aggregate::mean: return "mean";
    case Aggregate::median: return "median";
    case Aggregate::min: return "min";
    case Aggregate::max: return "max";
  }
  return "count";
}

std::string_view to_string(SortDirection direction) {
  return direction == SortDirection::ascending ? "ascending" : "descending";
}

std::string_view to_string(ExtractionStatus status) {
  switch (status) {
    case ExtractionStatus::ok: return "ok";
    case ExtractionStatus::no_json_found: return "no_json_found";
    case ExtractionStatus::json_parse_error: return "json_parse_error";
    case ExtractionStatus::missing_required_fields: return "missing_required_fields";
  }
  return "no_json_found";
}

std::optional<Channel> parse_channel(std::string_view text) {
  for (Channel channel : kAllChannels) {
    if (to_string(channel) == text) return channel;
  }
  return std::nullopt;
}

std::optional<DataType> parse_data_type(std::string_view text) {
  const std::string lowered = detail::ascii_lower(detail::trim(text));
  for (const auto& synonym : kDataTypeSynonyms) {
    if (synonym.spelling == lowered) return synonym.dtype;
  }
  return std::nullopt;
}

std::optional<Aggregate> parse_aggregate(std::string_view text) {
  const std::string lowered = detail::ascii_lower(detail::trim(text));
  for (Aggregate aggregate :
       {Aggregate::count, Aggregate::sum, Aggregate::mean, Aggregate::median, Aggregate::min, Aggregate::max}) {
    if (to_string(aggregate) == lowered) return aggregate;
  }
  if (lowered == "average") return Aggregate::mean;
  return std::nullopt;
}

std::optional<ExtractionStatus> parse_extraction_status(std::string_view text) {
  for (ExtractionStatus status : {ExtractionStatus::ok, ExtractionStatus::no_json_found,
                                  ExtractionStatus::json_parse_error, ExtractionStatus::missing_required_fields}) {
    if (to_string(status) == text) return status;
  }
  return std::nullopt;
}

}  // namespace evallm
