#include "evallm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "text_util.hpp"

namespace evallm {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPlaceholders[] = {"utterance", "columns", "sample_rows", "output_format_instructions"};

constexpr std::string_view kOutputFormatInstructions =
    "Respond with a single JSON object containing a Vega-Lite chart specification. "
    "Use only the columns listed in the input. Do not add explanations.";

Json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file: " + path.string());
  Json parsed = Json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) throw CorpusError("corpus file is not valid JSON: " + path.string());
  return parsed;
}

struct InstanceParse {
  std::optional<BenchmarkInstance> instance;
  std::string code;
  std::string message;
};

InstanceParse fail(std::string code, std::string message) { return {std::nullopt, std::move(code), std::move(message)}; }

InstanceParse parse_dataset(const Json& json, TabularDataset& dataset) {
  if (!json.is_object()) return fail("invalid_dataset", "dataset must be an object");
  dataset.name = json.value("name", std::string{});
  const auto columns = json.find("columns");
  if (columns == json.end() || !columns->is_array() || columns->empty()) {
    return fail("invalid_dataset", "dataset needs at least one column");
  }
  std::set<std::string> seen;
  for (const auto& column : *columns) {
    if (!column.is_object() || !column.contains("name") || !column["name"].is_string()) {
      return fail("invalid_dataset", "column entries need a string name");
    }
    Column parsed{column["name"].get<std::string>(), ColumnType::string};
    if (!seen.insert(parsed.name).second) return fail("invalid_dataset", "duplicate column name '" + parsed.name + "'");
    const std::string dtype = column.value("dtype", std::string{"string"});
    const auto type = parse_column_type(dtype);
    if (!type) return fail("invalid_dataset", "column '" + parsed.name + "' has unknown dtype '" + dtype + "'");
    parsed.dtype = *type;
    dataset.columns.push_back(std::move(parsed));
  }
  if (auto rows = json.find("rows"); rows != json.end()) {
    if (!rows->is_array()) return fail("invalid_dataset", "rows must be an array");
    for (std::size_t r = 0; r < rows->size(); ++r) {
      const Json& row = (*rows)[r];
      if (!row.is_array() || row.size() != dataset.columns.size()) {
        return fail("invalid_dataset", "row " + std::to_string(r) + " does not have " +
                                           std::to_string(dataset.columns.size()) + " values");
      }
      dataset.rows.emplace_back(row.begin(), row.end());
    }
  }
  return {};
}

InstanceParse parse_instance(const Json& json) {
  if (!json.is_object()) return fail("invalid_instance", "instance must be an object");
  BenchmarkInstance instance;
  const auto id = json.find("id");
  if (id == json.end() || !id->is_string() || id->get<std::string>().empty()) {
    return fail("missing_id", "instance id must be a non-empty string");
  }
  instance.id = id->get<std::string>();

  const auto utterance = json.find("utterance");
  if (utterance == json.end() || !utterance->is_string() || detail::trim(utterance->get<std::string>()).empty()) {
    return fail("empty_utterance", "utterance must be non-empty");
  }
  instance.utterance = utterance->get<std::string>();

  if (auto dataset = json.find("dataset"); dataset != json.end()) {
    if (auto parsed = parse_dataset(*dataset, instance.dataset); !parsed.code.empty()) return parsed;
  } else {
    return fail("invalid_dataset", "dataset missing");
  }

  const auto gt = json.find("ground_truth");
  if (gt == json.end()) return fail("missing_required_fields", "ground_truth missing");
  ExtractionOutcome normalized = normalize_spec(*gt);
  if (!normalized.ok()) {
    std::string message = "ground truth failed normalization";
    if (!normalized.warnings.empty()) message += ": " + normalized.warnings.front();
    return fail(std::string(to_string(normalized.status)), message);
  }
  instance.ground_truth = std::move(*normalized.spec);
  instance.ground_truth_warnings = std::move(normalized.warnings);

  if (auto difficulty = json.find("difficulty"); difficulty != json.end() && difficulty->is_string()) {
    instance.difficulty = difficulty->get<std::string>();
  }
  if (auto image = json.find("ground_truth_image"); image != json.end() && image->is_string()) {
    instance.ground_truth_image = image->get<std::string>();
  }
  return {std::move(instance), {}, {}};
}

void add_instances(const std::vector<Json>& documents, CorpusLoad& load) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    InstanceParse parsed = parse_instance(documents[i]);
    const std::string id = documents[i].is_object() ? documents[i].value("id", std::string{}) : std::string{};
    if (!parsed.instance) {
      load.errors.push_back({i, id, parsed.code, parsed.message});
      continue;
    }
    if (!ids.insert(parsed.instance->id).second) {
      load.errors.push_back({i, id, "duplicate_id", "duplicate instance id '" + id + "'"});
      continue;
    }
    load.corpus.instances.push_back(std::move(*parsed.instance));
  }
}

std::string render_value(const Json& value) { return value.is_string() ? value.get<std::string>() : value.dump(); }

}  // namespace

std::vector<std::string> TabularDataset::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& column : columns) names.push_back(column.name);
  return names;
}

const BenchmarkInstance* Corpus::find(std::string_view id) const {
  auto it = std::find_if(instances.begin(), instances.end(), [&](const auto& instance) { return instance.id == id; });
  return it == instances.end() ? nullptr : &*it;
}

CorpusLoad corpus_from_json(const Json& bundle, const fs::path& root) {
  if (!bundle.is_object()) throw CorpusError("corpus bundle must be a JSON object");
  if (auto version = bundle.find("format_version"); version != bundle.end()) {
    if (!version->is_number_integer() || version->get<int>() > kCorpusFormatVersion) {
      throw CorpusError("unsupported corpus format_version " + version->dump());
    }
  }
  const auto instances = bundle.find("instances");
  if (instances == bundle.end() || !instances->is_array()) throw CorpusError("corpus bundle needs an instances array");

  CorpusLoad load;
  load.corpus.name = bundle.value("corpus_name", std::string{});
  load.corpus.root = root;
  add_instances(std::vector<Json>(instances->begin(), instances->end()), load);
  return load;
}

CorpusLoad load_corpus(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    if (ec) throw CorpusError("cannot list corpus directory: " + path.string());
    std::sort(files.begin(), files.end());
    std::vector<Json> documents;
    documents.reserve(files.size());
    for (const auto& file : files) documents.push_back(read_json_file(file));

    CorpusLoad load;
    load.corpus.name = fs::absolute(path).lexically_normal().filename().string();
    if (load.corpus.name.empty()) load.corpus.name = fs::absolute(path).parent_path().filename().string();
    load.corpus.root = path;
    add_instances(documents, load);
    return load;
  }
  if (!fs::is_regular_file(path, ec)) throw CorpusError("corpus path not found: " + path.string());
  CorpusLoad load = corpus_from_json(read_json_file(path), path.parent_path());
  if (load.corpus.name.empty()) load.corpus.name = path.stem().string();
  return load;
}

Json instance_to_json(const BenchmarkInstance& instance) {
  Json columns = Json::array();
  for (const auto& column : instance.dataset.columns) {
    columns.push_back({{"name", column.name}, {"dtype", to_string(column.dtype)}});
  }
  Json rows = Json::array();
  for (const auto& row : instance.dataset.rows) rows.push_back(Json(row));

  Json json = {
      {"id", instance.id},
      {"utterance", instance.utterance},
      {"dataset", {{"name", instance.dataset.name}, {"columns", columns}, {"rows", rows}}},
      {"ground_truth", instance.ground_truth.raw_json},
  };
  if (instance.difficulty) json["difficulty"] = *instance.difficulty;
  if (instance.ground_truth_image) json["ground_truth_image"] = *instance.ground_truth_image;
  return json;
}

Json corpus_to_json(const Corpus& corpus) {
  Json instances = Json::array();
  for (const auto& instance : corpus.instances) instances.push_back(instance_to_json(instance));
  return {{"format_version", kCorpusFormatVersion}, {"corpus_name", corpus.name}, {"instances", instances}};
}

PromptTemplate default_prompt_template() {
  return PromptTemplate{
      "Below is an instruction that describes a task, paired with an input that provides further context. "
      "Write a response that appropriately completes the request.\n"
      "\n"
      "### Instruction:\n"
      "Generate the most pertinent visualization for the user request and dataset below. "
      "{output_format_instructions}\n"
      "\n"
      "### Input:\n"
      "User request: {utterance}\n"
      "Columns: {columns}\n"
      "Sample rows:\n"
      "{sample_rows}\n"
      "\n"
      "### Response:\n",
      20};
}

void validate_template(const PromptTemplate& prompt_template) {
  if (prompt_template.sample_row_limit < 0) throw std::invalid_argument("sample_row_limit must be >= 0");
  const std::string& text = prompt_template.template_text;
  for (std::size_t open = text.find('{'); open != std::string::npos; open = text.find('{', open + 1)) {
    const std::size_t close = text.find('}', open);
    if (close == std::string::npos) break;
    const std::string_view name(text.data() + open + 1, close - open - 1);
    const bool identifier = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return std::islower(static_cast<unsigned char>(c)) || c == '_';
    });
    if (!identifier) continue;
    if (std::find(std::begin(kPlaceholders), std::end(kPlaceholders), name) == std::end(kPlaceholders)) {
      throw std::invalid_argument("unknown template placeholder {" + std::string(name) + "}");
    }
  }
}

std::string render_prompt(const BenchmarkInstance& instance, const PromptTemplate& prompt_template) {
  std::string columns;
  for (const auto& column : instance.dataset.columns) {
    if (!columns.empty()) columns += ", ";
    columns += column.name + " (" + std::string(to_string(column.dtype)) + ")";
  }

  std::string sample_rows;
  const std::size_t limit =
      std::min(instance.dataset.rows.size(), static_cast<std::size_t>(std::max(prompt_template.sample_row_limit, 0)));
  for (std::size_t r = 0; r < limit; ++r) {
    std::string line;
    for (const auto& value : instance.dataset.rows[r]) {
      if (!line.empty()) line += ", ";
      line += render_value(value);
    }
    if (!sample_rows.empty()) sample_rows += '\n';
    sample_rows += line;
  }
  if (limit == 0) sample_rows = "(none)";

  const std::pair<std::string_view, std::string_view> substitutions[] = {
      {"utterance", instance.utterance},
      {"columns", columns},
      {"sample_rows", sample_rows},
      {"output_format_instructions", kOutputFormatInstructions},
  };

  // Single left-to-right pass so substituted text is never re-expanded.
  const std::string& text = prompt_template.template_text;
  std::string out;
  out.reserve(text.size() + instance.utterance.size() + columns.size() + sample_rows.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      bool replaced = false;
      for (const auto& [name, value] : substitutions) {
        if (text.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < text.size() &&
            text[i + 1 + name.size()] == '}') {
          out += value;
          i += name.size() + 2;
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += text[i++];
  }
  return out;
}

std::string_view to_string(ColumnType type) {
  switch (type) {
    case ColumnType::number: return "number";
    case ColumnType::string: return "string";
    case ColumnType::date: return "date";
    case ColumnType::boolean: return "boolean";
  }
  return "string";
}

std::optional<ColumnType> parse_column_type(std::string_view text) {
  for (ColumnType type : {ColumnType::number, ColumnType::string, ColumnType::date, ColumnType::boolean}) {
    if (to_string(type) == text) return type;
  }
  return std::nullopt;
}

}  // namespace evallm
