#include "evallm/generation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "parallel.hpp"

namespace evallm {

namespace fs = std::filesystem;

namespace {

constexpr Strategy kAllStrategies[] = {Strategy::zero_shot,        Strategy::few_shot,   Strategy::prompt_engineering,
                                       Strategy::chain_of_thought, Strategy::fine_tuned, Strategy::from_scratch};

Json extraction_to_json(const ExtractionOutcome& extraction) {
  Json span = nullptr;
  if (extraction.source_span) span = {extraction.source_span->begin, extraction.source_span->end};
  return {{"status", to_string(extraction.status)}, {"warnings", extraction.warnings}, {"source_span", span}};
}

bool retryable(const TransportResponse& response) {
  return response.status == 0 || response.status == 429 || response.status >= 500;
}

Json::json_pointer pointer(const std::string& text, const char* what) {
  try {
    return Json::json_pointer(text);
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("invalid ") + what + " pointer '" + text + "': " + e.what());
  }
}

std::optional<long> integer_at(const Json& json, const std::string& path) {
  if (path.empty()) return std::nullopt;
  const auto ptr = Json::json_pointer(path);
  if (!json.contains(ptr)) return std::nullopt;
  const Json& value = json.at(ptr);
  if (!value.is_number_integer()) return std::nullopt;
  return value.get<long>();
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::zero_shot: return "zero_shot";
    case Strategy::few_shot: return "few_shot";
    case Strategy::prompt_engineering: return "prompt_engineering";
    case Strategy::chain_of_thought: return "chain_of_thought";
    case Strategy::fine_tuned: return "fine_tuned";
    case Strategy::from_scratch: return "from_scratch";
  }
  return "zero_shot";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  for (Strategy strategy : kAllStrategies) {
    if (to_string(strategy) == text) return strategy;
  }
  return std::nullopt;
}

Json to_json(const EffortConfig& config) {
  Json values = Json::object();
  for (const auto& [strategy, value] : config.strategy_values) values[std::string(to_string(strategy))] = value;
  return {
      {"weights",
       {{"strategy", config.weights.strategy}, {"latency", config.weights.latency}, {"tokens", config.weights.tokens}}},
      {"latency_ceiling_seconds", config.latency_ceiling_seconds},
      {"token_ceiling", config.token_ceiling},
      {"strategy_values", values},
  };
}

EffortConfig effort_config_from_json(const Json& json) {
  EffortConfig config;
  if (auto weights = json.find("weights"); weights != json.end()) {
    config.weights.strategy = weights->value("strategy", config.weights.strategy);
    config.weights.latency = weights->value("latency", config.weights.latency);
    config.weights.tokens = weights->value("tokens", config.weights.tokens);
  }
  config.latency_ceiling_seconds = json.value("latency_ceiling_seconds", config.latency_ceiling_seconds);
  config.token_ceiling = json.value("token_ceiling", config.token_ceiling);
  if (auto values = json.find("strategy_values"); values != json.end()) {
    for (const auto& [name, value] : values->items()) {
      const auto strategy = parse_strategy(name);
      if (!strategy) throw std::invalid_argument("unknown strategy '" + name + "' in effort table");
      config.strategy_values[*strategy] = value.get<double>();
    }
  }
  if (config.latency_ceiling_seconds <= 0 || config.token_ceiling <= 0) {
    throw std::invalid_argument("effort ceilings must be positive");
  }
  const auto& w = config.weights;
  if (w.strategy < 0 || w.latency < 0 || w.tokens < 0) throw std::invalid_argument("effort weights must be >= 0");
  if (std::abs(w.strategy + w.latency + w.tokens - 1.0) > 1e-9) throw std::invalid_argument("effort weights must sum to 1");
  return config;
}

double effort_score(Strategy strategy, std::optional<double> latency_seconds, std::optional<long> total_tokens,
                    const EffortConfig& config) {
  const auto& w = config.weights;
  if (w.strategy < 0 || w.latency < 0 || w.tokens < 0) throw std::invalid_argument("effort weights must be >= 0");
  if (std::abs(w.strategy + w.latency + w.tokens - 1.0) > 1e-9) {
    throw std::invalid_argument("effort weights must sum to 1");
  }
  if (latency_seconds && *latency_seconds < 0) throw std::invalid_argument("latency must be >= 0");
  if (total_tokens && *total_tokens < 0) throw std::invalid_argument("token count must be >= 0");

  struct Component {
    double weight;
    double value;
  };
  std::vector<Component> present;
  const auto base = config.strategy_values.find(strategy);
  if (base == config.strategy_values.end()) throw std::invalid_argument("strategy missing from effort table");
  present.push_back({w.strategy, std::clamp(base->second, 0.0, 1.0)});
  if (latency_seconds) present.push_back({w.latency, std::min(*latency_seconds / config.latency_ceiling_seconds, 1.0)});
  if (total_tokens) {
    present.push_back({w.tokens, std::min(static_cast<double>(*total_tokens) / config.token_ceiling, 1.0)});
  }

  double weight_sum = 0;
  for (const auto& c : present) weight_sum += c.weight;
  double score = 0;
  for (const auto& c : present) {
    score += weight_sum > 0 ? c.weight * c.value / weight_sum : c.value / static_cast<double>(present.size());
  }
  return std::clamp(score, 0.0, 1.0);
}

Json to_json(const GenerationRecord& record) {
  Json tokens = nullptr;
  if (record.token_counts) tokens = {{"prompt", record.token_counts->prompt}, {"completion", record.token_counts->completion}};
  Json json = {
      {"instance_id", record.instance_id},
      {"model_name", record.model_name},
      {"strategy", to_string(record.strategy)},
      {"raw_output", record.raw_output},
      {"extraction", extraction_to_json(record.extraction)},
      {"latency_ms", record.latency_ms},
      {"token_counts", tokens},
      {"effort_score", record.effort_score},
      {"notes", record.notes},
  };
  if (record.image) json["image"] = *record.image;
  return json;
}

GenerationRecord generation_record_from_json(const Json& json) {
  if (!json.is_object()) throw std::invalid_argument("record must be an object");
  GenerationRecord record;
  record.instance_id = json.at("instance_id").get<std::string>();
  if (record.instance_id.empty()) throw std::invalid_argument("record instance_id is empty");
  record.model_name = json.value("model_name", std::string{});
  const auto strategy = parse_strategy(json.value("strategy", std::string{"zero_shot"}));
  if (!strategy) throw std::invalid_argument("unknown strategy in record " + record.instance_id);
  record.strategy = *strategy;
  record.raw_output = json.value("raw_output", std::string{});
  record.extraction = extract_spec(record.raw_output);
  if (auto stored = json.find("extraction"); stored != json.end() && stored->contains("status")) {
    const auto status = parse_extraction_status(stored->at("status").get<std::string>());
    if (status != record.extraction.status) {
      throw std::invalid_argument("record " + record.instance_id +
                                  ": stored extraction status disagrees with raw_output");
    }
  }
  record.latency_ms = json.value("latency_ms", 0.0);
  if (record.latency_ms < 0) throw std::invalid_argument("record " + record.instance_id + ": negative latency");
  if (auto tokens = json.find("token_counts"); tokens != json.end() && tokens->is_object()) {
    record.token_counts = TokenCounts{tokens->value("prompt", 0L), tokens->value("completion", 0L)};
  }
  record.effort_score = json.value("effort_score", 0.0);
  if (record.effort_score < 0 || record.effort_score > 1) {
    throw std::invalid_argument("record " + record.instance_id + ": effort_score outside [0,1]");
  }
  if (auto notes = json.find("notes"); notes != json.end() && notes->is_array()) {
    record.notes = notes->get<std::vector<std::string>>();
  }
  if (auto image = json.find("image"); image != json.end() && image->is_string()) record.image = image->get<std::string>();
  return record;
}

Json to_json(const ExperimentBundle& bundle) {
  Json records = Json::array();
  for (const auto& record : bundle.records) records.push_back(to_json(record));
  return {
      {"format_version", kExperimentFormatVersion},
      {"experiment_id", bundle.experiment_id},
      {"model_name", bundle.model_name},
      {"strategy", to_string(bundle.strategy)},
      {"corpus_name", bundle.corpus_name},
      {"records", records},
  };
}

BundleParse parse_experiment_bundle(const Json& json) {
  BundleParse parse;
  if (!json.is_object()) {
    parse.issues.push_back({0, "bundle must be a JSON object"});
    return parse;
  }
  ExperimentBundle bundle;
  bundle.experiment_id = json.value("experiment_id", std::string{});
  bundle.model_name = json.value("model_name", std::string{});
  bundle.corpus_name = json.value("corpus_name", std::string{});
  if (bundle.experiment_id.empty()) parse.issues.push_back({0, "experiment_id is required"});
  const auto strategy = parse_strategy(json.value("strategy", std::string{"zero_shot"}));
  if (!strategy) parse.issues.push_back({0, "unknown strategy"});
  bundle.strategy = strategy.value_or(Strategy::zero_shot);
  if (auto version = json.find("format_version"); version != json.end() && version->get<int>() > kExperimentFormatVersion) {
    parse.issues.push_back({0, "unsupported experiment format_version"});
  }
  const auto records = json.find("records");
  if (records == json.end() || !records->is_array()) {
    parse.issues.push_back({0, "records array is required"});
    return parse;
  }
  for (std::size_t i = 0; i < records->size(); ++i) {
    try {
      bundle.records.push_back(generation_record_from_json((*records)[i]));
    } catch (const std::exception& e) {
      parse.issues.push_back({i, e.what()});
    }
  }
  if (parse.issues.empty()) parse.bundle = std::move(bundle);
  return parse;
}

EndpointConfig endpoint_config_from_json(const Json& json) {
  EndpointConfig config;
  config.base_url = json.value("base_url", std::string{});
  if (config.base_url.empty()) throw std::invalid_argument("endpoint base_url is required");
  config.path = json.value("path", config.path);
  config.api_key_env = json.value("api_key_env", config.api_key_env);
  config.timeout_seconds = json.value("timeout_seconds", config.timeout_seconds);
  config.max_retries = json.value("max_retries", config.max_retries);
  config.retry_backoff_seconds = json.value("retry_backoff_seconds", config.retry_backoff_seconds);
  config.request_template = json.value("request_template", Json::object());
  config.prompt_pointer = json.value("prompt_pointer", config.prompt_pointer);
  config.response_pointer = json.value("response_pointer", config.response_pointer);
  config.prompt_tokens_pointer = json.value("prompt_tokens_pointer", config.prompt_tokens_pointer);
  config.completion_tokens_pointer = json.value("completion_tokens_pointer", config.completion_tokens_pointer);
  if (config.timeout_seconds <= 0) throw std::invalid_argument("endpoint timeout must be > 0");
  if (config.max_retries < 0) throw std::invalid_argument("endpoint max_retries must be >= 0");
  if (config.retry_backoff_seconds < 0) throw std::invalid_argument("endpoint retry_backoff_seconds must be >= 0");
  pointer(config.prompt_pointer, "prompt");
  pointer(config.response_pointer, "response");
  return config;
}

TransportResponse HttpTransport::post(const std::string& base_url, const std::string& path,
                                      const std::map<std::string, std::string>& headers, const std::string& body,
                                      double timeout_seconds) {
  httplib::Client client(base_url);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers request_headers(headers.begin(), headers.end());
  auto result = client.Post(path, request_headers, body, "application/json");
  if (!result) return {0, {}, httplib::to_string(result.error())};
  return {result->status, result->body, {}};
}

GenerationRecord replay(const BenchmarkInstance& instance, const GenerationSettings& settings,
                        const std::string& canned_output, double latency_ms, std::optional<TokenCounts> tokens) {
  GenerationRecord record;
  record.instance_id = instance.id;
  record.model_name = settings.model_name;
  record.strategy = settings.strategy;
  record.raw_output = canned_output;
  record.extraction = extract_spec(canned_output);
  record.latency_ms = latency_ms;
  record.token_counts = tokens;
  record.effort_score =
      effort_score(settings.strategy, latency_ms / 1000.0,
                   tokens ? std::optional<long>(tokens->total()) : std::nullopt, settings.effort);
  return record;
}

GenerationRecord generate(const BenchmarkInstance& instance, const GenerationSettings& settings,
                          const EndpointConfig& endpoint, Transport& transport) {
  Json body = endpoint.request_template.is_object() ? endpoint.request_template : Json::object();
  body[pointer(endpoint.prompt_pointer, "prompt")] = render_prompt(instance, settings.prompt_template);
  const std::string payload = body.dump();

  std::map<std::string, std::string> headers;
  if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers["Authorization"] = std::string("Bearer ") + key;
  }

  std::vector<std::string> notes;
  std::string output;
  std::optional<TokenCounts> tokens;
  double latency_ms = 0;
  const int attempts = endpoint.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    TransportResponse response = transport.post(endpoint.base_url, endpoint.path, headers, payload,
                                                endpoint.timeout_seconds);
    latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (response.status >= 200 && response.status < 300) {
      Json parsed = Json::parse(response.body, nullptr, false);
      const auto text_ptr = Json::json_pointer(endpoint.response_pointer);
      if (!parsed.is_discarded() && parsed.contains(text_ptr) && parsed.at(text_ptr).is_string()) {
        output = parsed.at(text_ptr).get<std::string>();
        const auto prompt_tokens = integer_at(parsed, endpoint.prompt_tokens_pointer);
        const auto completion_tokens = integer_at(parsed, endpoint.completion_tokens_pointer);
        if (prompt_tokens && completion_tokens) tokens = TokenCounts{*prompt_tokens, *completion_tokens};
      } else {
        notes.push_back("response had no generated text at " + endpoint.response_pointer);
      }
      break;
    }
    const std::string failure = response.status == 0 ? "transport error: " + response.error
                                                     : "HTTP status " + std::to_string(response.status);
    if (!retryable(response) || attempt == attempts) {
      notes.push_back(failure + " after " + std::to_string(attempt) + " attempt(s)");
      break;
    }
    const double pause = std::min(30.0, endpoint.retry_backoff_seconds * std::pow(2.0, attempt - 1));
    if (pause > 0) std::this_thread::sleep_for(std::chrono::duration<double>(pause));
  }

  GenerationRecord record = replay(instance, settings, output, latency_ms, tokens);
  record.notes = std::move(notes);
  return record;
}

std::vector<GenerationRecord> replay_directory(const Corpus& corpus, const GenerationSettings& settings,
                                               const fs::path& canned_dir) {
  if (!fs::is_directory(canned_dir)) throw std::runtime_error("replay directory not found: " + canned_dir.string());
  return generate_batch(corpus, 1, [&](const BenchmarkInstance& instance) {
    const fs::path file = canned_dir / (instance.id + ".txt");
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      GenerationRecord record = replay(instance, settings, "");
      record.notes.push_back("no canned output for instance");
      return record;
    }
    std::ostringstream text;
    text << in.rdbuf();
    GenerationRecord record = replay(instance, settings, text.str());
    if (fs::exists(canned_dir / (instance.id + ".png"))) record.image = instance.id + ".png";
    return record;
  });
}

std::vector<GenerationRecord> generate_batch(const Corpus& corpus, int parallelism,
                                             const std::function<GenerationRecord(const BenchmarkInstance&)>& produce) {
  std::vector<GenerationRecord> records(corpus.instances.size());
  detail::parallel_for(corpus.instances.size(), parallelism,
                       [&](std::size_t i) { records[i] = produce(corpus.instances[i]); });
  return records;
}

}  // namespace evallm
