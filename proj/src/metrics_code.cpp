#include "evallm/metrics_code.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

namespace evallm {

namespace {

std::string shell_quote(const std::string& text) {
  std::string quoted = "'";
  for (char c : text) {
    if (c == '\'') {
      quoted += "'\\''";
    } else {
      quoted += c;
    }
  }
  return quoted + "'";
}

// Runs the renderer on the canonical spec. Returns true on exit code 0.
bool run_renderer(const RendererHook& renderer, const VisSpec& spec) {
  static std::atomic<unsigned> counter{0};
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / ("evallm-spec-" + std::to_string(::getpid()) + "-" +
                                                     std::to_string(counter.fetch_add(1)) + ".json");
  {
    std::ofstream out(path, std::ios::binary);
    out << canonical_json(spec) << '\n';
  }
  std::string command = renderer.command_template;
  const std::string placeholder = "{spec}";
  if (auto at = command.find(placeholder); at != std::string::npos) {
    command.replace(at, placeholder.size(), shell_quote(path.string()));
  } else {
    command += " " + shell_quote(path.string());
  }
  const int status = std::system(command.c_str());
  std::error_code ec;
  fs::remove(path, ec);
  if (status == -1) throw ConfigError("cannot launch renderer: " + renderer.command_template);
  if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
    throw ConfigError("renderer command not found: " + renderer.command_template);
  }
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

std::size_t lcs_length(std::span<const Token> a, std::span<const Token> b) {
  std::vector<std::size_t> previous(b.size() + 1, 0), current(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      current[j] = a[i - 1] == b[j - 1] ? previous[j - 1] + 1 : std::max(previous[j], current[j - 1]);
    }
    std::swap(previous, current);
  }
  return previous[b.size()];
}

std::map<std::vector<Token>, std::size_t> ngram_counts(std::span<const Token> tokens, std::size_t n) {
  std::map<std::vector<Token>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<Token>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

double bleu(std::span<const Token> reference, std::span<const Token> candidate) {
  constexpr std::size_t kMaxOrder = 4;
  double log_sum = 0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    const auto candidate_counts = ngram_counts(candidate, n);
    const auto reference_counts = ngram_counts(reference, n);
    std::size_t clipped = 0;
    std::size_t total = 0;
    for (const auto& [gram, count] : candidate_counts) {
      total += count;
      auto it = reference_counts.find(gram);
      if (it != reference_counts.end()) clipped += std::min(count, it->second);
    }
    double precision;
    if (n == 1) {
      if (total == 0 || clipped == 0) return 0.0;
      precision = static_cast<double>(clipped) / static_cast<double>(total);
    } else {
      precision = static_cast<double>(clipped + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(precision) / static_cast<double>(kMaxOrder);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum);
}

void collect_paths(const Json& node, const std::string& prefix, std::set<std::string>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      std::string path = prefix.empty() ? key : prefix + "." + key;
      out.insert(path);
      collect_paths(value, path, out);
    }
  } else if (node.is_array()) {
    const std::string path = prefix + "[]";
    for (const auto& element : node) collect_paths(element, path, out);
  }
}

// Alternative reading that also counts enumerated keyword values
// (mark / type / aggregate strings) as structure.
void collect_keyword_values(const Json& node, const std::string& prefix, std::set<std::string>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      std::string path = prefix.empty() ? key : prefix + "." + key;
      if (value.is_string() && (key == "mark" || key == "type" || key == "aggregate")) {
        out.insert(path + "=" + value.get<std::string>());
      }
      collect_keyword_values(value, path, out);
    }
  } else if (node.is_array()) {
    for (const auto& element : node) collect_keyword_values(element, prefix + "[]", out);
  }
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t shared = 0;
  for (const auto& key : a) shared += b.count(key);
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

Json difference(const std::set<std::string>& a, const std::set<std::string>& b) {
  Json out = Json::array();
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

LevelScore syntax_correctness(const ExtractionOutcome& extraction, const std::optional<RendererHook>& renderer) {
  auto fail = [](std::string stage, std::string message) {
    return LevelScore::computed(LevelId::syntax_correctness, 0.0, {{"stage", std::move(stage)}, {"message", message}});
  };
  if (!extraction.ok()) {
    return fail(std::string(to_string(extraction.status)), "extraction failed");
  }
  const VisSpec& spec = *extraction.spec;
  if (spec.encodings.empty()) {
    return fail("missing_required_fields", "no encoding channel with a field or count aggregate");
  }
  for (const auto& [channel, encoding] : spec.encodings) {
    if (encoding.dtype_source == DataTypeSource::unrecognized) {
      return fail("invalid_encoding_type", "channel " + std::string(to_string(channel)) + " has an unknown type");
    }
  }
  if (renderer && !run_renderer(*renderer, spec)) {
    return fail("render_failed", "renderer exited with a non-zero status");
  }
  Json details = {{"stage", "ok"}, {"renderer", renderer.has_value()}};
  return LevelScore::computed(LevelId::syntax_correctness, 100.0, std::move(details));
}

std::vector<Token> tokenize_json_text(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '"') {
      std::size_t end = i + 1;
      while (end < text.size() && text[end] != '"') end += text[end] == '\\' ? 2 : 1;
      end = std::min(end + 1, text.size());
      tokens.push_back({TokenClass::string_literal, std::string(text.substr(i, end - i))});
      i = end;
    } else if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t end = i + 1;
      while (end < text.size() && (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.' ||
                                   text[end] == 'e' || text[end] == 'E' || text[end] == '+' || text[end] == '-')) {
        ++end;
      }
      tokens.push_back({TokenClass::number, std::string(text.substr(i, end - i))});
      i = end;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t end = i + 1;
      while (end < text.size() && std::isalpha(static_cast<unsigned char>(text[end]))) ++end;
      tokens.push_back({TokenClass::keyword, std::string(text.substr(i, end - i))});
      i = end;
    } else {
      tokens.push_back({TokenClass::punctuation, std::string(1, c)});
      ++i;
    }
  }
  return tokens;
}

CodeSimilarityParts code_similarity_tokens(std::span<const Token> gt, std::span<const Token> gen) {
  if (gt.empty() && gen.empty()) return {1.0, 1.0, 100.0};
  if (gt.empty() || gen.empty()) return {0.0, 0.0, 0.0};
  CodeSimilarityParts parts;
  parts.lcs_ratio = 2.0 * static_cast<double>(lcs_length(gt, gen)) / static_cast<double>(gt.size() + gen.size());
  parts.bleu = bleu(gt, gen);
  parts.score = 100.0 * (parts.lcs_ratio + parts.bleu) / 2.0;
  return parts;
}

LevelScore code_similarity(const VisSpec& gt, const VisSpec& gen) {
  const auto gt_tokens = tokenize_json_text(canonical_json(gt));
  const auto gen_tokens = tokenize_json_text(canonical_json(gen));
  const auto parts = code_similarity_tokens(gt_tokens, gen_tokens);
  Json details = {
      {"lcs_ratio", parts.lcs_ratio},
      {"bleu", parts.bleu},
      {"gt_tokens", gt_tokens.size()},
      {"gen_tokens", gen_tokens.size()},
  };
  return LevelScore::computed(LevelId::code_similarity, parts.score, std::move(details));
}

std::set<std::string> key_paths(const Json& document) {
  std::set<std::string> paths;
  collect_paths(document, "", paths);
  return paths;
}

LevelScore grammar_similarity(const VisSpec& gt, const VisSpec& gen) {
  const auto gt_keys = key_paths(gt.raw_json);
  const auto gen_keys = key_paths(gen.raw_json);

  std::set<std::string> gt_with_values = gt_keys;
  std::set<std::string> gen_with_values = gen_keys;
  collect_keyword_values(gt.raw_json, "", gt_with_values);
  collect_keyword_values(gen.raw_json, "", gen_with_values);

  Json details = {
      {"only_in_gt", difference(gt_keys, gen_keys)},
      {"only_in_gen", difference(gen_keys, gt_keys)},
      {"gt_key_count", gt_keys.size()},
      {"gen_key_count", gen_keys.size()},
      {"jaccard_with_keyword_values", 100.0 * jaccard(gt_with_values, gen_with_values)},
  };
  if (gt_keys.empty() && gen_keys.empty()) details["note"] = "both key sets empty; similarity defined as 100";
  return LevelScore::computed(LevelId::grammar_similarity, 100.0 * jaccard(gt_keys, gen_keys), std::move(details));
}

}  // namespace evallm
