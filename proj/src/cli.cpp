#include "evallm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "evallm/service.hpp"
#include "evallm/store.hpp"

namespace evallm {

namespace fs = std::filesystem;

namespace {

struct CliError {
  std::string code;
  std::string message;
};

struct Options {
  std::string store = "evallm-store";
  std::string config;
  int parallelism = 1;
  bool quiet = false;

  std::string path;
  std::string corpus;
  std::string endpoint;
  std::string replay_dir;
  std::string model;
  std::string strategy = "zero_shot";
  std::string experiment;
  std::string template_file;
  std::string format = "table";
  std::string experiments;
  std::vector<std::string> report_files;
  std::string out_file;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

Json parse_json_text(const std::string& text, const std::string& origin) {
  Json json = Json::parse(text, nullptr, false);
  if (json.is_discarded()) throw CliError{"invalid", origin + " is not valid JSON"};
  return json;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> ids;
  std::istringstream in(text);
  std::string id;
  while (std::getline(in, id, ',')) {
    if (!id.empty()) ids.push_back(id);
  }
  return ids;
}

std::string default_experiment_id(const std::string& model, const std::string& strategy) {
  std::string id = model + "-" + strategy;
  for (char& c : id) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
    if (!keep) c = '-';
  }
  return id;
}

PipelineConfig pipeline_config(const Options& options) {
  if (options.config.empty()) return {};
  return load_pipeline_config(options.config);
}

void print_issues(std::ostream& err, const std::vector<EvaluationIssue>& issues) {
  for (const auto& issue : issues) {
    err << "evallm: warning[" << issue.code << "]: " << issue.instance_id << ": " << issue.message << "\n";
  }
}

int cmd_ingest(const Options& options, Workspace& workspace, std::ostream& out) {
  const fs::path path(options.path);
  if (!fs::exists(path)) throw CliError{"io", "no such path: " + path.string()};
  if (!fs::is_directory(path)) {
    const Json json = parse_json_text(read_file(path), path.string());
    if (json.is_object() && json.contains("kind")) {
      const ExperimentSummary summary = workspace.import_export(json);
      out << "imported experiment " << summary.experiment_id << " (" << summary.n_records << " records, evaluated)\n";
      return kExitOk;
    }
    if (json.is_object() && json.contains("records")) {
      const ExperimentSummary summary = workspace.import_bundle(json, path.parent_path());
      out << "imported experiment " << summary.experiment_id << " (" << summary.n_records << " records)\n";
      return kExitOk;
    }
  }
  const Corpus corpus = workspace.ingest_corpus(path);
  out << "ingested corpus " << corpus.name << " (" << corpus.instances.size() << " instances)\n";
  return kExitOk;
}

int cmd_generate(const Options& options, Workspace& workspace, std::ostream& out, std::ostream& err) {
  if (options.endpoint.empty() == options.replay_dir.empty()) {
    throw CliError{"usage", "generate needs exactly one of --endpoint or --replay"};
  }
  const Corpus corpus = workspace.corpus(options.corpus);
  GenerationSettings settings;
  settings.model_name = options.model;
  const auto strategy = parse_strategy(options.strategy);
  if (!strategy) throw CliError{"usage", "unknown strategy '" + options.strategy + "'"};
  settings.strategy = *strategy;
  settings.effort = workspace.config().effort;
  if (!options.template_file.empty()) {
    settings.prompt_template.template_text = read_file(options.template_file);
    try {
      validate_template(settings.prompt_template);
    } catch (const std::invalid_argument& e) {
      throw CliError{"invalid", e.what()};
    }
  }

  ExperimentBundle bundle;
  bundle.experiment_id =
      options.experiment.empty() ? default_experiment_id(options.model, options.strategy) : options.experiment;
  bundle.model_name = options.model;
  bundle.strategy = *strategy;
  bundle.corpus_name = corpus.name;
  fs::path bundle_root;
  if (!options.replay_dir.empty()) {
    bundle.records = replay_directory(corpus, settings, options.replay_dir);
    bundle_root = options.replay_dir;
  } else {
    EndpointConfig endpoint;
    try {
      endpoint = endpoint_config_from_json(parse_json_text(read_file(options.endpoint), options.endpoint));
    } catch (const std::invalid_argument& e) {
      throw CliError{"config", e.what()};
    }
    HttpTransport transport;
    std::atomic<int> done{0};
    std::mutex progress_mutex;
    const int total = static_cast<int>(corpus.instances.size());
    bundle.records = generate_batch(corpus, options.parallelism, [&](const BenchmarkInstance& instance) {
      GenerationRecord record = generate(instance, settings, endpoint, transport);
      const int finished = ++done;
      if (!options.quiet) {
        std::lock_guard lock(progress_mutex);
        err << "evallm: generated " << finished << "/" << total << "\n";
      }
      return record;
    });
  }
  const ExperimentSummary summary = workspace.save_experiment(bundle, bundle_root);
  out << "created experiment " << summary.experiment_id << " (" << summary.n_records << " records)\n";
  return kExitOk;
}

int cmd_evaluate(const Options& options, Workspace& workspace, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const EvaluateOutcome outcome = workspace.evaluate(options.experiment, options.parallelism);
  print_issues(err, outcome.issues);
  if (!options.quiet) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    err << "evallm: evaluated " << outcome.n_results << " instances in " << seconds << " s\n";
  }
  out << "evaluated experiment " << options.experiment << " (" << outcome.n_results << " results)\n";
  return kExitOk;
}

int cmd_report(const Options& options, Workspace& workspace, std::ostream& out) {
  const ModelReport report = workspace.report(options.experiment);
  if (options.format == "json") {
    out << canonical_json(to_json(report)) << "\n";
  } else {
    out << render_table(report);
  }
  return kExitOk;
}

int cmd_compare(const Options& options, Workspace& workspace, std::istream& in, std::ostream& out) {
  std::vector<ModelReport> reports;
  for (const auto& id : split_ids(options.experiments)) reports.push_back(workspace.report(id));
  for (const auto& file : options.report_files) {
    std::string text;
    if (file == "-") {
      std::ostringstream buffer;
      buffer << in.rdbuf();
      text = buffer.str();
    } else {
      text = read_file(file);
    }
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        reports.push_back(model_report_from_json(parse_json_text(line, file == "-" ? "stdin" : file)));
      } catch (const std::invalid_argument& e) {
        throw CliError{"invalid", e.what()};
      }
    }
  }
  if (reports.empty()) throw CliError{"usage", "compare needs --experiments or --reports"};
  const Comparison comparison = compare(std::move(reports));
  if (options.format == "json") {
    out << canonical_json(to_json(comparison)) << "\n";
  } else {
    out << render_table(comparison);
  }
  return kExitOk;
}

int cmd_export(const Options& options, Workspace& workspace, std::ostream& out) {
  const Json document = workspace.export_experiment(options.experiment);
  write_file_atomic(options.out_file, canonical_json(document) + "\n");
  out << "exported experiment " << options.experiment << " to " << options.out_file << "\n";
  return kExitOk;
}

Service* g_running_service = nullptr;

void handle_signal(int) {
  if (g_running_service) g_running_service->stop();
}

int cmd_serve(const Options& options, Workspace& workspace, std::ostream& err) {
  ServiceOptions service_options;
  service_options.host = options.host;
  service_options.port = options.port;
  service_options.parallelism = options.parallelism;
  if (!options.static_dir.empty()) service_options.static_dir = options.static_dir;
  Service service(workspace, service_options);
  const int port = service.bind();
  if (port < 0) throw CliError{"io", "cannot bind " + options.host + ":" + std::to_string(options.port)};
  if (!options.quiet) err << "evallm: serving " << workspace.root().string() << " on http://" << options.host << ":" << port << "\n";
  g_running_service = &service;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  service.listen();
  g_running_service = nullptr;
  return kExitOk;
}

int cmd_seed(Workspace& workspace, std::ostream& out) {
  const bool seeded = workspace.seed_taxonomy();
  out << (seeded ? "seeded " : "taxonomy already present; ") << workspace.labels().size() << " labels\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Options options;
  CLI::App app{"Benchmark harness for LLM-generated visualizations", "evallm"};
  app.require_subcommand(1);
  app.add_option("--store", options.store, "Store root directory")->envname("EVALLM_STORE");
  app.add_option("--config", options.config, "Pipeline config file");
  app.add_option("--parallelism", options.parallelism, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", options.quiet, "Suppress progress output");

  auto* ingest = app.add_subcommand("ingest", "Install a corpus, experiment bundle or export");
  ingest->add_option("path", options.path, "Corpus file or directory, bundle, or export")->required();

  auto* generate = app.add_subcommand("generate", "Produce an experiment bundle");
  generate->add_option("--corpus", options.corpus)->required();
  generate->add_option("--model", options.model)->required();
  generate->add_option("--strategy", options.strategy);
  generate->add_option("--endpoint", options.endpoint, "Endpoint config file");
  generate->add_option("--replay", options.replay_dir, "Directory of canned <instance id>.txt outputs");
  generate->add_option("--experiment", options.experiment, "Experiment id (default <model>-<strategy>)");
  generate->add_option("--template", options.template_file, "Prompt template file");

  auto* evaluate = app.add_subcommand("evaluate", "Run the pipeline and write results.jsonl");
  evaluate->add_option("--experiment", options.experiment)->required();

  auto* report = app.add_subcommand("report", "Aggregate one experiment");
  report->add_option("--experiment", options.experiment)->required();
  report->add_option("--format", options.format)->check(CLI::IsMember({"json", "table"}));

  auto* compare_cmd = app.add_subcommand("compare", "Compare experiments");
  compare_cmd->add_option("--experiments", options.experiments, "Comma-separated experiment ids");
  compare_cmd->add_option("--reports", options.report_files, "Report JSON files ('-' for stdin)");
  compare_cmd->add_option("--format", options.format)->check(CLI::IsMember({"json", "table"}));

  auto* export_cmd = app.add_subcommand("export", "Write a self-contained experiment export");
  export_cmd->add_option("--experiment", options.experiment)->required();
  export_cmd->add_option("--out", options.out_file)->required();

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--port", options.port);
  serve->add_option("--host", options.host);
  serve->add_option("--static", options.static_dir, "Built review UI directory");

  auto* seed = app.add_subcommand("seed-taxonomy", "Install the default error labels");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "evallm: error[usage]: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    Workspace workspace(options.store, pipeline_config(options));
    if (ingest->parsed()) return cmd_ingest(options, workspace, out);
    if (generate->parsed()) return cmd_generate(options, workspace, out, err);
    if (evaluate->parsed()) return cmd_evaluate(options, workspace, out, err);
    if (report->parsed()) return cmd_report(options, workspace, out);
    if (compare_cmd->parsed()) return cmd_compare(options, workspace, in, out);
    if (export_cmd->parsed()) return cmd_export(options, workspace, out);
    if (serve->parsed()) return cmd_serve(options, workspace, err);
    if (seed->parsed()) return cmd_seed(workspace, out);
  } catch (const CliError& e) {
    err << "evallm: error[" << e.code << "]: " << e.message << "\n";
    return e.code == "usage" ? kExitUsage : kExitFailure;
  } catch (const StoreError& e) {
    err << "evallm: error[" << e.code() << "]: " << e.what();
    if (!e.detail().is_null()) err << " " << canonical_json(e.detail());
    err << "\n";
    return kExitFailure;
  } catch (const ConfigError& e) {
    err << "evallm: error[config]: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "evallm: error[failed]: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace evallm
