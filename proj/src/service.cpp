#include "evallm/service.hpp"

#include <httplib.h>

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace evallm {

namespace {

using Params = std::multimap<std::string, std::string>;

struct HttpError {
  int status;
  std::string code;
  std::string message;
  Json detail = nullptr;
};

ServiceResponse json_response(int status, const Json& body) { return {status, canonical_json(body) + "\n"}; }

ServiceResponse error_response(const HttpError& error) {
  return json_response(error.status, {{"code", error.code}, {"message", error.message}, {"detail", error.detail}});
}

int status_for(const std::string& code) {
  if (code == "not_found") return 404;
  if (code == "conflict" || code == "not_evaluated") return 409;
  if (code == "invalid") return 422;
  return 500;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

std::string param(const Params& params, const std::string& key) {
  auto it = params.find(key);
  return it == params.end() ? std::string{} : it->second;
}

Json parse_body(const std::string& body) {
  Json json = Json::parse(body, nullptr, false);
  if (json.is_discarded()) throw HttpError{400, "bad_request", "request body is not valid JSON"};
  return json;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> ids;
  std::string id;
  std::istringstream in(text);
  while (std::getline(in, id, ',')) {
    if (!id.empty()) ids.push_back(id);
  }
  return ids;
}

AnnotationRequest annotation_request(const std::string& eid, const std::string& iid, const Json& body) {
  if (!body.is_object()) throw HttpError{422, "invalid", "annotation body must be an object"};
  AnnotationRequest request;
  request.experiment_id = eid;
  request.instance_id = iid;
  request.assessor_id = body.value("assessor_id", std::string{});
  if (auto label = body.find("label_id"); label != body.end() && label->is_string()) {
    request.label_id = label->get<std::string>();
  }
  if (auto created = body.find("new"); created != body.end() && created->is_object()) {
    const auto level = parse_level_id(created->value("level_id", std::string{}));
    if (!level) throw HttpError{422, "invalid", "new label needs a known level_id"};
    request.new_label = NewLabel{created->value("name", std::string{}), *level,
                                 created->value("description", std::string{})};
  }
  if (request.label_id && request.new_label) {
    throw HttpError{422, "invalid", "give either label_id or new, not both"};
  }
  const auto target = parse_annotation_target(body.value("target", std::string{"generated"}));
  if (!target) throw HttpError{422, "invalid", "target must be generated or ground_truth"};
  request.target = *target;
  return request;
}

Json outcome_json(const AnnotateOutcome& outcome) {
  return {{"annotation", to_json(outcome.annotation)},
          {"label", to_json(outcome.label)},
          {"vote_added", outcome.vote_added},
          {"label_created", outcome.label_created},
          {"vote_count", outcome.vote_count}};
}

}  // namespace

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::idle: return "idle";
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "idle";
}

struct Service::Impl {
  Workspace& workspace;
  ServiceOptions options;
  httplib::Server server;
  int bound_port = -1;

  struct Job {
    JobState state = JobState::idle;
    std::string error;
  };
  std::mutex jobs_mutex;
  std::condition_variable jobs_changed;
  std::deque<std::string> queue;
  std::map<std::string, Job> jobs;
  bool stopping = false;
  std::jthread worker;

  Impl(Workspace& ws, ServiceOptions opts) : workspace(ws), options(std::move(opts)) {
    worker = std::jthread([this] { run_worker(); });
    install_routes();
  }

  ~Impl() {
    {
      std::lock_guard lock(jobs_mutex);
      stopping = true;
    }
    jobs_changed.notify_all();
  }

  void run_worker() {
    for (;;) {
      std::string id;
      {
        std::unique_lock lock(jobs_mutex);
        jobs_changed.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        jobs[id].state = JobState::running;
      }
      Job finished{JobState::done, {}};
      try {
        workspace.evaluate(id, options.parallelism);
      } catch (const std::exception& e) {
        finished = {JobState::failed, e.what()};
      }
      {
        std::lock_guard lock(jobs_mutex);
        jobs[id] = finished;
      }
      jobs_changed.notify_all();
    }
  }

  void enqueue(const std::string& id) {
    {
      std::lock_guard lock(jobs_mutex);
      auto& job = jobs[id];
      if (job.state == JobState::queued || job.state == JobState::running) return;
      job = {JobState::queued, {}};
      queue.push_back(id);
    }
    jobs_changed.notify_all();
  }

  Json job_json(const std::string& id) {
    std::lock_guard lock(jobs_mutex);
    auto it = jobs.find(id);
    const Job job = it == jobs.end() ? Job{} : it->second;
    Json json = {{"experiment_id", id}, {"state", to_string(job.state)}};
    json["evaluated"] = workspace.has_results(id);
    if (!job.error.empty()) json["error"] = job.error;
    return json;
  }

  void wait_idle() {
    std::unique_lock lock(jobs_mutex);
    jobs_changed.wait(lock, [&] {
      if (!queue.empty()) return false;
      for (const auto& [id, job] : jobs) {
        if (job.state == JobState::running || job.state == JobState::queued) return false;
      }
      return true;
    });
  }

  ServiceResponse import_experiment(const Json& body) {
    ExperimentSummary summary;
    if (body.is_object() && body.contains("kind")) {
      summary = workspace.import_export(body);
    } else {
      summary = workspace.import_bundle(body);
      if (!summary.evaluated) enqueue(summary.experiment_id);
    }
    Json json = to_json(summary);
    json["evaluation"] = job_json(summary.experiment_id);
    return json_response(201, json);
  }

  ServiceResponse route(const std::string& method, const std::string& path, const Params& params,
                        const std::string& body) {
    const auto parts = split_path(path);
    const std::size_t n = parts.size();
    if (n == 0 || parts[0] != "api") throw HttpError{404, "not_found", "no route for " + path};
    auto is = [&](std::initializer_list<const char*> pattern) {
      if (pattern.size() != n) return false;
      std::size_t i = 0;
      for (const char* piece : pattern) {
        if (std::string_view(piece) != "*" && parts[i] != piece) return false;
        ++i;
      }
      return true;
    };

    if (method == "GET" && is({"api", "health"})) return json_response(200, {{"status", "ok"}});

    if (is({"api", "corpora"})) {
      if (method == "GET") return json_response(200, {{"corpora", workspace.corpus_names()}});
      if (method == "POST") {
        CorpusLoad load = corpus_from_json(parse_body(body));
        if (!load.errors.empty()) {
          Json detail = Json::array();
          for (const auto& e : load.errors) {
            detail.push_back({{"index", e.index}, {"instance_id", e.instance_id}, {"code", e.code}, {"message", e.message}});
          }
          throw HttpError{422, "invalid", "corpus has invalid instances", detail};
        }
        const Corpus corpus = workspace.install_corpus(load.corpus);
        return json_response(201, {{"name", corpus.name}, {"n_instances", corpus.instances.size()}});
      }
    }

    if (is({"api", "labels"}) && method == "GET") {
      Json labels = Json::array();
      for (const auto& label : workspace.labels()) labels.push_back(to_json(label));
      return json_response(200, {{"labels", labels}});
    }

    if (is({"api", "experiments"})) {
      if (method == "GET") {
        Json list = Json::array();
        for (const auto& summary : workspace.experiments()) list.push_back(to_json(summary));
        return json_response(200, {{"experiments", list}});
      }
      if (method == "POST") return import_experiment(parse_body(body));
    }

    if (n >= 3 && parts[1] == "experiments") {
      const std::string& id = parts[2];
      if (method == "GET" && n == 3) {
        Json json = to_json(workspace.experiment_summary(id));
        json["evaluation"] = job_json(id);
        return json_response(200, json);
      }
      if (method == "GET" && is({"api", "experiments", "*", "status"})) {
        if (!workspace.has_experiment(id)) throw StoreError("not_found", "unknown experiment '" + id + "'");
        return json_response(200, job_json(id));
      }
      if (method == "POST" && is({"api", "experiments", "*", "evaluate"})) {
        if (!workspace.has_experiment(id)) throw StoreError("not_found", "unknown experiment '" + id + "'");
        enqueue(id);
        return json_response(202, job_json(id));
      }
      if (method == "GET" && is({"api", "experiments", "*", "instances"})) {
        InstanceFilter filter;
        filter.query = param(params, "query");
        if (const std::string level = param(params, "level"); !level.empty()) {
          filter.level = parse_level_id(level);
          if (!filter.level) throw HttpError{422, "invalid", "unknown level '" + level + "'"};
        }
        if (const std::string status = param(params, "status"); !status.empty()) {
          filter.status = parse_score_status(status);
          if (!filter.status) throw HttpError{422, "invalid", "unknown status '" + status + "'"};
        }
        if (const std::string label = param(params, "label"); !label.empty()) filter.label_id = label;
        return json_response(200, workspace.instances(id, filter));
      }
      if (method == "GET" && is({"api", "experiments", "*", "report"})) {
        return json_response(200, to_json(workspace.report(id)));
      }
      if (method == "GET" && is({"api", "experiments", "*", "export"})) {
        return json_response(200, workspace.export_experiment(id));
      }
    }

    if (method == "GET" && is({"api", "reports", "compare"})) {
      return json_response(200, to_json(workspace.compare(split_ids(param(params, "ids")))));
    }

    if (n >= 4 && parts[1] == "instances") {
      const std::string& eid = parts[2];
      const std::string& iid = parts[3];
      if (method == "GET" && n == 4) return json_response(200, workspace.instance_detail(eid, iid));
      if (method == "GET" && n == 6 && parts[4] == "images") {
        const auto side = parse_annotation_target(parts[5]);
        if (!side) throw HttpError{404, "not_found", "image side must be generated or ground_truth"};
        return {200, read_file(workspace.instance_image(eid, iid, *side)), "image/png"};
      }
      if (n == 5 && parts[4] == "annotations") {
        if (method == "POST") {
          const AnnotateOutcome outcome = workspace.annotate(annotation_request(eid, iid, parse_body(body)));
          return json_response(outcome.vote_added ? 201 : 200, outcome_json(outcome));
        }
        if (method == "DELETE") {
          const auto target = parse_annotation_target(param(params, "target").empty() ? "generated"
                                                                                     : param(params, "target"));
          if (!target) throw HttpError{422, "invalid", "target must be generated or ground_truth"};
          const bool retracted =
              workspace.retract(eid, iid, param(params, "label_id"), param(params, "assessor_id"), *target);
          return json_response(200, {{"retracted", retracted}});
        }
      }
    }

    throw HttpError{404, "not_found", "no route for " + method + " " + path};
  }

  ServiceResponse dispatch(const std::string& method, const std::string& path, const Params& params,
                           const std::string& body) {
    try {
      return route(method, path, params, body);
    } catch (const HttpError& e) {
      return error_response(e);
    } catch (const StoreError& e) {
      return error_response({status_for(e.code()), e.code(), e.what(), e.detail()});
    } catch (const std::exception& e) {
      return error_response({500, "internal", e.what()});
    }
  }

  void install_routes() {
    if (options.static_dir) server.set_mount_point("/", options.static_dir->string());
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      Params params(req.params.begin(), req.params.end());
      const ServiceResponse response = dispatch(req.method, req.path, params, req.body);
      res.status = response.status;
      res.set_content(response.body, response.content_type);
    };
    server.Get(".*", forward);
    server.Post(".*", forward);
    server.Delete(".*", forward);
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }
};

Service::Service(Workspace& workspace, ServiceOptions options)
    : impl_(std::make_unique<Impl>(workspace, std::move(options))) {}

Service::~Service() { stop(); }

ServiceResponse Service::handle(const std::string& method, const std::string& target, const std::string& body) {
  const auto question = target.find('?');
  const std::string path = httplib::detail::decode_url(target.substr(0, question), false);
  httplib::Params query;
  if (question != std::string::npos) httplib::detail::parse_query_text(target.substr(question + 1), query);
  return impl_->dispatch(method, path, Params(query.begin(), query.end()), body);
}

int Service::bind() {
  impl_->bound_port = impl_->options.port == 0 ? impl_->server.bind_to_any_port(impl_->options.host)
                                               : (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)
                                                      ? impl_->options.port
                                                      : -1);
  return impl_->bound_port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_idle() { impl_->wait_idle(); }

}  // namespace evallm
