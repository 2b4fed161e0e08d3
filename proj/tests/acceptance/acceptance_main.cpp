// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "evallm/annotation.hpp"
#include "evallm/cli.hpp"
#include "evallm/image_similarity.hpp"
#include "evallm/metrics_code.hpp"
#include "evallm/metrics_representation.hpp"
#include "evallm/pipeline.hpp"
#include "evallm/report.hpp"
#include "evallm/store.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace evallm;
using testing_support::fixtures;
using testing_support::load_json;
using testing_support::TempDir;

namespace {

// Collects failures for one criterion; the first few are printed.
struct Check {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <class A, class B>
  void equal(const A& actual, const B& expected, const std::string& what) {
    if (!(actual == expected)) {
      std::ostringstream out;
      out << what << ": got " << actual << ", want " << expected;
      failures.push_back(out.str());
    }
  }
  void near(double actual, double expected, double tolerance, const std::string& what) {
    if (!(std::abs(actual - expected) <= tolerance)) {
      std::ostringstream out;
      out.precision(17);
      out << what << ": got " << actual << ", want " << expected << " +/- " << tolerance;
      failures.push_back(out.str());
    }
  }
};

std::string accuracy(const std::optional<Accuracy>& a) {
  return a ? std::to_string(a->correct) + "/" + std::to_string(a->denominator) : "none";
}

void metric_oracles(Check& check) {
  const auto pairs = testing_support::crafted_pairs();
  check.expect(pairs.size() >= 20, "fewer than 20 crafted pairs");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [gt_text, gen_text] = pairs[i];
    const std::string tag = "pair " + std::to_string(i);
    const auto gt = testing_support::spec(gt_text);
    const auto gen = testing_support::spec(gen_text);
    const Json gt_json = Json::parse(gt_text), gen_json = Json::parse(gen_text);

    const double grammar = oracle::jaccard100(oracle::key_paths(gt.raw_json), oracle::key_paths(gen.raw_json));
    check.near(*grammar_similarity(gt, gen).value, grammar, 1e-12, tag + " grammar");

    const auto count = oracle::mapping_count(gt_json, gen_json);
    const auto mapping = data_mapping(gt, gen);
    check.equal(mapping.total_keys, count.total, tag + " data_mapping total");
    check.equal(mapping.matched_keys, count.matched, tag + " data_mapping matched");
    check.near(*data_mapping_score(mapping).value, count.score(), 1e-12, tag + " data_mapping score");

    const bool same = oracle::mark_family(gt_json["mark"]) == oracle::mark_family(gen_json["mark"]);
    check.equal(*mark_correctness(gt, gen).value, same ? 100.0 : 0.0, tag + " mark");

    check.near(*code_similarity(gt, gen).value, oracle::code_similarity(gt.raw_json, gen.raw_json), 1e-9,
               tag + " code");
  }
}

void ssim_reference(Check& check) {
  std::mt19937 rng(77);
  const int sizes[][2] = {{11, 11}, {12, 20}, {24, 24}, {33, 17}, {48, 40}, {64, 64}};
  for (const auto& size : sizes) {
    for (int trial = 0; trial < 4; ++trial) {
      const auto a = trial % 2 ? oracle::random_image(rng, size[0], size[1]) : oracle::blocky_image(rng, size[0], size[1], 8);
      const auto b = trial < 2 ? oracle::blocky_image(rng, size[0], size[1], 30) : oracle::random_image(rng, size[0], size[1]);
      check.near(mean_ssim(a, b), oracle::ssim(a, b), 1e-9,
                 std::to_string(size[0]) + "x" + std::to_string(size[1]) + " trial " + std::to_string(trial));
    }
  }
  const GrayImage black(64, 64, 0), white(64, 64, 255);
  const double c1 = (0.01 * 255) * (0.01 * 255);
  check.near(c1, 6.5025, 1e-12, "C1");
  const double closed = c1 / (255.0 * 255.0 + c1);
  check.near(mean_ssim(black, white), closed, 1e-12, "constant closed form");
  check.near(mean_ssim(black, white), 1.0e-4, 1e-6, "constant approx 1e-4");
  check.near(mean_ssim(white, white), 1.0, 1e-12, "identical constants");
}

void stack_gating(Check& check) {
  const auto corpus = load_corpus(fixtures() / "nvbench50.json").corpus;
  const GenerationSettings settings{"m", Strategy::zero_shot, default_prompt_template(), {}};
  const LevelId gated[] = {LevelId::code_similarity, LevelId::grammar_similarity, LevelId::data_mapping,
                           LevelId::mark_correctness, LevelId::axes_quality,      LevelId::image_similarity};
  std::mt19937 rng(9001);
  for (int i = 0; i < 100; ++i) {
    const auto& instance = corpus.instances[static_cast<std::size_t>(i) % corpus.instances.size()];
    const auto text = testing_support::malformed_output(rng);
    const auto result = evaluate_instance(instance, replay(instance, settings, text), "acceptance", {});
    const std::string tag = "output " + std::to_string(i);
    const auto* syntax = result.score(LevelId::syntax_correctness);
    if (!syntax || syntax->value != 0.0) {
      check.expect(false, tag + ": syntax not 0 for " + text);
      continue;
    }
    for (LevelId level : gated) {
      const auto* score = result.score(level);
      check.expect(score && score->status == ScoreStatus::skipped && !score->value,
                   tag + ": " + std::string(to_string(level)) + " not skipped");
    }
    for (const auto& [level, score] : result.scores) {
      if (is_human_level(level)) check.expect(score.status == ScoreStatus::needs_human, tag + ": human level computed");
    }
  }
}

void fixture_aggregates(Check& check) {
  const auto corpus = load_corpus(fixtures() / "nvbench50.json").corpus;
  auto report_for = [&](const char* file) {
    const auto bundle = *parse_experiment_bundle(load_json(fixtures() / file)).bundle;
    const auto evaluation = evaluate_experiment(corpus, bundle.records, bundle.experiment_id, {}, 4);
    return aggregate(bundle.experiment_id, bundle.model_name, evaluation.results, {});
  };
  const auto gpt = report_for("gpt35_zero_shot.json");
  check.equal(gpt.n_instances, 50, "gpt instances");
  check.equal(gpt.n_valid, 48, "gpt valid");
  check.equal(accuracy(gpt.mark_accuracy), std::string("43/48"), "gpt mark");
  check.equal(accuracy(gpt.x_axis_field_accuracy), std::string("33/48"), "gpt x field");
  check.equal(accuracy(gpt.y_axis_field_accuracy), std::string("25/48"), "gpt y field");
  const auto llama = report_for("llama2_70b_zero_shot.json");
  check.equal(llama.n_instances, 50, "llama instances");
  check.equal(llama.n_valid, 34, "llama valid");
  check.equal(accuracy(llama.mark_accuracy), std::string("29/34"), "llama mark");
}

void determinism(Check& check) {
  TempDir one, eight;
  std::string bytes[2];
  int slot = 0;
  for (const auto* dir : {&one, &eight}) {
    Workspace ws(dir->path());
    ws.ingest_corpus(fixtures() / "nvbench50.json");
    ws.import_bundle(load_json(fixtures() / "gpt35_zero_shot.json"));
    ws.evaluate("gpt35-zero-shot", slot == 0 ? 1 : 8);
    bytes[slot++] = read_file(dir->path() / "experiments" / "gpt35-zero-shot" / "results.jsonl");
  }
  check.expect(!bytes[0].empty(), "empty results file");
  check.equal(std::count(bytes[0].begin(), bytes[0].end(), '\n'), 50, "result lines");
  check.expect(bytes[0] == bytes[1], "results.jsonl differs between parallelism 1 and 8");
}

void round_trips(Check& check) {
  for (const auto& source : {fixtures() / "nvbench50.json", fixtures() / "mini5"}) {
    const auto first = load_corpus(source);
    check.expect(first.errors.empty(), "load errors in " + source.string());
    TempDir dir;
    write_file_atomic(dir.path() / "corpus.json", corpus_to_json(first.corpus).dump(2));
    const auto again = load_corpus(dir.path() / "corpus.json").corpus;
    check.expect(again.name == first.corpus.name, "corpus name changed: " + source.string());
    check.expect(again.instances == first.corpus.instances, "corpus instances changed: " + source.string());
  }

  TempDir source_dir, target_dir;
  Workspace source(source_dir.path());
  source.ingest_corpus(fixtures() / "nvbench50.json");
  source.import_bundle(load_json(fixtures() / "gpt35_zero_shot.json"));
  source.evaluate("gpt35-zero-shot", 4);
  source.seed_taxonomy();
  const auto label = source.labels().at(0).label_id;
  for (const char* assessor : {"alice", "bob"}) {
    AnnotationRequest request;
    request.experiment_id = "gpt35-zero-shot";
    request.instance_id = "nv005";
    request.label_id = label;
    request.assessor_id = assessor;
    source.annotate(request);
  }
  const std::string exported = source.export_experiment("gpt35-zero-shot").dump();
  Workspace target(target_dir.path());
  target.import_export(Json::parse(exported));
  const auto before = canonical_json(to_json(source.report("gpt35-zero-shot")));
  const auto after = canonical_json(to_json(target.report("gpt35-zero-shot")));
  check.expect(before == after, "report JSON differs after export/import");
  check.equal(target.report("gpt35-zero-shot").error_label_counts.count(label), 1u, "imported consensus label");
}

void annotation_semantics(Check& check) {
  const std::vector<std::string> instances = {"i1", "i2", "i3", "i4"};
  const std::vector<std::string> assessors = {"a", "b", "c", "d", "e"};
  const std::vector<std::string> spellings = {"Unnecessary Color Coding", "unnecessary color coding",
                                              "  UNNECESSARY\tcolor   coding ", "Broken Legend", "broken  legend"};
  for (unsigned seed = 0; seed < 40; ++seed) {
    std::mt19937 rng(seed);
    int tick = 0;
    AnnotationBook book([&tick] { return "t" + std::to_string(tick++); });
    book.seed_taxonomy();
    book.register_instances("exp", instances);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    const std::string tag = "seed " + std::to_string(seed);

    for (int step = 0; step < 250; ++step) {
      const auto labels = book.labels();
      AnnotationRequest request;
      request.experiment_id = "exp";
      request.instance_id = instances[pick(instances.size())];
      request.assessor_id = assessors[pick(assessors.size())];
      request.target = pick(5) == 0 ? AnnotationTarget::ground_truth : AnnotationTarget::generated;
      const auto action = pick(4);
      if (action == 3) {
        book.retract(request.instance_id, "exp", labels[pick(labels.size())].label_id, request.assessor_id,
                     request.target);
        continue;
      }
      if (action == 2) {
        request.new_label = NewLabel{spellings[pick(spellings.size())], LevelId::color_mapping, ""};
      } else {
        request.label_id = labels[pick(labels.size())].label_id;
      }
      const auto first = book.annotate(request);
      // the same assessor repeating the same vote never adds a second one
      const auto repeat = book.annotate(request);
      check.expect(!repeat.vote_added, tag + ": repeated vote added");
      check.equal(repeat.vote_count, first.vote_count, tag + ": repeated vote changed count");
      check.equal(repeat.label.label_id, first.label.label_id, tag + ": repeated vote resolved to another label");
    }

    std::set<std::string> names;
    for (const auto& label : book.labels()) {
      check.expect(names.insert(oracle::fold_name(label.name)).second, tag + ": duplicate normalized label " + label.name);
    }
    // 8 seeded labels (color coding among them) plus "broken legend"
    check.equal(book.labels().size(), 9u, tag + ": label count");

    const auto replayed = oracle::replay_votes(book.log(), "exp");
    for (int quorum : {1, 2, 3}) {
      const auto results = book.consensus("exp", quorum);
      std::size_t nonempty = 0;
      for (const auto& [key, voters] : replayed) nonempty += voters.empty() ? 0 : 1;
      check.equal(results.size(), nonempty, tag + ": consensus size");
      for (const auto& r : results) {
        auto it = replayed.find({r.instance_id, r.label_id, int(r.target)});
        if (it == replayed.end()) {
          check.expect(false, tag + ": consensus entry not in replay");
          continue;
        }
        check.equal(r.vote_count, int(it->second.size()), tag + ": vote count");
        check.equal(r.accepted, int(it->second.size()) >= quorum, tag + ": accepted flag");
      }
    }
  }
}

void end_to_end(Check& check) {
  TempDir dir;
  const auto store = (dir.path() / "store").string();
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), {"--store", store, "--quiet"});
    std::istringstream in;
    std::ostringstream out, err;
    const int code = run_cli(args, in, out, err);
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    check.equal(code, 0, joined + "(" + err.str() + ")");
    return out.str();
  };
  run({"ingest", (fixtures() / "mini5").string()});
  run({"generate", "--corpus", "mini5", "--model", "canned-model", "--replay", (fixtures() / "mini5_canned").string()});
  run({"evaluate", "--experiment", "canned-model-zero_shot"});
  const auto report_text = run({"report", "--experiment", "canned-model-zero_shot", "--format", "json"});
  const auto export_path = dir.path() / "export.json";
  run({"export", "--experiment", "canned-model-zero_shot", "--out", export_path.string()});
  if (!check.failures.empty()) return;
  const Json report = Json::parse(report_text);
  check.equal(report["n_instances"].get<int>(), 5, "mini report instances");
  check.expect(std::filesystem::exists(export_path), "export file missing");
  check.equal(load_json(export_path)["kind"].get<std::string>(), std::string("evallm-experiment-export"), "export kind");
}

struct Criterion {
  const char* name;
  std::function<void(Check&)> body;
  double budget_seconds;  // 0 means no limit
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"metric oracle suite", metric_oracles, 5},
      {"ssim reference", ssim_reference, 10},
      {"stack gating", stack_gating, 0},
      {"fixture aggregate counts", fixture_aggregates, 10},
      {"determinism", determinism, 0},
      {"round trips", round_trips, 0},
      {"annotation semantics", annotation_semantics, 0},
      {"end to end offline", end_to_end, 30},
  };
  int failed = 0;
  for (const auto& criterion : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.body(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criterion.budget_seconds > 0 && elapsed >= criterion.budget_seconds) {
      check.failures.push_back("took " + std::to_string(elapsed) + " s, budget " +
                               std::to_string(criterion.budget_seconds) + " s");
    }
    const bool ok = check.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s %s (%.3f s)\n", ok ? "PASS" : "FAIL", criterion.name, elapsed);
    for (std::size_t i = 0; i < check.failures.size() && i < 10; ++i) std::printf("    %s\n", check.failures[i].c_str());
    if (check.failures.size() > 10) std::printf("    ... %zu more\n", check.failures.size() - 10);
  }
  return failed == 0 ? 0 : 1;
}
