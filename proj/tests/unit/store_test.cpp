#include <gtest/gtest.h>

#include "evallm/store.hpp"
#include "test_support.hpp"

using namespace evallm;
using testing_support::fixtures;
using testing_support::load_json;
using testing_support::TempDir;

namespace {

void populate(Workspace& ws) {
  ws.ingest_corpus(fixtures() / "nvbench50.json");
  ws.import_bundle(load_json(fixtures() / "gpt35_zero_shot.json"));
  ws.evaluate("gpt35-zero-shot", 4);
}

std::string expect_store_error(const std::function<void()>& action) {
  try {
    action();
  } catch (const StoreError& e) {
    return e.code();
  }
  return "no error";
}

AnnotationRequest vote(const std::string& label, const std::string& assessor) {
  AnnotationRequest request;
  request.experiment_id = "gpt35-zero-shot";
  request.instance_id = "nv001";
  request.label_id = label;
  request.assessor_id = assessor;
  return request;
}

}  // namespace

TEST(Workspace, IngestIsIdempotentAndConflictsOnChange) {
  TempDir dir;
  Workspace ws(dir.path());
  ws.ingest_corpus(fixtures() / "nvbench50.json");
  EXPECT_NO_THROW(ws.ingest_corpus(fixtures() / "nvbench50.json"));
  EXPECT_EQ(ws.corpus_names(), std::vector<std::string>{"nvbench50"});
  auto changed = ws.corpus("nvbench50");
  changed.instances[0].utterance = "different";
  EXPECT_EQ(expect_store_error([&] { ws.install_corpus(changed); }), "conflict");
  EXPECT_EQ(expect_store_error([&] { ws.corpus("missing"); }), "not_found");
  EXPECT_EQ(expect_store_error([&] { ws.ingest_corpus(fixtures() / "nope.json"); }), "invalid");
}

TEST(Workspace, UnsafeNamesRejected) {
  TempDir dir;
  Workspace ws(dir.path());
  auto corpus = load_corpus(fixtures() / "mini5").corpus;
  corpus.name = "../escape";
  EXPECT_EQ(expect_store_error([&] { ws.install_corpus(corpus); }), "invalid");
  corpus.name = ".hidden";
  EXPECT_EQ(expect_store_error([&] { ws.install_corpus(corpus); }), "invalid");
}

TEST(Workspace, ExperimentLifecycle) {
  TempDir dir;
  Workspace ws(dir.path());
  ws.ingest_corpus(fixtures() / "nvbench50.json");
  auto summary = ws.import_bundle(load_json(fixtures() / "gpt35_zero_shot.json"));
  EXPECT_EQ(summary.experiment_id, "gpt35-zero-shot");
  EXPECT_EQ(summary.n_records, 50);
  EXPECT_FALSE(summary.evaluated);
  EXPECT_EQ(expect_store_error([&] { ws.report("gpt35-zero-shot"); }), "not_evaluated");
  EXPECT_EQ(expect_store_error([&] { ws.import_bundle(load_json(fixtures() / "gpt35_zero_shot.json")); }), "conflict");

  auto outcome = ws.evaluate("gpt35-zero-shot", 4);
  EXPECT_EQ(outcome.n_results, 50u);
  EXPECT_TRUE(outcome.issues.empty());
  summary = ws.experiment_summary("gpt35-zero-shot");
  EXPECT_TRUE(summary.evaluated);
  EXPECT_EQ(summary.n_valid, 48);
  EXPECT_EQ(ws.report("gpt35-zero-shot").mark_accuracy, (Accuracy{43, 48}));
  EXPECT_EQ(expect_store_error([&] { ws.evaluate("nope", 1); }), "not_found");
}

TEST(Workspace, BundleForUnknownCorpusOrInstances) {
  TempDir dir;
  Workspace ws(dir.path());
  EXPECT_EQ(expect_store_error([&] { ws.import_bundle(load_json(fixtures() / "gpt35_zero_shot.json")); }), "not_found");
  ws.ingest_corpus(fixtures() / "nvbench50.json");
  auto bundle = load_json(fixtures() / "gpt35_zero_shot.json");
  bundle["records"][0]["instance_id"] = "nope";
  EXPECT_EQ(expect_store_error([&] { ws.import_bundle(bundle); }), "invalid");
  EXPECT_EQ(expect_store_error([&] { ws.import_bundle(Json{{"records", 5}}); }), "invalid");
}

TEST(Workspace, EvaluateTwiceIsByteIdentical) {
  TempDir dir;
  Workspace ws(dir.path());
  populate(ws);
  const auto first = read_file(dir.path() / "experiments" / "gpt35-zero-shot" / "results.jsonl");
  ws.evaluate("gpt35-zero-shot", 1);
  EXPECT_EQ(read_file(dir.path() / "experiments" / "gpt35-zero-shot" / "results.jsonl"), first);
}

TEST(Workspace, InstanceFilters) {
  TempDir dir;
  Workspace ws(dir.path());
  populate(ws);
  EXPECT_EQ(ws.instances("gpt35-zero-shot", {})["instances"].size(), 50u);
  InstanceFilter skipped;
  skipped.level = LevelId::mark_correctness;
  skipped.status = ScoreStatus::skipped;
  EXPECT_EQ(ws.instances("gpt35-zero-shot", skipped)["instances"].size(), 2u);
  InstanceFilter query;
  query.query = "HORSEPOWER";
  auto rows = ws.instances("gpt35-zero-shot", query)["instances"];
  EXPECT_FALSE(rows.empty());
  for (const auto& row : rows) {
    std::string utterance = row["utterance"];
    std::transform(utterance.begin(), utterance.end(), utterance.begin(), ::tolower);
    EXPECT_NE(utterance.find("horsepower"), std::string::npos);
  }
}

TEST(Workspace, AnnotationsPersistAcrossReopen) {
  TempDir dir;
  std::string label;
  {
    Workspace ws(dir.path());
    populate(ws);
    EXPECT_TRUE(ws.seed_taxonomy());
    label = ws.labels().at(0).label_id;
    ws.annotate(vote(label, "alice"));
    ws.annotate(vote(label, "bob"));
    AnnotationRequest fresh = vote("", "carol");
    fresh.label_id.reset();
    fresh.new_label = NewLabel{"Axis Labels Overlap", LevelId::perceptual_quality, ""};
    ws.annotate(fresh);
    EXPECT_TRUE(ws.retract("gpt35-zero-shot", "nv001", label, "bob", AnnotationTarget::generated));
  }
  Workspace reopened(dir.path());
  EXPECT_EQ(reopened.labels().size(), 9u);
  EXPECT_FALSE(reopened.seed_taxonomy());
  auto consensus = reopened.consensus("gpt35-zero-shot");
  ASSERT_EQ(consensus.size(), 2u);
  for (const auto& entry : consensus) {
    EXPECT_EQ(entry.vote_count, 1);
    EXPECT_FALSE(entry.accepted);
  }
  auto detail = reopened.instance_detail("gpt35-zero-shot", "nv001");
  EXPECT_EQ(detail["annotations"].size(), 2u);
  EXPECT_EQ(expect_store_error([&] { reopened.instance_detail("gpt35-zero-shot", "zzz"); }), "not_found");
  EXPECT_EQ(expect_store_error([&] {
              auto request = vote(label, "dave");
              request.instance_id = "zzz";
              reopened.annotate(request);
            }),
            "not_found");
}

TEST(Workspace, ExportImportReproducesReport) {
  TempDir source_dir, target_dir;
  Workspace source(source_dir.path());
  populate(source);
  source.seed_taxonomy();
  const auto label = source.labels().at(0).label_id;
  source.annotate(vote(label, "alice"));
  source.annotate(vote(label, "bob"));
  const Json exported = source.export_experiment("gpt35-zero-shot");
  EXPECT_EQ(exported["kind"], "evallm-experiment-export");

  Workspace target(target_dir.path());
  auto summary = target.import_export(Json::parse(exported.dump()));
  EXPECT_EQ(summary.experiment_id, "gpt35-zero-shot");
  EXPECT_TRUE(summary.evaluated);
  EXPECT_EQ(canonical_json(to_json(target.report("gpt35-zero-shot"))),
            canonical_json(to_json(source.report("gpt35-zero-shot"))));
  EXPECT_EQ(target.report("gpt35-zero-shot").error_label_counts.at(label), 1);
  EXPECT_EQ(expect_store_error([&] { target.import_export(exported); }), "conflict");
  EXPECT_EQ(expect_store_error([&] { target.import_export(Json{{"kind", "other"}}); }), "invalid");
}

TEST(Workspace, CompareAcrossExperiments) {
  TempDir dir;
  Workspace ws(dir.path());
  populate(ws);
  ws.import_bundle(load_json(fixtures() / "llama2_70b_zero_shot.json"));
  ws.evaluate("llama2-70b-zero-shot", 2);
  auto comparison = ws.compare({"llama2-70b-zero-shot", "gpt35-zero-shot"});
  ASSERT_EQ(comparison.reports.size(), 2u);
  EXPECT_EQ(comparison.reports[0].model_name, "gpt-3.5-turbo");
  EXPECT_EQ(comparison.reports[1].n_valid, 34);
  EXPECT_EQ(ws.experiments().size(), 2u);
}

TEST(Files, AtomicWriteReplaces) {
  TempDir dir;
  const auto path = dir.path() / "sub" / "f.txt";
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  EXPECT_EQ(read_file(path), "two");
  EXPECT_THROW(read_file(dir.path() / "missing"), StoreError);
}
