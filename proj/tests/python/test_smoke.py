import json

import pytest

import evallm

BAR = {"mark": "bar", "encoding": {"x": {"field": "rank", "type": "nominal"}, "y": {"field": "count", "type": "quantitative"}}}


def test_extract_from_fenced_output():
    out = evallm.extract_spec("Here you go:\n```json\n" + json.dumps(BAR) + "\n```")
    assert out["status"] == "ok"
    assert out["mark"] == "bar"
    assert out["spec"] == BAR


def test_extract_failures():
    assert evallm.extract_spec("Sorry, I cannot help with that.")["status"] == "no_json_found"
    assert evallm.extract_spec('{"mark": "bar", "encoding": {')["status"] == "json_parse_error"
    missing = evallm.extract_spec('{"encoding":{"x":{"field":"a","type":"nominal"}}}')
    assert missing["status"] == "missing_required_fields"
    assert missing["spec"] is None


def test_marks_and_canonical_form():
    assert evallm.normalize_mark("pie") == "arc"
    assert evallm.normalize_mark("scatter") == "point"
    assert evallm.canonical_json({"mark": "bar", "encoding": {}}) == evallm.canonical_json('{"encoding":{},"mark":"bar"}')


def test_metrics_identical_and_wrong_field():
    same = evallm.metrics(BAR, BAR)
    for level in ("code_similarity", "grammar_similarity", "data_mapping", "mark_correctness"):
        assert same[level]["value"] == 100.0
    wrong = json.loads(json.dumps(BAR))
    wrong["encoding"]["y"]["field"] = "salary"
    scores = evallm.metrics(BAR, wrong)
    assert scores["data_mapping"]["value"] == pytest.approx(75.0)
    assert scores["mark_correctness"]["value"] == 100.0


def test_metrics_rejects_invalid_spec():
    with pytest.raises(ValueError):
        evallm.metrics(BAR, {"encoding": {}})
    with pytest.raises(ValueError):
        evallm.metrics("{not json", BAR)


def test_ssim_identical_files(fixtures):
    image = fixtures / "mini5" / "images" / "m01.png"
    score = evallm.ssim_files(image, image)
    assert score["value"] == pytest.approx(100.0)


def test_evaluate_fixture_counts(fixtures):
    bundle = (fixtures / "gpt35_zero_shot.json").read_text()
    out = evallm.evaluate(fixtures / "nvbench50.json", bundle, parallelism=4)
    report = out["report"]
    assert len(out["results"]) == 50
    assert report["n_valid"] == 48
    assert report["mark_accuracy"]["correct"] == 43
    assert report["x_axis_field_accuracy"]["correct"] == 33
    assert report["y_axis_field_accuracy"]["correct"] == 25


def test_cli_round(tmp_path, fixtures):
    store = str(tmp_path / "store")
    code, _, err = evallm.run_cli(["--store", store, "--quiet", "ingest", fixtures / "mini5"])
    assert code == 0, err
    code, out, _ = evallm.run_cli(["--store", store, "frobnicate"])
    assert code == 2
