import json

import pytest

from adscreen.cli import dispatch
from adscreen.ioutil import read_jsonl


def _run(*argv):
    return dispatch(list(argv))


def test_missing_required_flags_exit_1(capsys):
    assert _run("eval") == 1
    assert "Usage" in capsys.readouterr().err


def test_unknown_subcommand_exit_1():
    assert _run("frobnicate") == 1


def test_help_exit_0():
    assert _run("--help") == 0


def test_parse_minimal_fixture(tmp_path, cha_dir):
    out = tmp_path / "transcripts.jsonl"
    assert _run("parse", "--input", str(cha_dir / "valid_minimal.cha"),
                "--output", str(out)) == 0
    (record,) = read_jsonl(out)
    assert record["text"] == "the boy is falling"
    assert record["utterance_count"] == 1
    assert record["pause_counts"] == [1, 0, 0]
    assert (tmp_path / "transcripts.run.json").exists()


def test_parse_malformed_fixture_exit_1(tmp_path, cha_dir):
    out = tmp_path / "t.jsonl"
    assert _run("parse", "--input", str(cha_dir / "bad_unknown_speaker.cha"),
                "--output", str(out)) == 1


def test_analyze(tmp_path, cha_dir):
    transcripts = tmp_path / "t.jsonl"
    features = tmp_path / "f.jsonl"
    assert _run("parse", "--input", str(cha_dir / "valid_interleaved.cha"),
                "--output", str(transcripts)) == 0
    assert _run("analyze", "--input", str(transcripts), "--output", str(features)) == 0
    (record,) = read_jsonl(features)
    assert set(record) == {"participant_id", "cue", "features"}
    assert record["cue"]["matched"] == ["dish", "mother", "sink", "wash", "water"]


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_corpus")
    code = dispatch(["synth", "--output", str(out), "--n", "12", "--seed", "3"])
    assert code == 0
    return out


def test_synth_outputs(small_corpus):
    assert (small_corpus / "manifest.jsonl").exists()
    assert (small_corpus / "truth.jsonl").exists()
    assert len(list((small_corpus / "cha").glob("*.cha"))) == 24


def test_pipeline_mock(tmp_path, small_corpus):
    run = tmp_path / "run"
    assert _run("pipeline", "--manifest", str(small_corpus / "manifest.jsonl"),
                "--output", str(run), "--mode", "cot", "--endpoint", "mock") == 0
    metrics = json.loads((run / "metrics.json").read_text())
    assert 0.0 <= metrics["metrics"]["accuracy"] <= 1.0
    assert metrics["confusion_matrix"]["tp"] + metrics["confusion_matrix"]["tn"] + \
        metrics["confusion_matrix"]["fp"] + metrics["confusion_matrix"]["fn"] == 24
    manifest = json.loads((run / "run_manifest.json").read_text())
    assert "template_fingerprint" in manifest
    assert "created_at" in manifest


def test_pipeline_reproducible_except_timestamp(tmp_path, small_corpus):
    runs = []
    for name in ("r1", "r2"):
        run = tmp_path / name
        assert _run("pipeline", "--manifest", str(small_corpus / "manifest.jsonl"),
                    "--output", str(run), "--mode", "cot", "--endpoint", "mock") == 0
        runs.append(run)
    for file in ("transcripts.jsonl", "features.jsonl", "bundles.jsonl",
                 "predictions.jsonl", "metrics.json", "report.txt", "manifest.jsonl",
                 "splits.tsv"):
        assert (runs[0] / file).read_bytes() == (runs[1] / file).read_bytes(), file
    m1 = json.loads((runs[0] / "run_manifest.json").read_text())
    m2 = json.loads((runs[1] / "run_manifest.json").read_text())
    m1.pop("created_at")
    m2.pop("created_at")
    m1["config"].pop("output")
    m2["config"].pop("output")
    assert m1 == m2


def test_pipeline_equals_manual_stage_chain(tmp_path, small_corpus):
    run = tmp_path / "pipe"
    assert _run("pipeline", "--manifest", str(small_corpus / "manifest.jsonl"),
                "--output", str(run), "--mode", "cot", "--endpoint", "mock") == 0

    stage = tmp_path / "stages"
    stage.mkdir()
    assert _run("parse", "--input", str(small_corpus / "cha"),
                "--output", str(stage / "transcripts.jsonl")) == 0
    assert _run("prompt", "--input", str(stage / "transcripts.jsonl"),
                "--output", str(stage / "bundles.jsonl"), "--mode", "cot") == 0
    assert _run("classify", "--input", str(stage / "bundles.jsonl"),
                "--output", str(stage / "predictions.jsonl"), "--endpoint", "mock") == 0
    assert _run("eval", "--predictions", str(stage / "predictions.jsonl"),
                "--manifest", str(run / "manifest.jsonl"),
                "--output", str(stage / "metrics.json")) == 0

    pipeline_metrics = json.loads((run / "metrics.json").read_text())
    manual_metrics = json.loads((stage / "metrics.json").read_text())
    assert manual_metrics["metrics"] == pipeline_metrics["metrics"]
    assert (stage / "predictions.jsonl").read_bytes() == (run / "predictions.jsonl").read_bytes()


def test_baseline_subcommand(tmp_path, small_corpus):
    run = tmp_path / "run"
    assert _run("pipeline", "--manifest", str(small_corpus / "manifest.jsonl"),
                "--output", str(run), "--mode", "cot", "--endpoint", "mock",
                "--split-policy", "16,8") == 0
    predictions = tmp_path / "baseline_predictions.jsonl"
    model_out = tmp_path / "model.json"
    assert _run("baseline", "--features", str(run / "features.jsonl"),
                "--manifest", str(run / "manifest.jsonl"),
                "--output", str(predictions), "--model", "lda",
                "--model-out", str(model_out)) == 0
    assert len(read_jsonl(predictions)) == 8
    doc = json.loads(model_out.read_text())
    assert doc["kind"] == "lda"


def test_validate_subcommand(small_corpus, capsys):
    assert _run("validate", "--manifest", str(small_corpus / "manifest.jsonl")) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["total"] == 24


def test_endpoint_failure_exit_2(tmp_path, small_corpus, capsys):
    run = tmp_path / "run"
    code = _run("pipeline", "--manifest", str(small_corpus / "manifest.jsonl"),
                "--output", str(run), "--endpoint", "external",
                "--base-url", "http://127.0.0.1:9")
    assert code == 2
