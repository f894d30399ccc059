"""Command-line entry point wiring all pipeline stages.

Every stage reads and writes files (JSONL), so any intermediate artifact can
be audited and stages can be replayed or replaced individually. Exit codes:
0 success, 1 input error, 2 endpoint failure.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import sys
from pathlib import Path

import click

from . import __version__
from .baselines import (
    LdaClassifier,
    LogisticClassifier,
    ModelError,
    Prediction,
    predict_records,
    save_model,
)
from .chat_parser import ChatParseError, CleanTranscript, extract_participant_text, parse_document
from .corpus import (
    Corpus,
    CorpusError,
    SplitPolicy,
    load_manifest,
    resolve_transcript_path,
    save_manifest,
    split,
    validate,
    write_split_tsv,
)
from .cue_analyzer import (
    DEFAULT_LEXICON,
    FeatureVector,
    cue_coverage,
    featurize,
    load_lexicon,
    tokenize,
)
from .evaluator import (
    EvalError,
    confuse,
    load_predictions,
    metrics,
    render_report,
    render_report_csv,
    save_predictions,
)
from .gateway import (
    AuthFailure,
    EndpointConfig,
    GatewayError,
    MockRule,
    classify as gateway_classify,
    classify_many,
    classify_with_mock,
    make_mock_server,
)
from .ioutil import atomic_write_text, read_jsonl, write_json, write_jsonl
from .prompt_compiler import (
    PromptBundle,
    PromptError,
    build_prompt,
    load_templates,
    select_exemplars,
    template_fingerprint,
)
from .synth import InvalidConfig, SynthConfig, generate

DEFAULT_SEED = 20240101

_INPUT_ERRORS = (
    ChatParseError,
    CorpusError,
    PromptError,
    ModelError,
    EvalError,
    InvalidConfig,
    OSError,
    json.JSONDecodeError,
    ValueError,
)


def _load_template_set(spec_value: str | None) -> tuple[dict[str, str], str]:
    """--templates takes either a bundled version name or a directory path."""
    if spec_value is None:
        templates = load_templates()
        label = "v1"
    elif Path(spec_value).is_dir():
        templates = load_templates(path=spec_value)
        label = str(spec_value)
    else:
        templates = load_templates(version=spec_value)
        label = spec_value
    return templates, label


def _write_run_manifest(path: Path, command: str, config: dict, extra: dict | None = None):
    payload = {
        "command": command,
        "config": config,
        "versions": {"adscreen": __version__},
        # timestamp is deliberately the only nondeterministic field
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        payload.update(extra)
    write_json(path, payload)


def _read_transcripts(path: str) -> list[CleanTranscript]:
    return [CleanTranscript.from_dict(d) for d in read_jsonl(path)]


@click.group()
def cli():
    """Cookie-theft transcript screening pipeline."""


@cli.command("parse")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--speaker", default="PAR", show_default=True)
def parse_cmd(input_path: str, output_path: str, speaker: str):
    """Parse .cha files into a clean-transcript JSONL."""
    source = Path(input_path)
    files = sorted(source.rglob("*.cha")) if source.is_dir() else [source]
    records = []
    for f in files:
        doc = parse_document(f.read_text(encoding="utf-8"), source_id=f.stem)
        records.append(extract_participant_text(doc, speaker).to_dict())
    write_jsonl(output_path, records)
    _write_run_manifest(
        Path(output_path).with_suffix(".run.json"),
        "parse",
        {"input": str(input_path), "output": str(output_path), "speaker": speaker},
    )


@cli.command("analyze")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
def analyze_cmd(input_path: str, output_path: str, lexicon_path: str | None):
    """Compute cue reports and feature vectors from transcripts."""
    lexicon = load_lexicon(lexicon_path) if lexicon_path else DEFAULT_LEXICON
    records = []
    for t in _read_transcripts(input_path):
        report = cue_coverage(tokenize(t.text), lexicon)
        records.append(
            {
                "participant_id": t.participant_id,
                "cue": report.to_dict(),
                "features": featurize(t, lexicon).to_dict(),
            }
        )
    write_jsonl(output_path, records)
    _write_run_manifest(
        Path(output_path).with_suffix(".run.json"),
        "analyze",
        {"input": str(input_path), "output": str(output_path), "lexicon": lexicon_path},
    )


def _build_bundles(
    transcripts: list[CleanTranscript],
    mode: str,
    manifest: Corpus | None,
    templates: dict[str, str],
    seed: int,
) -> list[tuple[str, PromptBundle]]:
    exemplars = []
    if mode == "few_shot":
        if manifest is None:
            raise PromptError("few_shot mode needs --manifest for exemplar selection")
        labels = {r.participant_id: r.label for r in manifest.records}
        train_ids = {r.participant_id for r in manifest.records if r.split == "train"}
        pool = [
            (t, labels[t.participant_id])
            for t in transcripts
            if t.participant_id in train_ids
        ]
        exemplars = select_exemplars(pool, seed=seed)
        exemplar_ids = {t.participant_id for t, _ in exemplars}
    targets = transcripts
    if manifest is not None:
        test_ids = {r.participant_id for r in manifest.records if r.split == "test"}
        if test_ids:
            targets = [t for t in transcripts if t.participant_id in test_ids]
    out = []
    for t in targets:
        report = cue_coverage(tokenize(t.text)) if mode == "cot" else None
        bundle = build_prompt(mode, t, report=report, exemplars=exemplars, templates=templates)
        out.append((t.participant_id, bundle))
    return out


@cli.command("prompt")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["zero_shot", "few_shot", "cot"]), default="cot",
              show_default=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True))
@click.option("--templates", "templates_spec", default=None)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def prompt_cmd(input_path, output_path, mode, manifest_path, templates_spec, seed):
    """Compile prompt bundles for the test split (or all transcripts)."""
    templates, templates_label = _load_template_set(templates_spec)
    manifest = load_manifest(manifest_path) if manifest_path else None
    transcripts = _read_transcripts(input_path)
    bundles = _build_bundles(transcripts, mode, manifest, templates, seed)
    write_jsonl(
        output_path,
        [{"participant_id": pid, **b.to_dict()} for pid, b in bundles],
    )
    _write_run_manifest(
        Path(output_path).with_suffix(".run.json"),
        "prompt",
        {
            "input": str(input_path),
            "output": str(output_path),
            "mode": mode,
            "manifest": manifest_path,
            "templates": templates_label,
            "seed": seed,
        },
        {"template_fingerprint": template_fingerprint(templates)},
    )


def _classify_bundles(
    items: list[tuple[str, PromptBundle]],
    endpoint: str,
    base_url: str,
    model: str,
    threshold: float,
    timeout: float,
    max_retries: int,
) -> list[Prediction]:
    if endpoint == "mock":
        rule = MockRule(threshold=threshold)
        results = [classify_with_mock(b, rule, pid) for pid, b in items]
        results.sort(key=lambda pair: pair[0].participant_id)
    else:
        cfg = EndpointConfig(
            base_url=base_url, model_name=model, timeout=timeout, max_retries=max_retries
        )
        results = classify_many(items, cfg)
    return [p for p, _ in results]


@cli.command("classify")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--endpoint", type=click.Choice(["mock", "external"]), default="mock",
              show_default=True)
@click.option("--base-url", default="http://127.0.0.1:8700", show_default=True)
@click.option("--model", default="mock", show_default=True)
@click.option("--threshold", default=0.5, show_default=True, help="Mock rule threshold.")
@click.option("--timeout", default=30.0, show_default=True)
@click.option("--max-retries", default=2, show_default=True)
def classify_cmd(input_path, output_path, endpoint, base_url, model, threshold,
                 timeout, max_retries):
    """Send prompt bundles to the endpoint (or bundled mock) and store verdicts."""
    items = [
        (d["participant_id"], PromptBundle.from_dict(d)) for d in read_jsonl(input_path)
    ]
    predictions = _classify_bundles(
        items, endpoint, base_url, model, threshold, timeout, max_retries
    )
    save_predictions(predictions, output_path)
    _write_run_manifest(
        Path(output_path).with_suffix(".run.json"),
        "classify",
        {
            "input": str(input_path),
            "output": str(output_path),
            "endpoint": endpoint,
            "base_url": base_url,
            "model": model,
            "threshold": threshold,
        },
    )


@cli.command("baseline")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--model", "model_kind", type=click.Choice(["lda", "logistic"]),
              default="lda", show_default=True)
@click.option("--model-out", "model_out", type=click.Path())
def baseline_cmd(features_path, manifest_path, output_path, model_kind, model_out):
    """Fit a native baseline on the train split and predict the test split."""
    manifest = load_manifest(manifest_path)
    by_id = manifest.by_id()
    rows = read_jsonl(features_path)
    vectors = {
        r["participant_id"]: FeatureVector.from_dict(r["features"]).as_array()
        for r in rows
    }
    train_ids = [r.participant_id for r in manifest.records
                 if r.split == "train" and r.participant_id in vectors]
    test_ids = [r.participant_id for r in manifest.records
                if r.split == "test" and r.participant_id in vectors]
    if not train_ids or not test_ids:
        raise CorpusError("need non-empty train and test splits with features")
    import numpy as np

    X_train = np.stack([vectors[i] for i in train_ids])
    y_train = np.array([by_id[i].label for i in train_ids])
    X_test = np.stack([vectors[i] for i in test_ids])

    model = LdaClassifier() if model_kind == "lda" else LogisticClassifier()
    model.fit(X_train, y_train, feature_names=list(FeatureVector.FEATURE_NAMES))
    predictions = predict_records(model, test_ids, X_test, source=model_kind)
    save_predictions(sorted(predictions, key=lambda p: p.participant_id), output_path)
    if model_out:
        save_model(model, model_out)
    _write_run_manifest(
        Path(output_path).with_suffix(".run.json"),
        "baseline",
        {
            "features": str(features_path),
            "manifest": str(manifest_path),
            "output": str(output_path),
            "model": model_kind,
        },
    )


@cli.command("synth")
@click.option("--output", "output_dir", required=True, type=click.Path())
@click.option("--n", "n_per_class", default=50, show_default=True)
@click.option("--p-cue-ad", default=0.35, show_default=True)
@click.option("--p-cue-nonad", default=0.80, show_default=True)
@click.option("--disfluency-ad", default=1.5, show_default=True)
@click.option("--disfluency-nonad", default=0.3, show_default=True)
@click.option("--mean-tokens", default=60, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def synth_cmd(output_dir, n_per_class, p_cue_ad, p_cue_nonad, disfluency_ad,
              disfluency_nonad, mean_tokens, seed):
    """Generate a seeded synthetic corpus with a ground-truth log."""
    config = SynthConfig(
        n_per_class=n_per_class,
        p_cue_AD=p_cue_ad,
        p_cue_nonAD=p_cue_nonad,
        disfluency_rate_AD=disfluency_ad,
        disfluency_rate_nonAD=disfluency_nonad,
        mean_tokens=mean_tokens,
        seed=seed,
    )
    generate(config, output_dir)
    _write_run_manifest(
        Path(output_dir) / "run_manifest.json",
        "synth",
        {"output": str(output_dir), **config.__dict__},
    )


@cli.command("eval")
@click.option("--predictions", "predictions_path", required=True,
              type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path())
@click.option("--name", default="run", show_default=True)
def eval_cmd(predictions_path, manifest_path, output_path, report_path, name):
    """Score predictions against the manifest's test split."""
    manifest = load_manifest(manifest_path)
    predictions = load_predictions(predictions_path)
    cm = confuse(predictions, manifest)
    m = metrics(cm)
    write_json(
        output_path,
        {"name": name, "confusion_matrix": cm.to_dict(), "metrics": m.to_dict()},
    )
    if report_path:
        atomic_write_text(report_path, render_report([(name, m)]))
    _write_run_manifest(
        Path(output_path).with_suffix(".run.json"),
        "eval",
        {
            "predictions": str(predictions_path),
            "manifest": str(manifest_path),
            "output": str(output_path),
            "name": name,
        },
    )


def _parse_split_policy(value: str | None, seed: int) -> SplitPolicy | None:
    if value is None:
        return None
    parts = [p.strip() for p in value.split(",")]
    if len(parts) < 2:
        raise CorpusError("--split-policy must be 'train_count,test_count[,flat]'")
    stratify = len(parts) < 3 or parts[2] != "flat"
    return SplitPolicy(
        train_count=int(parts[0]),
        test_count=int(parts[1]),
        stratify_by_label=stratify,
        seed=seed,
    )


@cli.command("pipeline")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_dir", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["zero_shot", "few_shot", "cot"]), default="cot",
              show_default=True)
@click.option("--endpoint", type=click.Choice(["mock", "external"]), default="mock",
              show_default=True)
@click.option("--base-url", default="http://127.0.0.1:8700", show_default=True)
@click.option("--model", default="mock", show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--templates", "templates_spec", default=None)
@click.option("--split-policy", "split_policy", default=None,
              help="train_count,test_count[,flat]; omit to keep manifest splits.")
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--speaker", default="PAR", show_default=True)
def pipeline_cmd(manifest_path, output_dir, mode, endpoint, base_url, model, threshold,
                 templates_spec, split_policy, seed, speaker):
    """Run parse -> analyze -> prompt -> classify -> eval against a manifest."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    templates, templates_label = _load_template_set(templates_spec)

    manifest = load_manifest(manifest_path)
    policy = _parse_split_policy(split_policy, seed)
    if policy is not None:
        manifest = split(manifest, policy)
    elif not manifest.with_split("test"):
        # no stored splits and no policy: score every participant
        manifest = Corpus(
            tuple(dataclasses.replace(r, split="test") for r in manifest.records),
            provenance=manifest.provenance,
        )
    save_manifest(manifest, out / "manifest.jsonl")
    write_split_tsv(manifest, out / "splits.tsv")

    transcripts = []
    for record in manifest.records:
        cha_path = resolve_transcript_path(manifest_path, record)
        doc = parse_document(
            cha_path.read_text(encoding="utf-8"), source_id=record.participant_id
        )
        transcripts.append(extract_participant_text(doc, speaker))
    write_jsonl(out / "transcripts.jsonl", [t.to_dict() for t in transcripts])

    analysis = []
    for t in transcripts:
        report = cue_coverage(tokenize(t.text))
        analysis.append(
            {
                "participant_id": t.participant_id,
                "cue": report.to_dict(),
                "features": featurize(t).to_dict(),
            }
        )
    write_jsonl(out / "features.jsonl", analysis)

    bundles = _build_bundles(transcripts, mode, manifest, templates, seed)
    write_jsonl(
        out / "bundles.jsonl",
        [{"participant_id": pid, **b.to_dict()} for pid, b in bundles],
    )

    predictions = _classify_bundles(
        bundles, endpoint, base_url, model, threshold, 30.0, 2
    )
    save_predictions(predictions, out / "predictions.jsonl")

    cm = confuse(predictions, manifest)
    m = metrics(cm)
    write_json(
        out / "metrics.json",
        {"name": mode, "confusion_matrix": cm.to_dict(), "metrics": m.to_dict()},
    )
    atomic_write_text(out / "report.txt", render_report([(mode, m)]))
    atomic_write_text(out / "report.csv", render_report_csv([(mode, m)]))

    _write_run_manifest(
        out / "run_manifest.json",
        "pipeline",
        {
            "manifest": str(manifest_path),
            "output": str(output_dir),
            "mode": mode,
            "endpoint": endpoint,
            "base_url": base_url,
            "model": model,
            "threshold": threshold,
            "templates": templates_label,
            "split_policy": split_policy,
            "seed": seed,
            "speaker": speaker,
        },
        {"template_fingerprint": template_fingerprint(templates)},
    )
    click.echo(render_report([(mode, m)]), nl=False)


@cli.command("validate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
def validate_cmd(manifest_path):
    """Report class balance, split counts and dangling transcript paths."""
    manifest = load_manifest(manifest_path)
    report = validate(manifest, base_dir=Path(manifest_path).parent)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))


@cli.command("mock-serve")
@click.option("--port", default=8700, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
def mock_serve_cmd(port, threshold):
    """Run the bundled mock chat endpoint until interrupted."""
    server = make_mock_server(port=port, rule=MockRule(threshold=threshold))
    click.echo(f"mock endpoint on http://127.0.0.1:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def dispatch(argv: list[str]) -> int:
    """Run the CLI with explicit exit-code mapping (0 ok, 1 input, 2 endpoint)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except (AuthFailure, GatewayError) as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return 2
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
