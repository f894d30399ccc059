"""Participant manifests, diagnosis labels and deterministic train/test splits.

Manifests are JSONL, one participant per line, so synthetic and real corpora
share one loading path. Split assignment is seeded and reproducible.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

LABELS = ("AD", "non_AD")
SPLITS = ("train", "test", "unassigned")


class CorpusError(ValueError):
    pass


class DuplicateId(CorpusError):
    pass


class MissingLabel(CorpusError):
    pass


class UnreadableFile(CorpusError):
    pass


class InfeasiblePolicy(CorpusError):
    pass


@dataclass(frozen=True)
class ParticipantRecord:
    participant_id: str
    label: str
    split: str = "unassigned"
    transcript_path: str = ""
    age: int | None = None
    gender: str | None = None
    segment_count: int | None = None

    def to_dict(self) -> dict:
        d = {
            "participant_id": self.participant_id,
            "label": self.label,
            "split": self.split,
            "transcript_path": self.transcript_path,
        }
        for key in ("age", "gender", "segment_count"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d


@dataclass(frozen=True)
class Corpus:
    records: tuple[ParticipantRecord, ...]
    provenance: str = ""

    def by_id(self) -> dict[str, ParticipantRecord]:
        return {r.participant_id: r for r in self.records}

    def with_split(self, split: str) -> tuple[ParticipantRecord, ...]:
        return tuple(r for r in self.records if r.split == split)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SplitPolicy:
    train_count: int
    test_count: int
    stratify_by_label: bool = True
    seed: int = 0


@dataclass(frozen=True)
class ValidationReport:
    total: int
    label_counts: dict[str, int]
    split_counts: dict[str, int]
    split_label_counts: dict[str, dict[str, int]]
    missing_transcripts: tuple[str, ...]
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _record_from_line(raw: dict, line_number: int) -> ParticipantRecord:
    pid = raw.get("participant_id")
    if not pid:
        raise MissingLabel(f"line {line_number}: record has no participant_id")
    label = raw.get("label")
    if label not in LABELS:
        raise MissingLabel(
            f"line {line_number}: participant {pid!r} has missing or invalid label {label!r}"
        )
    split = raw.get("split", "unassigned")
    if split not in SPLITS:
        raise UnreadableFile(f"line {line_number}: invalid split {split!r}")
    return ParticipantRecord(
        participant_id=pid,
        label=label,
        split=split,
        transcript_path=raw.get("transcript_path", ""),
        age=raw.get("age"),
        gender=raw.get("gender"),
        segment_count=raw.get("segment_count"),
    )


def load_manifest(path: str | Path) -> Corpus:
    """Load a JSONL manifest; raises typed errors naming the offending line."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    records: list[ParticipantRecord] = []
    seen: set[str] = set()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UnreadableFile(f"line {number}: invalid JSON ({exc})") from exc
        record = _record_from_line(raw, number)
        if record.participant_id in seen:
            raise DuplicateId(
                f"line {number}: duplicate participant_id {record.participant_id!r}"
            )
        seen.add(record.participant_id)
        records.append(record)
    return Corpus(tuple(records), provenance=str(path))


def save_manifest(corpus: Corpus, path: str | Path) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in corpus.records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _take(counts_total: int, n_groups: int, index: int) -> int:
    # even division, earlier groups absorb the remainder
    base, rem = divmod(counts_total, n_groups)
    return base + (1 if index < rem else 0)


def split(corpus: Corpus, policy: SplitPolicy) -> Corpus:
    """Assign train/test splits; identical (corpus, policy) gives identical output."""
    n = len(corpus)
    if policy.train_count < 0 or policy.test_count < 0:
        raise InfeasiblePolicy("negative counts")
    if policy.train_count + policy.test_count > n:
        raise InfeasiblePolicy(
            f"train {policy.train_count} + test {policy.test_count} > corpus size {n}"
        )
    rng = random.Random(policy.seed)
    assignment: dict[str, str] = {}

    if policy.stratify_by_label:
        groups = [
            sorted(
                (r for r in corpus.records if r.label == label),
                key=lambda r: r.participant_id,
            )
            for label in LABELS
        ]
        for i, group in enumerate(groups):
            want_test = _take(policy.test_count, len(LABELS), i)
            want_train = _take(policy.train_count, len(LABELS), i)
            if want_test + want_train > len(group):
                raise InfeasiblePolicy(
                    f"class {LABELS[i]!r} has {len(group)} records, "
                    f"needs {want_train} train + {want_test} test"
                )
            shuffled = list(group)
            rng.shuffle(shuffled)
            for r in shuffled[:want_test]:
                assignment[r.participant_id] = "test"
            for r in shuffled[want_test : want_test + want_train]:
                assignment[r.participant_id] = "train"
    else:
        shuffled = sorted(corpus.records, key=lambda r: r.participant_id)
        rng.shuffle(shuffled)
        for r in shuffled[: policy.test_count]:
            assignment[r.participant_id] = "test"
        for r in shuffled[policy.test_count : policy.test_count + policy.train_count]:
            assignment[r.participant_id] = "train"

    new_records = tuple(
        dataclasses.replace(r, split=assignment.get(r.participant_id, "unassigned"))
        for r in corpus.records
    )
    return Corpus(new_records, provenance=corpus.provenance)


def validate(corpus: Corpus, base_dir: str | Path | None = None) -> ValidationReport:
    """Report class balance, split counts and dangling transcript paths."""
    label_counts = {label: 0 for label in LABELS}
    split_counts = {s: 0 for s in SPLITS}
    split_label_counts = {s: {label: 0 for label in LABELS} for s in SPLITS}
    missing: list[str] = []
    for r in corpus.records:
        label_counts[r.label] += 1
        split_counts[r.split] += 1
        split_label_counts[r.split][r.label] += 1
        if r.transcript_path:
            p = Path(r.transcript_path)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            if not p.exists():
                missing.append(r.participant_id)
    notes = []
    if corpus.provenance:
        notes.append(f"source: {corpus.provenance}")
    return ValidationReport(
        total=len(corpus),
        label_counts=label_counts,
        split_counts=split_counts,
        split_label_counts=split_label_counts,
        missing_transcripts=tuple(missing),
        notes=tuple(notes),
    )


def write_split_tsv(corpus: Corpus, path: str | Path) -> None:
    """Two-column interchange file: participant_id <TAB> split."""
    lines = [f"{r.participant_id}\t{r.split}" for r in corpus.records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def resolve_transcript_path(manifest_path: str | Path, record: ParticipantRecord) -> Path:
    """Relative transcript paths are anchored at the manifest's directory."""
    p = Path(record.transcript_path)
    if p.is_absolute():
        return p
    return Path(manifest_path).parent / p
