"""Seeded synthetic cookie-theft-style corpus generation.

Stands in for the access-restricted clinical corpus at desk scale: each
participant gets a syntactically valid .cha file whose injected cue lemmas
and disfluency annotations are recorded in a truth log, so analyzer output
can be checked against exact ground truth. Filler vocabulary is disjoint
from every lexicon variant, which makes the truth log airtight.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .chat_parser import PAUSE_LONG, PAUSE_MED, PAUSE_SHORT, REPETITION
from .corpus import Corpus, ParticipantRecord, save_manifest
from .cue_analyzer import CueLexicon, DEFAULT_LEXICON

# None of these words (or their forms used here) may collide with a lexicon
# variant; test_synth asserts the disjointness.
FILLER_WORDS = (
    "the", "a", "and", "then", "there", "here", "is", "are", "was", "she",
    "he", "it", "they", "on", "over", "by", "near", "up", "down", "outside",
    "standing", "looking", "reaching", "falling", "running", "laughing",
    "trying", "holding", "getting", "going", "little", "big", "busy", "wet",
    "open", "full", "floor", "curtain", "garden", "summer", "afternoon",
    "something", "everything", "really", "quite", "just", "also", "again",
)

_DISFLUENCY_KINDS = (
    PAUSE_SHORT, PAUSE_SHORT, PAUSE_MED, PAUSE_LONG, REPETITION, REPETITION,
)
_PAUSE_MARK = {PAUSE_SHORT: "(.)", PAUSE_MED: "(..)", PAUSE_LONG: "(...)"}


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: int = 50
    p_cue_AD: float = 0.35
    p_cue_nonAD: float = 0.80
    disfluency_rate_AD: float = 1.5
    disfluency_rate_nonAD: float = 0.3
    mean_tokens: int = 60
    seed: int = 0

    def validate(self) -> None:
        for name in ("p_cue_AD", "p_cue_nonAD"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidConfig(f"{name} must be in [0,1], got {p}")
        for name in ("disfluency_rate_AD", "disfluency_rate_nonAD"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")
        if self.n_per_class < 1:
            raise InvalidConfig("n_per_class must be >= 1")
        if self.mean_tokens < 5:
            raise InvalidConfig("mean_tokens must be >= 5")


@dataclass(frozen=True)
class TruthRecord:
    participant_id: str
    label: str
    lemmas: tuple[str, ...]
    annotation_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "label": self.label,
            "lemmas": list(self.lemmas),
            "annotation_counts": dict(self.annotation_counts),
        }


def _make_tokens(rng: random.Random, config: SynthConfig, label: str,
                 lexicon: CueLexicon) -> tuple[list[str], tuple[str, ...], dict[str, int]]:
    p_cue = config.p_cue_AD if label == "AD" else config.p_cue_nonAD
    rate = config.disfluency_rate_AD if label == "AD" else config.disfluency_rate_nonAD

    included = [lemma for lemma, _ in lexicon.entries if rng.random() < p_cue]
    cue_tokens = {}
    for lemma, variants in lexicon.entries:
        if lemma in included:
            cue_tokens[lemma] = rng.choice(variants)

    n_tokens = max(5, int(round(rng.gauss(config.mean_tokens, config.mean_tokens * 0.15))))
    n_filler = max(len(included), n_tokens) - len(included)
    tokens = [rng.choice(FILLER_WORDS) for _ in range(n_filler)]
    filler_count = len(tokens)
    for lemma in included:
        tokens.insert(rng.randrange(len(tokens) + 1), cue_tokens[lemma])

    # disfluency injection: pauses become extra tokens, repetitions rewrite
    # a filler token in place so injected cue counts stay untouched
    expected = rate * len(tokens) / 10.0
    n_disf = int(expected)
    if rng.random() < expected - n_disf:
        n_disf += 1
    counts = {k: 0 for k in set(_DISFLUENCY_KINDS)}
    for _ in range(n_disf):
        kind = rng.choice(_DISFLUENCY_KINDS)
        if kind == REPETITION:
            if filler_count == 0:
                continue
            filler_positions = [
                i for i, t in enumerate(tokens) if t in FILLER_WORDS and "[/]" not in t
            ]
            if not filler_positions:
                continue
            i = rng.choice(filler_positions)
            tokens[i] = f"{tokens[i]} [/] {tokens[i]}"
        else:
            tokens.insert(rng.randrange(len(tokens) + 1), _PAUSE_MARK[kind])
        counts[kind] += 1
    return tokens, tuple(included), counts


def _render_cha(rng: random.Random, participant_id: str, tokens: list[str]) -> str:
    lines = [
        "@Begin",
        "@Languages:\teng",
        "@Participants:\tPAR Participant, INV Investigator",
        f"@ID:\teng|synth|PAR||||{participant_id}|Participant|||",
        "*INV:\tjust tell me everything that you see going on in that picture .",
    ]
    i = 0
    while i < len(tokens):
        take = rng.randint(6, 12)
        chunk = tokens[i : i + take]
        i += take
        lines.append("*PAR:\t" + " ".join(chunk) + " .")
    lines.append("@End")
    return "\n".join(lines) + "\n"


def generate(
    config: SynthConfig,
    out_dir: str | Path,
    lexicon: CueLexicon = DEFAULT_LEXICON,
) -> tuple[Corpus, list[TruthRecord]]:
    """Emit 2*n_per_class .cha files plus manifest.jsonl and truth.jsonl.

    Identical config yields byte-identical output.
    """
    config.validate()
    out_dir = Path(out_dir)
    (out_dir / "cha").mkdir(parents=True, exist_ok=True)
    rng = random.Random(config.seed)

    records: list[ParticipantRecord] = []
    truth: list[TruthRecord] = []
    for label, tag in (("AD", "ad"), ("non_AD", "nonad")):
        for i in range(config.n_per_class):
            pid = f"{tag}-{i:03d}"
            tokens, lemmas, counts = _make_tokens(rng, config, label, lexicon)
            cha = _render_cha(rng, pid, tokens)
            rel_path = f"cha/{pid}.cha"
            (out_dir / rel_path).write_text(cha, encoding="utf-8", newline="\n")
            records.append(
                ParticipantRecord(participant_id=pid, label=label, transcript_path=rel_path)
            )
            truth.append(TruthRecord(pid, label, lemmas, counts))

    corpus = Corpus(tuple(records), provenance=f"synthetic seed={config.seed}")
    save_manifest(corpus, out_dir / "manifest.jsonl")
    truth_lines = [json.dumps(t.to_dict(), sort_keys=True) for t in truth]
    (out_dir / "truth.jsonl").write_text("\n".join(truth_lines) + "\n", encoding="utf-8")
    return corpus, truth


def load_truth(path: str | Path) -> list[TruthRecord]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(
            TruthRecord(
                d["participant_id"], d["label"], tuple(d["lemmas"]),
                dict(d["annotation_counts"]),
            )
        )
    return out
