"""Cue-coverage analysis over the 12-item cookie-theft lexicon.

Matching is exact against a hand-curated variant table (plural, verb
inflection and possessive forms only; no synonyms, no stemming), so results
are deterministic and auditable.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .chat_parser import CleanTranscript

_DEFAULT_VARIANTS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("stool", ("stool", "stools", "stool's")),
    ("sink", ("sink", "sinks", "sink's")),
    ("dish", ("dish", "dishes", "dish's")),
    ("wash", ("wash", "washes", "washed", "washing")),
    ("jar", ("jar", "jars", "jar's")),
    ("cookie", ("cookie", "cookies", "cookie's")),
    ("child", ("child", "children", "child's", "children's")),
    ("mother", ("mother", "mothers", "mother's")),
    ("window", ("window", "windows", "window's")),
    ("cabinet", ("cabinet", "cabinets", "cabinet's")),
    ("kitchen", ("kitchen", "kitchens", "kitchen's")),
    ("water", ("water", "waters")),
)

LEXICON_SIZE = 12


@dataclass(frozen=True)
class CueLexicon:
    entries: tuple[tuple[str, tuple[str, ...]], ...] = _DEFAULT_VARIANTS

    def __post_init__(self):
        if len(self.entries) != LEXICON_SIZE:
            raise ValueError(f"lexicon must have exactly {LEXICON_SIZE} lemmas")
        seen: dict[str, str] = {}
        for lemma, variants in self.entries:
            for v in variants:
                if v != v.lower():
                    raise ValueError(f"variant {v!r} is not lowercase")
                if v in seen:
                    raise ValueError(f"variant {v!r} shared by {seen[v]!r} and {lemma!r}")
                seen[v] = lemma

    @property
    def lemmas(self) -> tuple[str, ...]:
        return tuple(lemma for lemma, _ in self.entries)

    def variant_to_lemma(self) -> dict[str, str]:
        return {v: lemma for lemma, variants in self.entries for v in variants}


DEFAULT_LEXICON = CueLexicon()


def load_lexicon(path: str | Path) -> CueLexicon:
    """Load a lexicon file: one lemma per line, comma-separated extra variants."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip().lower() for f in line.split(",") if f.strip()]
        lemma, extra = fields[0], fields[1:]
        variants = (lemma, *[v for v in extra if v != lemma])
        entries.append((lemma, variants))
    return CueLexicon(tuple(entries))


@dataclass(frozen=True)
class CueReport:
    matched: frozenset[str]
    proportion: float
    per_lemma_counts: dict[str, int]
    total_tokens: int

    def matched_in_order(self, lexicon: CueLexicon = DEFAULT_LEXICON) -> tuple[str, ...]:
        return tuple(lemma for lemma in lexicon.lemmas if lemma in self.matched)

    def to_dict(self) -> dict:
        return {
            "matched": sorted(self.matched),
            "proportion": self.proportion,
            "per_lemma_counts": dict(self.per_lemma_counts),
            "total_tokens": self.total_tokens,
        }


@dataclass(frozen=True)
class FeatureVector:
    cue_proportion: float
    token_count: int
    type_token_ratio: float
    pause_total: int
    repetition_count: int
    retrace_count: int

    FEATURE_NAMES = (
        "cue_proportion",
        "token_count",
        "type_token_ratio",
        "pause_total",
        "repetition_count",
        "retrace_count",
    )

    def as_array(self) -> np.ndarray:
        return np.array(
            [getattr(self, name) for name in self.FEATURE_NAMES], dtype=float
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FEATURE_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        return cls(
            cue_proportion=float(d["cue_proportion"]),
            token_count=int(d["token_count"]),
            type_token_ratio=float(d["type_token_ratio"]),
            pause_total=int(d["pause_total"]),
            repetition_count=int(d["repetition_count"]),
            retrace_count=int(d["retrace_count"]),
        )


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokens, edge punctuation stripped, empties dropped."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def cue_coverage(tokens: list[str], lexicon: CueLexicon = DEFAULT_LEXICON) -> CueReport:
    """Set-based coverage: a lemma matches iff any of its variants equals a token."""
    lookup = lexicon.variant_to_lemma()
    counts = {lemma: 0 for lemma in lexicon.lemmas}
    for token in tokens:
        lemma = lookup.get(token)
        if lemma is not None:
            counts[lemma] += 1
    matched = frozenset(lemma for lemma, n in counts.items() if n > 0)
    return CueReport(
        matched=matched,
        proportion=len(matched) / len(lexicon.entries),
        per_lemma_counts=counts,
        total_tokens=len(tokens),
    )


def featurize(
    transcript: CleanTranscript, lexicon: CueLexicon = DEFAULT_LEXICON
) -> FeatureVector:
    tokens = tokenize(transcript.text)
    report = cue_coverage(tokens, lexicon)
    ttr = len(set(tokens)) / len(tokens) if tokens else 0.0
    return FeatureVector(
        cue_proportion=report.proportion,
        token_count=len(tokens),
        type_token_ratio=ttr,
        pause_total=sum(transcript.pause_counts),
        repetition_count=transcript.repetition_count,
        retrace_count=transcript.retrace_count,
    )


class CueFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping CleanTranscripts to feature matrices."""

    def __init__(self, lexicon: CueLexicon = DEFAULT_LEXICON):
        self.lexicon = lexicon

    def fit(self, X, y=None):
        return self

    def transform(self, X: list[CleanTranscript]) -> np.ndarray:
        return np.stack([featurize(t, self.lexicon).as_array() for t in X])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FeatureVector.FEATURE_NAMES, dtype=object)
