"""Deterministic compilation of zero-shot / few-shot / chain-of-thought prompts.

Wording lives in versioned plain-text template files (double-brace
placeholders), so prompt changes never require code changes. The same
template files are shared with any training-side consumer via
``template_fingerprint``.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .chat_parser import CleanTranscript
from .cue_analyzer import CueLexicon, CueReport, DEFAULT_LEXICON

MODES = ("zero_shot", "few_shot", "cot")
TEMPLATE_NAMES = ("system", "zero_shot_user", "cot_user", "exemplar_user")
DEFAULT_TEMPLATE_VERSION = "v1"

TRANSCRIPT_OPEN = "<<<"
TRANSCRIPT_CLOSE = ">>>"


class PromptError(ValueError):
    pass


class MissingCueReport(PromptError):
    """cot mode requires a CueReport."""


class EmptyExemplars(PromptError):
    """few_shot mode requires at least one exemplar."""


@dataclass(frozen=True)
class PromptBundle:
    mode: str
    messages: tuple[tuple[str, str], ...]
    exemplar_ids: tuple[str, ...]
    fingerprint: str

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "exemplar_ids": list(self.exemplar_ids),
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PromptBundle":
        return cls(
            mode=d["mode"],
            messages=tuple((m["role"], m["content"]) for m in d["messages"]),
            exemplar_ids=tuple(d.get("exemplar_ids", ())),
            fingerprint=d["fingerprint"],
        )


def load_templates(
    version: str = DEFAULT_TEMPLATE_VERSION, path: str | Path | None = None
) -> dict[str, str]:
    """Load the named template set, either bundled or from a directory."""
    templates = {}
    if path is not None:
        base = Path(path)
        for name in TEMPLATE_NAMES:
            templates[name] = (base / f"{name}.txt").read_text(encoding="utf-8")
    else:
        root = resources.files("adscreen") / "templates" / version
        for name in TEMPLATE_NAMES:
            templates[name] = (root / f"{name}.txt").read_text(encoding="utf-8")
    return templates


def template_fingerprint(templates: dict[str, str]) -> str:
    """Stable digest over the template set; shared contract with trainers."""
    h = hashlib.sha256()
    for name in sorted(templates):
        h.update(name.encode("utf-8"))
        h.update(b"\x00")
        h.update(templates[name].encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def _fill(template: str, slots: dict[str, str]) -> str:
    out = template
    for key, value in slots.items():
        out = out.replace("{{" + key + "}}", value)
    return out.strip()


def message_fingerprint(messages: tuple[tuple[str, str], ...]) -> str:
    h = hashlib.sha256()
    for role, content in messages:
        h.update(role.encode("utf-8"))
        h.update(b"\x1e")
        h.update(content.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


def _verdict_for(label: str) -> str:
    return "Diagnosis: non-AD" if label == "non_AD" else "Diagnosis: AD"


def build_prompt(
    mode: str,
    transcript: CleanTranscript,
    report: CueReport | None = None,
    exemplars: list[tuple[CleanTranscript, str]] = (),
    templates: dict[str, str] | None = None,
    lexicon: CueLexicon = DEFAULT_LEXICON,
) -> PromptBundle:
    """Compile a deterministic message sequence for one transcript."""
    if mode not in MODES:
        raise PromptError(f"unknown mode {mode!r}")
    if templates is None:
        templates = load_templates()

    messages: list[tuple[str, str]] = [("system", templates["system"].strip())]
    exemplar_ids: tuple[str, ...] = ()

    if mode == "cot":
        if report is None:
            raise MissingCueReport("cot mode requires a cue report")
        matched = report.matched_in_order(lexicon)
        k = len(matched)
        user = _fill(
            templates["cot_user"],
            {
                "transcript": transcript.text,
                "cue_line": f"Cue coverage: {k}/{len(lexicon.entries)}",
                "matched": ", ".join(matched) if matched else "(none)",
            },
        )
        messages.append(("user", user))
    elif mode == "few_shot":
        if not exemplars:
            raise EmptyExemplars("few_shot mode requires at least one exemplar")
        exemplar_ids = tuple(t.participant_id for t, _ in exemplars)
        for ex_transcript, label in exemplars:
            messages.append(
                ("user", _fill(templates["exemplar_user"], {"transcript": ex_transcript.text}))
            )
            messages.append(("assistant", _verdict_for(label)))
        messages.append(
            ("user", _fill(templates["zero_shot_user"], {"transcript": transcript.text}))
        )
    else:
        messages.append(
            ("user", _fill(templates["zero_shot_user"], {"transcript": transcript.text}))
        )

    frozen = tuple(messages)
    return PromptBundle(
        mode=mode,
        messages=frozen,
        exemplar_ids=exemplar_ids,
        fingerprint=message_fingerprint(frozen),
    )


def fingerprint(bundle: PromptBundle) -> str:
    return message_fingerprint(bundle.messages)


def select_exemplars(
    candidates: list[tuple[CleanTranscript, str]],
    seed: int,
    per_class: int = 1,
) -> list[tuple[CleanTranscript, str]]:
    """Seeded, class-balanced exemplar pick; order is AD block then non-AD."""
    rng = random.Random(seed)
    chosen: list[tuple[CleanTranscript, str]] = []
    for label in ("AD", "non_AD"):
        pool = sorted(
            (c for c in candidates if c[1] == label),
            key=lambda c: c[0].participant_id,
        )
        if len(pool) < per_class:
            raise EmptyExemplars(f"not enough {label} exemplars ({len(pool)} < {per_class})")
        chosen.extend(rng.sample(pool, per_class))
    return chosen
