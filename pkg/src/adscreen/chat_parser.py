"""Parser for CHAT-format (.cha) transcripts.

Supports the subset of CHAT used by cookie-theft picture-description files:
@-header lines, *-speaker tiers with tab continuations, %-dependent tiers,
pause markers ``(.) (..) (...)``, retraces ``[//]``, repetitions ``[/]``,
error codes ``[* ...]``, unintelligible ``xxx`` tokens and bullet/NAK
timestamps. Any other bracketed code is stripped as ``other_code``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

PAUSE_SHORT = "pause_short"
PAUSE_MED = "pause_med"
PAUSE_LONG = "pause_long"
RETRACE = "retrace"
REPETITION = "repetition"
ERROR_CODE = "error_code"
UNINTELLIGIBLE = "unintelligible"
TIMESTAMP = "timestamp"
OTHER_CODE = "other_code"

ANNOTATION_KINDS = (
    PAUSE_SHORT,
    PAUSE_MED,
    PAUSE_LONG,
    RETRACE,
    REPETITION,
    ERROR_CODE,
    UNINTELLIGIBLE,
    TIMESTAMP,
    OTHER_CODE,
)


class ChatParseError(ValueError):
    """Base class for .cha parsing failures; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class MissingBegin(ChatParseError):
    """No @Begin marker before the first utterance (or file is empty)."""


class UnknownSpeaker(ChatParseError):
    """A *-tier speaker code is not declared in @Participants."""


class MalformedTier(ChatParseError):
    """A line starts with none of @, *, % or a tab continuation."""


@dataclass(frozen=True)
class AnnotationSpan:
    kind: str
    start: int
    end: int


@dataclass(frozen=True)
class Utterance:
    speaker_code: str
    raw_text: str
    annotations: tuple[AnnotationSpan, ...]
    dependent_tiers: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class TranscriptDocument:
    header_fields: tuple[tuple[str, str], ...]
    utterances: tuple[Utterance, ...]
    source_id: str

    @property
    def declared_speakers(self) -> tuple[str, ...]:
        for keyword, value in self.header_fields:
            if keyword == "Participants":
                return _participant_codes(value)
        return ()


@dataclass(frozen=True)
class CleanTranscript:
    participant_id: str
    text: str
    utterance_count: int
    pause_counts: tuple[int, int, int]
    repetition_count: int
    retrace_count: int

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "text": self.text,
            "utterance_count": self.utterance_count,
            "pause_counts": list(self.pause_counts),
            "repetition_count": self.repetition_count,
            "retrace_count": self.retrace_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CleanTranscript":
        return cls(
            participant_id=d["participant_id"],
            text=d["text"],
            utterance_count=int(d["utterance_count"]),
            pause_counts=tuple(int(x) for x in d["pause_counts"]),
            repetition_count=int(d["repetition_count"]),
            retrace_count=int(d["retrace_count"]),
        )


_SPEAKER_TIER_RE = re.compile(r"^\*([^:]*):\s*(.*)$")
_DEPENDENT_TIER_RE = re.compile(r"^%([^:]*):\s*(.*)$")
_SPEAKER_CODE_RE = re.compile(r"^[A-Z0-9]{3}$")

# Alternation order matters: error codes and retrace/repetition markers must
# win over the other_code catch-all.
_ANNOTATION_RE = re.compile(
    r"(?P<timestamp>•[^•]*•|\x15\d+_\d+\x15)"
    r"|(?P<pause>\((?P<dots>\.{1,3})\))"
    r"|(?P<retrace>\[//\])"
    r"|(?P<repetition>\[/\])"
    r"|(?P<error_code>\[\*[^\]]*\])"
    r"|(?P<other_code>\[[^\]]*\])"
    r"|(?P<unintelligible>(?<![\w])xxx(?![\w]))"
)

_PAUSE_KIND = {".": PAUSE_SHORT, "..": PAUSE_MED, "...": PAUSE_LONG}


def scan_annotations(raw_text: str) -> tuple[AnnotationSpan, ...]:
    """Locate all annotation spans in a tier; spans never overlap."""
    spans = []
    for m in _ANNOTATION_RE.finditer(raw_text):
        kind = m.lastgroup
        if kind == "dots":
            continue
        if kind == "pause":
            kind = _PAUSE_KIND[m.group("dots")]
        spans.append(AnnotationSpan(kind, m.start(), m.end()))
    return tuple(spans)


def _participant_codes(value: str) -> tuple[str, ...]:
    codes = []
    for part in value.split(","):
        part = part.strip()
        if part:
            codes.append(part.split()[0])
    return tuple(codes)


def _logical_lines(raw: str) -> list[tuple[int, str]]:
    """Join tab-continuation lines; returns (first physical line number, text)."""
    out: list[tuple[int, str]] = []
    for number, line in enumerate(raw.replace("\r\n", "\n").split("\n"), start=1):
        if line.startswith("\t") and out:
            prev_number, prev = out[-1]
            out[-1] = (prev_number, prev + " " + line.strip())
        else:
            out.append((number, line))
    return out


def parse_document(raw: str, source_id: str = "<string>") -> TranscriptDocument:
    """Parse .cha text into a structured document.

    Raises MissingBegin, UnknownSpeaker or MalformedTier, each with the
    offending line number.
    """
    header_fields: list[tuple[str, str]] = []
    utterances: list[Utterance] = []
    dependent: list[list[tuple[str, str]]] = []
    participants: tuple[str, ...] = ()
    begin_seen = False

    for number, line in _logical_lines(raw):
        if not line.strip():
            continue
        if line.startswith("@"):
            body = line[1:]
            if ":" in body:
                keyword, value = body.split(":", 1)
                keyword, value = keyword.strip(), value.strip()
            else:
                keyword, value = body.strip(), ""
            header_fields.append((keyword, value))
            if keyword == "Begin":
                begin_seen = True
            elif keyword == "Participants":
                participants = _participant_codes(value)
        elif line.startswith("*"):
            if not begin_seen:
                raise MissingBegin("utterance before @Begin", number)
            m = _SPEAKER_TIER_RE.match(line)
            if not m:
                raise MalformedTier(f"unparseable speaker tier: {line!r}", number)
            speaker, text = m.group(1), m.group(2)
            if not _SPEAKER_CODE_RE.match(speaker):
                raise MalformedTier(f"bad speaker code {speaker!r}", number)
            if speaker not in participants:
                raise UnknownSpeaker(f"speaker {speaker!r} not in @Participants", number)
            utterances.append(
                Utterance(speaker, text, scan_annotations(text))
            )
            dependent.append([])
        elif line.startswith("%"):
            m = _DEPENDENT_TIER_RE.match(line)
            if not m or not utterances:
                raise MalformedTier(f"dangling or unparseable dependent tier: {line!r}", number)
            dependent[-1].append((m.group(1), m.group(2)))
        else:
            raise MalformedTier(f"unrecognized line: {line!r}", number)

    if not begin_seen:
        raise MissingBegin("no @Begin marker", None)

    final = tuple(
        Utterance(u.speaker_code, u.raw_text, u.annotations, tuple(dep))
        for u, dep in zip(utterances, dependent)
    )
    return TranscriptDocument(tuple(header_fields), final, source_id)


_SCOPED_RETRACE_RE = re.compile(r"<([^<>]*)>\s*\[//\]")
_SCOPED_REPEAT_RE = re.compile(r"<([^<>]*)>\s*\[/\]")
_LEFTOVER_RE = re.compile(
    r"•[^•]*•|\x15\d+_\d+\x15|\(\.{1,3}\)|\[[^\]]*\]"
)
_CONTROL_CHARS_RE = re.compile(r"[()<>\[\]%*•\x15]")


def _drop_preceding(text: str, marker: re.Match, collapse: bool) -> str:
    """Remove the material a bare [/] or [//] marker points back at.

    With collapse=True ([/]) the longest duplicated token run before the
    marker is removed; otherwise ([//]) the single preceding word.
    """
    before_tokens = text[: marker.start()].split()
    after = text[marker.end():].lstrip()
    k = 1
    if collapse:
        after_tokens = after.split()
        for j in range(min(len(before_tokens), len(after_tokens)), 0, -1):
            if before_tokens[-j:] == after_tokens[:j]:
                k = j
                break
    kept = before_tokens[: max(len(before_tokens) - k, 0)]
    return (" ".join(kept) + " " + after).strip()


def strip_annotations(
    raw_text: str, annotations: tuple[AnnotationSpan, ...] | None = None
) -> tuple[str, dict[str, int]]:
    """Remove annotation markup and return (clean text, per-kind removal counts).

    Retraced material is replaced by its repair, repetitions collapse to one
    occurrence, xxx tokens are dropped, all remaining control characters and
    punctuation-only tokens are removed, and whitespace is normalized.
    """
    if annotations is None:
        annotations = scan_annotations(raw_text)
    counts = {kind: 0 for kind in ANNOTATION_KINDS}
    for span in annotations:
        counts[span.kind] += 1

    text = _SCOPED_RETRACE_RE.sub("", raw_text)
    text = _SCOPED_REPEAT_RE.sub("", text)
    while True:
        m = re.search(r"\[//\]", text)
        if not m:
            break
        text = _drop_preceding(text, m, collapse=False)
    while True:
        m = re.search(r"\[/\]", text)
        if not m:
            break
        text = _drop_preceding(text, m, collapse=True)

    text = _LEFTOVER_RE.sub(" ", text)
    tokens = []
    for token in text.split():
        token = _CONTROL_CHARS_RE.sub("", token)
        if token == "xxx":
            continue
        if not any(ch.isalnum() for ch in token):
            continue
        tokens.append(token)
    return " ".join(tokens), counts


def extract_participant_text(doc: TranscriptDocument, speaker: str) -> CleanTranscript:
    """Concatenate the cleaned utterances of one speaker, in file order."""
    if speaker not in doc.declared_speakers:
        raise UnknownSpeaker(f"speaker {speaker!r} not in @Participants")
    pieces: list[str] = []
    totals = {kind: 0 for kind in ANNOTATION_KINDS}
    utterance_count = 0
    for utt in doc.utterances:
        if utt.speaker_code != speaker:
            continue
        utterance_count += 1
        clean, counts = strip_annotations(utt.raw_text, utt.annotations)
        if clean:
            pieces.append(clean)
        for kind, n in counts.items():
            totals[kind] += n
    return CleanTranscript(
        participant_id=doc.source_id,
        text=" ".join(pieces),
        utterance_count=utterance_count,
        pause_counts=(totals[PAUSE_SHORT], totals[PAUSE_MED], totals[PAUSE_LONG]),
        repetition_count=totals[REPETITION],
        retrace_count=totals[RETRACE],
    )
