"""Confusion matrices, accuracy/F1 metrics, relative improvements and reports.

AD is the positive class throughout. F1 with a zero denominator is defined
as 0 so degenerate predictors rank last deterministically; the headline F1
is macro (unweighted mean of the per-class F1s).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .baselines import Prediction
from .corpus import Corpus


class EvalError(ValueError):
    pass


class MissingPrediction(EvalError):
    pass


class UnknownParticipant(EvalError):
    pass


class EmptyMatrix(EvalError):
    pass


class ZeroBaseline(EvalError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionMatrix":
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision_pos: float
    recall_pos: float
    f1_pos: float
    precision_neg: float
    recall_neg: float
    f1_neg: float
    macro_f1: float
    support: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_pos": self.precision_pos,
            "recall_pos": self.recall_pos,
            "f1_pos": self.f1_pos,
            "precision_neg": self.precision_neg,
            "recall_neg": self.recall_neg,
            "f1_neg": self.f1_neg,
            "macro_f1": self.macro_f1,
            "support": self.support,
        }


def confuse(predictions: list[Prediction], gold: Corpus) -> ConfusionMatrix:
    """Count against the gold test split; missing test predictions are an error."""
    by_id = gold.by_id()
    test_ids = {r.participant_id for r in gold.records if r.split == "test"}
    seen: set[str] = set()
    tp = fp = fn = tn = 0
    for p in predictions:
        record = by_id.get(p.participant_id)
        if record is None or record.split != "test":
            raise UnknownParticipant(
                f"prediction for {p.participant_id!r} which is not a test participant"
            )
        seen.add(p.participant_id)
        gold_ad = record.label == "AD"
        pred_ad = p.label == "AD"
        if gold_ad and pred_ad:
            tp += 1
        elif gold_ad:
            fn += 1
        elif pred_ad:
            fp += 1
        else:
            tn += 1
    missing = sorted(test_ids - seen)
    if missing:
        raise MissingPrediction(f"no prediction for test participants: {missing}")
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def _f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return precision, recall, f1


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total < 1:
        raise EmptyMatrix("confusion matrix is empty")
    precision_pos, recall_pos, f1_pos = _f1(cm.tp, cm.fp, cm.fn)
    precision_neg, recall_neg, f1_neg = _f1(cm.tn, cm.fn, cm.fp)
    return Metrics(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision_pos=precision_pos,
        recall_pos=recall_pos,
        f1_pos=f1_pos,
        precision_neg=precision_neg,
        recall_neg=recall_neg,
        f1_neg=f1_neg,
        macro_f1=(f1_pos + f1_neg) / 2,
        support=cm.total,
    )


def relative_improvement(candidate_acc: float, baseline_acc: float) -> float:
    """Percent change over baseline, reported to one decimal."""
    if baseline_acc <= 0:
        raise ZeroBaseline("baseline accuracy must be > 0")
    return round(100.0 * (candidate_acc - baseline_acc) / baseline_acc, 1)


def render_report(rows: list[tuple[str, Metrics]], order: list[str] | None = None) -> str:
    """Fixed-width Method/Acc/F1 table; percentages to two decimals."""
    if not rows:
        raise EvalError("report needs at least one row")
    if order is not None:
        by_name = dict(rows)
        rows = [(name, by_name[name]) for name in order]
    name_width = max(len("Method"), *(len(name) for name, _ in rows))
    header = f"{'Method':<{name_width}} | {'Acc (%)':>8} | {'F1 (%)':>8}"
    rule = "-" * name_width + "-+-" + "-" * 8 + "-+-" + "-" * 8
    lines = [header, rule]
    for name, m in rows:
        lines.append(
            f"{name:<{name_width}} | {m.accuracy * 100:>8.2f} | {m.macro_f1 * 100:>8.2f}"
        )
    return "\n".join(lines) + "\n"


def render_report_csv(rows: list[tuple[str, Metrics]]) -> str:
    lines = ["method,accuracy,macro_f1"]
    for name, m in rows:
        lines.append(f"{name},{m.accuracy:.6f},{m.macro_f1:.6f}")
    return "\n".join(lines) + "\n"


def load_predictions(path: str | Path) -> list[Prediction]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Prediction.from_dict(json.loads(line)))
    return out


def save_predictions(predictions: list[Prediction], path: str | Path) -> None:
    lines = [json.dumps(p.to_dict(), sort_keys=True) for p in predictions]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
