import random
from fractions import Fraction

import pytest

from adscreen.baselines import Prediction
from adscreen.corpus import Corpus, ParticipantRecord
from adscreen.evaluator import (
    ConfusionMatrix,
    EmptyMatrix,
    Metrics,
    MissingPrediction,
    UnknownParticipant,
    ZeroBaseline,
    confuse,
    load_predictions,
    metrics,
    relative_improvement,
    render_report,
    render_report_csv,
    save_predictions,
)


def definitional_metrics(tp, fp, fn, tn):
    """Independent oracle over exact rationals, straight from the definitions."""
    total = tp + fp + fn + tn

    def safe(num, den):
        return Fraction(num, den) if den else Fraction(0)

    accuracy = Fraction(tp + tn, total)
    precision_pos = safe(tp, tp + fp)
    recall_pos = safe(tp, tp + fn)
    f1_pos = (
        2 * precision_pos * recall_pos / (precision_pos + recall_pos)
        if precision_pos + recall_pos
        else Fraction(0)
    )
    precision_neg = safe(tn, tn + fn)
    recall_neg = safe(tn, tn + fp)
    f1_neg = (
        2 * precision_neg * recall_neg / (precision_neg + recall_neg)
        if precision_neg + recall_neg
        else Fraction(0)
    )
    macro = (f1_pos + f1_neg) / 2
    return accuracy, precision_pos, recall_pos, f1_pos, precision_neg, recall_neg, f1_neg, macro


def _gold_test_corpus(labels):
    return Corpus(
        tuple(
            ParticipantRecord(f"p{i:03d}", label, split="test")
            for i, label in enumerate(labels)
        )
    )


def _predictions(labels, source="mock"):
    return [
        Prediction(f"p{i:03d}", label, 1.0 if label == "AD" else -1.0, source)
        for i, label in enumerate(labels)
    ]


class TestConfuse:
    def test_all_correct_48(self):
        labels = ["AD"] * 24 + ["non_AD"] * 24
        cm = confuse(_predictions(labels), _gold_test_corpus(labels))
        assert (cm.fn, cm.fp) == (0, 0)
        assert cm.tp + cm.tn == 48

    def test_missing_prediction_named(self):
        labels = ["AD"] * 24 + ["non_AD"] * 24
        with pytest.raises(MissingPrediction, match="p047"):
            confuse(_predictions(labels)[:-1], _gold_test_corpus(labels))

    def test_hand_built_matrix(self):
        gold = ["AD"] * 24 + ["non_AD"] * 24
        predicted = (
            ["AD"] * 20 + ["non_AD"] * 4  # 20 tp, 4 fn
            + ["AD"] * 4 + ["non_AD"] * 20  # 4 fp, 20 tn
        )
        cm = confuse(_predictions(predicted), _gold_test_corpus(gold))
        assert cm == ConfusionMatrix(tp=20, fp=4, fn=4, tn=20)

    def test_unknown_participant(self):
        gold = _gold_test_corpus(["AD", "non_AD"])
        bad = [Prediction("ghost", "AD", 1.0, "mock")]
        with pytest.raises(UnknownParticipant):
            confuse(bad, gold)

    def test_non_test_participant_rejected(self):
        gold = Corpus((ParticipantRecord("p000", "AD", split="train"),))
        with pytest.raises(UnknownParticipant):
            confuse([Prediction("p000", "AD", 1.0, "mock")], gold)

    def test_permutation_invariance(self):
        gold = ["AD"] * 10 + ["non_AD"] * 10
        predicted = ["AD"] * 7 + ["non_AD"] * 6 + ["AD"] * 7
        preds = _predictions(predicted)
        shuffled = preds[:]
        random.Random(5).shuffle(shuffled)
        assert confuse(preds, _gold_test_corpus(gold)) == confuse(
            shuffled, _gold_test_corpus(gold)
        )


class TestMetrics:
    def test_documented_example(self):
        m = metrics(ConfusionMatrix(tp=20, fp=4, fn=4, tn=20))
        assert m.accuracy == pytest.approx(40 / 48)
        assert m.macro_f1 == pytest.approx(40 / 48)

    def test_perfect(self):
        m = metrics(ConfusionMatrix(tp=24, fp=0, fn=0, tn=24))
        assert m.accuracy == 1.0
        assert m.macro_f1 == 1.0

    def test_degenerate_predictor(self):
        m = metrics(ConfusionMatrix(tp=0, fp=0, fn=24, tn=24))
        assert m.f1_pos == 0.0
        assert m.accuracy == 0.5

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            metrics(ConfusionMatrix(0, 0, 0, 0))

    def test_all_small_matrices_against_oracle(self):
        checked = 0
        for total in range(1, 9):
            for tp in range(total + 1):
                for fp in range(total - tp + 1):
                    for fn in range(total - tp - fp + 1):
                        tn = total - tp - fp - fn
                        m = metrics(ConfusionMatrix(tp, fp, fn, tn))
                        oracle = definitional_metrics(tp, fp, fn, tn)
                        got = (
                            m.accuracy, m.precision_pos, m.recall_pos, m.f1_pos,
                            m.precision_neg, m.recall_neg, m.f1_neg, m.macro_f1,
                        )
                        for a, b in zip(got, oracle):
                            assert abs(a - float(b)) <= 1e-12
                        checked += 1
        assert checked == 494

    def test_label_swap_symmetry(self):
        rng = random.Random(13)
        for _ in range(1000):
            cm = ConfusionMatrix(*(rng.randrange(0, 30) for _ in range(4)))
            if cm.total == 0:
                continue
            m, s = metrics(cm), metrics(cm.swapped())
            assert s.f1_pos == pytest.approx(m.f1_neg, abs=1e-15)
            assert s.f1_neg == pytest.approx(m.f1_pos, abs=1e-15)
            assert s.accuracy == pytest.approx(m.accuracy, abs=1e-15)
            assert s.macro_f1 == pytest.approx(m.macro_f1, abs=1e-15)


class TestRelativeImprovement:
    def test_eleven_point_one(self):
        assert relative_improvement(83.33, 75.00) == 11.1

    def test_sixteen_point_seven(self):
        assert relative_improvement(87.5, 75.0) == 16.7

    def test_identity(self):
        assert relative_improvement(75.0, 75.0) == 0.0

    def test_zero_baseline(self):
        with pytest.raises(ZeroBaseline):
            relative_improvement(50.0, 0.0)


class TestRenderReport:
    def test_single_row(self):
        m = metrics(ConfusionMatrix(tp=22, fp=6, fn=2, tn=18))
        text = render_report([("CoT", m)])
        lines = text.splitlines()
        assert len(lines) == 3
        assert "CoT" in lines[2]
        assert "83.33" in lines[2] and "83.22" in lines[2]

    def test_explicit_order_is_deterministic(self):
        a = metrics(ConfusionMatrix(10, 2, 2, 10))
        b = metrics(ConfusionMatrix(8, 4, 4, 8))
        order = ["First", "Second"]
        r1 = render_report([("First", a), ("Second", b)], order=order)
        r2 = render_report([("Second", b), ("First", a)], order=order)
        assert r1 == r2

    def test_csv(self):
        m = metrics(ConfusionMatrix(10, 2, 2, 10))
        csv = render_report_csv([("run", m)])
        assert csv.splitlines()[0] == "method,accuracy,macro_f1"


def test_predictions_file_round_trip(tmp_path):
    preds = _predictions(["AD", "non_AD", "AD"])
    save_predictions(preds, tmp_path / "p.jsonl")
    assert load_predictions(tmp_path / "p.jsonl") == preds
