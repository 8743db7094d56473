"""Micro precision/recall/F1 at quadruple, pair, emotion and cause level."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

from .corpus import overlapped_quadruples
from .errors import InputError

# Reference speeds (sentences/s) reported for the GPU models; hardware dependent.
REFERENCE_SPEED_MULTI_GRID = 104.56
REFERENCE_SPEED_ONE_GRID = 77.58


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    pred_count: int
    gold_count: int

    @classmethod
    def from_counts(cls, tp, pred_count, gold_count):
        p = tp / pred_count if pred_count else 0.0
        r = tp / gold_count if gold_count else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f1, tp, pred_count, gold_count)

    def to_json(self):
        return {"p": self.precision, "r": self.recall, "f1": self.f1, "tp": self.tp, "pred": self.pred_count, "gold": self.gold_count}


def _aligned(pred, gold):
    pred = {k: set(v) for k, v in pred.items()}
    gold = {k: set(v) for k, v in gold.items()}
    if pred.keys() != gold.keys():
        missing = sorted(gold.keys() - pred.keys())[:5]
        extra = sorted(pred.keys() - gold.keys())[:5]
        raise InputError(f"prediction and gold dialogs are not aligned (missing {missing}, unexpected {extra})")
    return pred, gold


def _micro(pred, gold, project):
    pred, gold = _aligned(pred, gold)
    tp = n_pred = n_gold = 0
    for key in gold:
        p = {project(q) for q in pred[key]}
        g = {project(q) for q in gold[key]}
        tp += len(p & g)
        n_pred += len(p)
        n_gold += len(g)
    return PRF.from_counts(tp, n_pred, n_gold)


def evaluate_quadruples(pred, gold):
    """Exact four-element matching; ``pred``/``gold`` map dialog id -> quadruples."""
    return _micro(pred, gold, lambda q: q)


def evaluate_pairs(pred, gold):
    return _micro(pred, gold, lambda q: (q.emotion_idx, q.cause_idx))


def evaluate_utterance_level(pred, gold, role):
    if role == "emotion":
        return _micro(pred, gold, lambda q: q.emotion_idx)
    if role == "cause":
        return _micro(pred, gold, lambda q: q.cause_idx)
    raise ValueError(f"role must be 'emotion' or 'cause', got {role!r}")


def restrict_to_overlap(pred_quads, gold_quads):
    """Overlapped gold quadruples, and the predictions that touch the same utterances.

    A prediction is kept when its emotion index is the emotion index of some
    overlapped gold quadruple, or its cause index is the cause index of one.
    """
    gold_ov = overlapped_quadruples(gold_quads)
    emo = {q.emotion_idx for q in gold_ov}
    cause = {q.cause_idx for q in gold_ov}
    pred_ov = {q for q in pred_quads if q.emotion_idx in emo or q.cause_idx in cause}
    return pred_ov, gold_ov


def evaluate_overlap(pred, gold):
    pred, gold = _aligned(pred, gold)
    rp, rg = {}, {}
    for key in gold:
        rp[key], rg[key] = restrict_to_overlap(pred[key], gold[key])
    return evaluate_quadruples(rp, rg)


@dataclass
class EvalReport:
    quad: PRF
    pair: PRF
    emotion: PRF
    cause: PRF
    quad_overlap: PRF
    throughput_utterances_per_second: float | None = None
    per_dialog: list = field(default_factory=list)

    def to_json(self):
        out = {k: getattr(self, k).to_json() for k in ("quad", "pair", "emotion", "cause", "quad_overlap")}
        out["throughput"] = self.throughput_utterances_per_second
        out["per_dialog"] = self.per_dialog
        return out


def evaluate_all(pred, gold):
    pred, gold = _aligned(pred, gold)
    per_dialog = []
    for key in sorted(gold):
        tp = len(pred[key] & gold[key])
        per_dialog.append({"dialog_id": key, "tp": tp, "pred": len(pred[key]), "gold": len(gold[key])})
    return EvalReport(
        quad=evaluate_quadruples(pred, gold),
        pair=evaluate_pairs(pred, gold),
        emotion=evaluate_utterance_level(pred, gold, "emotion"),
        cause=evaluate_utterance_level(pred, gold, "cause"),
        quad_overlap=evaluate_overlap(pred, gold),
        per_dialog=per_dialog,
    )


def benchmark_throughput(model, dialogs, repeats=3):
    """Median utterances/second of end-to-end prediction over ``dialogs``.

    One untimed warm-up pass precedes ``repeats`` (at least 3) timed passes.
    ``model`` is an :class:`~ecqed.trainer.ECQEDModel` or a checkpoint.
    """
    from .trainer import as_model, predict_many

    model = as_model(model)
    dialogs = list(dialogs)
    if not dialogs:
        raise InputError("throughput benchmark needs at least one dialog")
    repeats = max(3, int(repeats))
    n_utts = sum(len(d.utterances) for d in dialogs)
    predict_many(dialogs, model)
    rates = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        predict_many(dialogs, model)
        rates.append(n_utts / max(time.perf_counter() - t0, 1e-12))
    return statistics.median(rates)


def compare_throughput(multi_grid, one_grid, dialogs, repeats=3):
    multi = benchmark_throughput(multi_grid, dialogs, repeats)
    one = benchmark_throughput(one_grid, dialogs, repeats)
    return {
        "multi_grid": multi,
        "one_grid": one,
        "ratio": multi / one,
        "reference_ratio": REFERENCE_SPEED_MULTI_GRID / REFERENCE_SPEED_ONE_GRID,
    }
