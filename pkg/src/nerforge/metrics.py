"""Entity-level evaluation: precision/recall/F1 and boundary-error ratio."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import ENTITY_TYPES, EntitySpan


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    per_type: dict[str, "PRF"] | None = None

    def to_record(self) -> dict:
        record = {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }
        if self.per_type is not None:
            record["per_type"] = {k: v.to_record() for k, v in self.per_type.items()}
        return record


@dataclass(frozen=True)
class BREReport:
    predicted_count: int
    boundary_error_count: int
    bre_ratio: float

    def to_record(self) -> dict:
        return {
            "predicted_count": self.predicted_count,
            "boundary_error_count": self.boundary_error_count,
            "bre_ratio": self.bre_ratio,
        }


def _prf_from_counts(tp: int, fp: int, fn: int, per_type=None) -> PRF:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1, tp, fp, fn, per_type)


def entity_prf(
    gold: Sequence[Sequence[EntitySpan]], pred: Sequence[Sequence[EntitySpan]]
) -> PRF:
    """Micro-averaged exact-match PRF over aligned per-sentence span lists.

    A predicted span is a true positive iff an identical (start, end, type)
    gold span exists in the same sentence; each gold span matches at most one
    prediction.
    """
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    counts = {etype: [0, 0, 0] for etype in ENTITY_TYPES}  # tp, fp, fn
    for gold_spans, pred_spans in zip(gold, pred):
        remaining = list(gold_spans)
        for span in pred_spans:
            if span in remaining:
                remaining.remove(span)
                counts[span.etype][0] += 1
            else:
                counts[span.etype][1] += 1
        for span in remaining:
            counts[span.etype][2] += 1
    per_type = {
        etype: _prf_from_counts(tp, fp, fn) for etype, (tp, fp, fn) in counts.items()
    }
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    return _prf_from_counts(tp, fp, fn, per_type)


def token_accuracy(gold_tags: Sequence[Sequence[int]], pred_tags: Sequence[Sequence[int]]) -> float:
    """Fraction of tokens tagged identically; diagnostic only."""
    correct = total = 0
    for g, p in zip(gold_tags, pred_tags):
        if len(g) != len(p):
            raise ValueError("tag sequences differ in length")
        correct += sum(1 for a, b in zip(g, p) if a == b)
        total += len(g)
    return correct / total if total else 0.0


def bre_ratio(
    gold: Sequence[Sequence[EntitySpan]], pred: Sequence[Sequence[EntitySpan]]
) -> BREReport:
    """Fraction of predicted spans that are boundary errors.

    A predicted span counts as a boundary error iff it overlaps a gold span
    of the same type but the (start, end) pair differs.  The denominator is
    the number of predicted spans, 0 mapping to a 0.0 ratio.  Note the
    denominator convention (predicted, not gold) is a documented choice.
    """
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    predicted = 0
    errors = 0
    for gold_spans, pred_spans in zip(gold, pred):
        for span in pred_spans:
            predicted += 1
            for g in gold_spans:
                if (
                    g.etype == span.etype
                    and span.overlaps(g)
                    and (g.start, g.end) != (span.start, span.end)
                ):
                    errors += 1
                    break
    ratio = errors / predicted if predicted else 0.0
    return BREReport(predicted_count=predicted, boundary_error_count=errors, bre_ratio=ratio)
