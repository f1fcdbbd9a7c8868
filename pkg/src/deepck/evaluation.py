"""Binary classification metrics and depth-stratified breakdowns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .depth import DepthScore, distribution_ranges


@dataclass(frozen=True)
class EvalReport:
    """Precision, recall, F1 and accuracy with the underlying counts.

    Undefined ratios (no predicted positives, or no gold positives) are
    reported as 0.0 and flagged rather than raising.
    """

    precision: float
    recall: float
    f1: float
    accuracy: float
    tp: int
    fp: int
    tn: int
    fn: int
    undefined_precision: bool = False
    undefined_recall: bool = False

    @property
    def support(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def report_from_counts(tp: int, fp: int, tn: int, fn: int) -> EvalReport:
    if min(tp, fp, tn, fn) < 0:
        raise ValueError("confusion counts must be >= 0")
    total = tp + fp + tn + fn
    if total == 0:
        raise ValueError("empty confusion matrix")
    undefined_p = (tp + fp) == 0
    undefined_r = (tp + fn) == 0
    precision = 0.0 if undefined_p else tp / (tp + fp)
    recall = 0.0 if undefined_r else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return EvalReport(
        precision=precision, recall=recall, f1=f1, accuracy=(tp + tn) / total,
        tp=tp, fp=fp, tn=tn, fn=fn,
        undefined_precision=undefined_p, undefined_recall=undefined_r,
    )


def evaluate(predictions: Sequence[int], gold: Sequence[int]) -> EvalReport:
    """Score predicted against gold binary labels, positionally aligned."""
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} predictions vs {len(gold)} gold labels")
    if not predictions:
        raise ValueError("nothing to evaluate")
    tp = fp = tn = fn = 0
    for pred, ref in zip(predictions, gold):
        if pred not in (0, 1) or ref not in (0, 1):
            raise ValueError("labels must be 0 or 1")
        if pred == 1 and ref == 1:
            tp += 1
        elif pred == 1 and ref == 0:
            fp += 1
        elif pred == 0 and ref == 0:
            tn += 1
        else:
            fn += 1
    return report_from_counts(tp, fp, tn, fn)


@dataclass(frozen=True)
class DepthBandReport:
    """Metrics restricted to triples whose depth rank falls in one band."""

    low: float
    high: float
    count: int
    report: Optional[EvalReport]


def performance_by_depth(
    predictions: Sequence[int],
    gold: Sequence[int],
    scores: Sequence[DepthScore],
    range_edges: Sequence[float],
) -> list[DepthBandReport]:
    """Split the evaluation by depth-rank bands.

    ``range_edges`` are strictly increasing interior boundaries; bands cover
    (-inf, e1), [e1, e2), ..., [en, inf). Empty bands carry a None report.
    """
    if not len(predictions) == len(gold) == len(scores):
        raise ValueError("predictions, gold and scores must align")
    ranges = distribution_ranges(range_edges)
    out: list[DepthBandReport] = []
    for low, high in ranges:
        idx = [i for i, s in enumerate(scores) if low <= s.depth_rank < high]
        if idx:
            report = evaluate([predictions[i] for i in idx], [gold[i] for i in idx])
        else:
            report = None
        out.append(DepthBandReport(low=low, high=high, count=len(idx), report=report))
    return out


@dataclass
class SweepResult:
    """Reports per evidence count per ensembling strategy."""

    by_k: dict[int, dict[str, EvalReport]] = field(default_factory=dict)


def sweep_k(
    k_values: Sequence[int],
    strategies: Sequence[str],
    run_for_k: Callable[[int], Sequence[tuple[tuple[tuple[float, float], ...], int]]],
) -> SweepResult:
    """Evaluate every (k, strategy) combination.

    ``run_for_k(k)`` yields (per-pair probability tuple, gold label) rows for
    that evidence count; the caller decides whether that means retraining or
    reusing one model with truncated evidence. Strategy aggregation is
    applied here so each k's forward passes are shared across strategies.
    """
    from .classifier import PREDICTORS

    result = SweepResult()
    for k in k_values:
        if k < 1:
            raise ValueError("k values must be >= 1")
        rows = list(run_for_k(k))
        if not rows:
            raise ValueError(f"run_for_k({k}) produced no rows")
        result.by_k[k] = {}
        for strategy in strategies:
            predict = PREDICTORS[strategy]
            preds = [predict(per_pair) for per_pair, _ in rows]
            gold = [label for _, label in rows]
            result.by_k[k][strategy] = evaluate(preds, gold)
    return result
