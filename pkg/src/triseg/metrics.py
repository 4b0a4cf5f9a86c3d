"""Overlap metrics for binary segmentations.

The volumetric Dice here is the unsmoothed metric used for reporting, not
the smoothed per-slice loss used in training; the two must stay distinct.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def dice_coefficient(pred: np.ndarray, target: np.ndarray) -> float:
    """Volumetric Dice overlap 2|P∩T| / (|P|+|T|) over binary arrays.

    Two empty masks agree perfectly (1.0); exactly one empty scores 0.0.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(
            f"prediction shape {pred.shape} does not match target {target.shape}"
        )
    p = pred != 0
    t = target != 0
    denom = int(p.sum()) + int(t.sum())
    if denom == 0:
        return 1.0
    inter = int(np.logical_and(p, t).sum())
    return 2.0 * inter / denom


def precision_recall(pred: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    """(precision, recall) of a binary prediction; empty denominators give 1.0."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(
            f"prediction shape {pred.shape} does not match target {target.shape}"
        )
    p = pred != 0
    t = target != 0
    tp = int(np.logical_and(p, t).sum())
    np_, nt = int(p.sum()), int(t.sum())
    precision = tp / np_ if np_ else 1.0
    recall = tp / nt if nt else 1.0
    return precision, recall


@dataclass
class CaseResult:
    name: str
    dice: float
    precision: float
    recall: float


@dataclass
class EvalSummary:
    cases: list[CaseResult]

    @property
    def mean_dice(self) -> float:
        return float(np.mean([c.dice for c in self.cases]))

    @property
    def std_dice(self) -> float:
        # population std: reported spreads describe this case set, not a sample
        return float(np.std([c.dice for c in self.cases]))

    @property
    def min_dice(self) -> float:
        return float(min(c.dice for c in self.cases))

    def lines(self) -> list[str]:
        out = [f"{c.name}\tdice={c.dice:.4f}\tprec={c.precision:.4f}\trec={c.recall:.4f}" for c in self.cases]
        out.append(
            f"mean_dice={self.mean_dice:.4f}\tstd={self.std_dice:.4f}\tn={len(self.cases)}"
        )
        return out


def score_case(name: str, pred: np.ndarray, target: np.ndarray) -> CaseResult:
    prec, rec = precision_recall(pred, target)
    return CaseResult(
        name=name, dice=dice_coefficient(pred, target), precision=prec, recall=rec
    )
