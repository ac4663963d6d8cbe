"""Metric report containers shared by every evaluation protocol."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

__all__ = ["FrameStats", "MetricReport", "prf", "ordering_hash"]


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, and F1 with the zero-denominator convention.

    An undefined ratio (no predictions, or no ground truths) is reported
    as 0, and F1 is 0 whenever precision + recall is 0.
    """
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return precision, recall, f1


def ordering_hash(
    frame_ids: list[str], gt_counts: list[int], pred_counts: list[int]
) -> str:
    """Content hash of the evaluation ordering.

    Digests the frame sequence and each frame's lane counts so a report
    records exactly which ordering produced it (prediction iteration
    order is semantically significant for the bidirectional protocol).
    """
    digest = hashlib.sha256()
    for fid, ng, n_pred in zip(frame_ids, gt_counts, pred_counts):
        digest.update(f"{fid}:{ng}:{n_pred}\n".encode())
    return digest.hexdigest()


@dataclass(frozen=True)
class FrameStats:
    """Per-frame counts plus the error of each accepted pair."""

    frame_id: str
    tp: int
    fp: int
    fn: int
    pair_errors: tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "pair_errors": list(self.pair_errors),
        }


@dataclass(frozen=True)
class MetricReport:
    """Aggregated evaluation outcome of one protocol run.

    ``error_stat`` is the protocol's headline error (mean unilateral CD
    over accepted pairs, mean bidirectional CD, worst-case statistic, or
    pointwise errors) and is ``None`` when no pair qualified to define
    it.  ``sweep_rows`` carries ``(tau, precision, recall, f1)`` rows
    when the report wraps a threshold sweep.
    """

    protocol: str
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    error_name: str
    error_stat: float | None
    per_frame: tuple[FrameStats, ...] = ()
    variant: str | None = None
    extra_stats: dict = field(default_factory=dict)
    ordering: str = ""
    sweep_rows: tuple[tuple[float, float, float, float], ...] | None = None

    def __post_init__(self):
        if self.tp < 0 or self.fp < 0 or self.fn < 0:
            raise ValueError("counts must be non-negative")

    def as_dict(self) -> dict:
        out = {
            "format_version": 1,
            "protocol": self.protocol,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "error_name": self.error_name,
            "error_stat": self.error_stat,
            "per_frame": [f.as_dict() for f in self.per_frame],
            "ordering_hash": self.ordering,
        }
        if self.variant is not None:
            out["variant"] = self.variant
        if self.extra_stats:
            out["extra_stats"] = dict(self.extra_stats)
        if self.sweep_rows is not None:
            out["sweep"] = [list(row) for row in self.sweep_rows]
        return out
