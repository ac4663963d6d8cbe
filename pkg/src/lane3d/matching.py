"""Minimum-cost bipartite matching with a deterministic tie-break.

``hungarian`` returns a one-to-one assignment of ``min(n, m)`` pairs with
minimum total cost.  Among equally cheap assignments it returns the one
whose pair list, sorted by row, is lexicographically smallest — lowest
row index first, then lowest column index.  ``inf`` entries mark
forbidden pairs; an assignment is infeasible if every completion of the
required size uses one.

The optimizer is scipy's linear sum assignment; determinism is imposed
on top by a fix-and-resolve pass that anchors each row in turn to the
smallest column consistent with the optimal total.  Totals are compared
with ``math.fsum`` so ties are decided in exact arithmetic, not in
accumulation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NoFeasibleAssignment

__all__ = ["MatchResult", "hungarian"]


@dataclass(frozen=True)
class MatchResult:
    """Outcome of a bipartite matching.

    ``pairs`` lists ``(row, column)`` assignments sorted by row;
    ``total_cost`` is the exact sum of the selected entries.  The
    mapping is injective on both sides.
    """

    pairs: tuple[tuple[int, int], ...]
    total_cost: float

    @property
    def assignment(self) -> dict[int, int]:
        """Row index -> column index for every matched row."""
        return dict(self.pairs)

    @property
    def matched_rows(self) -> frozenset[int]:
        return frozenset(r for r, _ in self.pairs)

    @property
    def matched_cols(self) -> frozenset[int]:
        return frozenset(c for _, c in self.pairs)


def _solve_work(work: np.ndarray) -> list[tuple[int, int]]:
    rows, cols = linear_sum_assignment(work)
    return list(zip(rows.tolist(), cols.tolist()))


def hungarian(cost) -> MatchResult:
    """Minimum-cost assignment of ``min(n, m)`` row/column pairs.

    ``cost`` is an ``n x m`` matrix; ``inf`` marks forbidden pairs.
    Raises NoFeasibleAssignment when no full-size assignment avoids the
    forbidden entries, and ValueError on NaN or non-matrix input.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {c.shape}")
    n, m = c.shape
    if n == 0 or m == 0:
        return MatchResult(pairs=(), total_cost=0.0)
    if np.isnan(c).any():
        raise ValueError("cost matrix contains NaN")
    if (c == -np.inf).any():
        raise ValueError("cost matrix contains -inf")

    allowed = np.isfinite(c)
    if allowed.all():
        work = c
    else:
        finite_scale = float(np.abs(c[allowed]).sum()) if allowed.any() else 0.0
        work = np.where(allowed, c, 2.0 * finite_scale + 1.0)

    base = _solve_work(work)
    if not all(allowed[r, col] for r, col in base):
        raise NoFeasibleAssignment(
            "every full-size assignment uses a forbidden (inf) pair"
        )
    target = math.fsum(work[r, col] for r, col in base)

    pairs = _lexicographic_refinement(work, allowed, target, n, m)
    total = math.fsum(c[r, col] for r, col in pairs)
    return MatchResult(pairs=tuple(pairs), total_cost=total)


def _lexicographic_refinement(
    work: np.ndarray,
    allowed: np.ndarray,
    target: float,
    n: int,
    m: int,
) -> list[tuple[int, int]]:
    """Smallest (by row-sorted pair list) assignment achieving ``target``.

    Walks rows in increasing order, pinning each to its smallest column
    for which some completion still reaches the optimal total; a row is
    left unmatched only when no column admits one (possible only when
    rows outnumber columns).
    """
    size = min(n, m)
    fixed: list[tuple[int, int]] = []
    free_cols = list(range(m))
    for row in range(n):
        remaining_rows = list(range(row + 1, n))
        need = size - len(fixed)
        if need == 0:
            break
        chosen = None
        for col in free_cols:
            if not allowed[row, col]:
                continue
            sub_cols = [x for x in free_cols if x != col]
            if _completes_to_target(
                work, fixed + [(row, col)], remaining_rows, sub_cols, target
            ):
                chosen = col
                break
        if chosen is not None:
            fixed.append((row, chosen))
            free_cols.remove(chosen)
        else:
            # Row must stay unmatched; only legal if enough rows remain.
            if len(remaining_rows) < need:
                raise AssertionError(
                    "refinement lost the optimum it was given"
                )
    return fixed


def _completes_to_target(
    work: np.ndarray,
    fixed: list[tuple[int, int]],
    rows: list[int],
    cols: list[int],
    target: float,
) -> bool:
    """Can ``fixed`` extend over ``rows``/``cols`` to total ``target``?"""
    values = [work[r, c] for r, c in fixed]
    if rows and cols:
        sub = work[np.ix_(rows, cols)]
        for i, j in _solve_work(sub):
            values.append(sub[i, j])
    # The completion must reach full size; otherwise it is not a valid
    # min(n, m)-pair assignment at all.
    full = min(work.shape)
    if len(values) != full:
        return False
    return math.fsum(values) == target
