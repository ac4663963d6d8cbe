"""Pointwise (anchor-grid) lane evaluation with the 75% rule.

Lanes are compared on a shared grid of longitudinal y-anchors.  A
ground-truth/prediction pair's matching cost is the mean, over anchors
where the ground truth is visible, of the Euclidean distance in the
(x, z) plane, with each per-anchor distance capped at
``cap_multiplier * tau_dist`` so one outlier anchor cannot veto an
otherwise-correct match.  Matching is one-to-one and cost-minimal
(Hungarian; for one-to-one assignment this coincides with the min-cost
flow optimum).  A matched pair is a true positive when at least
``tp_fraction`` of the visible anchors lie within ``tau_dist``
(boundary inclusive).

Error statistics split by the ground-truth anchor's y: the near range
includes both endpoints; the far range includes its upper endpoint and
excludes its lower one when it abuts the near range.  A range with no
anchors reports its error as absent (None), never as zero.

Predictions are evaluated wherever the ground truth is visible: a
prediction that does not cover an anchor is charged the distance to its
nearest covered value (endpoint clamping of the resampler), mirroring
how a short prediction fails to explain the far ground truth.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AnchorMismatch, ConfigError
from .geometry import Lane3D, SampleGrid, resample_at_y
from .matching import MatchResult, hungarian
from .report import FrameStats, MetricReport, ordering_hash, prf

__all__ = [
    "PointwiseConfig",
    "pointwise_match",
    "pointwise_tp",
    "xz_errors",
    "openlane_report",
    "pointwise_sweep",
]


@dataclass(frozen=True)
class PointwiseConfig:
    """Thresholds and ranges of the pointwise protocol."""

    tau_dist: float = 1.5
    tp_fraction: float = 0.75
    near_range: tuple[float, float] = (0.0, 40.0)
    far_range: tuple[float, float] = (40.0, 100.0)
    cap_multiplier: float = 1.5

    def __post_init__(self):
        if not float(self.tau_dist) > 0:
            raise ConfigError(f"tau_dist must be > 0, got {self.tau_dist!r}")
        object.__setattr__(self, "tau_dist", float(self.tau_dist))
        frac = float(self.tp_fraction)
        if not 0 < frac <= 1:
            raise ConfigError(f"tp_fraction must be in (0, 1], got {frac!r}")
        object.__setattr__(self, "tp_fraction", frac)
        near = tuple(float(v) for v in self.near_range)
        far = tuple(float(v) for v in self.far_range)
        if len(near) != 2 or len(far) != 2:
            raise ConfigError("ranges must be (low, high) pairs")
        if not (near[0] < near[1] <= far[0] < far[1]):
            raise ConfigError(
                "ranges must be increasing and non-overlapping, got "
                f"near={near}, far={far}"
            )
        object.__setattr__(self, "near_range", near)
        object.__setattr__(self, "far_range", far)
        if not float(self.cap_multiplier) > 0:
            raise ConfigError(
                f"cap_multiplier must be > 0, got {self.cap_multiplier!r}"
            )
        object.__setattr__(self, "cap_multiplier", float(self.cap_multiplier))

    @property
    def cost_cap(self) -> float:
        return self.cap_multiplier * self.tau_dist


def _range_masks(
    y: np.ndarray, config: PointwiseConfig
) -> tuple[np.ndarray, np.ndarray]:
    near_lo, near_hi = config.near_range
    far_lo, far_hi = config.far_range
    near = (y >= near_lo) & (y <= near_hi)
    if far_lo == near_hi:
        far = (y > far_lo) & (y <= far_hi)
    else:
        far = (y >= far_lo) & (y <= far_hi)
    return near, far


def _shared_anchors(lanes: list[Lane3D]) -> np.ndarray:
    anchors = lanes[0].points[:, 1]
    for k, lane in enumerate(lanes[1:], start=1):
        other = lane.points[:, 1]
        if other.shape != anchors.shape or np.abs(other - anchors).max() > 1e-9:
            raise AnchorMismatch(
                f"lane {k} is not on the shared y-anchor grid"
            )
    return anchors


@dataclass(frozen=True)
class _FrameArrays:
    """Per-frame anchor-aligned coordinates and pair distances."""

    anchors: np.ndarray  # (J,)
    gt_vis: np.ndarray  # (Ng, J) bool
    dist: np.ndarray  # (Ng, Np, J) xz Euclidean distance
    dx: np.ndarray  # (Ng, Np, J) |delta x|
    dz: np.ndarray  # (Ng, Np, J) |delta z|

    @property
    def n_gt(self) -> int:
        return self.gt_vis.shape[0]

    @property
    def n_pred(self) -> int:
        return self.dist.shape[1]


def _frame_arrays(
    gt_lanes: list[Lane3D], pred_lanes: list[Lane3D], anchors: np.ndarray
) -> _FrameArrays:
    j = anchors.shape[0]
    gx = np.zeros((len(gt_lanes), j))
    gz = np.zeros((len(gt_lanes), j))
    gv = np.zeros((len(gt_lanes), j), dtype=bool)
    for i, lane in enumerate(gt_lanes):
        x, z, vis = resample_at_y(lane, anchors)
        gx[i], gz[i], gv[i] = x, z, vis > 0.5
    px = np.zeros((len(pred_lanes), j))
    pz = np.zeros((len(pred_lanes), j))
    for i, lane in enumerate(pred_lanes):
        x, z, _ = resample_at_y(lane, anchors)
        px[i], pz[i] = x, z
    dx = np.abs(gx[:, None, :] - px[None, :, :])
    dz = np.abs(gz[:, None, :] - pz[None, :, :])
    dist = np.sqrt(dx * dx + dz * dz)
    return _FrameArrays(anchors=anchors, gt_vis=gv, dist=dist, dx=dx, dz=dz)


def _cost_matrix(arrays: _FrameArrays, config: PointwiseConfig) -> np.ndarray:
    cap = config.cost_cap
    cost = np.full((arrays.n_gt, arrays.n_pred), cap)
    for i in range(arrays.n_gt):
        vis = arrays.gt_vis[i]
        if not vis.any():
            continue
        capped = np.minimum(arrays.dist[i][:, vis], cap)
        cost[i] = capped.mean(axis=1)
    return cost


def _tp_flags(
    arrays: _FrameArrays, pairs, config: PointwiseConfig
) -> list[bool]:
    flags = []
    for i, j in pairs:
        vis = arrays.gt_vis[i]
        total = int(vis.sum())
        if total == 0:
            flags.append(False)
            continue
        inside = int((arrays.dist[i, j][vis] <= config.tau_dist).sum())
        flags.append(inside / total >= config.tp_fraction)
    return flags


# ---------------------------------------------------------------------------
# public pair/frame operations
# ---------------------------------------------------------------------------


def pointwise_match(
    gt_lanes: list[Lane3D],
    pred_lanes: list[Lane3D],
    config: PointwiseConfig | None = None,
) -> MatchResult:
    """Cost-minimal one-to-one assignment of anchor-aligned lanes.

    All lanes must already sit on the same y-anchor grid.  Rows of the
    returned assignment are ground-truth indices.
    """
    config = config or PointwiseConfig()
    if not gt_lanes or not pred_lanes:
        return MatchResult(pairs=(), total_cost=0.0)
    anchors = _shared_anchors(gt_lanes + pred_lanes)
    arrays = _frame_arrays(gt_lanes, pred_lanes, anchors)
    return hungarian(_cost_matrix(arrays, config))


def pointwise_tp(
    gt: Lane3D, pred: Lane3D, config: PointwiseConfig | None = None
) -> bool:
    """75%-rule acceptance for one matched, anchor-aligned pair."""
    config = config or PointwiseConfig()
    anchors = _shared_anchors([gt, pred])
    arrays = _frame_arrays([gt], [pred], anchors)
    return _tp_flags(arrays, [(0, 0)], config)[0]


def xz_errors(
    matched_pairs: list[tuple[Lane3D, Lane3D]],
    config: PointwiseConfig | None = None,
) -> tuple[float | None, float | None, float | None, float | None]:
    """(E_x near, E_x far, E_z near, E_z far) over accepted pairs.

    Means of |delta x| and |delta z| across visible ground-truth anchors
    whose y falls in each range; a range containing no anchors reports
    None.
    """
    config = config or PointwiseConfig()
    sums = [0.0] * 4
    counts = [0] * 4
    for gt, pred in matched_pairs:
        anchors = _shared_anchors([gt, pred])
        arrays = _frame_arrays([gt], [pred], anchors)
        _accumulate_errors(arrays, [(0, 0)], config, sums, counts)
    return tuple(
        (s / c if c else None) for s, c in zip(sums, counts)
    )


def _accumulate_errors(
    arrays: _FrameArrays,
    tp_pairs,
    config: PointwiseConfig,
    sums: list[float],
    counts: list[int],
) -> None:
    near, far = _range_masks(arrays.anchors, config)
    for i, j in tp_pairs:
        vis = arrays.gt_vis[i]
        for slot, (mask, grid) in enumerate(
            [(near, arrays.dx), (far, arrays.dx), (near, arrays.dz), (far, arrays.dz)]
        ):
            sel = vis & mask
            if sel.any():
                sums[slot] += float(grid[i, j][sel].sum())
                counts[slot] += int(sel.sum())


# ---------------------------------------------------------------------------
# frame reports
# ---------------------------------------------------------------------------


def _frame_core(frame, grid: SampleGrid) -> _FrameArrays | tuple:
    gt_lanes, pred_lanes = frame
    anchors = np.asarray(grid.y_anchors, dtype=float)
    return _frame_arrays(gt_lanes, pred_lanes, anchors)


def _gate_frame(
    arrays: _FrameArrays, config: PointwiseConfig
) -> tuple[int, int, int, list[tuple[int, int]]]:
    if arrays.n_gt == 0 or arrays.n_pred == 0:
        return 0, arrays.n_pred, arrays.n_gt, []
    match = hungarian(_cost_matrix(arrays, config))
    flags = _tp_flags(arrays, match.pairs, config)
    tp_pairs = [pair for pair, ok in zip(match.pairs, flags) if ok]
    tp = len(tp_pairs)
    return tp, arrays.n_pred - tp, arrays.n_gt - tp, tp_pairs


def _map_frames(worker, frames, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, frames))
    return [worker(frame) for frame in frames]


def openlane_report(
    frames,
    config: PointwiseConfig | None = None,
    grid: SampleGrid | None = None,
    frame_ids=None,
    threads: int = 1,
) -> MetricReport:
    """Pointwise protocol over ``(gt_lanes, pred_lanes)`` frames.

    Lanes are resampled onto ``grid.y_anchors`` before matching.  The
    four range errors are returned in ``extra_stats`` (absent ranges as
    None); counts follow the 75% rule.
    """
    config = config or PointwiseConfig()
    grid = grid or SampleGrid()
    if frame_ids is None:
        ids = [str(i) for i in range(len(frames))]
    else:
        ids = list(frame_ids)
        if len(ids) != len(frames):
            raise ValueError(f"{len(ids)} frame ids for {len(frames)} frames")

    cores = _map_frames(lambda f: _frame_core(f, grid), frames, threads)
    stats = []
    sums = [0.0] * 4
    counts = [0] * 4
    for fid, arrays in zip(ids, cores):
        tp, fp, fn, tp_pairs = _gate_frame(arrays, config)
        pair_costs = tuple(
            float(np.minimum(arrays.dist[i, j][arrays.gt_vis[i]], config.cost_cap).mean())
            for i, j in tp_pairs
        )
        stats.append(
            FrameStats(frame_id=fid, tp=tp, fp=fp, fn=fn, pair_errors=pair_costs)
        )
        _accumulate_errors(arrays, tp_pairs, config, sums, counts)
    tp = sum(s.tp for s in stats)
    fp = sum(s.fp for s in stats)
    fn = sum(s.fn for s in stats)
    precision, recall, f1 = prf(tp, fp, fn)
    e_x_near, e_x_far, e_z_near, e_z_far = (
        (s / c if c else None) for s, c in zip(sums, counts)
    )
    return MetricReport(
        protocol="openlane",
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        error_name="e_xz",
        error_stat=None,
        per_frame=tuple(stats),
        extra_stats={
            "e_x_near": e_x_near,
            "e_x_far": e_x_far,
            "e_z_near": e_z_near,
            "e_z_far": e_z_far,
        },
        ordering=ordering_hash(
            [s.frame_id for s in stats],
            [s.tp + s.fn for s in stats],
            [s.tp + s.fp for s in stats],
        ),
    )


def pointwise_sweep(
    frames,
    taus,
    config: PointwiseConfig | None = None,
    grid: SampleGrid | None = None,
    threads: int = 1,
) -> tuple[tuple[float, float, float, float], ...]:
    """(tau, precision, recall, f1) rows re-gating cached frame arrays.

    Matching is re-run per tau (the cost cap scales with it), on the
    same cached distances a standalone run would use, so each row equals
    the standalone report at that threshold.
    """
    config = config or PointwiseConfig()
    grid = grid or SampleGrid()
    taus = [float(t) for t in taus]
    if not taus:
        raise ConfigError("tau sweep list is empty")
    if any(not t > 0 for t in taus):
        raise ConfigError(f"tau values must be > 0, got {taus}")
    cores = _map_frames(lambda f: _frame_core(f, grid), frames, threads)
    rows = []
    base = {
        "tp_fraction": config.tp_fraction,
        "near_range": config.near_range,
        "far_range": config.far_range,
        "cap_multiplier": config.cap_multiplier,
    }
    for tau in taus:
        gated = PointwiseConfig(tau_dist=tau, **base)
        tp = fp = fn = 0
        for arrays in cores:
            t, f, n, _ = _gate_frame(arrays, gated)
            tp += t
            fp += f
            fn += n
        rows.append((tau, *prf(tp, fp, fn)))
    return tuple(rows)
