"""Lane evaluation protocols built on Chamfer-style distances.

Three protocols share this module:

* the IoU-gated protocol (``once_report``): per frame, ground truths and
  predictions are matched by maximizing BEV IoU; a matched prediction is
  accepted when its IoU exceeds ``tau_iou`` and its unilateral Chamfer
  distance stays below ``tau_cd``.  The error statistic (CDE) is the
  mean unilateral CD over accepted pairs.
* the bidirectional protocol (``bcd_report``): each prediction greedily
  claims its nearest ground truth by bidirectional Chamfer distance and
  is accepted when that distance is within ``tau_bcd`` and the ground
  truth is not already claimed.  The error statistic is the mean
  bidirectional CD over accepted pairs.
* the worst-case protocol (``mbd_report``): IoU matching as above;
  every IoU-qualified pair contributes a Hausdorff-style worst-case
  distance, aggregated per the configured variant.  Counts mirror the
  IoU-gated protocol.

Distance semantics
------------------
Directed point-set distances (the bidirectional building block) are
mean nearest-neighbor distances between ``n_interp``-point arc-length
interpolations, bit-identical to a brute-force double loop.  The
unilateral distance measures interpolated ground-truth points against
the prediction *polyline* (nearest point on any segment, not nearest
vertex), so a prediction that merely extends past its ground truth is
not charged for sampling misalignment.

BEV rasterization uses a global grid of ``bev_resolution`` cells whose
origin sits at integer multiples of the resolution: strokes are sets of
global cell indices, so the IoU of two lanes never depends on which
other lanes share the frame.  Only x/y enter the rasterization; a
stroke covers cells whose center lies within ``lane_width / 2`` of the
polyline (boundary inclusive).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateLane
from .geometry import Lane3D, interpolate_lane
from .kernels import (
    directed_point_stats,
    pair_mean_matrices,
    point_to_polyline_stats,
)
from .matching import hungarian
from .report import FrameStats, MetricReport, ordering_hash, prf

__all__ = [
    "MBD_VARIANTS",
    "EvalConfig",
    "unilateral_cd",
    "bidirectional_cd",
    "bcd_select_tp_fp",
    "bcd_report",
    "bev_iou",
    "once_report",
    "mbd_report",
    "threshold_sweep",
]

MBD_VARIANTS = ("hausdorff_mean", "hausdorff_max", "directed_max_mean")


@dataclass(frozen=True)
class EvalConfig:
    """Thresholds and discretization of the evaluation protocols."""

    tau_cd: float = 0.3
    tau_iou: float = 0.3
    tau_bcd: float = 0.3
    lane_width: float = 0.3
    bev_resolution: float = 0.05
    n_interp: int = 100
    mbd_variant: str = "hausdorff_mean"

    def __post_init__(self):
        for name in ("tau_cd", "tau_iou", "tau_bcd", "lane_width", "bev_resolution"):
            value = float(getattr(self, name))
            if not value > 0:
                raise ConfigError(f"{name} must be > 0, got {value!r}")
            object.__setattr__(self, name, value)
        n = int(self.n_interp)
        if n < 2:
            raise ConfigError(f"n_interp must be >= 2, got {n}")
        object.__setattr__(self, "n_interp", n)
        if self.mbd_variant not in MBD_VARIANTS:
            raise ConfigError(
                f"mbd_variant must be one of {MBD_VARIANTS}, "
                f"got {self.mbd_variant!r}"
            )


# ---------------------------------------------------------------------------
# pair distances
# ---------------------------------------------------------------------------


def _interp(lane: Lane3D, n: int) -> np.ndarray:
    return interpolate_lane(lane, n)


def unilateral_cd(gt: Lane3D, pred: Lane3D, n: int = 100) -> float:
    """Mean distance from interpolated GT points to the prediction polyline.

    Only the ground-truth side is charged: extra prediction length beyond
    the ground truth does not change the value.
    """
    gt_pts = _interp(gt, n)
    pred_pts = _interp(pred, n)
    mean, _ = point_to_polyline_stats(gt_pts, pred_pts)
    return mean


def bidirectional_cd(gt: Lane3D, pred: Lane3D, n: int = 100) -> float:
    """Average of the two directed mean nearest-neighbor distances."""
    gt_pts = _interp(gt, n)
    pred_pts = _interp(pred, n)
    d_pg, _ = directed_point_stats(pred_pts, gt_pts)
    d_gp, _ = directed_point_stats(gt_pts, pred_pts)
    return (d_pg + d_gp) / 2.0


def _bcd_matrix(
    gt_lanes: list[Lane3D], pred_lanes: list[Lane3D], n: int
) -> np.ndarray:
    """Bidirectional distances for every (prediction, ground-truth) pair."""
    pred_pts = [_interp(lane, n) for lane in pred_lanes]
    gt_pts = [_interp(lane, n) for lane in gt_lanes]
    d_pg, d_gp = pair_mean_matrices(pred_pts, gt_pts)
    return (d_pg + d_gp) / 2.0


def _bcd_from_matrix(
    d: np.ndarray, tau: float
) -> tuple[list[bool], list[bool], list[bool], list[float]]:
    """Greedy acceptance sweep over predictions in input order.

    Each prediction targets its nearest ground truth (lowest index on
    ties); it is accepted when the distance is within ``tau`` and that
    ground truth is not yet claimed.
    """
    n_pred, n_gt = d.shape
    covered = [False] * n_gt
    tp_flags: list[bool] = []
    fp_flags: list[bool] = []
    tp_errors: list[float] = []
    for j in range(n_pred):
        if n_gt == 0:
            tp_flags.append(False)
            fp_flags.append(True)
            continue
        i_star = int(np.argmin(d[j]))
        dist = float(d[j, i_star])
        if dist <= tau and not covered[i_star]:
            covered[i_star] = True
            tp_flags.append(True)
            fp_flags.append(False)
            tp_errors.append(dist)
        else:
            tp_flags.append(False)
            fp_flags.append(True)
    return tp_flags, fp_flags, covered, tp_errors


def bcd_select_tp_fp(
    gt_lanes: list[Lane3D],
    pred_lanes: list[Lane3D],
    config: EvalConfig | None = None,
) -> tuple[list[bool], list[bool], list[bool]]:
    """Accept/reject flags for one frame under the bidirectional protocol.

    Returns ``(tp_flags, fp_flags, covered)`` where the first two are per
    prediction in input order and ``covered`` is per ground truth.
    """
    config = config or EvalConfig()
    if not pred_lanes:
        return [], [], [False] * len(gt_lanes)
    d = _bcd_matrix(gt_lanes, pred_lanes, config.n_interp)
    tp_flags, fp_flags, covered, _ = _bcd_from_matrix(d, config.tau_bcd)
    return tp_flags, fp_flags, covered


# ---------------------------------------------------------------------------
# BEV rasterization and IoU
# ---------------------------------------------------------------------------

_KEY_OFFSET = np.uint64(2**31)


def _stroke_cells(points: np.ndarray, config: EvalConfig) -> np.ndarray:
    """Global grid-cell keys covered by the stroked polyline.

    Cell ``(ix, iy)`` has center ``((ix + 0.5) * res, (iy + 0.5) * res)``
    in ground x/y; a cell is covered when its center lies within half the
    lane width of some polyline segment.  Keys pack both indices into a
    uint64 so strokes from different lanes and frames are comparable.
    """
    if points.shape[0] < 2:
        raise DegenerateLane(
            f"stroke needs at least 2 visible points, got {points.shape[0]}"
        )
    res = config.bev_resolution
    half = config.lane_width / 2.0
    xy = points[:, :2]
    chunks = []
    for k in range(xy.shape[0] - 1):
        ax, ay = xy[k]
        bx, by = xy[k + 1]
        ix0 = math.ceil(min(ax, bx) / res - 0.5) - 1
        ix1 = math.floor(max(ax, bx) / res - 0.5) + 1
        iy0 = math.ceil(min(ay, by) / res - 0.5) - 1
        iy1 = math.floor(max(ay, by) / res - 0.5) + 1
        margin = int(math.ceil(half / res)) + 1
        ixs = np.arange(ix0 - margin, ix1 + margin + 1, dtype=np.int64)
        iys = np.arange(iy0 - margin, iy1 + margin + 1, dtype=np.int64)
        cx = (ixs + 0.5) * res
        cy = (iys + 0.5) * res
        ex, ey = bx - ax, by - ay
        c2 = ex * ex + ey * ey
        wx = cx[None, :] - ax
        wy = cy[:, None] - ay
        if c2 > 0.0:
            t = np.clip((wx * ex + wy * ey) / c2, 0.0, 1.0)
        else:
            t = 0.0
        dx = wx - t * ex
        dy = wy - t * ey
        hit = (dx * dx + dy * dy) <= half * half
        iy_hit, ix_hit = np.nonzero(hit)
        if iy_hit.size:
            keys = (
                (ixs[ix_hit].astype(np.uint64) + _KEY_OFFSET) << np.uint64(32)
            ) | (iys[iy_hit].astype(np.uint64) + _KEY_OFFSET)
            chunks.append(keys)
    if not chunks:
        return np.empty(0, dtype=np.uint64)
    return np.unique(np.concatenate(chunks))


def _cells_iou(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0 and b.size == 0:
        return 0.0
    inter = np.intersect1d(a, b, assume_unique=True).size
    union = a.size + b.size - inter
    return inter / union if union else 0.0


def bev_iou(gt: Lane3D, pred: Lane3D, config: EvalConfig | None = None) -> float:
    """IoU of the two lanes' stroked footprints on the BEV grid."""
    config = config or EvalConfig()
    return _cells_iou(
        _stroke_cells(gt.visible_points(), config),
        _stroke_cells(pred.visible_points(), config),
    )


# ---------------------------------------------------------------------------
# per-frame cores
# ---------------------------------------------------------------------------


def _iou_matched_pairs(
    gt_lanes: list[Lane3D],
    pred_lanes: list[Lane3D],
    config: EvalConfig,
    with_maxes: bool,
) -> list[dict]:
    """IoU-maximizing assignment plus per-pair distances for one frame.

    Returns one record per matched pair: indices, IoU, unilateral CD,
    and (when ``with_maxes``) the two directed maximum distances.
    """
    if not gt_lanes or not pred_lanes:
        return []
    gt_cells = [_stroke_cells(lane.visible_points(), config) for lane in gt_lanes]
    pred_cells = [
        _stroke_cells(lane.visible_points(), config) for lane in pred_lanes
    ]
    iou = np.zeros((len(gt_lanes), len(pred_lanes)))
    for i, gc in enumerate(gt_cells):
        for j, pc in enumerate(pred_cells):
            iou[i, j] = _cells_iou(gc, pc)
    match = hungarian(-iou)
    pairs = []
    for i, j in match.pairs:
        record = {
            "gt": i,
            "pred": j,
            "iou": float(iou[i, j]),
            "ucd": unilateral_cd(gt_lanes[i], pred_lanes[j], config.n_interp),
        }
        if with_maxes and iou[i, j] > config.tau_iou:
            gt_pts = _interp(gt_lanes[i], config.n_interp)
            pred_pts = _interp(pred_lanes[j], config.n_interp)
            _, max_pg = directed_point_stats(pred_pts, gt_pts)
            _, max_gp = directed_point_stats(gt_pts, pred_pts)
            record["max_pg"] = max_pg
            record["max_gp"] = max_gp
        pairs.append(record)
    return pairs


def _once_counts(
    pairs: list[dict], n_gt: int, n_pred: int, config: EvalConfig
) -> tuple[int, int, int, list[float]]:
    accepted = [
        p for p in pairs if p["iou"] > config.tau_iou and p["ucd"] < config.tau_cd
    ]
    tp = len(accepted)
    return tp, n_pred - tp, n_gt - tp, [p["ucd"] for p in accepted]


def _pair_mbd(record: dict, variant: str) -> float:
    if variant == "directed_max_mean":
        return (record["max_pg"] + record["max_gp"]) / 2.0
    return max(record["max_pg"], record["max_gp"])


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _map_frames(worker, frames, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, frames))
    return [worker(frame) for frame in frames]


def _frame_ids(frames, frame_ids) -> list[str]:
    if frame_ids is None:
        return [str(i) for i in range(len(frames))]
    ids = list(frame_ids)
    if len(ids) != len(frames):
        raise ValueError(
            f"{len(ids)} frame ids for {len(frames)} frames"
        )
    return ids


def _assemble(
    protocol: str,
    stats: list[FrameStats],
    error_name: str,
    error_values: list[float],
    variant: str | None = None,
    aggregate: str = "mean",
) -> MetricReport:
    tp = sum(s.tp for s in stats)
    fp = sum(s.fp for s in stats)
    fn = sum(s.fn for s in stats)
    precision, recall, f1 = prf(tp, fp, fn)
    if error_values:
        if aggregate == "max":
            error_stat = max(error_values)
        else:
            error_stat = math.fsum(error_values) / len(error_values)
    else:
        error_stat = None
    return MetricReport(
        protocol=protocol,
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        error_name=error_name,
        error_stat=error_stat,
        per_frame=tuple(stats),
        variant=variant,
        ordering=ordering_hash(
            [s.frame_id for s in stats],
            [s.tp + s.fn for s in stats],
            [s.tp + s.fp for s in stats],
        ),
    )


def bcd_report(
    frames,
    config: EvalConfig | None = None,
    frame_ids=None,
    threads: int = 1,
) -> MetricReport:
    """Bidirectional-protocol evaluation over ``(gt_lanes, pred_lanes)`` frames."""
    config = config or EvalConfig()
    ids = _frame_ids(frames, frame_ids)

    def worker(frame):
        gt_lanes, pred_lanes = frame
        if not pred_lanes:
            return np.zeros((0, len(gt_lanes)))
        return _bcd_matrix(gt_lanes, pred_lanes, config.n_interp)

    matrices = _map_frames(worker, frames, threads)
    stats = []
    all_errors: list[float] = []
    for fid, d in zip(ids, matrices):
        tp_flags, fp_flags, covered, errors = _bcd_from_matrix(d, config.tau_bcd)
        tp = sum(tp_flags)
        stats.append(
            FrameStats(
                frame_id=fid,
                tp=tp,
                fp=sum(fp_flags),
                fn=len(covered) - tp,
                pair_errors=tuple(errors),
            )
        )
        all_errors.extend(errors)
    return _assemble("bcd", stats, "mean_bcd", all_errors)


def once_report(
    frames,
    config: EvalConfig | None = None,
    frame_ids=None,
    threads: int = 1,
) -> MetricReport:
    """IoU-gated evaluation with the unilateral-CD acceptance test."""
    config = config or EvalConfig()
    ids = _frame_ids(frames, frame_ids)

    def worker(frame):
        gt_lanes, pred_lanes = frame
        pairs = _iou_matched_pairs(gt_lanes, pred_lanes, config, with_maxes=False)
        return pairs, len(gt_lanes), len(pred_lanes)

    cores = _map_frames(worker, frames, threads)
    stats = []
    all_errors: list[float] = []
    for fid, (pairs, n_gt, n_pred) in zip(ids, cores):
        tp, fp, fn, errors = _once_counts(pairs, n_gt, n_pred, config)
        stats.append(
            FrameStats(
                frame_id=fid, tp=tp, fp=fp, fn=fn, pair_errors=tuple(errors)
            )
        )
        all_errors.extend(errors)
    return _assemble("once", stats, "cde", all_errors)


def mbd_report(
    frames,
    config: EvalConfig | None = None,
    frame_ids=None,
    threads: int = 1,
) -> MetricReport:
    """Worst-case distances over IoU-matched pairs; counts as once_report.

    Pairs qualify for the worst-case statistic by the IoU gate alone —
    excluding large-error pairs would defeat a worst-case metric — while
    tp/fp/fn still apply both acceptance tests.
    """
    config = config or EvalConfig()
    ids = _frame_ids(frames, frame_ids)

    def worker(frame):
        gt_lanes, pred_lanes = frame
        pairs = _iou_matched_pairs(gt_lanes, pred_lanes, config, with_maxes=True)
        return pairs, len(gt_lanes), len(pred_lanes)

    cores = _map_frames(worker, frames, threads)
    stats = []
    all_values: list[float] = []
    for fid, (pairs, n_gt, n_pred) in zip(ids, cores):
        tp, fp, fn, _ = _once_counts(pairs, n_gt, n_pred, config)
        values = [
            _pair_mbd(p, config.mbd_variant)
            for p in pairs
            if p["iou"] > config.tau_iou
        ]
        stats.append(
            FrameStats(
                frame_id=fid, tp=tp, fp=fp, fn=fn, pair_errors=tuple(values)
            )
        )
        all_values.extend(values)
    aggregate = "max" if config.mbd_variant == "hausdorff_max" else "mean"
    return _assemble(
        "mbd",
        stats,
        "mbd",
        all_values,
        variant=config.mbd_variant,
        aggregate=aggregate,
    )


# ---------------------------------------------------------------------------
# threshold sweep
# ---------------------------------------------------------------------------


def threshold_sweep(
    frames,
    taus,
    protocol: str,
    config: EvalConfig | None = None,
    pointwise_config=None,
    frame_ids=None,
    threads: int = 1,
) -> tuple[tuple[float, float, float, float], ...]:
    """(tau, precision, recall, f1) rows for a sweep of the protocol's
    distance threshold.

    Pair distances are computed once and re-gated per threshold, which is
    exactly equivalent to running the protocol separately at each tau.
    """
    config = config or EvalConfig()
    taus = [float(t) for t in taus]
    if not taus:
        raise ConfigError("tau sweep list is empty")
    if any(not t > 0 for t in taus):
        raise ConfigError(f"tau values must be > 0, got {taus}")

    rows = []
    if protocol == "bcd":
        def worker(frame):
            gt_lanes, pred_lanes = frame
            if not pred_lanes:
                return np.zeros((0, len(gt_lanes)))
            return _bcd_matrix(gt_lanes, pred_lanes, config.n_interp)

        matrices = _map_frames(worker, frames, threads)
        for tau in taus:
            tp = fp = fn = 0
            for d in matrices:
                tp_flags, fp_flags, covered, _ = _bcd_from_matrix(d, tau)
                tp += sum(tp_flags)
                fp += sum(fp_flags)
                fn += len(covered) - sum(tp_flags)
            rows.append((tau, *prf(tp, fp, fn)))
    elif protocol in ("once", "mbd"):
        def worker(frame):
            gt_lanes, pred_lanes = frame
            pairs = _iou_matched_pairs(
                gt_lanes, pred_lanes, config, with_maxes=False
            )
            return pairs, len(gt_lanes), len(pred_lanes)

        cores = _map_frames(worker, frames, threads)
        base = {
            f: getattr(config, f)
            for f in (
                "tau_cd",
                "tau_iou",
                "tau_bcd",
                "lane_width",
                "bev_resolution",
                "n_interp",
                "mbd_variant",
            )
        }
        for tau in taus:
            gated = EvalConfig(**{**base, "tau_cd": tau})
            tp = fp = fn = 0
            for pairs, n_gt, n_pred in cores:
                t, f, n, _ = _once_counts(pairs, n_gt, n_pred, gated)
                tp += t
                fp += f
                fn += n
            rows.append((tau, *prf(tp, fp, fn)))
    elif protocol == "openlane":
        from .pointwise import pointwise_sweep

        rows = list(
            pointwise_sweep(frames, taus, pointwise_config, threads=threads)
        )
    else:
        raise ConfigError(f"unknown sweep protocol {protocol!r}")
    return tuple(rows)
