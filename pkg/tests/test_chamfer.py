"""Chamfer-protocol tests: pair distances, rasterization, and reports."""

import math

import numpy as np
import pytest

from lane3d.chamfer import (
    EvalConfig,
    _bcd_matrix,
    _stroke_cells,
    bcd_report,
    bcd_select_tp_fp,
    bev_iou,
    bidirectional_cd,
    mbd_report,
    once_report,
    threshold_sweep,
    unilateral_cd,
)
from lane3d.errors import ConfigError
from lane3d.geometry import Lane3D, interpolate_lane


def straight_lane(x0=0.0, y0=3.0, y1=103.0, n=21, z=0.0):
    y = np.linspace(y0, y1, n)
    pts = np.stack([np.full_like(y, x0), y, np.full_like(y, z)], axis=1)
    return Lane3D(points=pts, visibility=np.ones_like(y))


def jitter_lane(rng, x0, y0=3.0, y1=53.0, n=12):
    y = np.linspace(y0, y1, n)
    x = x0 + 0.3 * rng.standard_normal(n)
    z = 0.1 * rng.standard_normal(n)
    return Lane3D(points=np.stack([x, y, z], axis=1),
                  visibility=np.ones_like(y))


# ---------------------------------------------------------------------------
# pair distances
# ---------------------------------------------------------------------------


def test_identical_lanes_have_zero_distances():
    lane = straight_lane()
    assert unilateral_cd(lane, lane) == 0.0
    assert bidirectional_cd(lane, lane) == 0.0
    assert bev_iou(lane, lane) == 1.0


def test_parallel_offset_distances():
    gt = straight_lane(0.0)
    pred = straight_lane(0.2)
    assert unilateral_cd(gt, pred) == pytest.approx(0.2, rel=1e-12)
    assert bidirectional_cd(gt, pred) == pytest.approx(0.2, rel=1e-12)


def test_extension_charges_only_the_bidirectional_distance():
    gt = straight_lane(0.0, 3.0, 33.0)
    pred = straight_lane(0.0, 3.0, 53.0)  # collinear, 20 m longer
    assert unilateral_cd(gt, pred) < 0.01
    assert bidirectional_cd(gt, pred) > 1.0


def test_bidirectional_is_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = jitter_lane(rng, rng.uniform(-3, 3))
        b = jitter_lane(rng, rng.uniform(-3, 3))
        assert bidirectional_cd(a, b) == bidirectional_cd(b, a)


def test_bcd_matrix_recomposes_pair_values():
    rng = np.random.default_rng(11)
    gts = [jitter_lane(rng, -2.0), jitter_lane(rng, 2.0)]
    preds = [jitter_lane(rng, -1.5), jitter_lane(rng, 1.5),
             jitter_lane(rng, 0.0)]
    d = _bcd_matrix(gts, preds, 100)
    assert d.shape == (3, 2)
    for j, pred in enumerate(preds):
        for i, gt in enumerate(gts):
            assert d[j, i] == bidirectional_cd(gt, pred)


# ---------------------------------------------------------------------------
# greedy bidirectional acceptance
# ---------------------------------------------------------------------------


def test_bcd_first_prediction_claims_shared_target():
    gt = [straight_lane(0.0)]
    preds = [straight_lane(0.05), straight_lane(0.08)]
    tp, fp, covered = bcd_select_tp_fp(gt, preds)
    assert tp == [True, False]
    assert fp == [False, True]
    assert covered == [True]
    # swapping prediction order moves the acceptance
    tp2, fp2, _ = bcd_select_tp_fp(gt, preds[::-1])
    assert tp2 == [True, False]


def test_bcd_tie_targets_lowest_gt_index():
    # two identical ground truths: both predictions target index 0, so the
    # second is rejected even though ground truth 1 is free
    gt = [straight_lane(0.0), straight_lane(0.0)]
    preds = [straight_lane(0.05), straight_lane(0.05)]
    tp, fp, covered = bcd_select_tp_fp(gt, preds)
    assert tp == [True, False]
    assert covered == [True, False]


def test_bcd_no_ground_truths_makes_all_false_positives():
    preds = [straight_lane(0.0), straight_lane(3.0)]
    tp, fp, covered = bcd_select_tp_fp([], preds)
    assert tp == [False, False]
    assert fp == [True, True]
    assert covered == []


def test_bcd_no_predictions():
    tp, fp, covered = bcd_select_tp_fp([straight_lane(0.0)], [])
    assert tp == [] and fp == []
    assert covered == [False]


def test_bcd_threshold_is_inclusive():
    gt = [straight_lane(0.0)]
    tau = bidirectional_cd(gt[0], straight_lane(0.2))
    config = EvalConfig(tau_bcd=tau)
    tp, _, _ = bcd_select_tp_fp(gt, [straight_lane(0.2)], config)
    assert tp == [True]
    config = EvalConfig(tau_bcd=np.nextafter(tau, 0.0))
    tp, _, _ = bcd_select_tp_fp(gt, [straight_lane(0.2)], config)
    assert tp == [False]


def test_bcd_report_aggregation():
    # frame 1: both predictions accepted; frame 2: one rejected prediction
    # and one unclaimed ground truth
    frames = [
        ([straight_lane(-3.0), straight_lane(3.0)],
         [straight_lane(-3.1), straight_lane(3.1)]),
        ([straight_lane(0.0)], [straight_lane(8.0)]),
    ]
    report = bcd_report(frames)
    assert (report.tp, report.fp, report.fn) == (2, 1, 1)
    assert report.precision == pytest.approx(2 / 3)
    assert report.recall == pytest.approx(2 / 3)
    assert report.error_stat == pytest.approx(0.1, rel=1e-9)
    assert report.protocol == "bcd"
    assert len(report.per_frame) == 2
    assert report.per_frame[0].pair_errors == pytest.approx((0.1, 0.1))


def test_bcd_report_no_predictions_anywhere():
    report = bcd_report([([straight_lane(0.0)], [])])
    assert (report.tp, report.fp, report.fn) == (0, 0, 1)
    assert report.error_stat is None
    assert report.f1 == 0.0


# ---------------------------------------------------------------------------
# BEV rasterization
# ---------------------------------------------------------------------------


def oracle_cells(points, config):
    """Brute-force stroke rasterization over a padded bounding box."""
    xy = points[:, :2]
    res = config.bev_resolution
    half = config.lane_width / 2.0
    pad = half + 2 * res
    ix0 = math.floor((xy[:, 0].min() - pad) / res)
    ix1 = math.ceil((xy[:, 0].max() + pad) / res)
    iy0 = math.floor((xy[:, 1].min() - pad) / res)
    iy1 = math.ceil((xy[:, 1].max() + pad) / res)
    cells = set()
    for ix in range(ix0, ix1 + 1):
        for iy in range(iy0, iy1 + 1):
            cx, cy = (ix + 0.5) * res, (iy + 0.5) * res
            best = math.inf
            for k in range(xy.shape[0] - 1):
                ax, ay = xy[k]
                bx, by = xy[k + 1]
                ex, ey = bx - ax, by - ay
                c2 = ex * ex + ey * ey
                t = 0.0 if c2 == 0.0 else min(max(((cx - ax) * ex + (cy - ay) * ey) / c2, 0.0), 1.0)
                dx, dy = cx - (ax + t * ex), cy - (ay + t * ey)
                best = min(best, dx * dx + dy * dy)
            if best <= half * half:
                cells.add((ix, iy))
    return cells


def decode_keys(keys):
    ix = (keys >> np.uint64(32)).astype(np.int64) - 2**31
    iy = (keys & np.uint64(0xFFFFFFFF)).astype(np.int64) - 2**31
    return set(zip(ix.tolist(), iy.tolist()))


def test_stroke_cells_match_brute_force():
    rng = np.random.default_rng(21)
    config = EvalConfig(lane_width=0.3, bev_resolution=0.05)
    for _ in range(25):
        n = rng.integers(2, 6)
        y = np.sort(rng.uniform(0.0, 4.0, n))
        y[1:] += 0.2  # keep strictly increasing
        y = np.cumsum(np.concatenate([[y[0]], np.diff(y) + 0.05]))
        x = rng.uniform(-2.0, 2.0, n)
        pts = np.stack([x, y, np.zeros(n)], axis=1)
        got = decode_keys(_stroke_cells(pts, config))
        assert got == oracle_cells(pts, config)


def test_stroke_negative_coordinates():
    config = EvalConfig()
    pts = np.array([[-1.3, -0.9, 0.0], [-0.2, 1.4, 0.0]])
    assert decode_keys(_stroke_cells(pts, config)) == oracle_cells(pts, config)


def test_iou_translation_by_grid_multiples_is_exact():
    config = EvalConfig()
    rng = np.random.default_rng(8)
    gt = jitter_lane(rng, 0.0)
    pred = jitter_lane(rng, 0.4)
    base = bev_iou(gt, pred, config)
    shift = np.array([37 * config.bev_resolution,
                      -12 * config.bev_resolution, 0.0])
    gt2 = Lane3D(points=gt.points + shift, visibility=gt.visibility.copy())
    pred2 = Lane3D(points=pred.points + shift, visibility=pred.visibility.copy())
    assert bev_iou(gt2, pred2, config) == base


def test_iou_disjoint_and_width_separation():
    gt = straight_lane(0.0)
    assert bev_iou(gt, straight_lane(50.0)) == 0.0
    # exactly one lane width apart: strokes can share at most boundary cells
    near = bev_iou(gt, straight_lane(0.3))
    assert near < 0.05


def test_iou_monotone_in_offset():
    gt = straight_lane(0.0)
    vals = [bev_iou(gt, straight_lane(dx)) for dx in (0.0, 0.05, 0.1, 0.2, 0.3)]
    assert vals[0] == 1.0
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_iou_parallel_offset_oracle():
    # straight strokes: identical rows, column sets offset by exactly
    # two cells; end caps add the same cells per column on both lanes
    config = EvalConfig(lane_width=0.3, bev_resolution=0.05)
    gt = straight_lane(0.0)
    pred = straight_lane(0.1)
    a = decode_keys(_stroke_cells(gt.visible_points(), config))
    b = decode_keys(_stroke_cells(pred.visible_points(), config))
    shifted = {(ix + 2, iy) for ix, iy in a}
    assert shifted == b
    inter = len(a & b)
    union = len(a | b)
    assert bev_iou(gt, pred, config) == inter / union


# ---------------------------------------------------------------------------
# IoU-gated protocol
# ---------------------------------------------------------------------------


def test_once_perfect_frame():
    frames = [([straight_lane(-3.0), straight_lane(3.0)],
               [straight_lane(-3.0), straight_lane(3.0)])]
    report = once_report(frames)
    assert (report.tp, report.fp, report.fn) == (2, 0, 0)
    assert report.f1 == 1.0
    assert report.error_stat == 0.0
    assert report.protocol == "once"


def test_once_cd_gate_rejects_high_iou_pair():
    # IoU passes (offset 0.1 -> ~0.5) but the CD gate fails at 0.05
    frames = [([straight_lane(0.0)], [straight_lane(0.1)])]
    strict = once_report(frames, EvalConfig(tau_cd=0.05))
    assert (strict.tp, strict.fp, strict.fn) == (0, 1, 1)
    assert strict.error_stat is None
    relaxed = once_report(frames, EvalConfig(tau_cd=0.3))
    assert (relaxed.tp, relaxed.fp, relaxed.fn) == (1, 0, 0)
    assert relaxed.error_stat == pytest.approx(0.1, rel=1e-12)


def test_once_cd_gate_is_strict_inequality():
    frames = [([straight_lane(0.0)], [straight_lane(0.1)])]
    ucd = unilateral_cd(straight_lane(0.0), straight_lane(0.1))
    at = once_report(frames, EvalConfig(tau_cd=ucd))
    assert at.tp == 0  # ucd < tau required, equality rejected
    above = once_report(frames, EvalConfig(tau_cd=np.nextafter(ucd, np.inf)))
    assert above.tp == 1


def test_once_iou_gate_is_strict_inequality():
    gt, pred = straight_lane(0.0), straight_lane(0.1)
    iou = bev_iou(gt, pred)
    at = once_report([([gt], [pred])], EvalConfig(tau_iou=iou))
    assert at.tp == 0  # iou > tau required
    below = once_report([([gt], [pred])],
                        EvalConfig(tau_iou=np.nextafter(iou, 0.0)))
    assert below.tp == 1


def test_once_unmatched_lanes_count():
    frames = [([straight_lane(-3.0), straight_lane(3.0)],
               [straight_lane(-3.0)]),
              ([], [straight_lane(0.0)])]
    report = once_report(frames)
    assert (report.tp, report.fp, report.fn) == (1, 1, 1)


def test_asymmetry_fixture_once_accepts_bcd_rejects():
    # ground truth 30 m; prediction identical plus a 20 m collinear
    # extension: the unilateral protocol sees a perfect lane, the
    # bidirectional protocol charges the extension
    gt = straight_lane(0.0, 3.0, 33.0, n=16)
    pred = straight_lane(0.0, 3.0, 53.0, n=26)
    assert unilateral_cd(gt, pred) < 0.01
    assert bidirectional_cd(gt, pred) > 1.0
    frames = [([gt], [pred])]
    config = EvalConfig(tau_cd=0.3, tau_bcd=0.3)
    assert once_report(frames, config).f1 == 1.0
    assert bcd_report(frames, config).f1 == 0.0


# ---------------------------------------------------------------------------
# worst-case protocol
# ---------------------------------------------------------------------------


def brute_directed_max(a, b):
    return max(min(float(np.linalg.norm(p - q)) for q in b) for p in a)


def test_mbd_uniform_offset_all_variants():
    frames = [([straight_lane(0.0)], [straight_lane(0.1)])]
    for variant in ("hausdorff_mean", "hausdorff_max", "directed_max_mean"):
        report = mbd_report(frames, EvalConfig(mbd_variant=variant))
        assert report.error_stat == pytest.approx(0.1, rel=1e-12)
        assert report.variant == variant
        assert (report.tp, report.fp, report.fn) == (1, 0, 0)


def test_mbd_aggregate_mean_vs_max():
    frames = [([straight_lane(0.0)], [straight_lane(0.05)]),
              ([straight_lane(0.0)], [straight_lane(0.1)])]
    mean_rep = mbd_report(frames, EvalConfig(mbd_variant="hausdorff_mean"))
    max_rep = mbd_report(frames, EvalConfig(mbd_variant="hausdorff_max"))
    assert mean_rep.error_stat == pytest.approx(0.075, rel=1e-12)
    assert max_rep.error_stat == pytest.approx(0.1, rel=1e-12)


def test_mbd_asymmetric_pair_and_count_independence():
    # half-length prediction: IoU qualifies (~0.5) but the CD gate fails,
    # so the pair contributes to the statistic yet not to tp
    gt = straight_lane(0.0, 3.0, 103.0)
    pred = straight_lane(0.0, 3.0, 53.0)
    a = interpolate_lane(gt, 100)
    b = interpolate_lane(pred, 100)
    m_gp = brute_directed_max(a, b)  # ~50
    m_pg = brute_directed_max(b, a)
    frames = [([gt], [pred])]
    haus = mbd_report(frames, EvalConfig(mbd_variant="hausdorff_mean"))
    assert haus.error_stat == pytest.approx(max(m_pg, m_gp), rel=1e-12)
    assert (haus.tp, haus.fp, haus.fn) == (0, 1, 1)
    directed = mbd_report(frames, EvalConfig(mbd_variant="directed_max_mean"))
    assert directed.error_stat == pytest.approx((m_pg + m_gp) / 2, rel=1e-12)


def test_mbd_counts_equal_once_counts():
    rng = np.random.default_rng(17)
    frames = []
    for _ in range(8):
        gts = [jitter_lane(rng, x) for x in (-3.0, 0.0, 3.0)]
        preds = [jitter_lane(rng, x + rng.uniform(-0.3, 0.3))
                 for x in (-3.0, 3.0)]
        frames.append((gts, preds))
    config = EvalConfig()
    once = once_report(frames, config)
    mbd = mbd_report(frames, config)
    assert (once.tp, once.fp, once.fn) == (mbd.tp, mbd.fp, mbd.fn)


# ---------------------------------------------------------------------------
# sweeps and threading
# ---------------------------------------------------------------------------


def sweep_fixture(seed=29, n_frames=10):
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(n_frames):
        gts = [jitter_lane(rng, x) for x in (-3.0, 0.0, 3.0)]
        preds = [Lane3D(points=g.points + np.array([rng.uniform(0, 0.4), 0, 0]),
                        visibility=g.visibility.copy())
                 for g in gts[:rng.integers(1, 4)]]
        frames.append((gts, preds))
    return frames


def test_sweep_rows_match_standalone_reports_exactly():
    frames = sweep_fixture()
    for protocol, make_config in (
        ("bcd", lambda t: EvalConfig(tau_bcd=t)),
        ("once", lambda t: EvalConfig(tau_cd=t)),
    ):
        rows = threshold_sweep(frames, [0.1, 0.3], protocol)
        report_fn = bcd_report if protocol == "bcd" else once_report
        for tau, precision, recall, f1 in rows:
            rep = report_fn(frames, make_config(tau))
            assert (precision, recall, f1) == (rep.precision, rep.recall, rep.f1)


def test_sweep_bcd_f1_monotone():
    frames = sweep_fixture()
    rows = threshold_sweep(frames, np.linspace(0.05, 1.5, 30), "bcd")
    assert len(rows) == 30
    f1s = [r[3] for r in rows]
    assert all(a <= b + 1e-12 for a, b in zip(f1s, f1s[1:]))


def test_sweep_openlane_delegates():
    from lane3d.geometry import SampleGrid
    from lane3d.pointwise import pointwise_sweep

    anchors = np.linspace(3.0, 103.0, 20)
    y = anchors
    lane = Lane3D(points=np.stack([np.zeros_like(y), y, np.zeros_like(y)], 1),
                  visibility=np.ones_like(y))
    frames = [([lane], [lane])]
    rows = threshold_sweep(frames, [0.5, 1.5], "openlane")
    assert rows == pointwise_sweep(frames, [0.5, 1.5])


def test_sweep_rejects_bad_input():
    frames = sweep_fixture(n_frames=1)
    with pytest.raises(ConfigError):
        threshold_sweep(frames, [], "bcd")
    with pytest.raises(ConfigError):
        threshold_sweep(frames, [0.1, 0.0], "bcd")
    with pytest.raises(ConfigError):
        threshold_sweep(frames, [0.1], "nonsense")


def test_reports_thread_bit_identity():
    frames = sweep_fixture(seed=41, n_frames=12)
    for report_fn in (bcd_report, once_report, mbd_report):
        assert report_fn(frames, threads=1) == report_fn(frames, threads=4)
    assert threshold_sweep(frames, [0.1, 0.3], "bcd", threads=1) == \
        threshold_sweep(frames, [0.1, 0.3], "bcd", threads=4)


def test_config_validation():
    with pytest.raises(ConfigError):
        EvalConfig(tau_cd=0.0)
    with pytest.raises(ConfigError):
        EvalConfig(bev_resolution=-0.1)
    with pytest.raises(ConfigError):
        EvalConfig(n_interp=1)
    with pytest.raises(ConfigError):
        EvalConfig(mbd_variant="median")
