"""Numeric kernels for nearest-neighbor distance statistics.

Two interchangeable backends compute every statistic:

* a compiled backend (``numba.njit``) using a sorted-by-y candidate scan
  that prunes points which provably cannot improve the running minimum,
* a vectorized NumPy backend that materializes the full distance matrix.

Both backends are **bit-identical**: they evaluate the squared distance
with the same operation order ``(dx*dx + dy*dy) + dz*dz``, select minima
by strict ``<`` comparison (a pure value selection), apply ``sqrt`` per
source point, and accumulate sums in source-point order.  The pruning
rule only skips candidates whose ``dy*dy`` already reaches the current
best squared distance, so the selected minimum value is exactly the
minimum over the full candidate set.

Backend selection: the compiled backend is used when numba imports
successfully and the environment variable ``LANE3D_NUMBA`` is not set
to ``0`` at import time.  Every public function also accepts an explicit
``backend=`` override (``"numba"`` or ``"numpy"``) for tests and
benchmarks.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_AVAILABLE",
    "active_backend",
    "directed_point_stats",
    "pair_mean_matrices",
    "point_to_polyline_stats",
    "resample_polyline",
]

try:  # pragma: no cover - exercised implicitly by backend selection
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        return wrap


_DEFAULT_BACKEND = (
    "numba"
    if NUMBA_AVAILABLE and os.environ.get("LANE3D_NUMBA", "1") != "0"
    else "numpy"
)


def active_backend() -> str:
    """Name of the backend used when no explicit override is given."""
    return _DEFAULT_BACKEND


def _resolve_backend(backend: str | None) -> str:
    if backend is None:
        return _DEFAULT_BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not NUMBA_AVAILABLE:
        raise ValueError("numba backend requested but numba is not importable")
    return backend


def _as_points(arr, name: str) -> np.ndarray:
    pts = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError(f"{name} must contain at least one point")
    return pts


def _sorted_by_y(pts: np.ndarray) -> np.ndarray:
    y = pts[:, 1]
    if np.all(y[1:] >= y[:-1]):
        return pts
    return np.ascontiguousarray(pts[np.argsort(y, kind="stable")])


# ---------------------------------------------------------------------------
# compiled backend
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _point_core_numba(ax, ay, az, bx, by, bz):
    """Sum and max of nearest-neighbor distances from a-points to b-points.

    ``b`` arrays must be sorted by y.  Returns ``(sum, max)`` where the sum
    accumulates ``sqrt(min squared distance)`` in a-point order.
    """
    n = ax.shape[0]
    m = bx.shape[0]
    total = 0.0
    biggest = 0.0
    for i in range(n):
        xa = ax[i]
        ya = ay[i]
        za = az[i]
        # First index whose y is >= ya (binary search on the sorted b side).
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if by[mid] < ya:
                lo = mid + 1
            else:
                hi = mid
        best = np.inf
        # Scan upward: dy is non-negative and non-decreasing, so once
        # dy*dy reaches the running best no later candidate can win.
        k = lo
        while k < m:
            dy = by[k] - ya
            if dy * dy >= best:
                break
            dx = bx[k] - xa
            dz = bz[k] - za
            d2 = (dx * dx + dy * dy) + dz * dz
            if d2 < best:
                best = d2
            k += 1
        # Scan downward symmetrically.
        k = lo - 1
        while k >= 0:
            dy = by[k] - ya
            if dy * dy >= best:
                break
            dx = bx[k] - xa
            dz = bz[k] - za
            d2 = (dx * dx + dy * dy) + dz * dz
            if d2 < best:
                best = d2
            k -= 1
        dist = np.sqrt(best)
        total += dist
        if dist > biggest:
            biggest = dist
    return total, biggest


@njit(cache=True, nogil=True)
def _pair_means_numba(px, py, pz, poff, gx, gy, gz, goff, d_pg, d_gp):
    n_pred = poff.shape[0] - 1
    n_gt = goff.shape[0] - 1
    for i in range(n_pred):
        p0 = poff[i]
        p1 = poff[i + 1]
        for j in range(n_gt):
            g0 = goff[j]
            g1 = goff[j + 1]
            s_pg, _ = _point_core_numba(
                px[p0:p1], py[p0:p1], pz[p0:p1], gx[g0:g1], gy[g0:g1], gz[g0:g1]
            )
            s_gp, _ = _point_core_numba(
                gx[g0:g1], gy[g0:g1], gz[g0:g1], px[p0:p1], py[p0:p1], pz[p0:p1]
            )
            d_pg[i, j] = s_pg / (p1 - p0)
            d_gp[i, j] = s_gp / (g1 - g0)


@njit(cache=True, nogil=True)
def _polyline_core_numba(ax, ay, az, qx, qy, qz):
    """Sum and max of point-to-polyline distances in a-point order.

    The polyline is the chain of segments joining consecutive q-points;
    a single q-point degenerates to point-to-point distance.
    """
    n = ax.shape[0]
    m = qx.shape[0]
    total = 0.0
    biggest = 0.0
    for i in range(n):
        xa = ax[i]
        ya = ay[i]
        za = az[i]
        best = np.inf
        if m == 1:
            dx = xa - qx[0]
            dy = ya - qy[0]
            dz = za - qz[0]
            best = (dx * dx + dy * dy) + dz * dz
        for k in range(m - 1):
            ex = qx[k + 1] - qx[k]
            ey = qy[k + 1] - qy[k]
            ez = qz[k + 1] - qz[k]
            wx = xa - qx[k]
            wy = ya - qy[k]
            wz = za - qz[k]
            c2 = (ex * ex + ey * ey) + ez * ez
            if c2 > 0.0:
                t = ((wx * ex + wy * ey) + wz * ez) / c2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            dx = wx - t * ex
            dy = wy - t * ey
            dz = wz - t * ez
            d2 = (dx * dx + dy * dy) + dz * dz
            if d2 < best:
                best = d2
        dist = np.sqrt(best)
        total += dist
        if dist > biggest:
            biggest = dist
    return total, biggest


@njit(cache=True, nogil=True)
def _resample_core_numba(x, y, z, n):
    """Arc-length-uniform resampling of a polyline to n points.

    Interior samples use the weight ``w = (t - cum[k]) / span`` applied
    as ``p[k] + w * (p[k+1] - p[k])``; both endpoints are copied exactly.
    The segment index k is the smallest with ``cum[k+1] >= t``.
    """
    m = x.shape[0]
    cum = np.empty(m)
    cum[0] = 0.0
    for i in range(m - 1):
        dx = x[i + 1] - x[i]
        dy = y[i + 1] - y[i]
        dz = z[i + 1] - z[i]
        cum[i + 1] = cum[i] + np.sqrt((dx * dx + dy * dy) + dz * dz)
    step = cum[m - 1] / (n - 1)
    out = np.empty((n, 3))
    out[0, 0] = x[0]
    out[0, 1] = y[0]
    out[0, 2] = z[0]
    out[n - 1, 0] = x[m - 1]
    out[n - 1, 1] = y[m - 1]
    out[n - 1, 2] = z[m - 1]
    k = 0
    for j in range(1, n - 1):
        t = step * j
        while k < m - 2 and cum[k + 1] < t:
            k += 1
        span = cum[k + 1] - cum[k]
        if span == 0.0:
            w = 0.0
        else:
            w = (t - cum[k]) / span
        out[j, 0] = x[k] + w * (x[k + 1] - x[k])
        out[j, 1] = y[k] + w * (y[k + 1] - y[k])
        out[j, 2] = z[k] + w * (z[k + 1] - z[k])
    return out


# ---------------------------------------------------------------------------
# NumPy backend
# ---------------------------------------------------------------------------


def _point_core_numpy(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    dx = a[:, 0][:, None] - b[None, :, 0]
    dy = a[:, 1][:, None] - b[None, :, 1]
    dz = a[:, 2][:, None] - b[None, :, 2]
    d2 = (dx * dx + dy * dy) + dz * dz
    dist = np.sqrt(d2.min(axis=1))
    return float(np.cumsum(dist)[-1]), float(dist.max())


def _polyline_core_numpy(a: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    if q.shape[0] == 1:
        d = a - q[0]
        d2 = (d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]) + d[:, 2] * d[:, 2]
        dist = np.sqrt(d2)
        return float(np.cumsum(dist)[-1]), float(dist.max())
    e = q[1:] - q[:-1]  # (m-1, 3)
    w = a[:, None, :] - q[None, :-1, :]  # (n, m-1, 3)
    c2 = (e[:, 0] * e[:, 0] + e[:, 1] * e[:, 1]) + e[:, 2] * e[:, 2]
    c1 = (w[:, :, 0] * e[None, :, 0] + w[:, :, 1] * e[None, :, 1]) + w[
        :, :, 2
    ] * e[None, :, 2]
    safe = np.where(c2 > 0.0, c2, 1.0)
    t = np.clip(c1 / safe[None, :], 0.0, 1.0)
    t = np.where(c2[None, :] > 0.0, t, 0.0)
    dx = w[:, :, 0] - t * e[None, :, 0]
    dy = w[:, :, 1] - t * e[None, :, 1]
    dz = w[:, :, 2] - t * e[None, :, 2]
    d2 = (dx * dx + dy * dy) + dz * dz
    dist = np.sqrt(d2.min(axis=1))
    return float(np.cumsum(dist)[-1]), float(dist.max())


def _resample_core_numpy(pts: np.ndarray, n: int) -> np.ndarray:
    """Vectorized twin of ``_resample_core_numba`` — same arithmetic."""
    seg = pts[1:] - pts[:-1]
    d = np.sqrt(
        (seg[:, 0] * seg[:, 0] + seg[:, 1] * seg[:, 1]) + seg[:, 2] * seg[:, 2]
    )
    cum = np.empty(pts.shape[0])
    cum[0] = 0.0
    np.cumsum(d, out=cum[1:])
    step = cum[-1] / (n - 1)
    t = step * np.arange(1, n - 1, dtype=np.float64)
    k = np.clip(np.searchsorted(cum, t, side="left") - 1, 0, pts.shape[0] - 2)
    span = cum[k + 1] - cum[k]
    zero = span == 0.0
    w = np.where(zero, 0.0, (t - cum[k]) / np.where(zero, 1.0, span))
    out = np.empty((n, 3))
    out[0] = pts[0]
    out[-1] = pts[-1]
    out[1:-1] = pts[k] + w[:, None] * (pts[k + 1] - pts[k])
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def resample_polyline(points, n: int, backend: str | None = None) -> np.ndarray:
    """Piecewise-linear resampling to ``n`` points uniform in arc length.

    The first and last input points are preserved exactly and every
    sample lies on the input chain.  Duplicate consecutive points are
    tolerated (their zero-length segment is never selected for a strictly
    interior target).
    """
    which = _resolve_backend(backend)
    pts = _as_points(points, "points")
    if n < 2:
        raise ValueError("n must be >= 2")
    if pts.shape[0] < 2:
        raise ValueError("need at least two points to resample")
    if which == "numba":
        return _resample_core_numba(
            pts[:, 0].copy(), pts[:, 1].copy(), pts[:, 2].copy(), n
        )
    return _resample_core_numpy(pts, n)


def directed_point_stats(
    a, b, backend: str | None = None
) -> tuple[float, float]:
    """Mean and max nearest-neighbor distance from points ``a`` to set ``b``.

    Returns ``(mean, max)`` of ``min_j ||a_i - b_j||`` over a-points.
    """
    which = _resolve_backend(backend)
    pa = _as_points(a, "a")
    pb = _sorted_by_y(_as_points(b, "b"))
    if which == "numba":
        total, biggest = _point_core_numba(
            pa[:, 0].copy(), pa[:, 1].copy(), pa[:, 2].copy(),
            pb[:, 0].copy(), pb[:, 1].copy(), pb[:, 2].copy(),
        )
    else:
        total, biggest = _point_core_numpy(pa, pb)
    return total / pa.shape[0], biggest


def pair_mean_matrices(
    pred_points: list, gt_points: list, backend: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Directed mean nearest-neighbor distances for every lane pair.

    ``pred_points`` and ``gt_points`` are lists of ``(n, 3)`` arrays.
    Returns ``(d_pg, d_gp)``, both shaped ``(len(pred), len(gt))``:
    ``d_pg[i, j]`` is the mean distance from prediction ``i``'s points to
    ground-truth lane ``j``'s point set, ``d_gp[i, j]`` the reverse.
    """
    which = _resolve_backend(backend)
    preds = [_sorted_by_y(_as_points(p, f"pred_points[{i}]"))
             for i, p in enumerate(pred_points)]
    gts = [_sorted_by_y(_as_points(g, f"gt_points[{j}]"))
           for j, g in enumerate(gt_points)]
    d_pg = np.zeros((len(preds), len(gts)))
    d_gp = np.zeros((len(preds), len(gts)))
    if which == "numba" and preds and gts:
        pcat = np.concatenate(preds, axis=0)
        gcat = np.concatenate(gts, axis=0)
        poff = np.zeros(len(preds) + 1, dtype=np.int64)
        goff = np.zeros(len(gts) + 1, dtype=np.int64)
        np.cumsum([p.shape[0] for p in preds], out=poff[1:])
        np.cumsum([g.shape[0] for g in gts], out=goff[1:])
        _pair_means_numba(
            pcat[:, 0].copy(), pcat[:, 1].copy(), pcat[:, 2].copy(), poff,
            gcat[:, 0].copy(), gcat[:, 1].copy(), gcat[:, 2].copy(), goff,
            d_pg, d_gp,
        )
    else:
        for i, p in enumerate(preds):
            for j, g in enumerate(gts):
                s_pg, _ = _point_core_numpy(p, g)
                s_gp, _ = _point_core_numpy(g, p)
                d_pg[i, j] = s_pg / p.shape[0]
                d_gp[i, j] = s_gp / g.shape[0]
    return d_pg, d_gp


def point_to_polyline_stats(
    points, polyline, backend: str | None = None
) -> tuple[float, float]:
    """Mean and max distance from each point to the polyline through ``polyline``.

    Distances are to the nearest point on any segment of the chain (its
    vertices included), not merely to the vertices.
    """
    which = _resolve_backend(backend)
    pa = _as_points(points, "points")
    q = _as_points(polyline, "polyline")
    if which == "numba":
        total, biggest = _polyline_core_numba(
            pa[:, 0].copy(), pa[:, 1].copy(), pa[:, 2].copy(),
            q[:, 0].copy(), q[:, 1].copy(), q[:, 2].copy(),
        )
    else:
        total, biggest = _polyline_core_numpy(pa, q)
    return total / pa.shape[0], biggest
