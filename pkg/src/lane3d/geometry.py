"""Lane and curve geometry in the ground and image frames.

Coordinate conventions
----------------------
Ground frame:  x right, y forward, z up, origin on the ground directly
below the camera optical center.  Lanes are ordered polylines with
strictly increasing y (ordered away from the vehicle).

Camera frame:  x right, y down, z forward (optical axis).  The camera
sits ``height`` meters above the ground origin and is pitched down by
``pitch`` radians about its own x-axis.  Roll and yaw are zero.

Front view (FV): pixel coordinates (u, v); u grows rightward in [0, W),
v grows downward in [0, H).

A front-view lane is modeled by a shared-curvature curve

    u = rho1/(v - rho2)^2 + rho3/(v - rho2) + rho4 + beta1*v + beta2

where the rho parameters are shared by every lane of a frame (rho2 is
the horizon row) and the two bias terms are individual per lane.  This
is the "rational" form: a rational function of the image row whose
poles sit on the horizon.  A plain cubic form ("poly3",
u = rho1 + rho2*v + rho3*v^2 + rho4*v^3 + beta1*v + beta2) is available
for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BehindCamera,
    DegenerateLane,
    NoGroundIntersection,
    SingularRow,
    Underdetermined,
)
from .kernels import resample_polyline

# Curve denominator singularity guard, pixels.
EPS_DEN = 1e-6
# Minimum camera-frame depth, meters.
EPS_DEPTH = 1e-3

CURVE_FORMS = ("rational", "poly3")


@dataclass
class Lane3D:
    """A 3D lane: ordered ground-frame polyline with per-point visibility.

    ``visibility`` entries lie in [0, 1].  Ground truths use hard {0, 1}
    flags; predictions may carry probabilities.  A point counts as
    visible when its entry exceeds 0.5.
    """

    points: np.ndarray
    visibility: np.ndarray
    score: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        vis = np.asarray(self.visibility, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError("points must be a non-empty (n, 3) array")
        if vis.shape != (pts.shape[0],):
            raise ValueError("visibility length must equal point count")
        if not np.all(np.diff(pts[:, 1]) > 0):
            raise ValueError("y-coordinates must be strictly increasing")
        if np.any(vis < 0) or np.any(vis > 1):
            raise ValueError("visibility entries must lie in [0, 1]")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")
        self.points = pts
        self.visibility = vis

    def visible_points(self) -> np.ndarray:
        """Points whose visibility exceeds 0.5, in order."""
        return self.points[self.visibility > 0.5]


@dataclass
class Curve2D:
    """Front-view lane curve: shared rho, individual biases, row bounds."""

    rho: tuple[float, float, float, float]
    beta_prime: float
    beta_dprime: float
    v_low: float
    v_up: float
    confidence: float = 1.0
    form: str = "rational"

    def __post_init__(self):
        if len(self.rho) != 4:
            raise ValueError("rho must have exactly 4 entries")
        self.rho = tuple(float(r) for r in self.rho)
        if not 0.0 <= self.v_low < self.v_up:
            raise ValueError("need 0 <= v_low < v_up")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if self.form not in CURVE_FORMS:
            raise ValueError(f"unknown curve form {self.form!r}")


@dataclass
class CameraModel:
    """Pinhole camera with (height, pitch) extrinsics, zero roll/yaw."""

    fx: float
    fy: float
    cx: float
    cy: float
    height: float
    pitch: float
    image_size: tuple[int, int]  # (H, W)

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0 or self.height <= 0:
            raise ValueError("fx, fy and height must be positive")
        if not 0.0 <= self.pitch < math.pi / 2:
            raise ValueError("pitch must lie in [0, pi/2)")
        h, w = self.image_size
        if h <= 0 or w <= 0:
            raise ValueError("image_size entries must be positive")
        self.image_size = (int(h), int(w))


def _default_y_anchors() -> np.ndarray:
    return np.linspace(3.0, 103.0, 20)


@dataclass
class SampleGrid:
    """Sampling resolutions: FV curve rows, 3D y-anchors, dense interp size."""

    j_prime: int = 20
    y_anchors: np.ndarray = field(default_factory=_default_y_anchors)
    n_interp: int = 100

    def __post_init__(self):
        self.y_anchors = np.asarray(self.y_anchors, dtype=np.float64)
        if self.j_prime < 2:
            raise ValueError("j_prime must be >= 2")
        if self.y_anchors.ndim != 1 or not np.all(np.diff(self.y_anchors) > 0):
            raise ValueError("y_anchors must be 1-D and strictly increasing")
        if self.n_interp < 2:
            raise ValueError("n_interp must be >= 2")


DEFAULT_CAMERA = CameraModel(
    fx=1000.0, fy=1000.0, cx=480.0, cy=360.0,
    height=1.5, pitch=0.05, image_size=(720, 960),
)


# ── Curve model ──────────────────────────────────────────────────────────

def curve_eval(curve: Curve2D, v):
    """Evaluate the curve column u at row(s) v.

    Raises SingularRow when any requested row of a "rational" curve falls
    within EPS_DEN of the horizon row rho2.
    """
    v_arr = np.asarray(v, dtype=np.float64)
    r1, r2, r3, r4 = curve.rho
    if curve.form == "rational":
        if r1 == 0.0 and r3 == 0.0:
            u = np.full_like(v_arr, r4)  # denominators inactive
        else:
            den = v_arr - r2
            if np.any(np.abs(den) < EPS_DEN):
                raise SingularRow(
                    f"row within {EPS_DEN} of the horizon row {r2}")
            u = r1 / (den * den) + r3 / den + r4
    else:  # poly3: rho holds coefficients for powers 0..3
        u = r1 + r2 * v_arr + r3 * v_arr**2 + r4 * v_arr**3
    u = u + curve.beta_prime * v_arr + curve.beta_dprime
    return float(u) if np.isscalar(v) else u


def sample_curve(curve: Curve2D, camera: CameraModel, grid: SampleGrid):
    """Sample the curve on j_prime rows uniformly spaced over [0, H).

    Returns (u, v, m) arrays.  m[j] = 1 iff v[j] lies in [v_low, v_up]
    and the evaluated u lies in [0, W).  Invalid rows carry m = 0 and
    the sentinel column u = -1.  Rows at the curve singularity are
    simply invalid, never an error.
    """
    h, w = camera.image_size
    v = (np.arange(grid.j_prime, dtype=np.float64) + 0.5) * (h / grid.j_prime)
    u = np.full(grid.j_prime, -1.0)
    m = np.zeros(grid.j_prime, dtype=np.int64)
    if curve.form == "rational" and (curve.rho[0] != 0.0 or curve.rho[2] != 0.0):
        ok = np.abs(v - curve.rho[1]) >= EPS_DEN
    else:
        ok = np.ones(grid.j_prime, dtype=bool)
    if np.any(ok):
        sub = Curve2D(curve.rho, curve.beta_prime, curve.beta_dprime,
                      curve.v_low, curve.v_up, curve.confidence, curve.form)
        u_ok = curve_eval(sub, v[ok])
        valid = ((v[ok] >= curve.v_low) & (v[ok] <= curve.v_up)
                 & (u_ok >= 0.0) & (u_ok < w))
        idx = np.flatnonzero(ok)[valid]
        u[idx] = u_ok[valid]
        m[idx] = 1
    return u, v, m


# ── Camera projection ────────────────────────────────────────────────────

def _to_camera(camera: CameraModel, p: np.ndarray) -> np.ndarray:
    """Ground points (n, 3) to camera-frame coordinates (n, 3)."""
    s, c = math.sin(camera.pitch), math.cos(camera.pitch)
    dx = p[:, 0]
    dy = p[:, 1]
    dz = p[:, 2] - camera.height
    xc = dx
    yc = -s * dy - c * dz
    zc = c * dy - s * dz
    return np.stack([xc, yc, zc], axis=1)


def project_ground_to_image(camera: CameraModel, p) -> np.ndarray:
    """Project ground point(s) (x, y, z) to pixel coordinates (u, v).

    Accepts one point (3,) or a stack (n, 3); returns the matching
    shape.  Raises BehindCamera if any camera-frame depth <= EPS_DEPTH.
    """
    arr = np.asarray(p, dtype=np.float64)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    cam = _to_camera(camera, pts)
    if np.any(cam[:, 2] <= EPS_DEPTH):
        raise BehindCamera(f"camera-frame depth <= {EPS_DEPTH} m")
    u = camera.cx + camera.fx * cam[:, 0] / cam[:, 2]
    v = camera.cy + camera.fy * cam[:, 1] / cam[:, 2]
    uv = np.stack([u, v], axis=1)
    return uv[0] if single else uv


def unproject_to_ground(camera: CameraModel, u, v) -> np.ndarray:
    """Intersect the ray through pixel (u, v) with the ground plane z=0.

    Accepts scalars or arrays; returns (3,) or (n, 3) ground points.
    Raises NoGroundIntersection when any ray is parallel to the ground
    plane or points away from it (at or above the horizon row).
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    v_arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if u_arr.shape != v_arr.shape:
        raise ValueError("u and v must have the same shape")
    s, c = math.sin(camera.pitch), math.cos(camera.pitch)
    dcx = (u_arr - camera.cx) / camera.fx
    dcy = (v_arr - camera.cy) / camera.fy
    # Descent rate of the ray toward the ground; must be positive.
    denom = c * dcy + s
    if np.any(denom <= 1e-9):
        raise NoGroundIntersection("pixel ray does not descend to the ground")
    t = camera.height / denom  # camera-frame depth of the hit
    x = t * dcx
    y = t * (-s * dcy + c)
    out = np.stack([x, y, np.zeros_like(x)], axis=1)
    return out[0] if np.isscalar(u) else out


# ── Lane resampling ──────────────────────────────────────────────────────

def interpolate_lane(lane: Lane3D, n: int) -> np.ndarray:
    """Arc-length-uniform piecewise-linear resampling to n points.

    Operates on the visible sub-polyline (invisible gaps are bridged
    linearly); endpoints are preserved exactly and no sample ever lies
    beyond them.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    pts = lane.visible_points()
    if pts.shape[0] < 2:
        raise DegenerateLane(f"{pts.shape[0]} visible point(s); need >= 2")
    return resample_polyline(pts, n)


def resample_at_y(lane: Lane3D, y_anchors: np.ndarray):
    """Sample x(y), z(y) of the visible polyline at the given y-anchors.

    Returns (x, z, vis) arrays; an anchor is visible iff it lies within
    the y-span of the visible sub-polyline.  Values outside the span are
    clamped endpoint values and flagged invisible.
    """
    pts = lane.visible_points()
    if pts.shape[0] < 2:
        raise DegenerateLane(f"{pts.shape[0]} visible point(s); need >= 2")
    y = np.asarray(y_anchors, dtype=np.float64)
    x = np.interp(y, pts[:, 1], pts[:, 0])
    z = np.interp(y, pts[:, 1], pts[:, 2])
    vis = ((y >= pts[0, 1]) & (y <= pts[-1, 1])).astype(np.float64)
    return x, z, vis


# ── Curve fitting ────────────────────────────────────────────────────────

@dataclass
class FitResult:
    """Shared-rho frame fit: one curve per input lane plus residuals."""

    curves: list[Curve2D]
    rms: float
    lane_rms: list[float]
    rms_history: list[float]


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _lstsq_scaled(a: np.ndarray, b: np.ndarray):
    """Least squares with column equilibration; returns (x, ss)."""
    scale = np.sqrt((a * a).sum(axis=0))
    scale[scale == 0.0] = 1.0
    x = np.linalg.lstsq(a / scale, b, rcond=None)[0] / scale
    r = a @ x - b
    return x, float(r @ r)


def fit_curves(lanes_2d: Sequence[np.ndarray], image_size: tuple[int, int],
               form: str = "rational", n_iter: int = 10) -> FitResult:
    """Fit one frame of FV lanes with shared rho and per-lane biases.

    ``lanes_2d`` holds one (n_i, 2) array of (u, v) pixels per lane; all
    points must lie inside the image.  Alternating least squares runs
    for ``n_iter`` iterations: each pass refines the nonlinear horizon
    row rho2 over a bracketed interval and re-solves the remaining
    (linear) parameters jointly.  The best residual seen is kept, so the
    reported rms_history is non-increasing.

    The constant term rho4 is pinned to 0 in every fit: with per-lane
    beta'' biases a shared constant column is a pure gauge freedom.  The
    "poly3" form likewise pins its constant and linear shared
    coefficients, keeping only the v^2 and v^3 columns shared.
    """
    if form not in CURVE_FORMS:
        raise ValueError(f"unknown curve form {form!r}")
    h, w = image_size
    lanes = [np.asarray(l, dtype=np.float64).reshape(-1, 2) for l in lanes_2d]
    if not lanes:
        raise ValueError("need at least one lane")
    for i, l in enumerate(lanes):
        if l.shape[0] < 4:
            raise Underdetermined(f"lane {i} has {l.shape[0]} points; need >= 4")
        if (np.any(l[:, 0] < 0) or np.any(l[:, 0] >= w)
                or np.any(l[:, 1] < 0) or np.any(l[:, 1] >= h)):
            raise ValueError("all points must lie inside the image")
    k = len(lanes)
    u_all = np.concatenate([l[:, 0] for l in lanes])
    v_all = np.concatenate([l[:, 1] for l in lanes])
    lane_of = np.concatenate([np.full(l.shape[0], i) for i, l in enumerate(lanes)])
    n_pts = u_all.shape[0]
    n_params = (3 if form == "rational" else 2) + 2 * k
    if n_pts < n_params:
        raise Underdetermined(f"{n_pts} points for {n_params} parameters")

    def bias_columns() -> np.ndarray:
        cols = np.zeros((n_pts, 2 * k))
        for i in range(k):
            sel = lane_of == i
            cols[sel, 2 * i] = v_all[sel]
            cols[sel, 2 * i + 1] = 1.0
        return cols

    bias = bias_columns()

    if form == "poly3":
        a = np.column_stack([v_all**2, v_all**3, bias])
        x, ss = _lstsq_scaled(a, u_all)
        rms = math.sqrt(ss / n_pts)
        residual = a @ x - u_all
        curves = _build_curves(lanes, form, (0.0, 0.0, x[0], x[1]), x[2:])
        return FitResult(curves, rms, _per_lane_rms(residual, lane_of, k),
                         [rms])

    # rational: rho2 is the single nonlinear parameter.  Bracket it below
    # the lowest sample row and refine by golden-section over the projected
    # residual (all linear parameters re-solved at each candidate).
    vmin = float(v_all.min())
    span = max(float(v_all.max()) - vmin, 32.0)
    hi = vmin - max(1.0, 1e-3 * span)
    lo = vmin - 5.0 * span

    best = {"ss": math.inf, "rho2": hi, "x": None}

    def solve_at(rho2: float) -> float:
        den = v_all - rho2
        a = np.column_stack([1.0 / (den * den), 1.0 / den, bias])
        x, ss = _lstsq_scaled(a, u_all)
        if ss < best["ss"]:
            best.update(ss=ss, rho2=rho2, x=x)
        return ss

    grid = np.linspace(lo, hi, 33)
    costs = [solve_at(r2) for r2 in grid]
    i0 = int(np.argmin(costs))
    a_br = grid[max(i0 - 1, 0)]
    b_br = grid[min(i0 + 1, len(grid) - 1)]

    history: list[float] = []
    c = b_br - _INVPHI * (b_br - a_br)
    d = a_br + _INVPHI * (b_br - a_br)
    fc, fd = solve_at(c), solve_at(d)
    for _ in range(n_iter):
        for _ in range(6):
            if fc < fd:
                b_br, d, fd = d, c, fc
                c = b_br - _INVPHI * (b_br - a_br)
                fc = solve_at(c)
            else:
                a_br, c, fc = c, d, fd
                d = a_br + _INVPHI * (b_br - a_br)
                fd = solve_at(d)
        history.append(math.sqrt(best["ss"] / n_pts))

    x = best["x"]
    rho = (float(x[0]), float(best["rho2"]), float(x[1]), 0.0)
    den = v_all - best["rho2"]
    a_fin = np.column_stack([1.0 / (den * den), 1.0 / den, bias])
    residual = a_fin @ x - u_all
    curves = _build_curves(lanes, form, rho, x[2:])
    rms = math.sqrt(best["ss"] / n_pts)
    return FitResult(curves, rms, _per_lane_rms(residual, lane_of, k), history)


def _per_lane_rms(residual: np.ndarray, lane_of: np.ndarray, k: int):
    return [float(np.sqrt(np.mean(residual[lane_of == i] ** 2)))
            for i in range(k)]


def _build_curves(lanes, form, rho, betas) -> list[Curve2D]:
    curves = []
    for i, l in enumerate(lanes):
        curves.append(Curve2D(
            rho=rho,
            beta_prime=float(betas[2 * i]),
            beta_dprime=float(betas[2 * i + 1]),
            v_low=float(l[:, 1].min()),
            v_up=float(l[:, 1].max()),
            confidence=1.0,
            form=form,
        ))
    return curves
