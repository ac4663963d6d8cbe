"""Segment Gaussians: parameterization, covariance, and KL divergence.

A lane segment between two 3D ground-frame points is summarized by a
Gaussian whose center is the segment midpoint and whose principal scales
are half the segment length plus lateral/vertical uncertainty half-widths.
The orientation comes from the segment's yaw (heading in the ground plane)
and pitch (elevation of the segment direction).

Rotation convention
-------------------
``rotation_matrix`` returns ``Rz(theta_z) @ Rx(theta_x)``.  Note the
first column is the *horizontal* heading ``(cos theta_z, sin theta_z, 0)``:
pitch tilts the lateral/vertical axes about the heading rather than
aligning the length axis with the sloped segment direction.  This is the
reference parameterization and the default everywhere.  Passing
``direction_aligned=True`` selects ``Rz(theta_z) @ Ry(-theta_x)`` instead,
whose first column is the true unit segment direction; it is provided for
comparison and is off by default.

A consequence of the default parameterization is that KL values between
two segment Gaussians are invariant under a common yaw rotation plus
translation of both segments, but not under arbitrary 3D rotations
(rolling the scene mixes pitch into a frame the parameterization cannot
represent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericallySingular, ZeroLengthSegment

__all__ = [
    "MIN_SCALE",
    "SegmentGaussian",
    "segment_params",
    "segment_gaussian",
    "rotation_matrix",
    "covariance",
    "kld",
    "kld_components",
    "symmetric_kld",
    "paired_segment_gaussians",
]

# Scales below this (meters) make the covariance too ill-conditioned for a
# meaningful divergence; they are rejected rather than silently clamped.
MIN_SCALE = 1e-6

_MIN_SEGMENT_LENGTH = 1e-9


@dataclass(frozen=True)
class SegmentGaussian:
    """Gaussian summary of one lane segment.

    ``mu`` is the segment midpoint (meters, ground frame).  ``lambda_l``
    is the full segment length; ``lambda_w`` and ``lambda_h`` are the
    lateral and vertical uncertainty widths.  The covariance axes use
    half of each: ``Sigma = R @ diag((l/2)^2, (w/2)^2, (h/2)^2) @ R.T``.
    ``theta_x`` is pitch in (-pi/2, pi/2); ``theta_z`` is yaw in (-pi, pi].
    """

    mu: tuple[float, float, float]
    lambda_l: float
    lambda_w: float
    lambda_h: float
    theta_x: float
    theta_z: float

    def __post_init__(self):
        mu = tuple(float(v) for v in self.mu)
        if len(mu) != 3 or not all(math.isfinite(v) for v in mu):
            raise ValueError(f"mu must be 3 finite floats, got {self.mu!r}")
        object.__setattr__(self, "mu", mu)
        for name in ("lambda_l", "lambda_w", "lambda_h"):
            value = float(getattr(self, name))
            if not (value > 0.0) or not math.isfinite(value):
                raise ValueError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        tx = float(self.theta_x)
        if not (-math.pi / 2 < tx < math.pi / 2):
            raise ValueError(
                f"theta_x must lie in (-pi/2, pi/2), got {tx!r} "
                "(vertical segments are out of domain)"
            )
        object.__setattr__(self, "theta_x", tx)
        tz = float(self.theta_z)
        if not math.isfinite(tz):
            raise ValueError(f"theta_z must be finite, got {tz!r}")
        # Wrap into (-pi, pi].
        tz = math.remainder(tz, 2.0 * math.pi)
        if tz <= -math.pi:
            tz = math.pi
        object.__setattr__(self, "theta_z", tz)

    @property
    def mu_array(self) -> np.ndarray:
        return np.array(self.mu)

    @property
    def scales(self) -> np.ndarray:
        """Covariance axis scales: half of each lambda."""
        return np.array(
            [self.lambda_l / 2.0, self.lambda_w / 2.0, self.lambda_h / 2.0]
        )


def segment_params(p_a, p_b) -> tuple[np.ndarray, float, float, float]:
    """Midpoint, length, pitch, and yaw of the segment from p_a to p_b.

    Pitch is ``atan2(dz, hypot(dx, dy))``; yaw is ``atan2(dy, dx)``.
    Raises ZeroLengthSegment when the endpoints are closer than 1e-9 m.
    """
    a = np.asarray(p_a, dtype=float).reshape(3)
    b = np.asarray(p_b, dtype=float).reshape(3)
    delta = b - a
    length = float(np.linalg.norm(delta))
    if length < _MIN_SEGMENT_LENGTH:
        raise ZeroLengthSegment(
            f"segment endpoints coincide (length {length:.3e} m)"
        )
    horizontal = math.hypot(delta[0], delta[1])
    theta_x = math.atan2(delta[2], horizontal)
    theta_z = math.atan2(delta[1], delta[0])
    mu = (a + b) / 2.0
    return mu, length, theta_x, theta_z


def segment_gaussian(p_a, p_b, lambda_w: float, lambda_h: float) -> SegmentGaussian:
    """Build the Gaussian for one segment with given uncertainty widths."""
    if lambda_w < MIN_SCALE or lambda_h < MIN_SCALE:
        raise NumericallySingular(
            f"uncertainty widths must be >= {MIN_SCALE} m, "
            f"got lambda_w={lambda_w!r}, lambda_h={lambda_h!r}"
        )
    mu, length, theta_x, theta_z = segment_params(p_a, p_b)
    return SegmentGaussian(
        mu=tuple(mu),
        lambda_l=length,
        lambda_w=float(lambda_w),
        lambda_h=float(lambda_h),
        theta_x=theta_x,
        theta_z=theta_z,
    )


def rotation_matrix(
    theta_x: float, theta_z: float, direction_aligned: bool = False
) -> np.ndarray:
    """Orientation matrix for a segment Gaussian.

    Default: ``Rz(theta_z) @ Rx(theta_x)`` written out explicitly — the
    length axis is the horizontal heading and pitch rotates the lateral
    and vertical axes about it.  With ``direction_aligned=True``:
    ``Rz(theta_z) @ Ry(-theta_x)``, whose first column is the true unit
    direction of the (possibly sloped) segment.
    """
    cx = math.cos(theta_x)
    sx = math.sin(theta_x)
    cz = math.cos(theta_z)
    sz = math.sin(theta_z)
    if direction_aligned:
        return np.array(
            [
                [cz * cx, -sz, -cz * sx],
                [sz * cx, cz, -sz * sx],
                [sx, 0.0, cx],
            ]
        )
    return np.array(
        [
            [cz, -sz * cx, sz * sx],
            [sz, cz * cx, -cz * sx],
            [0.0, sx, cx],
        ]
    )


def covariance(
    seg: SegmentGaussian, direction_aligned: bool = False
) -> np.ndarray:
    """Covariance ``R @ Lambda^2 @ R.T`` with Lambda = diag(scales)."""
    rot = rotation_matrix(seg.theta_x, seg.theta_z, direction_aligned)
    scaled = rot * (seg.scales**2)[None, :]
    return scaled @ rot.T


def _check_conditioning(seg: SegmentGaussian) -> None:
    if (
        seg.lambda_l < MIN_SCALE
        or seg.lambda_w < MIN_SCALE
        or seg.lambda_h < MIN_SCALE
    ):
        raise NumericallySingular(
            "segment Gaussian has an axis below the "
            f"{MIN_SCALE} m floor: ({seg.lambda_l}, {seg.lambda_w}, "
            f"{seg.lambda_h})"
        )


def kld_components(
    a: SegmentGaussian, b: SegmentGaussian, direction_aligned: bool = False
) -> dict[str, float]:
    """The three terms of KL(a || b), before the 1/2 factor.

    Returns ``trace`` (= tr(Sigma_b^-1 Sigma_a) - 3), ``shift``
    (the Mahalanobis term on the mean difference under b), and
    ``logdet`` (= ln det Sigma_b - ln det Sigma_a).  Computed in whitened
    form from the factors, never by inverting a full covariance.
    """
    _check_conditioning(a)
    _check_conditioning(b)
    rot_a = rotation_matrix(a.theta_x, a.theta_z, direction_aligned)
    rot_b = rotation_matrix(b.theta_x, b.theta_z, direction_aligned)
    s_a = a.scales
    s_b = b.scales
    cross = rot_b.T @ rot_a
    m = (cross * s_a[None, :]) / s_b[:, None]
    trace = float((m * m).sum()) - 3.0
    d = b.mu_array - a.mu_array
    w = (rot_b.T @ d) / s_b
    shift = float(w @ w)
    logdet = 2.0 * float(np.log(s_b).sum() - np.log(s_a).sum())
    return {"trace": trace, "shift": shift, "logdet": logdet}


def kld(
    a: SegmentGaussian, b: SegmentGaussian, direction_aligned: bool = False
) -> float:
    """Closed-form KL(a || b) between two segment Gaussians.

    ``0.5 * (tr(Sigma_b^-1 Sigma_a) - 3 + shift + ln(det Sigma_b / det
    Sigma_a))``, clamped at zero against rounding on near-identical pairs.
    """
    parts = kld_components(a, b, direction_aligned)
    value = 0.5 * (parts["trace"] + parts["shift"] + parts["logdet"])
    return max(value, 0.0)


def symmetric_kld(
    a: SegmentGaussian, b: SegmentGaussian, direction_aligned: bool = False
) -> float:
    """Symmetrized divergence: the mean of KL(a||b) and KL(b||a)."""
    return 0.5 * (
        kld(a, b, direction_aligned) + kld(b, a, direction_aligned)
    )


def paired_segment_gaussians(
    pred_a,
    pred_b,
    gt_a,
    gt_b,
    lambda_w_hat: float,
    lambda_h_hat: float,
) -> tuple[SegmentGaussian, SegmentGaussian]:
    """Gaussians for a prediction segment and its ground-truth counterpart.

    Both Gaussians carry the *predicted* uncertainty widths; only the
    geometry (midpoint, length, angles) differs.  Returns
    ``(prediction, ground_truth)``.
    """
    pred = segment_gaussian(pred_a, pred_b, lambda_w_hat, lambda_h_hat)
    gt = segment_gaussian(gt_a, gt_b, lambda_w_hat, lambda_h_hat)
    return pred, gt
