"""Frame interchange files, report serialization, and scenario synthesis.

Frame file format (normative)
-----------------------------
One UTF-8 JSON object per line; every line is independent (streaming
readers never need the whole file).  Field names:

``version``
    integer format version; this module reads and writes version 1.
``frame_id``
    string, unique within a file.
``camera``
    object with ``fx, fy, cx, cy`` (pixels), ``height`` (meters),
    ``pitch`` (radians, downward positive), ``image_h, image_w``
    (pixels).
``lanes``
    array of lane objects.  A lane object has ``points`` (array of
    ``[x, y, z]`` ground-frame meters, strictly increasing y),
    ``visibility`` (array of values in [0, 1], same length), and the
    optional keys ``score`` (detection confidence in [0, 1]),
    ``curve`` (front-view curve parameters: ``rho`` — 4 numbers,
    ``beta_prime``, ``beta_dprime``, ``v_low``, ``v_up``,
    ``confidence``, ``form``), and ``uncertainty`` (array of
    ``[lateral, vertical]`` width pairs, one per consecutive point
    pair).
``pred_lanes``
    optional array of lane objects: predictions bundled with their
    ground truth in a single self-contained file.

A standalone prediction file is an ordinary frame file whose ``lanes``
array holds the predictions; ``align`` pairs such a file with a
ground-truth file by ``frame_id``.

Floats are serialized with ``repr`` semantics (shortest decimal that
round-trips), so ``read(write(x))`` reproduces every coordinate exactly.
Writers emit keys in sorted order and never include timestamps, making
output files byte-deterministic.

Synthetic scenarios
-------------------
``generate_scenario`` builds smooth polynomial ground-truth lanes and
optional noisy predictions.  Lateral noise displaces each point along
the local ground-plane normal to the lane heading, vertical noise along
z, both zero-mean Gaussian with depth-dependent standard deviation
``sigma0 + slope * y``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    IoError,
    MissingFrame,
    ParseError,
    SchemaVersionMismatch,
)
from .geometry import DEFAULT_CAMERA, CameraModel, Curve2D, Lane3D

__all__ = [
    "FORMAT_VERSION",
    "FrameRecord",
    "NoiseModel",
    "read_frames",
    "write_frames",
    "align",
    "write_report",
    "apply_noise",
    "generate_frames",
    "generate_scenario",
]

FORMAT_VERSION = 1

_CAMERA_FIELDS = ("fx", "fy", "cx", "cy", "height", "pitch", "image_h", "image_w")


@dataclass
class FrameRecord:
    """One frame: camera, ground-truth lanes, optional predictions.

    The per-lane attachment lists (curves, uncertainties) parallel their
    lane list; an attachment list is either None or exactly as long as
    the lanes, with None entries where a lane has no attachment.
    """

    frame_id: str
    camera: CameraModel
    gt_lanes: list[Lane3D]
    pred_lanes: list[Lane3D] | None = None
    gt_curves: list[Curve2D | None] | None = None
    gt_uncertainties: list[np.ndarray | None] | None = None
    pred_curves: list[Curve2D | None] | None = None
    pred_uncertainties: list[np.ndarray | None] | None = None

    def __post_init__(self):
        for name, attachments, lanes in (
            ("gt_curves", self.gt_curves, self.gt_lanes),
            ("gt_uncertainties", self.gt_uncertainties, self.gt_lanes),
            ("pred_curves", self.pred_curves, self.pred_lanes),
            ("pred_uncertainties", self.pred_uncertainties, self.pred_lanes),
        ):
            if attachments is None:
                continue
            if lanes is None or len(attachments) != len(lanes):
                raise ValueError(
                    f"{name} must parallel its lane list "
                    f"({len(attachments)} attachments)"
                )


@dataclass(frozen=True)
class NoiseModel:
    """Depth-dependent injection noise: sigma(y) = sigma0 + slope * y."""

    sigma_w0: float = 0.0
    sigma_w_slope: float = 0.0
    sigma_h0: float = 0.0
    sigma_h_slope: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_w0", "sigma_w_slope", "sigma_h0", "sigma_h_slope"):
            value = float(getattr(self, name))
            if value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "seed", int(self.seed))


# ---------------------------------------------------------------------------
# reading
# ---------------------------------------------------------------------------


def _need(obj: dict, key: str, line: int, prefix: str = ""):
    if key not in obj:
        raise ParseError("missing required field", line, prefix + key)
    return obj[key]


def _parse_camera(obj, line: int) -> CameraModel:
    if not isinstance(obj, dict):
        raise ParseError("camera must be an object", line, "camera")
    values = {k: _need(obj, k, line, "camera.") for k in _CAMERA_FIELDS}
    unknown = set(obj) - set(_CAMERA_FIELDS)
    if unknown:
        raise ParseError(
            f"unknown camera keys {sorted(unknown)}", line, "camera"
        )
    try:
        return CameraModel(
            fx=float(values["fx"]),
            fy=float(values["fy"]),
            cx=float(values["cx"]),
            cy=float(values["cy"]),
            height=float(values["height"]),
            pitch=float(values["pitch"]),
            image_size=(int(values["image_h"]), int(values["image_w"])),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), line, "camera") from None


def _parse_curve(obj, line: int, where: str) -> Curve2D:
    if not isinstance(obj, dict):
        raise ParseError("curve must be an object", line, where)
    try:
        return Curve2D(
            rho=tuple(_need(obj, "rho", line, where + ".")),
            beta_prime=float(_need(obj, "beta_prime", line, where + ".")),
            beta_dprime=float(_need(obj, "beta_dprime", line, where + ".")),
            v_low=float(_need(obj, "v_low", line, where + ".")),
            v_up=float(_need(obj, "v_up", line, where + ".")),
            confidence=float(obj.get("confidence", 1.0)),
            form=obj.get("form", "rational"),
        )
    except ParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), line, where) from None


def _parse_lanes(objs, line: int, key: str):
    if not isinstance(objs, list):
        raise ParseError(f"{key} must be an array", line, key)
    lanes: list[Lane3D] = []
    curves: list[Curve2D | None] = []
    uncs: list[np.ndarray | None] = []
    for i, obj in enumerate(objs):
        where = f"{key}[{i}]"
        if not isinstance(obj, dict):
            raise ParseError("lane must be an object", line, where)
        points = _need(obj, "points", line, where + ".")
        visibility = _need(obj, "visibility", line, where + ".")
        score = obj.get("score")
        try:
            lanes.append(
                Lane3D(
                    points=np.asarray(points, dtype=np.float64),
                    visibility=np.asarray(visibility, dtype=np.float64),
                    score=None if score is None else float(score),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), line, where) from None
        if "curve" in obj:
            curves.append(_parse_curve(obj["curve"], line, where + ".curve"))
        else:
            curves.append(None)
        if "uncertainty" in obj:
            try:
                arr = np.asarray(obj["uncertainty"], dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise ParseError(str(exc), line, where + ".uncertainty") from None
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ParseError(
                    "uncertainty must be an array of [lateral, vertical] "
                    "pairs, one per segment",
                    line,
                    where + ".uncertainty",
                )
            uncs.append(arr)
        else:
            uncs.append(None)
    if all(c is None for c in curves):
        curves = None
    if all(u is None for u in uncs):
        uncs = None
    return lanes, curves, uncs


def read_frames(path):
    """Yield FrameRecords from a frame file, validating as it streams.

    Raises ParseError (with 1-based line number and field path),
    SchemaVersionMismatch, or IoError.
    """
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None

    def records():
        seen: set[str] = set()
        with handle:
            for line_no, raw in enumerate(handle, start=1):
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
                if not isinstance(obj, dict):
                    raise ParseError("record must be an object", line_no)
                version = _need(obj, "version", line_no)
                if version != FORMAT_VERSION:
                    raise SchemaVersionMismatch(
                        f"unsupported format version {version!r} "
                        f"(this reader supports {FORMAT_VERSION})",
                        line_no,
                        "version",
                    )
                frame_id = _need(obj, "frame_id", line_no)
                if not isinstance(frame_id, str):
                    raise ParseError("frame_id must be a string", line_no,
                                     "frame_id")
                if frame_id in seen:
                    raise ParseError(f"duplicate frame_id {frame_id!r}",
                                     line_no, "frame_id")
                seen.add(frame_id)
                camera = _parse_camera(_need(obj, "camera", line_no), line_no)
                lanes, curves, uncs = _parse_lanes(
                    _need(obj, "lanes", line_no), line_no, "lanes"
                )
                pred_lanes = pred_curves = pred_uncs = None
                if "pred_lanes" in obj:
                    pred_lanes, pred_curves, pred_uncs = _parse_lanes(
                        obj["pred_lanes"], line_no, "pred_lanes"
                    )
                yield FrameRecord(
                    frame_id=frame_id,
                    camera=camera,
                    gt_lanes=lanes,
                    pred_lanes=pred_lanes,
                    gt_curves=curves,
                    gt_uncertainties=uncs,
                    pred_curves=pred_curves,
                    pred_uncertainties=pred_uncs,
                )

    return records()


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------


def _lane_to_obj(lane: Lane3D, curve: Curve2D | None, unc) -> dict:
    obj = {
        "points": [[float(v) for v in row] for row in lane.points],
        "visibility": [float(v) for v in lane.visibility],
    }
    if lane.score is not None:
        obj["score"] = float(lane.score)
    if curve is not None:
        obj["curve"] = {
            "rho": list(curve.rho),
            "beta_prime": curve.beta_prime,
            "beta_dprime": curve.beta_dprime,
            "v_low": curve.v_low,
            "v_up": curve.v_up,
            "confidence": curve.confidence,
            "form": curve.form,
        }
    if unc is not None:
        arr = np.asarray(unc, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(
                "uncertainty must be an (n_segments, 2) array of "
                "(lateral, vertical) widths"
            )
        obj["uncertainty"] = [[float(w), float(h)] for w, h in arr]
    return obj


def _camera_to_obj(camera: CameraModel) -> dict:
    h, w = camera.image_size
    return {
        "fx": camera.fx, "fy": camera.fy, "cx": camera.cx, "cy": camera.cy,
        "height": camera.height, "pitch": camera.pitch,
        "image_h": h, "image_w": w,
    }


def _record_to_line(record: FrameRecord) -> str:
    def lane_objs(lanes, curves, uncs):
        curves = curves or [None] * len(lanes)
        uncs = uncs or [None] * len(lanes)
        return [
            _lane_to_obj(lane, c, u) for lane, c, u in zip(lanes, curves, uncs)
        ]

    obj = {
        "version": FORMAT_VERSION,
        "frame_id": record.frame_id,
        "camera": _camera_to_obj(record.camera),
        "lanes": lane_objs(
            record.gt_lanes, record.gt_curves, record.gt_uncertainties
        ),
    }
    if record.pred_lanes is not None:
        obj["pred_lanes"] = lane_objs(
            record.pred_lanes, record.pred_curves, record.pred_uncertainties
        )
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"cannot write {path}: {exc}") from None


def write_frames(path, records) -> None:
    """Write records as one JSON object per line, atomically.

    The file appears only when fully written (write-to-temp then
    rename); a failure leaves no partial file behind.
    """
    lines = []
    seen: set[str] = set()
    for record in records:
        if record.frame_id in seen:
            raise ValueError(f"duplicate frame_id {record.frame_id!r}")
        seen.add(record.frame_id)
        lines.append(_record_to_line(record))
    _atomic_write(path, "".join(line + "\n" for line in lines))


def align(gt_records, pred_records) -> list[FrameRecord]:
    """Pair a ground-truth file with a standalone prediction file.

    The prediction file's ``lanes`` are its predictions.  Every
    prediction frame must name a ground-truth frame (else MissingFrame);
    ground-truth frames with no prediction counterpart get an empty
    prediction list.  Ground-truth order is preserved.
    """
    gt_records = list(gt_records)
    by_id: dict[str, FrameRecord] = {}
    for record in pred_records:
        by_id[record.frame_id] = record
    gt_ids = {record.frame_id for record in gt_records}
    for frame_id in by_id:
        if frame_id not in gt_ids:
            raise MissingFrame(
                f"prediction frame {frame_id!r} has no ground-truth frame"
            )
    out = []
    for record in gt_records:
        pred = by_id.get(record.frame_id)
        out.append(
            FrameRecord(
                frame_id=record.frame_id,
                camera=record.camera,
                gt_lanes=record.gt_lanes,
                pred_lanes=(pred.gt_lanes if pred is not None else []),
                gt_curves=record.gt_curves,
                gt_uncertainties=record.gt_uncertainties,
                pred_curves=(pred.gt_curves if pred is not None else None),
                pred_uncertainties=(
                    pred.gt_uncertainties if pred is not None else None
                ),
            )
        )
    return out


def write_report(report, path, format: str = "structured",
                 config: dict | None = None) -> None:
    """Serialize a MetricReport to disk, atomically and deterministically.

    ``structured`` writes indented JSON with sorted keys, the report's
    format version, and (when given) the configuration echo; the output
    contains no timestamps, so identical inputs produce byte-identical
    files.  ``csv`` writes the threshold-sweep table with header
    ``tau,precision,recall,f1`` and requires the report to carry sweep
    rows.
    """
    if format == "structured":
        payload = report.as_dict()
        if config is not None:
            payload["config"] = config
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    elif format == "csv":
        if report.sweep_rows is None:
            raise ConfigError("csv format requires a report with sweep rows")
        lines = ["tau,precision,recall,f1"]
        for tau, precision, recall, f1 in report.sweep_rows:
            lines.append(f"{tau!r},{precision!r},{recall!r},{f1!r}")
        text = "\n".join(lines) + "\n"
    else:
        raise ConfigError(f"unknown report format {format!r}")
    _atomic_write(path, text)


# ---------------------------------------------------------------------------
# synthetic scenarios
# ---------------------------------------------------------------------------


def apply_noise(lane: Lane3D, noise: NoiseModel, rng) -> Lane3D:
    """Displace each point laterally (normal to the local ground-plane
    heading) and vertically by zero-mean Gaussian noise with
    sigma(y) = sigma0 + slope * y."""
    pts = lane.points
    y = pts[:, 1]
    tangent = np.gradient(pts[:, :2], axis=0)
    norm = np.hypot(tangent[:, 0], tangent[:, 1])
    unit = tangent / norm[:, None]
    normal = np.stack([unit[:, 1], -unit[:, 0]], axis=1)
    sigma_w = noise.sigma_w0 + noise.sigma_w_slope * y
    sigma_h = noise.sigma_h0 + noise.sigma_h_slope * y
    eps_w = rng.standard_normal(y.size) * sigma_w
    eps_h = rng.standard_normal(y.size) * sigma_h
    out = pts.copy()
    out[:, :2] += eps_w[:, None] * normal
    out[:, 2] += eps_h
    return Lane3D(points=out, visibility=lane.visibility.copy(), score=1.0)


def _gt_lane(rng, slot: int, n_slots: int, curvature_range, y: np.ndarray):
    spacing = 3.7
    x0 = (slot - (n_slots - 1) / 2.0) * spacing + rng.uniform(-0.3, 0.3)
    heading = rng.uniform(-0.02, 0.02)
    curvature = rng.uniform(curvature_range[0], curvature_range[1])
    z0 = rng.uniform(0.0, 0.05)
    z_slope = rng.uniform(-0.005, 0.005)
    x = x0 + heading * y + 0.5 * curvature * y * y
    z = z0 + z_slope * y
    return Lane3D(
        points=np.stack([x, y, z], axis=1), visibility=np.ones_like(y)
    )


def generate_frames(
    n_frames: int,
    lanes_per_frame: int,
    curvature_range: tuple[float, float],
    noise: NoiseModel,
    camera: CameraModel | None = None,
) -> tuple[list[FrameRecord], list[FrameRecord]]:
    """Deterministic synthetic ground truths plus noisy predictions.

    Returns (gt_records, pred_records); prediction records carry their
    lanes in the primary ``lanes`` slot, ready to be written as a
    standalone prediction file.  Ground-truth synthesis and noise
    injection use independent streams spawned from the seed, so the
    ground truths do not depend on whether predictions are consumed.
    """
    if n_frames <= 0 or lanes_per_frame <= 0:
        raise ConfigError("n_frames and lanes_per_frame must be positive")
    lo, hi = (float(curvature_range[0]), float(curvature_range[1]))
    if lo > hi:
        raise ConfigError(f"curvature_range must be (low, high), got {lo, hi}")
    camera = camera or DEFAULT_CAMERA
    gt_seq, noise_seq = np.random.SeedSequence(noise.seed).spawn(2)
    gt_rng = np.random.default_rng(gt_seq)
    noise_rng = np.random.default_rng(noise_seq)
    y = np.linspace(3.0, 103.0, 20)
    gt_records, pred_records = [], []
    for k in range(n_frames):
        frame_id = f"frame_{k:06d}"
        gts = [
            _gt_lane(gt_rng, slot, lanes_per_frame, (lo, hi), y)
            for slot in range(lanes_per_frame)
        ]
        preds = [apply_noise(lane, noise, noise_rng) for lane in gts]
        gt_records.append(
            FrameRecord(frame_id=frame_id, camera=camera, gt_lanes=gts)
        )
        pred_records.append(
            FrameRecord(frame_id=frame_id, camera=camera, gt_lanes=preds)
        )
    return gt_records, pred_records


def generate_scenario(
    n_frames: int,
    lanes_per_frame: int,
    curvature_range: tuple[float, float],
    noise: NoiseModel,
    gt_path,
    pred_path=None,
    camera: CameraModel | None = None,
):
    """Write a synthetic ground-truth file and, optionally, predictions.

    Returns (gt_path, pred_path or None).  Identical parameters and seed
    produce byte-identical files.
    """
    gt_records, pred_records = generate_frames(
        n_frames, lanes_per_frame, curvature_range, noise, camera
    )
    write_frames(gt_path, gt_records)
    if pred_path is not None:
        write_frames(pred_path, pred_records)
        return gt_path, pred_path
    return gt_path, None
