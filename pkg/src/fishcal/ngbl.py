"""Non-grid bearing loss, loss landscapes and harmonic joint weights.

Loss direction: ground truth projects sphere points to pixels, the
prediction lifts those pixels back to bearings.  Pixels beyond the
prediction's image circle lift to its valid-angle boundary, which keeps the
loss total.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .camera import (
    FOCAL_RANGE_MM,
    K1_RANGE,
    ROLL_RANGE_DEG,
    TILT_RANGE_DEG,
    CameraParameters,
    bearings_from_angles,
    lift_pixels,
    project_rays,
)

PARAMETERS = ("theta", "psi", "f", "k1")
SAMPLING_MODES = ("area", "incident")

DEFAULT_GRID_POINTS = 101
DEFAULT_SAMPLES = 20_000
LANDSCAPE_MAX_INCIDENT_DEG = 90.0

PUBLISHED_WEIGHTS = {"theta": 0.103, "psi": 0.135, "f": 0.626, "k1": 0.136}


class DegenerateLandscapeError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizationSpec:
    """Affine maps between native parameter units and ``[0, 1]``."""

    ranges: tuple = (
        ("theta", "tilt_deg", TILT_RANGE_DEG),
        ("psi", "roll_deg", ROLL_RANGE_DEG),
        ("f", "focal_mm", FOCAL_RANGE_MM),
        ("k1", "k1", K1_RANGE),
    )

    def _lookup(self, param):
        for name, attr, rng in self.ranges:
            if name == param:
                return attr, rng
        raise KeyError(f"unknown parameter {param!r}; expected one of {PARAMETERS}")

    def field(self, param: str) -> str:
        return self._lookup(param)[0]

    def denormalize(self, param: str, x: float) -> float:
        lo, hi = self._lookup(param)[1]
        return lo + (hi - lo) * x

    def normalize(self, param: str, value: float) -> float:
        lo, hi = self._lookup(param)[1]
        return (value - lo) / (hi - lo)

    def camera(self, values: dict | None = None, **fixed) -> CameraParameters:
        """Camera with each trainable parameter at normalized value (default 0.5)."""
        values = values or {}
        kw = {self.field(p): self.denormalize(p, values.get(p, 0.5)) for p in PARAMETERS}
        kw.setdefault("pan_deg", 0.0)
        kw.setdefault("max_incident_deg", LANDSCAPE_MAX_INCIDENT_DEG)
        kw.update(fixed)
        return CameraParameters(**kw)


NORMALIZATION = NormalizationSpec()


@dataclass(frozen=True)
class LossWeights:
    w_theta: float
    w_psi: float
    w_f: float
    w_k1: float
    s_theta: float
    s_psi: float
    s_f: float
    s_k1: float

    @classmethod
    def from_areas(cls, areas: dict) -> "LossWeights":
        if any(not areas[p] > 0 for p in PARAMETERS):
            raise DegenerateLandscapeError(f"landscape area is zero: {areas}")
        inv = {p: 1.0 / areas[p] for p in PARAMETERS}
        total = sum(inv.values())
        return cls(
            **{f"w_{p}": inv[p] / total for p in PARAMETERS},
            **{f"s_{p}": float(areas[p]) for p in PARAMETERS},
        )

    @classmethod
    def published(cls) -> "LossWeights":
        """Published joint weights; areas are implied up to scale (``S ~ 1/w``)."""
        return cls(
            **{f"w_{p}": w for p, w in PUBLISHED_WEIGHTS.items()},
            **{f"s_{p}": 1.0 / w for p, w in PUBLISHED_WEIGHTS.items()},
        )

    def weight(self, param: str) -> float:
        return getattr(self, f"w_{param}")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def sample_cap(n: int, half_angle: float, seed: int = 0, sampling: str = "area"):
    """``n`` camera-frame unit rays within ``half_angle`` of the optical axis.

    ``area`` spreads the rays uniformly over the cap surface (uniform
    azimuth, uniform ``cos eta``); ``incident`` draws ``eta`` uniformly in
    ``[0, half_angle]`` instead.  Draws come from a Philox counter-based
    generator, so the same seed always yields the same rays.
    """
    if sampling not in SAMPLING_MODES:
        raise ValueError(f"sampling must be one of {SAMPLING_MODES}")
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random((n, 2))
    if sampling == "area":
        eta = np.arccos(1.0 - u[:, 0] * (1.0 - math.cos(half_angle)))
    else:
        eta = u[:, 0] * half_angle
    return bearings_from_angles(eta, 2.0 * math.pi * u[:, 1])


def _same_intrinsics(a: CameraParameters, b: CameraParameters) -> bool:
    return (a.focal_mm, a.k1, a.max_incident_deg, a.sensor_height_mm, a.image_height_px,
            a.image_width_px) == (b.focal_mm, b.k1, b.max_incident_deg,
                                  b.sensor_height_mm, b.image_height_px, b.image_width_px)


def bearing_errors(gt: CameraParameters, pred: CameraParameters, rays) -> np.ndarray:
    """Per-ray distance between ground-truth and recovered world bearings.

    ``rays`` are ground-truth camera-frame rays inside the valid cone.
    """
    if _same_intrinsics(gt, pred):
        lifted = rays
    else:
        uv = project_rays(gt, rays)
        lifted, _ = lift_pixels(pred, uv, clamp=True)
    p_hat = rays @ gt.rotation
    p = lifted @ pred.rotation
    return np.linalg.norm(p - p_hat, axis=-1)


def ngbl_loss(
    gt: CameraParameters,
    pred: CameraParameters,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    sampling: str = "area",
) -> float:
    """Mean bearing distance between ``gt`` and ``pred`` over ``n`` sampled rays."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not math.isclose(gt.pan_deg, pred.pan_deg, abs_tol=1e-12):
        raise ValueError("ground truth and prediction must share the pan angle")
    rays = sample_cap(n, gt.valid_incident_rad, seed, sampling)
    return float(np.mean(bearing_errors(gt, pred, rays)))


def _grid(grid_points: int) -> np.ndarray:
    # i / (m - 1) keeps the midpoint exactly 0.5 for odd m
    return np.arange(grid_points) / (grid_points - 1)


def landscape(
    param: str,
    grid_points: int = DEFAULT_GRID_POINTS,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    sampling: str = "area",
    norm: NormalizationSpec = NORMALIZATION,
) -> list[tuple[float, float]]:
    """Loss along one normalized parameter with the rest at ground truth (0.5).

    All grid points share the same sampled rays.
    """
    if grid_points < 11:
        raise ValueError("grid_points must be at least 11")
    gt = norm.camera()
    rays = sample_cap(n, gt.valid_incident_rad, seed, sampling)
    out = []
    for x in _grid(grid_points):
        pred = norm.camera({param: float(x)})
        out.append((float(x), float(np.mean(bearing_errors(gt, pred, rays)))))
    return out


def landscape_area(curve) -> float:
    xs, ys = zip(*curve)
    return float(np.trapezoid(ys, xs))


def landscapes(
    grid_points: int = DEFAULT_GRID_POINTS,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    sampling: str = "area",
    threads: int = 1,
) -> dict[str, list[tuple[float, float]]]:
    def one(p):
        return landscape(p, grid_points, n, seed, sampling)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curves = list(pool.map(one, PARAMETERS))
    else:
        curves = [one(p) for p in PARAMETERS]
    return dict(zip(PARAMETERS, curves))


def derive_weights(
    grid_points: int = DEFAULT_GRID_POINTS,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    sampling: str = "area",
    threads: int = 1,
    curves: dict | None = None,
) -> LossWeights:
    """Harmonic joint weights ``w = (1/S) / sum(1/S)`` from landscape areas ``S``."""
    if curves is None:
        curves = landscapes(grid_points, n, seed, sampling, threads)
    return LossWeights.from_areas({p: landscape_area(curves[p]) for p in PARAMETERS})


def joint_loss(losses, weights: LossWeights) -> float:
    """Weighted sum of per-parameter losses, given as a mapping or a 4-sequence."""
    if isinstance(losses, dict):
        values = [losses[p] for p in PARAMETERS]
    else:
        values = list(losses)
        if len(values) != 4:
            raise ValueError("expected four per-parameter losses")
    if any(v < 0 for v in values):
        raise ValueError("losses must be nonnegative")
    return float(sum(weights.weight(p) * v for p, v in zip(PARAMETERS, values)))
