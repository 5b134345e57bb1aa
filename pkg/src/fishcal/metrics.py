"""Reprojection error, parameter errors, PSNR and SSIM."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from functools import lru_cache

import numpy as np
from scipy import signal

from .camera import CameraParameters, angles_from_bearings, bearings_from_angles

REPE_POINTS = 32_400
REPE_CAP_DEG = 90.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@lru_cache(maxsize=8)
def spiral_cap(n: int = REPE_POINTS, half_angle_deg: float = REPE_CAP_DEG) -> np.ndarray:
    """Deterministic equal-area (Fibonacci) spiral of ``n`` unit vectors around ``+z``.

    Ring ``i`` sits at ``cos eta = 1 - (i + 0.5) / n * (1 - cos half_angle)``, so
    every point owns the same cap area.
    """
    i = np.arange(n) + 0.5
    cos_eta = 1.0 - i / n * (1.0 - math.cos(math.radians(half_angle_deg)))
    rays = bearings_from_angles(np.arccos(cos_eta), i * _GOLDEN_ANGLE)
    rays.setflags(write=False)
    return rays


def project_clamped(cam: CameraParameters, rays) -> np.ndarray:
    """Project camera-frame rays, moving rays past the valid cone onto its boundary."""
    eta, az = angles_from_bearings(rays)
    eta = np.minimum(eta, cam.valid_incident_rad)
    r = cam.model.radius(eta) / cam.pixel_pitch_mm
    cu, cv = cam.principal_point_px
    return np.stack([cu + r * np.cos(az), cv + r * np.sin(az)], axis=-1)


def repe(gt: CameraParameters, pred: CameraParameters, n: int = REPE_POINTS) -> float:
    """Mean pixel distance between ``gt`` and ``pred`` projections of a fixed point set.

    The points form an equal-area spiral within 90 degrees of the ground-truth
    optical axis.  Either camera projects points beyond its valid cone at the
    clamped boundary.
    """
    if not math.isclose(gt.pan_deg, pred.pan_deg, abs_tol=1e-12):
        raise ValueError("ground truth and prediction must share the pan angle")
    rays = spiral_cap(n)
    uv_gt = project_clamped(gt, rays)
    if np.array_equal(gt.rotation, pred.rotation):
        # relative rotation is exactly the identity; skip the world round trip
        pred_rays = rays
    else:
        pred_rays = (rays @ gt.rotation) @ pred.rotation.T
    uv_pred = project_clamped(pred, pred_rays)
    return float(np.mean(np.linalg.norm(uv_gt - uv_pred, axis=-1)))


def _check_same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"image shapes differ: {np.shape(a)} vs {np.shape(b)}")


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit images; ``inf`` when identical."""
    _check_same_shape(a, b)
    mse = np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * math.log10(SSIM_L**2 / mse))


def to_gray(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    return img


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a, b) -> np.ndarray:
    _check_same_shape(a, b)
    x, y = to_gray(a), to_gray(b)
    win = gaussian_window()
    if min(x.shape) < win.shape[0]:
        raise ValueError(f"images must be at least {win.shape[0]} px on each side")

    def filt(img):
        return signal.convolve2d(img, win, mode="valid")

    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(a, b) -> float:
    """Single-scale SSIM on the luma channel, averaged over the fully-covered map."""
    return float(np.mean(ssim_map(a, b)))


@dataclass(frozen=True)
class EvaluationReport:
    mean_abs_tilt_deg: float
    mean_abs_roll_deg: float
    mean_abs_f_mm: float
    mean_abs_k1: float
    repe_px: float
    psnr_db: float = math.nan
    ssim: float = math.nan
    count: int = 0

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def formatted(self) -> list[str]:
        out = []
        for f, v in zip(fields(self), astuple(self)):
            out.append(str(v) if f.name == "count" else f"{v:.2f}")
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            w.writerow(self.formatted())


class MissingPredictionError(KeyError):
    def __init__(self, ids):
        self.ids = sorted(ids)
        super().__init__(f"missing predictions for ids: {', '.join(self.ids)}")

    def __str__(self):
        return self.args[0]


def evaluate_manifest(manifest, predictions, image_pairs=None) -> EvaluationReport:
    """Aggregate parameter errors and REPE over ``manifest``.

    ``manifest`` maps id to ground-truth :class:`CameraParameters` (or is an
    iterable of ``(id, params)``); ``predictions`` maps id to predicted
    parameters.  The ground-truth pan is provided to each prediction.
    ``image_pairs`` optionally maps id to ``(image_a, image_b)`` for mean
    PSNR and SSIM.
    """
    entries = dict(manifest.items() if hasattr(manifest, "items") else manifest)
    missing = set(entries) - set(predictions)
    if missing:
        raise MissingPredictionError(missing)
    if not entries:
        raise ValueError("manifest is empty")
    errs = {"tilt": [], "roll": [], "f": [], "k1": [], "repe": []}
    for key in sorted(entries):
        gt = entries[key]
        pred = predictions[key].replace(pan_deg=gt.pan_deg)
        errs["tilt"].append(abs(pred.tilt_deg - gt.tilt_deg))
        errs["roll"].append(abs(pred.roll_deg - gt.roll_deg))
        errs["f"].append(abs(pred.focal_mm - gt.focal_mm))
        errs["k1"].append(abs(pred.k1 - gt.k1))
        errs["repe"].append(repe(gt, pred))
    p_db = s_val = math.nan
    if image_pairs:
        keys = sorted(image_pairs)
        p_db = float(np.mean([psnr(*image_pairs[k]) for k in keys]))
        s_val = float(np.mean([ssim(*image_pairs[k]) for k in keys]))
    return EvaluationReport(
        mean_abs_tilt_deg=float(np.mean(errs["tilt"])),
        mean_abs_roll_deg=float(np.mean(errs["roll"])),
        mean_abs_f_mm=float(np.mean(errs["f"])),
        mean_abs_k1=float(np.mean(errs["k1"])),
        repe_px=float(np.mean(errs["repe"])),
        psnr_db=p_db,
        ssim=s_val,
        count=len(entries),
    )
