"""Undistortion and full (rotation + distortion) recovery into pinhole views."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .camera import CameraParameters, project_rays, rotation_matrix
from .synth import Panorama, _to_uint8, bearings_to_lonlat, pixel_grid, sample_panorama


@dataclass(frozen=True)
class PerspectiveSpec:
    width: int = 224
    height: int = 224
    hfov_deg: float = 90.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("output dimensions must be positive")
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError(f"horizontal FOV must be in (0, 180) degrees, got {self.hfov_deg}")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    @classmethod
    def matching(cls, params: CameraParameters, hfov_deg: float = 90.0) -> "PerspectiveSpec":
        return cls(params.image_width_px, params.image_height_px, hfov_deg)

    def rays(self) -> np.ndarray:
        """Unit pinhole rays ``(H, W, 3)`` in the output camera frame."""
        uv = pixel_grid(self.height, self.width)
        fp = self.focal_px
        x = (uv[..., 0] - (self.width - 1) / 2.0) / fp
        y = (uv[..., 1] - (self.height - 1) / 2.0) / fp
        r = np.stack([x, y, np.ones_like(x)], axis=-1)
        return r / np.linalg.norm(r, axis=-1, keepdims=True)


def sample_image(image: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinear lookup at pixel coordinates; coordinates are clamped to the raster.

    NaN coordinates produce black.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w = img.shape[:2]
    valid = np.all(np.isfinite(uv), axis=-1)
    u = np.clip(np.where(valid, uv[..., 0], 0.0), 0.0, w - 1.0)
    v = np.clip(np.where(valid, uv[..., 1], 0.0), 0.0, h - 1.0)
    out = np.empty(u.shape + (img.shape[2],), dtype=np.float64)
    for ch in range(img.shape[2]):
        out[..., ch] = ndimage.map_coordinates(img[..., ch], [v, u], order=1, mode="nearest")
    out[~valid] = 0.0
    return out


def _check_dims(image, params: CameraParameters):
    h, w = np.shape(image)[:2]
    if (h, w) != (params.image_height_px, params.image_width_px):
        raise ValueError(
            f"image is {h}x{w} but parameters describe "
            f"{params.image_height_px}x{params.image_width_px}"
        )


def undistort_map(params: CameraParameters, spec: PerspectiveSpec) -> np.ndarray:
    """Input pixel coordinates ``(H, W, 2)`` read by each output pixel; NaN where black."""
    return project_rays(params, spec.rays())


def recover_map(params: CameraParameters, spec: PerspectiveSpec) -> np.ndarray:
    level_to_cam = rotation_matrix(0.0, params.tilt_deg, params.roll_deg)
    return project_rays(params, spec.rays() @ level_to_cam.T)


def _remap(image, uv: np.ndarray) -> np.ndarray:
    out = sample_image(image, uv)
    if np.ndim(image) == 2:
        out = out[..., 0]
    return _to_uint8(out)


def undistort(image, params: CameraParameters, spec: PerspectiveSpec | None = None) -> np.ndarray:
    """Pinhole view sharing the fisheye camera's orientation (intrinsics only)."""
    _check_dims(image, params)
    spec = spec or PerspectiveSpec.matching(params)
    return _remap(image, undistort_map(params, spec))


def recover(image, params: CameraParameters, spec: PerspectiveSpec | None = None) -> np.ndarray:
    """Pinhole view with tilt and roll removed: level horizon, vertical gravity.

    The output camera keeps the fisheye camera's pan.
    """
    _check_dims(image, params)
    spec = spec or PerspectiveSpec.matching(params)
    return _remap(image, recover_map(params, spec))


def render_pinhole(
    pano: Panorama,
    spec: PerspectiveSpec,
    pan_deg: float = 0.0,
    tilt_deg: float = 0.0,
    roll_deg: float = 0.0,
) -> np.ndarray:
    """Direct pinhole render of a panorama, bypassing any fisheye model."""
    world = spec.rays() @ rotation_matrix(pan_deg, tilt_deg, roll_deg)
    return _to_uint8(sample_panorama(pano, *bearings_to_lonlat(world)))
