"""Fisheye patch synthesis from equirectangular panoramas."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .camera import (
    FOCAL_RANGE_MM,
    IMAGE_HEIGHT_PX,
    K1_RANGE,
    MAX_INCIDENT_RANGE_DEG,
    CameraParameters,
    lift_pixels,
)

log = logging.getLogger(__name__)

ASPECT_RATIOS = (1.0, 5.0 / 4.0, 4.0 / 3.0, 3.0 / 2.0, 16.0 / 9.0)
ASPECT_LABELS = ("1/1", "5/4", "4/3", "3/2", "16/9")
ASPECT_PROBS = (0.09, 0.01, 0.66, 0.20, 0.04)

ANGLE_NORMAL_SIGMA_DEG = 15.0
ANGLE_NORMAL_WEIGHT = 0.7
MAX_REJECTIONS = 10_000


class ImageCircleError(ValueError):
    pass


@dataclass(frozen=True)
class Panorama:
    """Equirectangular RGB raster, ``width == 2 * height``.

    Column ``j`` center sits at longitude ``(j + 0.5) * 360 / W`` degrees and
    row ``i`` center at latitude ``90 - (i + 0.5) * 180 / H``.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"panorama must be H x W x 3, got {px.shape}")
        if px.shape[1] != 2 * px.shape[0]:
            raise ValueError(f"panorama width must be twice its height, got {px.shape[:2]}")
        if px.dtype != np.uint8:
            raise ValueError("panorama must be 8-bit")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def load(cls, path) -> "Panorama":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGB")))


@dataclass(frozen=True)
class PatchRecord:
    image: np.ndarray
    params: CameraParameters
    seed: int | None = None


def bearings_to_lonlat(p) -> tuple[np.ndarray, np.ndarray]:
    """World bearings to (longitude in [0, 360), latitude in [-90, 90]) degrees."""
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    lon = np.degrees(np.arctan2(x, z)) % 360.0
    lat = np.degrees(np.arctan2(-y, np.hypot(x, z)))
    return lon, lat


def sample_panorama(pano: Panorama, lon, lat) -> np.ndarray:
    """Bilinear lookup with longitude wraparound and latitude clamped at the poles."""
    h, w = pano.height, pano.width
    lon, lat = np.broadcast_arrays(np.asarray(lon, dtype=float), np.asarray(lat, dtype=float))
    shape = lon.shape
    col = lon.ravel() / 360.0 * w - 0.5
    row = (90.0 - lat.ravel()) / 180.0 * h - 0.5
    # one wrapped column on each side turns horizontal wrap into plain clamping
    padded = np.pad(pano.pixels, ((0, 0), (1, 1), (0, 0)), mode="wrap").astype(np.float64)
    coords = [np.clip(row, 0.0, h - 1.0), np.clip(col % w + 1.0, 0.0, w + 1.0)]
    out = np.empty((col.size, 3), dtype=np.float64)
    for ch in range(3):
        out[:, ch] = ndimage.map_coordinates(padded[..., ch], coords, order=1, mode="nearest")
    return out.reshape(shape + (3,))


def _to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def pixel_grid(height: int, width: int, supersample: int = 1) -> np.ndarray:
    """``(H, W, 2)`` pixel-center coordinates, or ``(H*s, W*s, 2)`` sub-pixel centers."""
    s = supersample
    u = (np.arange(width * s) + 0.5) / s - 0.5
    v = (np.arange(height * s) + 0.5) / s - 0.5
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv], axis=-1)


def render_fisheye(pano: Panorama, params: CameraParameters, supersample: int = 1) -> np.ndarray:
    """Float render; with ``supersample > 1`` each pixel averages ``s x s`` sub-samples."""
    uv = pixel_grid(params.image_height_px, params.image_width_px, supersample)
    rays, inside = lift_pixels(params, uv)
    rays = np.where(inside[..., None], rays, 0.0)
    world = rays @ params.rotation
    img = sample_panorama(pano, *bearings_to_lonlat(world))
    img[~inside] = 0.0
    if supersample > 1:
        s = supersample
        h, w = params.image_height_px, params.image_width_px
        img = img.reshape(h, s, w, s, 3).mean(axis=(1, 3))
    return img


def render_patch(pano: Panorama, params: CameraParameters, seed: int | None = None) -> PatchRecord:
    """Remap a panorama into a fisheye patch; pixels outside the image circle are black."""
    if not params.satisfies_image_circle():
        raise ImageCircleError(
            f"image circle diameter {2 * params.image_circle_radius_px:.2f} px is smaller "
            f"than the image height {params.image_height_px} px"
        )
    return PatchRecord(_to_uint8(render_fisheye(pano, params)), params, seed)


def _angle_mixture(rng: np.random.Generator) -> float:
    if rng.random() < ANGLE_NORMAL_WEIGHT:
        value = rng.normal(0.0, ANGLE_NORMAL_SIGMA_DEG)
    else:
        value = rng.uniform(-90.0, 90.0)
    return float(np.clip(value, -90.0, 90.0))


def _draw(rng: np.random.Generator, split: str, image_height_px: int) -> CameraParameters:
    pan = rng.uniform(0.0, 360.0)
    if split == "train":
        tilt = _angle_mixture(rng)
        roll = _angle_mixture(rng)
        aspect = ASPECT_RATIOS[rng.choice(len(ASPECT_RATIOS), p=ASPECT_PROBS)]
    else:
        tilt = rng.uniform(-90.0, 90.0)
        roll = rng.uniform(-90.0, 90.0)
        aspect = ASPECT_RATIOS[rng.integers(len(ASPECT_RATIOS))]
    return CameraParameters(
        pan_deg=pan,
        tilt_deg=tilt,
        roll_deg=roll,
        focal_mm=rng.uniform(*FOCAL_RANGE_MM),
        k1=rng.uniform(*K1_RANGE),
        max_incident_deg=rng.uniform(*MAX_INCIDENT_RANGE_DEG),
        image_height_px=image_height_px,
        image_width_px=int(round(image_height_px * aspect)),
    )


def sample_parameters(
    split: str = "train",
    seed: int | np.random.Generator = 0,
    image_height_px: int = IMAGE_HEIGHT_PX,
) -> CameraParameters:
    """Draw one camera from the train (mixture) or test (uniform) distribution.

    Tuples whose image circle is smaller than the image height are redrawn.
    ``seed`` may be an int or an existing generator to draw a sequence.
    """
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(
        np.random.Philox(seed))
    for _ in range(MAX_REJECTIONS):
        cam = _draw(rng, split, image_height_px)
        if cam.satisfies_image_circle():
            return cam
    raise RuntimeError(f"no valid camera after {MAX_REJECTIONS} draws; check the ranges")


def tail_fraction_oracle(threshold_deg: float) -> float:
    """P(|angle| > threshold) for the train mixture, from the analytic CDFs."""
    normal_tail = math.erfc(threshold_deg / (ANGLE_NORMAL_SIGMA_DEG * math.sqrt(2.0)))
    uniform_tail = max(0.0, (90.0 - threshold_deg) / 90.0)
    return ANGLE_NORMAL_WEIGHT * normal_tail + (1.0 - ANGLE_NORMAL_WEIGHT) * uniform_tail


MANIFEST_FIELDS = ("id", "image", "params", "seed", "panorama")


def generate_dataset(
    pano_dir,
    out_dir,
    count: int,
    split: str = "train",
    seed: int = 0,
    threads: int = 1,
) -> Path:
    """Write ``count`` PNG patches, one JSON sidecar each and ``manifest.csv``.

    Patch ``i`` uses panorama ``i mod len(panoramas)`` (sorted by name) and
    parameter seed ``[seed, i]``, so outputs do not depend on ``threads``.
    """
    pano_dir, out_dir = Path(pano_dir), Path(out_dir)
    paths = sorted(p for p in pano_dir.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not paths:
        raise FileNotFoundError(f"no panorama images in {pano_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    panos = {p: Panorama.load(p) for p in paths}

    def make(i):
        src = paths[i % len(paths)]
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, i])))
        params = sample_parameters(split, rng)
        rec = render_patch(panos[src], params, seed=i)
        pid = f"{split}_{i:06d}"
        Image.fromarray(rec.image).save(out_dir / f"{pid}.png")
        params.save(out_dir / f"{pid}.json")
        log.info("patch id=%s panorama=%s", pid, src.name)
        return {"id": pid, "image": f"{pid}.png", "params": f"{pid}.json",
                "seed": f"{seed}:{i}", "panorama": src.name}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(make, range(count)))
    else:
        rows = [make(i) for i in range(count)]

    manifest = out_dir / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    return manifest


def synthetic_panorama(
    height: int = 256, kind: str = "gradient", seed: int = 0, band_deg: float | None = None
) -> Panorama:
    """Smooth procedural panoramas for tests and demos.

    ``gradient`` is a smooth periodic color field; ``horizon`` is a sky/ground
    split with a pure red band of half-width ``band_deg`` (default one row) on
    the horizon; ``constant`` is flat gray.  Only the band has red above green.
    """
    w = 2 * height
    lon = (np.arange(w) + 0.5) / w * 2 * np.pi
    lat = np.pi / 2 - (np.arange(height) + 0.5) / height * np.pi
    LON, LAT = np.meshgrid(lon, lat)
    if kind == "constant":
        img = np.full((height, w, 3), 128.0)
    elif kind == "gradient":
        rng = np.random.default_rng(seed)
        ph = rng.uniform(0, 2 * np.pi, 3)
        img = np.stack([
            128 + 60 * np.cos(LON + ph[0]) * np.cos(LAT) + 40 * np.sin(LAT),
            128 + 60 * np.sin(2 * LON + ph[1]) * np.cos(LAT) ** 2 - 30 * np.sin(LAT),
            128 + 50 * np.cos(LON - ph[2]) * np.sin(2 * LAT) + 30 * np.cos(LAT),
        ], axis=-1)
    elif kind == "horizon":
        img = np.where(LAT[..., None] > 0, [[[150.0, 190.0, 235.0]]], [[[70.0, 100.0, 60.0]]])
        half = 180.0 / height if band_deg is None else band_deg
        band = np.abs(np.degrees(LAT)) < half
        img[band] = (255.0, 0.0, 0.0)
    else:
        raise ValueError(f"unknown panorama kind {kind!r}")
    return Panorama(_to_uint8(img))
