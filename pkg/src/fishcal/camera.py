"""Camera parameters, projection laws, closed-form back-projection and rotations.

Frames
------
World and camera frames are right-handed with ``x`` right, ``y`` down and
``z`` forward.  A camera with zero pan, tilt and roll looks at the horizon
along world ``+z`` with its image ``v`` axis aligned with gravity.  The
rotation returned by :func:`rotation_matrix` maps world vectors into the
camera frame.

Pixel coordinates place pixel centers on integer indices, so the principal
point of an ``H x W`` image is ``((W - 1) / 2, (H - 1) / 2)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SENSOR_HEIGHT_MM = 24.0
IMAGE_HEIGHT_PX = 224

TILT_RANGE_DEG = (-90.0, 90.0)
ROLL_RANGE_DEG = (-90.0, 90.0)
FOCAL_RANGE_MM = (6.0, 15.0)
K1_RANGE = (-1.0 / 6.0, 1.0 / 3.0)
MAX_INCIDENT_RANGE_DEG = (84.0, 96.0)

# slack for boundary rounding in domain checks
_ANGLE_EPS = 1e-12
_RANGE_EPS = 1e-9


class DomainError(ValueError):
    """Raised when an angle, radius or pixel lies outside a model's valid domain."""


class Projection(str, enum.Enum):
    GENERIC = "generic"
    STEREOGRAPHIC = "stereographic"
    EQUIDISTANCE = "equidistance"
    EQUISOLID = "equisolid"
    ORTHOGONAL = "orthogonal"

    @property
    def short_name(self) -> str:
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    Projection.GENERIC: "GEN",
    Projection.STEREOGRAPHIC: "STG",
    Projection.EQUIDISTANCE: "EQD",
    Projection.EQUISOLID: "ESA",
    Projection.ORTHOGONAL: "ORT",
}

TRIGONOMETRIC = (
    Projection.STEREOGRAPHIC,
    Projection.EQUIDISTANCE,
    Projection.EQUISOLID,
    Projection.ORTHOGONAL,
)


def _unwrap(a):
    a = np.asarray(a)
    return a[()] if a.ndim == 0 else a


@dataclass(frozen=True)
class ProjectionModel:
    """A radial projection law ``gamma = g(eta)`` with gamma in millimeters.

    ``k1`` is only meaningful for :attr:`Projection.GENERIC`, where
    ``gamma = f * (eta + k1 * eta**3)``.
    """

    kind: Projection
    f: float
    k1: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Projection(self.kind))
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if self.kind is not Projection.GENERIC and self.k1 != 0.0:
            raise ValueError(f"{self.kind.value} projection takes no k1")

    @classmethod
    def generic(cls, f: float, k1: float) -> "ProjectionModel":
        return cls(Projection.GENERIC, float(f), float(k1))

    @classmethod
    def stereographic(cls, f: float) -> "ProjectionModel":
        return cls(Projection.STEREOGRAPHIC, float(f))

    @classmethod
    def equidistance(cls, f: float) -> "ProjectionModel":
        return cls(Projection.EQUIDISTANCE, float(f))

    @classmethod
    def equisolid(cls, f: float) -> "ProjectionModel":
        return cls(Projection.EQUISOLID, float(f))

    @classmethod
    def orthogonal(cls, f: float) -> "ProjectionModel":
        return cls(Projection.ORTHOGONAL, float(f))

    @property
    def name(self) -> str:
        return self.kind.short_name

    @property
    def monotone_limit(self) -> float:
        """Largest incident angle (radians) up to which ``g`` is strictly increasing."""
        if self.kind is Projection.GENERIC:
            if self.k1 >= 0:
                return math.inf
            return math.sqrt(-1.0 / (3.0 * self.k1))
        if self.kind is Projection.ORTHOGONAL:
            return math.pi / 2
        if self.kind is Projection.EQUIDISTANCE:
            return math.inf
        # stereographic diverges and equisolid peaks at pi
        return math.pi

    def valid_angle(self, max_incident: float = math.inf) -> float:
        return min(max_incident, self.monotone_limit)

    def radius(self, eta):
        """Forward law without domain checks; vectorized over ``eta``."""
        eta = np.asarray(eta, dtype=float)
        f = self.f
        if self.kind is Projection.GENERIC:
            return f * (eta + self.k1 * eta**3)
        if self.kind is Projection.STEREOGRAPHIC:
            return 2.0 * f * np.tan(eta / 2.0)
        if self.kind is Projection.EQUIDISTANCE:
            return f * eta
        if self.kind is Projection.EQUISOLID:
            return 2.0 * f * np.sin(eta / 2.0)
        return f * np.sin(eta)

    def angle(self, gamma):
        """Inverse law on the monotone branch without domain checks."""
        gamma = np.asarray(gamma, dtype=float)
        f = self.f
        if self.kind is Projection.GENERIC:
            return cubic_incident_angle(gamma / f, self.k1)
        if self.kind is Projection.STEREOGRAPHIC:
            return 2.0 * np.arctan(gamma / (2.0 * f))
        if self.kind is Projection.EQUIDISTANCE:
            return gamma / f
        if self.kind is Projection.EQUISOLID:
            return 2.0 * np.arcsin(np.clip(gamma / (2.0 * f), -1.0, 1.0))
        return np.arcsin(np.clip(gamma / f, -1.0, 1.0))


def cubic_incident_angle(c, k1: float):
    """Solve ``eta + k1 * eta**3 = c`` for the root on the monotone branch.

    Closed form via the hyperbolic (``k1 > 0``) and trigonometric
    (``k1 < 0``) parametrizations of Cardano's root, which stay accurate as
    ``k1 -> 0`` where the radical form cancels catastrophically.  With
    ``s = sqrt(3 |k1|)`` and ``x = (3 * sqrt(3) / 2) * c * sqrt(|k1|)``::

        k1 > 0:  eta = (2 / s) * sinh(asinh(x) / 3)
        k1 < 0:  eta = (2 / s) * sin(asin(x) / 3),   valid for x <= 1

    ``x = 1`` corresponds to the turning point ``eta = 1 / s``.  Inputs past
    it are clipped to the turning point; callers check the domain.
    """
    c = np.asarray(c, dtype=float)
    if k1 == 0.0:
        return c.copy()
    a = abs(k1)
    s = math.sqrt(3.0 * a)
    x = (1.5 * math.sqrt(3.0 * a)) * c
    if k1 > 0:
        return (2.0 / s) * np.sinh(np.arcsinh(x) / 3.0)
    return (2.0 / s) * np.sin(np.arcsin(np.clip(x, -1.0, 1.0)) / 3.0)


def radial_distance(model: ProjectionModel, eta, max_incident: float = math.inf):
    """Image-plane radius in millimeters for incident angle(s) ``eta`` (radians).

    Raises :class:`DomainError` unless ``0 <= eta <= model.valid_angle(max_incident)``.
    """
    eta = np.asarray(eta, dtype=float)
    limit = model.valid_angle(max_incident)
    if np.any(eta < 0) or np.any(eta > limit + _ANGLE_EPS) or np.any(np.isnan(eta)):
        raise DomainError(
            f"incident angle outside [0, {limit:.12g}] rad for {model.name} model"
        )
    return _unwrap(model.radius(eta))


def incident_angle(model: ProjectionModel, gamma, max_incident: float = math.inf):
    """Back-project image radius ``gamma`` (mm) to the incident angle in radians.

    Raises :class:`DomainError` if ``gamma`` is negative or exceeds the radius
    reached at the valid-angle limit.
    """
    gamma = np.asarray(gamma, dtype=float)
    limit = model.valid_angle(max_incident)
    gmax = float(model.radius(limit)) if math.isfinite(limit) else math.inf
    tol = 1e-12 * max(1.0, gmax if math.isfinite(gmax) else 1.0)
    if np.any(gamma < 0) or np.any(gamma > gmax + tol) or np.any(np.isnan(gamma)):
        raise DomainError(
            f"radius outside [0, {gmax:.12g}] mm for {model.name} model "
            "(pixel outside the image circle)"
        )
    eta = model.angle(np.minimum(gamma, gmax))
    return _unwrap(np.minimum(eta, limit))


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def pan_matrix(pan_deg: float) -> np.ndarray:
    """World-to-camera rotation for a pan about world vertical.

    Positive pan turns the optical axis from ``+z`` toward ``+x``.
    """
    return _rot_y(math.radians(pan_deg))


def tilt_matrix(tilt_deg: float) -> np.ndarray:
    """Rotation about the camera horizontal axis; positive tilt looks up."""
    return _rot_x(math.radians(tilt_deg))


def roll_matrix(roll_deg: float) -> np.ndarray:
    """Rotation about the optical axis."""
    return _rot_z(math.radians(roll_deg))


def rotation_matrix(pan_deg: float, tilt_deg: float, roll_deg: float) -> np.ndarray:
    """World-to-camera rotation ``R_roll @ R_tilt @ R_pan``."""
    return roll_matrix(roll_deg) @ tilt_matrix(tilt_deg) @ pan_matrix(pan_deg)


def _check_range(name, value, lo, hi):
    if not (lo - _RANGE_EPS <= value <= hi + _RANGE_EPS):
        raise ValueError(f"{name}={value!r} outside [{lo:.6g}, {hi:.6g}]")


@dataclass(frozen=True)
class CameraParameters:
    """Extrinsic and intrinsic description of one generic-cubic fisheye camera.

    Angles are degrees, lengths millimeters.  Pan is wrapped into ``[0, 360)``.
    The principal point is always the image center and the pixel pitch is
    square, ``sensor_height_mm / image_height_px``.
    """

    pan_deg: float = 0.0
    tilt_deg: float = 0.0
    roll_deg: float = 0.0
    focal_mm: float = 10.5
    k1: float = 1.0 / 12.0
    max_incident_deg: float = 90.0
    sensor_height_mm: float = SENSOR_HEIGHT_MM
    image_height_px: int = IMAGE_HEIGHT_PX
    image_width_px: int = IMAGE_HEIGHT_PX
    _rotation: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pan = math.fmod(float(self.pan_deg), 360.0)
        if pan < 0:
            pan += 360.0
        object.__setattr__(self, "pan_deg", pan)
        for name in ("tilt_deg", "roll_deg", "focal_mm", "k1", "max_incident_deg",
                     "sensor_height_mm"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "image_height_px", int(self.image_height_px))
        object.__setattr__(self, "image_width_px", int(self.image_width_px))
        _check_range("tilt_deg", self.tilt_deg, *TILT_RANGE_DEG)
        _check_range("roll_deg", self.roll_deg, *ROLL_RANGE_DEG)
        _check_range("focal_mm", self.focal_mm, *FOCAL_RANGE_MM)
        _check_range("k1", self.k1, *K1_RANGE)
        _check_range("max_incident_deg", self.max_incident_deg, *MAX_INCIDENT_RANGE_DEG)
        if self.image_height_px <= 0 or self.image_width_px <= 0:
            raise ValueError("image dimensions must be positive")
        if not self.sensor_height_mm > 0:
            raise ValueError("sensor height must be positive")
        if self.valid_incident_rad <= 0:
            raise ValueError("valid incident angle must be positive")
        rot = rotation_matrix(self.pan_deg, self.tilt_deg, self.roll_deg)
        rot.setflags(write=False)
        object.__setattr__(self, "_rotation", rot)

    @property
    def model(self) -> ProjectionModel:
        return ProjectionModel.generic(self.focal_mm, self.k1)

    @property
    def pixel_pitch_mm(self) -> float:
        return self.sensor_height_mm / self.image_height_px

    @property
    def principal_point_px(self) -> tuple[float, float]:
        return ((self.image_width_px - 1) / 2.0, (self.image_height_px - 1) / 2.0)

    @property
    def max_incident_rad(self) -> float:
        return math.radians(self.max_incident_deg)

    @property
    def valid_incident_rad(self) -> float:
        return self.model.valid_angle(self.max_incident_rad)

    @property
    def image_circle_radius_px(self) -> float:
        return float(self.model.radius(self.valid_incident_rad)) / self.pixel_pitch_mm

    @property
    def rotation(self) -> np.ndarray:
        return self._rotation

    def satisfies_image_circle(self) -> bool:
        """True when the image circle diameter is at least the image height."""
        return 2.0 * self.image_circle_radius_px >= self.image_height_px - 1e-9

    def replace(self, **changes) -> "CameraParameters":
        values = self.to_dict()
        values.pop("principal_point_px")
        values.update(changes)
        return CameraParameters(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_rotation", None)
        d["principal_point_px"] = list(self.principal_point_px)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CameraParameters":
        d = dict(d)
        pp = d.pop("principal_point_px", None)
        cam = cls(**d)
        if pp is not None and not np.allclose(pp, cam.principal_point_px, atol=1e-9):
            raise ValueError(
                f"principal point {pp} is not the image center {cam.principal_point_px}"
            )
        return cam

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CameraParameters":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "CameraParameters":
        return cls.from_json(Path(path).read_text())


def bearings_from_angles(eta, azimuth) -> np.ndarray:
    """Unit camera-frame rays at incident angle ``eta`` and sensor azimuth."""
    eta = np.asarray(eta, dtype=float)
    azimuth = np.asarray(azimuth, dtype=float)
    s = np.sin(eta)
    return np.stack([s * np.cos(azimuth), s * np.sin(azimuth), np.cos(eta)], axis=-1)


def angles_from_bearings(rays) -> tuple[np.ndarray, np.ndarray]:
    rays = np.asarray(rays, dtype=float)
    x, y, z = rays[..., 0], rays[..., 1], rays[..., 2]
    eta = np.arctan2(np.hypot(x, y), z)
    return eta, np.arctan2(y, x)


def project_rays(cam: CameraParameters, rays) -> np.ndarray:
    """Project camera-frame rays to pixels; NaN where ``eta > eta_valid``."""
    eta, az = angles_from_bearings(rays)
    inside = eta <= cam.valid_incident_rad + _ANGLE_EPS
    eta_c = np.where(inside, np.minimum(eta, cam.valid_incident_rad), 0.0)
    r = cam.model.radius(eta_c) / cam.pixel_pitch_mm
    cu, cv = cam.principal_point_px
    uv = np.stack([cu + r * np.cos(az), cv + r * np.sin(az)], axis=-1)
    uv[~inside] = np.nan
    return uv


def lift_pixels(cam: CameraParameters, uv, clamp: bool = False):
    """Lift pixels to camera-frame unit rays.

    Returns ``(rays, inside)``.  Pixels beyond the image circle are clamped to
    the valid-angle boundary when ``clamp`` is true and set to NaN otherwise.
    """
    uv = np.asarray(uv, dtype=float)
    cu, cv = cam.principal_point_px
    du = uv[..., 0] - cu
    dv = uv[..., 1] - cv
    gamma = np.hypot(du, dv) * cam.pixel_pitch_mm
    limit = cam.valid_incident_rad
    gmax = float(cam.model.radius(limit))
    inside = gamma <= gmax * (1.0 + 1e-12)
    eta = np.minimum(cam.model.angle(np.minimum(gamma, gmax)), limit)
    rays = bearings_from_angles(eta, np.arctan2(dv, du))
    if not clamp:
        rays[~inside] = np.nan
    return rays, inside


def world_to_image(cam: CameraParameters, p) -> np.ndarray:
    """Project world bearing(s) ``p`` (``(..., 3)``) to pixel coordinates.

    Points beyond the valid incident angle come back as ``(nan, nan)``.
    """
    p = np.asarray(p, dtype=float)
    return _unwrap(project_rays(cam, p @ cam.rotation.T))


def image_to_world(cam: CameraParameters, uv) -> np.ndarray:
    """Lift pixel(s) ``uv`` (``(..., 2)``) to unit world bearings.

    Raises :class:`DomainError` for any pixel outside the image circle.
    """
    rays, inside = lift_pixels(cam, uv)
    if not np.all(inside):
        raise DomainError(
            f"{int(np.size(inside) - np.count_nonzero(inside))} pixel(s) outside the "
            f"image circle of radius {cam.image_circle_radius_px:.3f} px"
        )
    return rays @ cam.rotation
