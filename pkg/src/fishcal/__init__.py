"""Generic cubic fisheye camera toolkit."""

from .camera import (
    CameraParameters,
    DomainError,
    Projection,
    ProjectionModel,
    image_to_world,
    incident_angle,
    radial_distance,
    rotation_matrix,
    world_to_image,
)

__version__ = "0.1.0"

__all__ = [
    "CameraParameters",
    "DomainError",
    "Projection",
    "ProjectionModel",
    "image_to_world",
    "incident_angle",
    "radial_distance",
    "rotation_matrix",
    "world_to_image",
    "__version__",
]
