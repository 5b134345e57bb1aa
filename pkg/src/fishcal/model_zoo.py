"""Pairwise comparison of projection laws and generic-cubic fits to them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import (
    IMAGE_HEIGHT_PX,
    SENSOR_HEIGHT_MM,
    TRIGONOMETRIC,
    Projection,
    ProjectionModel,
)

DEFAULT_FOCAL_MM = 10.5
DEFAULT_PITCH_MM = SENSOR_HEIGHT_MM / IMAGE_HEIGHT_PX
DEFAULT_STEPS = 2000

FIT_GRID_F = (1.0, 30.0)
FIT_GRID_K1 = (-1.0 / 3.0, 2.0 / 3.0)
FIT_GRID_SIZE = 300


@dataclass(frozen=True)
class ModelComparison:
    model_a: ProjectionModel
    model_b: ProjectionModel
    mean_abs_error_px: float
    pixel_pitch_mm: float
    assumed_focal_mm: float


@dataclass(frozen=True)
class FitResult:
    reference: ProjectionModel
    fitted_f_mm: float
    fitted_k1: float
    residual_px: float

    @property
    def model(self) -> ProjectionModel:
        return ProjectionModel.generic(self.fitted_f_mm, self.fitted_k1)


def _nodes(steps: int) -> np.ndarray:
    return np.linspace(0.0, math.pi / 2, steps + 1)


def mean_abs_difference(g1: np.ndarray, g2: np.ndarray, eta: np.ndarray) -> float:
    """``1/(pi/2) * integral |g1 - g2| d eta`` by composite trapezoid on ``eta``."""
    return float(np.trapezoid(np.abs(g1 - g2), eta) / (math.pi / 2))


def compare_models(
    a: ProjectionModel,
    b: ProjectionModel,
    pitch_mm: float = DEFAULT_PITCH_MM,
    quadrature_steps: int = DEFAULT_STEPS,
) -> ModelComparison:
    """Mean absolute image-radius difference of two laws over ``[0, pi/2]``, in pixels."""
    if quadrature_steps < 100:
        raise ValueError("quadrature_steps must be at least 100")
    eta = _nodes(quadrature_steps)
    err_mm = mean_abs_difference(a.radius(eta), b.radius(eta), eta)
    return ModelComparison(
        model_a=a,
        model_b=b,
        mean_abs_error_px=err_mm / pitch_mm,
        pixel_pitch_mm=pitch_mm,
        assumed_focal_mm=a.f if a.f == b.f else math.nan,
    )


def reference_models(focal_mm: float = DEFAULT_FOCAL_MM) -> list[ProjectionModel]:
    return [ProjectionModel(kind, focal_mm) for kind in TRIGONOMETRIC]


def _fit_objective(eta, target):
    # mean |a*eta + b*eta^3 - target| with a = f, b = f*k1 (linear in a, b)
    e3 = eta**3

    def objective(a, b):
        return mean_abs_difference(a * eta + b * e3, target, eta)

    return objective


def _line_min(fun, x0, step, tol):
    """Minimize a 1-D function near ``x0``: bracket by doubling, then golden section."""
    f0 = fun(x0)
    lo, hi = x0 - step, x0 + step
    while fun(lo) < f0:
        lo -= 2 * (x0 - lo)
    while fun(hi) < f0:
        hi += 2 * (hi - x0)
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = fun(c), fun(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = fun(d)
    x = (lo + hi) / 2
    return (x, fun(x)) if fun(x) < f0 else (x0, f0)


def fit_generic(
    reference: ProjectionModel,
    quadrature_steps: int = DEFAULT_STEPS,
    pitch_mm: float = DEFAULT_PITCH_MM,
    tol: float = 1e-8,
    max_sweeps: int = 500,
) -> FitResult:
    """Fit ``gamma = f (eta + k1 eta^3)`` to a reference law by mean absolute error.

    A 300 x 300 grid over ``f in [1, 30]``, ``k1 in [-1/3, 2/3]`` picks the
    start; cyclic coordinate descent on ``(f, f * k1)`` refines it until a
    full sweep improves the objective by less than ``tol`` pixels.
    """
    if reference.kind not in TRIGONOMETRIC:
        raise ValueError("reference must be one of the trigonometric projections")
    eta = _nodes(quadrature_steps)
    target = reference.radius(eta)

    fs = np.linspace(*FIT_GRID_F, FIT_GRID_SIZE)
    ks = np.linspace(*FIT_GRID_K1, FIT_GRID_SIZE)
    basis = eta[None, :] + ks[:, None] * eta[None, :] ** 3
    best = (math.inf, fs[0], ks[0])
    for f in fs:
        err = np.trapezoid(np.abs(f * basis - target), eta, axis=1)
        j = int(np.argmin(err))
        if err[j] < best[0]:
            best = (float(err[j]), float(f), float(ks[j]))

    objective = _fit_objective(eta, target)
    a, b = best[1], best[1] * best[2]
    current = objective(a, b)
    step_a = (FIT_GRID_F[1] - FIT_GRID_F[0]) / FIT_GRID_SIZE
    step_b = a * (FIT_GRID_K1[1] - FIT_GRID_K1[0]) / FIT_GRID_SIZE
    for _ in range(max_sweeps):
        a, _ = _line_min(lambda x: objective(x, b), a, step_a, 1e-13)
        b, new = _line_min(lambda x: objective(a, x), b, step_b, 1e-13)
        improved = (current - new) / pitch_mm
        current = new
        if improved < tol:
            break

    return FitResult(
        reference=reference,
        fitted_f_mm=a,
        fitted_k1=b / a,
        residual_px=current / pitch_mm,
    )


def comparison_table(
    focal_mm: float = DEFAULT_FOCAL_MM,
    pitch_mm: float = DEFAULT_PITCH_MM,
    quadrature_steps: int = DEFAULT_STEPS,
    include_fit: bool = True,
) -> tuple[list[str], list[tuple[str, list[float]]]]:
    """Rows of pairwise errors (pixels) between the trigonometric laws.

    With ``include_fit`` a final ``GEN`` row holds the generic-fit residual
    for each column's reference law.
    """
    models = reference_models(focal_mm)
    header = [m.name for m in models]
    rows = []
    for a in models:
        rows.append((a.name, [
            compare_models(a, b, pitch_mm, quadrature_steps).mean_abs_error_px
            for b in models
        ]))
    if include_fit:
        rows.append((Projection.GENERIC.short_name, [
            fit_generic(m, quadrature_steps, pitch_mm).residual_px for m in models
        ]))
    return header, rows


def format_table_csv(header, rows) -> str:
    lines = ["model," + ",".join(header)]
    for name, values in rows:
        lines.append(name + "," + ",".join(f"{v:.2f}" for v in values))
    return "\n".join(lines) + "\n"
