"""Parametric detector-confidence manifolds over the pose grid.

A field stands in for a trained object detector: it maps a pose to a
confidence in [0, 1]. The family is a sum of Gaussian angular lobes (object
symmetry) multiplied by a logistic radial falloff (distance decay), plus a
small floor:

    p(theta, r) = clamp01( bias + A(theta) * G(r) )
    A(theta)    = sum_k weight_k * exp(-d(theta, mu_k)^2 / (2 sigma_k^2))
    G(r)        = 1 / (1 + exp((r - r_half) / r_slope))

with d the wrapped angular distance. Real detectors produce such manifolds
implicitly; this closed form keeps every downstream value analytically
checkable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, FieldError
from .geometry import Pose, PoseGrid, angular_distance, pose_at

# Logistic argument clip; beyond this the falloff has saturated in float64.
_LOGISTIC_CLIP = 500.0


@dataclass(frozen=True)
class AngularLobe:
    """One Gaussian lobe of detectability centered on a viewing angle."""

    mu: float      # radians
    sigma: float   # radians, > 0
    weight: float  # in [0, 1]

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise FieldError(f"lobe sigma must be > 0, got {self.sigma}")
        if not 0.0 <= self.weight <= 1.0:
            raise FieldError(f"lobe weight must be in [0, 1], got {self.weight}")


@dataclass(frozen=True)
class ConfidenceField:
    """Detector-confidence manifold parameters."""

    lobes: tuple[AngularLobe, ...]
    r_half: float   # radial 50%-confidence distance, meters
    r_slope: float  # logistic softness, meters, > 0
    bias: float = 0.0

    def __post_init__(self) -> None:
        if len(self.lobes) == 0:
            raise FieldError("field needs at least one lobe")
        if self.r_slope <= 0.0:
            raise FieldError(f"r_slope must be > 0, got {self.r_slope}")
        if not 0.0 <= self.bias < 1.0:
            raise FieldError(f"bias must be in [0, 1), got {self.bias}")
        object.__setattr__(self, "lobes", tuple(self.lobes))


def angular_profile(field: ConfidenceField, theta: float) -> float:
    """Sum of Gaussian lobe responses at an angle."""
    total = 0.0
    for lobe in field.lobes:
        d = angular_distance(theta, lobe.mu)
        total += lobe.weight * math.exp(-(d * d) / (2.0 * lobe.sigma * lobe.sigma))
    return total


def radial_falloff(field: ConfidenceField, r: float) -> float:
    """Logistic distance decay, monotone non-increasing in r."""
    x = (r - field.r_half) / field.r_slope
    x = min(max(x, -_LOGISTIC_CLIP), _LOGISTIC_CLIP)
    return 1.0 / (1.0 + math.exp(x))


def confidence(field: ConfidenceField, pose: Pose) -> float:
    """Detector confidence at a pose, clamped to [0, 1]. Deterministic."""
    p = field.bias + angular_profile(field, pose.theta) * radial_falloff(field, pose.r)
    return min(max(p, 0.0), 1.0)


def preset_car() -> ConfidenceField:
    """Car-like manifold: strong broadside lobes, weak end-on lobes, slow falloff.

    Reflects the two-fold symmetry of a car (best detected side-on) and its
    large physical size (detectable from far away). Parameter values are
    toolkit defaults, not measurements.
    """
    return ConfidenceField(
        lobes=(
            AngularLobe(mu=math.pi / 2, sigma=0.55, weight=0.95),
            AngularLobe(mu=3 * math.pi / 2, sigma=0.55, weight=0.95),
            AngularLobe(mu=0.0, sigma=0.35, weight=0.55),
            AngularLobe(mu=math.pi, sigma=0.35, weight=0.55),
        ),
        r_half=28.0,
        r_slope=7.0,
        bias=0.04,
    )


def preset_person() -> ConfidenceField:
    """Person-like manifold: near-cylindrical symmetry, short detection range."""
    return ConfidenceField(
        lobes=(
            AngularLobe(mu=0.0, sigma=2.2, weight=0.85),
            AngularLobe(mu=math.pi, sigma=1.8, weight=0.30),
        ),
        r_half=12.0,
        r_slope=3.5,
        bias=0.03,
    )


@dataclass(frozen=True)
class ManifoldTable:
    """Exhaustive field evaluation over a grid, values[angle_idx][radius_idx]."""

    grid: PoseGrid
    values: np.ndarray = field(repr=False)


def export_manifold(field: ConfidenceField, grid: PoseGrid) -> ManifoldTable:
    """Evaluate the field at every grid point (pointwise, so entries equal
    direct confidence() calls bit-exactly)."""
    values = np.empty((grid.n_angles, grid.n_radii))
    for ai in range(grid.n_angles):
        for ri in range(grid.n_radii):
            values[ai, ri] = confidence(field, pose_at(grid, ai, ri))
    values.setflags(write=False)
    return ManifoldTable(grid=grid, values=values)


def write_manifold_csv(table: ManifoldTable, path) -> None:
    """Write `theta,r,confidence` rows in angle-major order, 9 significant digits."""
    grid = table.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta,r,confidence\n")
        for ai in range(grid.n_angles):
            theta = pose_at(grid, ai, 0).theta
            for ri in range(grid.n_radii):
                r = grid.radius_at(ri)
                fh.write(f"{theta:.9g},{r:.9g},{table.values[ai, ri]:.9g}\n")


def read_manifold_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a manifold CSV back as (theta, r, confidence) column arrays."""
    thetas, rs, confs = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "theta,r,confidence":
            raise DataFormatError(f"line 1: expected header 'theta,r,confidence', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataFormatError(f"line {lineno}: expected 3 columns, got {len(parts)}")
            try:
                thetas.append(float(parts[0]))
                rs.append(float(parts[1]))
                confs.append(float(parts[2]))
            except ValueError as exc:
                raise DataFormatError(f"line {lineno}: {exc}") from exc
    return np.array(thetas), np.array(rs), np.array(confs)
