"""Polar pose grid, trajectory interpolation, and the synthetic observation encoder.

The agent moves on a circle-and-range grid around a single object of interest:
an angle around the object and a radial distance to it. Camera frames are
replaced by a deterministic random-Fourier encoding of the pose, so the
learning problem (recover pose information from a nonlinear embedding) is
preserved without any rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridError

TWO_PI = 2.0 * math.pi

# Std of the Gaussian projection matrix in the observation encoder. Moderate
# values keep the embedding learnable; very large ones turn it into a hash.
ENCODER_PROJECTION_SCALE = 2.0


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    wrapped = math.fmod(float(theta), TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:  # fmod residue can round up to exactly 2*pi
        wrapped = 0.0
    return wrapped


def wrap_signed(delta: float) -> float:
    """Wrap an angle difference into (-pi, pi]; ties at pi stay positive."""
    wrapped = math.fmod(float(delta), TWO_PI)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    elif wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


def angular_distance(a: float, b: float) -> float:
    """Shortest angular distance between two angles, in [0, pi]."""
    return abs(wrap_signed(a - b))


@dataclass(frozen=True)
class Pose:
    """Agent pose: angle around the object (wrapped) and range to it in meters."""

    theta: float
    r: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "r", float(self.r))


@dataclass(frozen=True)
class Proposal:
    """Signed movement command: rotation about the object and radial translation."""

    dtheta: float  # radians, positive = rotation to the right around the object
    dr: float      # meters, positive = away from the object


@dataclass(frozen=True)
class PoseGrid:
    """Uniform quantization of the (angle, radius) pose space."""

    n_angles: int
    n_radii: int
    r_min: float
    r_max: float

    @property
    def angle_step(self) -> float:
        return TWO_PI / self.n_angles

    @property
    def radius_step(self) -> float:
        if self.n_radii == 1:
            return 0.0
        return (self.r_max - self.r_min) / (self.n_radii - 1)

    @property
    def radial_span(self) -> float:
        return self.r_max - self.r_min

    @property
    def n_poses(self) -> int:
        return self.n_angles * self.n_radii

    def clamp_r(self, r: float) -> float:
        return min(max(float(r), self.r_min), self.r_max)

    def radius_at(self, radius_idx: int) -> float:
        return self.r_min + radius_idx * self.radius_step

    def snap(self, pose: Pose) -> tuple[int, int]:
        """Indices of the nearest grid point to an arbitrary pose."""
        ai = int(round(pose.theta / self.angle_step)) % self.n_angles
        if self.n_radii == 1:
            ri = 0
        else:
            ri = int(round((self.clamp_r(pose.r) - self.r_min) / self.radius_step))
            ri = min(max(ri, 0), self.n_radii - 1)
        return ai, ri


def make_grid(n_angles: int, n_radii: int, r_min: float, r_max: float) -> PoseGrid:
    """Build a uniformly spaced pose grid.

    Raises GridError if n_angles < 2, n_radii < 1, r_min <= 0, or r_min > r_max.
    """
    if n_angles < 2:
        raise GridError(f"n_angles must be >= 2, got {n_angles}")
    if n_radii < 1:
        raise GridError(f"n_radii must be >= 1, got {n_radii}")
    if r_min <= 0.0:
        raise GridError(f"r_min must be positive, got {r_min}")
    if r_min > r_max:
        raise GridError(f"r_min ({r_min}) exceeds r_max ({r_max})")
    return PoseGrid(int(n_angles), int(n_radii), float(r_min), float(r_max))


def pose_at(grid: PoseGrid, angle_idx: int, radius_idx: int) -> Pose:
    """Pose of the grid point (angle_idx, radius_idx)."""
    if not 0 <= angle_idx < grid.n_angles:
        raise GridError(f"angle_idx {angle_idx} out of range [0, {grid.n_angles})")
    if not 0 <= radius_idx < grid.n_radii:
        raise GridError(f"radius_idx {radius_idx} out of range [0, {grid.n_radii})")
    return Pose(angle_idx * grid.angle_step, grid.radius_at(radius_idx))


@dataclass(frozen=True)
class WorldConfig:
    """World: a pose grid plus the observation encoder parameters."""

    grid: PoseGrid
    obs_dim: int = 32
    obs_noise_sigma: float = 0.0
    encoder_seed: int = 7

    def __post_init__(self) -> None:
        if self.obs_dim < 1:
            raise GridError(f"obs_dim must be >= 1, got {self.obs_dim}")
        if self.obs_noise_sigma < 0.0:
            raise GridError(f"obs_noise_sigma must be >= 0, got {self.obs_noise_sigma}")


# An observation is a plain float64 feature vector of length obs_dim.
Observation = np.ndarray


@lru_cache(maxsize=32)
def _encoder_projections(encoder_seed: int, obs_dim: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(encoder_seed)
    omega = rng.normal(0.0, ENCODER_PROJECTION_SCALE, size=(obs_dim, 3))
    phase = rng.uniform(0.0, TWO_PI, size=obs_dim)
    omega.setflags(write=False)
    phase.setflags(write=False)
    return omega, phase


def observe(world: WorldConfig, pose: Pose, noise_seed: int = 0) -> Observation:
    """Encode a pose into a feature vector: cos(Omega @ u + phi) + noise.

    u = [cos theta, sin theta, r / r_max] with the pose clamped to the grid.
    Deterministic given (world, pose, noise_seed); noiseless features lie
    in [-1, 1].
    """
    omega, phase = _encoder_projections(world.encoder_seed, world.obs_dim)
    theta = pose.theta
    r = world.grid.clamp_r(pose.r)
    u = np.array([math.cos(theta), math.sin(theta), r / world.grid.r_max])
    features = np.cos(omega @ u + phase)
    if world.obs_noise_sigma > 0.0:
        rng = np.random.default_rng(noise_seed)
        features = features + rng.normal(0.0, world.obs_noise_sigma, world.obs_dim)
    return features


def trajectory(grid: PoseGrid, start: Pose, proposal: Proposal,
               n_intermediate: int = 4) -> list[Pose]:
    """Waypoints from `start` to `start + proposal` as an inward/outward spiral.

    Angle and radius are interpolated simultaneously and linearly, giving
    n_intermediate + 1 poses at fractions k / (n_intermediate + 1). The angle
    follows the signed dtheta as given (its sign encodes the rotation
    direction), and every waypoint's radius is clamped to the grid bounds.
    The last waypoint is the full proposal applied to start.
    """
    if n_intermediate < 0:
        raise GridError(f"n_intermediate must be >= 0, got {n_intermediate}")
    n_steps = n_intermediate + 1
    waypoints = []
    for k in range(1, n_steps + 1):
        frac = k / n_steps
        waypoints.append(Pose(start.theta + frac * proposal.dtheta,
                              grid.clamp_r(start.r + frac * proposal.dr)))
    return waypoints
