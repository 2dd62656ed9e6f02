"""Ground-truth navigation labels and the training dataset.

Every grid pose is mapped to the nearest grid pose whose detector confidence
exceeds a threshold; the signed (rotation, translation) delta to that target
is the training label. Positive rotation means rotating to the right around
the object. Distance combines arc length at the source radius with weighted
radial travel, so both axes are in meters and comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, FieldError, GridError
from .fields import AngularLobe, ConfidenceField, export_manifold
from .geometry import (
    Observation,
    Pose,
    PoseGrid,
    WorldConfig,
    make_grid,
    observe,
    pose_at,
)
from .seeding import derive_seed

SCHEMA_VERSION = 1

DEFAULT_P_THRES = 0.9
DEFAULT_RADIAL_WEIGHT = 1.0


@dataclass(frozen=True)
class NavigationLabel:
    """Signed rotation/translation deltas to the nearest above-threshold pose.

    `reachable` is False when no grid point exceeds the threshold at all; the
    deltas then point at the global confidence argmax instead.
    """

    dtheta: float
    dr: float
    reachable: bool = True


@dataclass(frozen=True)
class DatasetRecord:
    angle_idx: int
    radius_idx: int
    pose: Pose
    observation: Observation
    p: float
    label: NavigationLabel
    label_norm: tuple[float, float]


@dataclass(frozen=True)
class Dataset:
    world: WorldConfig
    field: ConfidenceField
    p_thres: float
    radial_weight: float
    noise_seed: int
    records: list[DatasetRecord]

    def __len__(self) -> int:
        return len(self.records)


def _signed_index_deltas(n_angles: int, source_angle_idx: int) -> np.ndarray:
    """Signed wrapped index differences to every angle index; ties at the
    antipode stay positive."""
    k = (np.arange(n_angles) - source_angle_idx) % n_angles
    half = n_angles // 2
    return np.where(k > half, k - n_angles, k)


def _dtheta_from_index_delta(signed_k: np.ndarray, angle_step: float) -> np.ndarray:
    return np.clip(signed_k * angle_step, -math.pi, math.pi)


def _select_nearest(values: np.ndarray, grid: PoseGrid, source: tuple[int, int],
                    p_thres: float, radial_weight: float) -> tuple[tuple[int, int], bool]:
    """Pick the target grid point from a precomputed confidence table.

    Among points with confidence >= p_thres, minimizes
    d^2 = (dtheta * r_source)^2 + (radial_weight * dr)^2, breaking ties by
    positive dtheta, then smaller |dr|, then positive dr, then angle-major
    scan order. Falls back to the global argmax when nothing qualifies.
    """
    sa, sr = source
    n_angles, n_radii = grid.n_angles, grid.n_radii
    r_source = grid.radius_at(sr)

    dtheta = _dtheta_from_index_delta(_signed_index_deltas(n_angles, sa), grid.angle_step)
    radii = grid.r_min + np.arange(n_radii) * grid.radius_step
    dr = radii - grid.radius_at(sr)

    arc = dtheta * r_source                     # (n_angles,)
    rad = radial_weight * dr                    # (n_radii,)
    d2 = (arc * arc)[:, None] + (rad * rad)[None, :]

    eligible = values >= p_thres
    if not eligible.any():
        flat = int(np.argmax(values))           # first max in angle-major order
        return (flat // n_radii, flat % n_radii), False

    idx = np.flatnonzero(eligible.ravel())
    ai = idx // n_radii
    ri = idx % n_radii
    d2_q = d2.ravel()[idx]
    dth_q = dtheta[ai]
    dr_q = dr[ri]
    # lexsort's last key is primary; the sort is stable, so full ties resolve
    # to angle-major scan order.
    order = np.lexsort((dr_q <= 0.0, np.abs(dr_q), dth_q <= 0.0, d2_q))
    best = idx[order[0]]
    return (int(best // n_radii), int(best % n_radii)), True


def nearest_above(field: ConfidenceField, grid: PoseGrid, source: tuple[int, int],
                  p_thres: float = DEFAULT_P_THRES,
                  radial_weight: float = DEFAULT_RADIAL_WEIGHT) -> tuple[tuple[int, int], bool]:
    """Nearest grid point whose confidence meets the threshold.

    Returns ((angle_idx, radius_idx), reachable). See _select_nearest for the
    distance and tie-break rules.
    """
    sa, sr = source
    if not (0 <= sa < grid.n_angles and 0 <= sr < grid.n_radii):
        raise GridError(f"source index {source} out of range")
    if not 0.0 < p_thres < 1.0:
        raise FieldError(f"p_thres must be in (0, 1), got {p_thres}")
    if radial_weight <= 0.0:
        raise FieldError(f"radial_weight must be > 0, got {radial_weight}")
    values = export_manifold(field, grid).values
    return _select_nearest(values, grid, source, p_thres, radial_weight)


def label_from_target(grid: PoseGrid, source: tuple[int, int], target: tuple[int, int],
                      reachable: bool = True) -> NavigationLabel:
    """Label from source to target grid indices.

    dtheta is the wrapped signed angular difference in [-pi, pi] (positive =
    rotation to the right); dr is the radial difference in meters.
    """
    sa, sr = source
    ta, tr = target
    if not (0 <= sa < grid.n_angles and 0 <= sr < grid.n_radii):
        raise GridError(f"source index {source} out of range")
    if not (0 <= ta < grid.n_angles and 0 <= tr < grid.n_radii):
        raise GridError(f"target index {target} out of range")
    k = (ta - sa) % grid.n_angles
    if k > grid.n_angles // 2:
        k -= grid.n_angles
    dtheta = min(max(k * grid.angle_step, -math.pi), math.pi)
    dr = grid.radius_at(tr) - grid.radius_at(sr)
    return NavigationLabel(dtheta=dtheta, dr=dr, reachable=reachable)


def normalize(label: NavigationLabel, grid: PoseGrid) -> tuple[float, float]:
    """Map (dtheta, dr) into [0, 1]^2 for a sigmoid-output regressor."""
    u = (label.dtheta + math.pi) / (2.0 * math.pi)
    span = grid.radial_span
    v = 0.5 if span == 0.0 else (label.dr + span) / (2.0 * span)
    return (u, v)


def denormalize(norm: tuple[float, float], grid: PoseGrid) -> tuple[float, float]:
    """Exact inverse of normalize (up to float rounding)."""
    u, v = norm
    dtheta = u * 2.0 * math.pi - math.pi
    dr = (2.0 * v - 1.0) * grid.radial_span
    return (dtheta, dr)


def generate_dataset(world: WorldConfig, field: ConfidenceField,
                     p_thres: float = DEFAULT_P_THRES,
                     radial_weight: float = DEFAULT_RADIAL_WEIGHT,
                     noise_seed: int = 0) -> Dataset:
    """One labeled record per grid point, in angle-major order.

    Confidences are the exact field values (measurement noise belongs to the
    episode pipeline). Each record's observation-noise stream is seeded by
    its grid index, so results do not depend on evaluation order.
    """
    if not 0.0 < p_thres < 1.0:
        raise FieldError(f"p_thres must be in (0, 1), got {p_thres}")
    grid = world.grid
    values = export_manifold(field, grid).values
    records = []
    for ai in range(grid.n_angles):
        for ri in range(grid.n_radii):
            target, reachable = _select_nearest(values, grid, (ai, ri),
                                                p_thres, radial_weight)
            label = label_from_target(grid, (ai, ri), target, reachable)
            pose = pose_at(grid, ai, ri)
            obs = observe(world, pose, derive_seed(noise_seed, ai, ri))
            records.append(DatasetRecord(
                angle_idx=ai,
                radius_idx=ri,
                pose=pose,
                observation=obs,
                p=float(values[ai, ri]),
                label=label,
                label_norm=normalize(label, grid),
            ))
    return Dataset(world=world, field=field, p_thres=p_thres,
                   radial_weight=radial_weight, noise_seed=noise_seed,
                   records=records)


def _round9(x: float) -> float:
    """Round to 9 significant digits (idempotent)."""
    return float(f"{x:.9g}")


def _field_params(field: ConfidenceField) -> dict:
    return {
        "lobes": [{"mu": _round9(l.mu), "sigma": _round9(l.sigma),
                   "weight": _round9(l.weight)} for l in field.lobes],
        "r_half": _round9(field.r_half),
        "r_slope": _round9(field.r_slope),
        "bias": _round9(field.bias),
    }


def field_from_params(params: dict) -> ConfidenceField:
    """Build a ConfidenceField from its serialized parameter dict."""
    return ConfidenceField(
        lobes=tuple(AngularLobe(mu=l["mu"], sigma=l["sigma"], weight=l["weight"])
                    for l in params["lobes"]),
        r_half=params["r_half"],
        r_slope=params["r_slope"],
        bias=params["bias"],
    )


def write_dataset(dataset: Dataset, path, extra_header: dict | None = None) -> None:
    """Write the dataset as JSON Lines: one header object, then one record
    per line, floats at 9 significant digits."""
    world = dataset.world
    grid = world.grid
    header = {
        "schema_version": SCHEMA_VERSION,
        "n_angles": grid.n_angles,
        "n_radii": grid.n_radii,
        "r_min": _round9(grid.r_min),
        "r_max": _round9(grid.r_max),
        "p_thres": _round9(dataset.p_thres),
        "radial_weight": _round9(dataset.radial_weight),
        "obs_dim": world.obs_dim,
        "seeds": {"encoder": world.encoder_seed, "noise": dataset.noise_seed},
        "obs_noise_sigma": _round9(world.obs_noise_sigma),
        "field_params": _field_params(dataset.field),
    }
    if extra_header:
        header.update(extra_header)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in dataset.records:
            row = {
                "ai": rec.angle_idx,
                "ri": rec.radius_idx,
                "theta": _round9(rec.pose.theta),
                "r": _round9(rec.pose.r),
                "p": _round9(rec.p),
                "dtheta": _round9(rec.label.dtheta),
                "dr": _round9(rec.label.dr),
                "reachable": rec.label.reachable,
                "label_norm": [_round9(rec.label_norm[0]), _round9(rec.label_norm[1])],
                "obs": [_round9(x) for x in rec.observation],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


_HEADER_KEYS = {"schema_version", "n_angles", "n_radii", "r_min", "r_max",
                "p_thres", "radial_weight", "obs_dim", "seeds",
                "obs_noise_sigma", "field_params"}
_RECORD_KEYS = {"ai", "ri", "theta", "r", "p", "dtheta", "dr", "reachable",
                "label_norm", "obs"}


def read_dataset(path) -> Dataset:
    """Read a dataset written by write_dataset; raises DataFormatError with
    the offending line number on any schema violation."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError("line 1: missing header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"line 1: invalid JSON: {exc}") from exc
    missing = _HEADER_KEYS - set(header)
    if missing:
        raise DataFormatError(f"line 1: header missing keys {sorted(missing)}")
    if header["schema_version"] != SCHEMA_VERSION:
        raise DataFormatError(
            f"line 1: unsupported schema_version {header['schema_version']}")

    grid = make_grid(header["n_angles"], header["n_radii"],
                     header["r_min"], header["r_max"])
    world = WorldConfig(grid=grid, obs_dim=header["obs_dim"],
                        obs_noise_sigma=header["obs_noise_sigma"],
                        encoder_seed=header["seeds"]["encoder"])
    field = field_from_params(header["field_params"])

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
        missing = _RECORD_KEYS - set(row)
        if missing:
            raise DataFormatError(f"line {lineno}: record missing keys {sorted(missing)}")
        obs = np.array(row["obs"], dtype=float)
        if obs.shape != (world.obs_dim,):
            raise DataFormatError(
                f"line {lineno}: obs length {obs.shape[0]} != obs_dim {world.obs_dim}")
        records.append(DatasetRecord(
            angle_idx=row["ai"],
            radius_idx=row["ri"],
            pose=Pose(row["theta"], row["r"]),
            observation=obs,
            p=row["p"],
            label=NavigationLabel(dtheta=row["dtheta"], dr=row["dr"],
                                  reachable=row["reachable"]),
            label_norm=(row["label_norm"][0], row["label_norm"][1]),
        ))
    return Dataset(world=world, field=field, p_thres=header["p_thres"],
                   radial_weight=header["radial_weight"],
                   noise_seed=header["seeds"]["noise"], records=records)
