"""The three-phase active-perception episode loop.

Detect at the initial pose; if the confidence is below threshold, ask the
policy for a proposal and traverse its trajectory, re-detecting at every
waypoint. Waypoints that do not improve on the best confidence so far are
recorded but discarded: the episode keeps the best snapshot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fields import ConfidenceField, confidence
from .geometry import Pose, Proposal, WorldConfig, observe, trajectory
from .seeding import derive_seed

EPISODE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EpisodeConfig:
    p_thres: float = 0.9
    n_intermediate: int = 4
    max_steps: int = 1
    sigma_meas: float = 0.0
    early_stop: bool = False  # stop traversing once a waypoint clears p_thres

    def __post_init__(self) -> None:
        if not 0.0 < self.p_thres < 1.0:
            raise ConfigError(f"p_thres must be in (0, 1), got {self.p_thres}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.n_intermediate < 0:
            raise ConfigError(f"n_intermediate must be >= 0, got {self.n_intermediate}")
        if self.sigma_meas < 0.0:
            raise ConfigError(f"sigma_meas must be >= 0, got {self.sigma_meas}")


def measure(field: ConfidenceField, pose: Pose, sigma_meas: float = 0.0,
            rng: np.random.Generator | None = None) -> float:
    """Detector measurement: true confidence plus optional Gaussian noise,
    clamped to [0, 1]. With sigma_meas = 0 this equals confidence() exactly."""
    p = confidence(field, pose)
    if sigma_meas > 0.0:
        if rng is None:
            raise ConfigError("measurement noise requires an rng stream")
        p = min(max(p + rng.normal(0.0, sigma_meas), 0.0), 1.0)
    return p


@dataclass(frozen=True)
class StepRecord:
    proposal: Proposal
    waypoints: list[Pose]
    confidences: list[float]


@dataclass(frozen=True)
class EpisodeRecord:
    """Full trace of one episode.

    p_final is the maximum over all measurements after the initial one (the
    initial value itself when navigation never triggered), and success means
    the episode strictly improved on the initial confidence.
    """

    policy: str
    seed: int
    init_pose: Pose
    p_init: float
    steps: list[StepRecord] = field(repr=False)
    p_final: float = 0.0
    best_pose: Pose = None  # type: ignore[assignment]
    success: bool = False


def run_episode(world: WorldConfig, field: ConfidenceField, policy,
                init_pose: Pose, cfg: EpisodeConfig = EpisodeConfig(),
                seed: int = 0) -> EpisodeRecord:
    """Run one detect/propose/traverse episode. Deterministic per seed."""
    grid = world.grid
    start = Pose(init_pose.theta, grid.clamp_r(init_pose.r))
    meas_rng = np.random.default_rng(derive_seed(seed, "measure"))
    policy_rng = np.random.default_rng(derive_seed(seed, "policy"))

    p_init = measure(field, start, cfg.sigma_meas, meas_rng)
    best_pose, best_p = start, p_init
    steps: list[StepRecord] = []

    if p_init < cfg.p_thres:
        current = start
        for step_idx in range(cfg.max_steps):
            obs = observe(world, current, derive_seed(seed, "observe", step_idx))
            proposal = policy.propose(obs, current, policy_rng)
            waypoints = trajectory(grid, current, proposal, cfg.n_intermediate)
            confidences: list[float] = []
            for wp in waypoints:
                p = measure(field, wp, cfg.sigma_meas, meas_rng)
                confidences.append(p)
                if p > best_p:
                    best_pose, best_p = wp, p
                if cfg.early_stop and p >= cfg.p_thres:
                    break
            steps.append(StepRecord(proposal=proposal, waypoints=waypoints[:len(confidences)],
                                    confidences=confidences))
            if best_p >= cfg.p_thres:
                break
            current = best_pose

    measured = [p for s in steps for p in s.confidences]
    p_final = max(measured) if measured else p_init
    return EpisodeRecord(
        policy=getattr(policy, "name", type(policy).__name__),
        seed=seed,
        init_pose=start,
        p_init=p_init,
        steps=steps,
        p_final=p_final,
        best_pose=best_pose,
        success=p_final > p_init,
    )


def episode_to_dict(record: EpisodeRecord) -> dict:
    """JSON-ready representation of an episode trace."""
    return {
        "schema_version": EPISODE_SCHEMA_VERSION,
        "policy": record.policy,
        "seed": record.seed,
        "init": {"theta": record.init_pose.theta, "r": record.init_pose.r,
                 "p": record.p_init},
        "steps": [
            {
                "proposal": {"dtheta": s.proposal.dtheta, "dr": s.proposal.dr},
                "waypoints": [
                    {"theta": wp.theta, "r": wp.r, "p": p}
                    for wp, p in zip(s.waypoints, s.confidences)
                ],
            }
            for s in record.steps
        ],
        "p_final": record.p_final,
        "best": {"theta": record.best_pose.theta, "r": record.best_pose.r},
        "success": record.success,
    }


def write_episode(record: EpisodeRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(episode_to_dict(record), fh, sort_keys=True, indent=2)
        fh.write("\n")
