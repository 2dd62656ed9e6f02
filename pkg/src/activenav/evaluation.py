"""Policy evaluation harness: paired trials, success rate, improvement rate.

All policies see the identical list of randomized initial poses (paired
comparison), and every (trial, policy) pair gets a seed derived from the
master seed and the policy name, so adding a policy never perturbs the
others' results.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .episodes import EpisodeConfig, EpisodeRecord, run_episode
from .errors import ConfigError, NoValidPoseError
from .fields import ConfidenceField, export_manifold
from .geometry import Pose, WorldConfig, pose_at
from .seeding import derive_seed

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EvalConfig:
    n_trials: int = 100
    seed: int = 0
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {self.n_trials}")


def sample_initial_poses(world: WorldConfig, field: ConfidenceField,
                         p_thres: float, n_trials: int, seed: int) -> list[Pose]:
    """Rejection-sample n_trials grid poses with confidence below threshold.

    Uniform over the below-threshold grid poses; raises NoValidPoseError when
    the field meets the threshold everywhere.
    """
    grid = world.grid
    values = export_manifold(field, grid).values
    if not (values < p_thres).any():
        raise NoValidPoseError(
            f"every grid pose has confidence >= {p_thres}; nothing to improve")
    rng = np.random.default_rng(seed)
    poses = []
    while len(poses) < n_trials:
        ai = int(rng.integers(grid.n_angles))
        ri = int(rng.integers(grid.n_radii))
        if values[ai, ri] < p_thres:
            poses.append(pose_at(grid, ai, ri))
    return poses


def success_rate(records: list[EpisodeRecord]) -> float:
    """Percentage of episodes whose best confidence beat the initial one."""
    if not records:
        raise ConfigError("success_rate needs a non-empty record list")
    return 100.0 * sum(r.success for r in records) / len(records)


def improvement_rate(records: list[EpisodeRecord]) -> float:
    """Mean relative confidence gain (percent) over the successful episodes
    only; 0.0 when none succeeded."""
    if not records:
        raise ConfigError("improvement_rate needs a non-empty record list")
    gains = [100.0 * (r.p_final - r.p_init) / r.p_init
             for r in records if r.success]
    if not gains:
        return 0.0
    return sum(gains) / len(gains)


@dataclass(frozen=True)
class PolicyMetrics:
    success_rate: float
    improvement_rate: float
    n_trials: int
    mean_p_init: float
    mean_p_final: float


@dataclass(frozen=True)
class Report:
    master_seed: int
    p_thres: float
    n_trials: int
    paired: bool
    metrics: dict[str, PolicyMetrics]
    records: dict[str, list[EpisodeRecord]] = field(repr=False)


def _episode_task(args):
    world, field, policy, pose, ep_cfg, seed = args
    return run_episode(world, field, policy, pose, ep_cfg, seed)


def evaluate(world: WorldConfig, field: ConfidenceField,
             policies: list[tuple[str, object]], cfg: EvalConfig = EvalConfig(),
             jobs: int = 1) -> Report:
    """Run every policy on the identical initial-pose list and aggregate.

    jobs > 1 distributes trials over processes; results are identical to the
    serial run because each episode is independently seeded and aggregation
    follows trial order.
    """
    poses = sample_initial_poses(world, field, cfg.episode.p_thres,
                                 cfg.n_trials, derive_seed(cfg.seed, "init-poses"))
    records: dict[str, list[EpisodeRecord]] = {}
    for name, policy in policies:
        tasks = [(world, field, policy, pose, cfg.episode,
                  derive_seed(cfg.seed, "episode", trial, name))
                 for trial, pose in enumerate(poses)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_episode_task, tasks, chunksize=8))
        else:
            results = [_episode_task(t) for t in tasks]
        records[name] = results

    metrics = {}
    for name, recs in records.items():
        metrics[name] = PolicyMetrics(
            success_rate=success_rate(recs),
            improvement_rate=improvement_rate(recs),
            n_trials=len(recs),
            mean_p_init=sum(r.p_init for r in recs) / len(recs),
            mean_p_final=sum(r.p_final for r in recs) / len(recs),
        )
    return Report(master_seed=cfg.seed, p_thres=cfg.episode.p_thres,
                  n_trials=cfg.n_trials, paired=True, metrics=metrics,
                  records=records)


def report_to_dict(report: Report) -> dict:
    """JSON-ready report: per-policy metrics plus per-episode summaries from
    which the metrics are recomputable bit-exactly."""
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "master_seed": report.master_seed,
        "p_thres": report.p_thres,
        "n_trials": report.n_trials,
        "paired": report.paired,
        "policies": {
            name: {
                "success_rate": m.success_rate,
                "improvement_rate": m.improvement_rate,
                "n_trials": m.n_trials,
                "mean_p_init": m.mean_p_init,
                "mean_p_final": m.mean_p_final,
            }
            for name, m in report.metrics.items()
        },
        "episodes": {
            name: [
                {"trial": i, "p_init": r.p_init, "p_final": r.p_final,
                 "success": r.success}
                for i, r in enumerate(recs)
            ]
            for name, recs in report.records.items()
        },
    }


def write_report(report: Report, json_path, csv_path=None,
                 extra: dict | None = None) -> None:
    """Write the JSON report and the companion metrics CSV."""
    payload = report_to_dict(report)
    if extra:
        payload.update(extra)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("policy,success_rate,improvement_rate,n_trials\n")
            for name, m in report.metrics.items():
                fh.write(f"{name},{m.success_rate!r},{m.improvement_rate!r},{m.n_trials}\n")
