"""Run configuration: schema, validation, defaults, and builders.

A run config is a single JSON document with sections mirroring the module
configs. Validation rejects unknown keys (naming the offending key path) and
type mismatches before any work starts. All artifacts embed the sha256 hash
of the canonical config plus the master seed, making runs reproducible
byte-for-byte.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .episodes import EpisodeConfig
from .errors import ConfigError
from .evaluation import EvalConfig
from .fields import ConfidenceField, preset_car, preset_person
from .geometry import WorldConfig, make_grid
from .labels import field_from_params

CONFIG_SCHEMA_VERSION = 1

# The published schema: section -> key -> allowed types. The `field` section
# accepts either a preset name or explicit manifold parameters.
CONFIG_SCHEMA: dict[str, dict[str, tuple[type, ...]]] = {
    "world": {
        "n_angles": (int,),
        "n_radii": (int,),
        "r_min": (int, float),
        "r_max": (int, float),
        "obs_dim": (int,),
        "obs_noise_sigma": (int, float),
        "encoder_seed": (int,),
    },
    "field": {
        "preset": (str,),
        "lobes": (list,),
        "r_half": (int, float),
        "r_slope": (int, float),
        "bias": (int, float),
    },
    "labels": {
        "p_thres": (int, float),
        "radial_weight": (int, float),
    },
    "training": {
        "hidden": (list,),
        "epochs": (int,),
        "batch_size": (int,),
        "lr": (int, float),
        "include_unreachable": (bool,),
    },
    "episode": {
        "p_thres": (int, float),
        "n_intermediate": (int,),
        "max_steps": (int,),
        "sigma_meas": (int, float),
        "early_stop": (bool,),
    },
    "eval": {
        "n_trials": (int,),
        "policies": (list,),
        "obs_noise_sigma": (int, float),
    },
}

KNOWN_POLICIES = ("static", "random", "classifier", "regression", "oracle")

DEFAULT_CONFIG: dict = {
    "schema_version": CONFIG_SCHEMA_VERSION,
    "seed": 0,
    "world": {
        "n_angles": 76,
        "n_radii": 65,
        "r_min": 1.0,
        "r_max": 60.0,
        "obs_dim": 32,
        "obs_noise_sigma": 0.0,
        "encoder_seed": 7,
    },
    "field": {"preset": "car"},
    "labels": {"p_thres": 0.9, "radial_weight": 1.0},
    "training": {
        "hidden": [64, 64],
        "epochs": 200,
        "batch_size": 64,
        "lr": 0.001,
        "include_unreachable": True,
    },
    "episode": {
        "p_thres": 0.9,
        "n_intermediate": 4,
        "max_steps": 1,
        "sigma_meas": 0.0,
        "early_stop": False,
    },
    "eval": {
        "n_trials": 100,
        "policies": ["static", "random", "classifier", "regression"],
        # Evaluation happens in an unseen environment: observations are
        # perturbed with this noise even though training data is clean.
        "obs_noise_sigma": 0.3,
    },
}


def _check_type(path: str, value, allowed: tuple[type, ...]) -> None:
    # bool is an int subclass; keep them distinct in the schema
    if isinstance(value, bool) and bool not in allowed:
        raise ConfigError(f"config key '{path}' has wrong type bool")
    if not isinstance(value, allowed):
        names = "/".join(t.__name__ for t in allowed)
        raise ConfigError(
            f"config key '{path}' expects {names}, got {type(value).__name__}")


def validate_config(raw: dict) -> dict:
    """Merge a raw config over the defaults, rejecting unknown keys.

    Returns the fully populated config dict. Raises ConfigError naming the
    first offending key.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for key, value in raw.items():
        if key == "schema_version":
            _check_type(key, value, (int,))
            if value != CONFIG_SCHEMA_VERSION:
                raise ConfigError(f"unsupported schema_version {value}")
            continue
        if key == "seed":
            _check_type(key, value, (int,))
            merged["seed"] = value
            continue
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config key '{key}'")
        if not isinstance(value, dict):
            raise ConfigError(f"config section '{key}' must be an object")
        section = CONFIG_SCHEMA[key]
        if key == "field":
            merged["field"] = _validate_field_section(value)
            continue
        for sub, subval in value.items():
            if sub not in section:
                raise ConfigError(f"unknown config key '{key}.{sub}'")
            _check_type(f"{key}.{sub}", subval, section[sub])
            merged[key][sub] = subval
    _validate_policy_list(merged["eval"]["policies"])
    return merged


def _validate_field_section(section: dict) -> dict:
    for sub, subval in section.items():
        if sub not in CONFIG_SCHEMA["field"]:
            raise ConfigError(f"unknown config key 'field.{sub}'")
        _check_type(f"field.{sub}", subval, CONFIG_SCHEMA["field"][sub])
    if "preset" in section:
        if len(section) != 1:
            raise ConfigError("field.preset cannot be combined with explicit parameters")
        if section["preset"] not in ("car", "person"):
            raise ConfigError(f"unknown field preset '{section['preset']}'")
        return dict(section)
    required = {"lobes", "r_half", "r_slope", "bias"}
    missing = required - set(section)
    if missing:
        raise ConfigError(f"field section missing keys {sorted(missing)}")
    for i, lobe in enumerate(section["lobes"]):
        if not isinstance(lobe, dict) or set(lobe) != {"mu", "sigma", "weight"}:
            raise ConfigError(f"config key 'field.lobes[{i}]' must have mu/sigma/weight")
    return dict(section)


def _validate_policy_list(policies: list) -> None:
    for name in policies:
        if name not in KNOWN_POLICIES:
            raise ConfigError(
                f"unknown policy '{name}' in eval.policies (known: {KNOWN_POLICIES})")


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return validate_config(raw)


def config_hash(cfg: dict) -> str:
    """Stable short hash of the canonical config serialization."""
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Builders from validated config sections.

def build_world(cfg: dict, obs_noise_override: float | None = None) -> WorldConfig:
    w = cfg["world"]
    grid = make_grid(w["n_angles"], w["n_radii"], w["r_min"], w["r_max"])
    sigma = w["obs_noise_sigma"] if obs_noise_override is None else obs_noise_override
    return WorldConfig(grid=grid, obs_dim=w["obs_dim"], obs_noise_sigma=sigma,
                       encoder_seed=w["encoder_seed"])


def build_field(cfg: dict) -> ConfidenceField:
    f = cfg["field"]
    if "preset" in f:
        return preset_car() if f["preset"] == "car" else preset_person()
    return field_from_params(f)


def build_episode_config(cfg: dict) -> EpisodeConfig:
    e = cfg["episode"]
    return EpisodeConfig(p_thres=e["p_thres"], n_intermediate=e["n_intermediate"],
                         max_steps=e["max_steps"], sigma_meas=e["sigma_meas"],
                         early_stop=e["early_stop"])


def build_eval_config(cfg: dict) -> EvalConfig:
    return EvalConfig(n_trials=cfg["eval"]["n_trials"], seed=cfg["seed"],
                      episode=build_episode_config(cfg))
