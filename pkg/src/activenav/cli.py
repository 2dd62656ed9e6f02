"""Command-line front end: manifold, labels, train, episode, eval.

Each command is a thin composition of library operations. Outputs go only to
the --out directory; every JSON artifact embeds the schema version, the
config hash, and the master seed, so the full chain is reproducible
byte-for-byte from (config, seed).

Exit codes: 0 ok, 1 runtime failure, 2 config/usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import (
    build_episode_config,
    build_eval_config,
    build_field,
    build_world,
    config_hash,
    load_config,
    validate_config,
)
from .episodes import episode_to_dict, run_episode
from .errors import ActiveNavError, ConfigError, DataFormatError
from .evaluation import evaluate, report_to_dict, write_report
from .fields import export_manifold, write_manifold_csv
from .geometry import Pose
from .labels import generate_dataset, read_dataset, write_dataset
from .network import batch_loss, init_net, load_model, save_model, train
from .policies import (
    load_classifier,
    policy_oracle,
    policy_random,
    policy_regression,
    policy_static,
    save_classifier,
    train_classifier,
)
from .seeding import derive_seed

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="run config JSON (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed, overrides the config value")
    parser.add_argument("--out", type=Path, default=Path("."),
                        help="output directory (created if missing)")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for eval trials (results identical)")


def _load(args) -> tuple[dict, str]:
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = validate_config({})
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg, config_hash(cfg)


def _require_input(path: Path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"missing required input: {what}")
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _out_dir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_manifold(args) -> int:
    cfg, _ = _load(args)
    out = _out_dir(args)
    table = export_manifold(build_field(cfg), build_world(cfg).grid)
    write_manifold_csv(table, out / "manifold.csv")
    print(f"wrote {out / 'manifold.csv'} ({table.grid.n_poses} rows)")
    return EXIT_OK


def cmd_labels(args) -> int:
    cfg, chash = _load(args)
    out = _out_dir(args)
    world = build_world(cfg)
    dataset = generate_dataset(world, build_field(cfg),
                               p_thres=cfg["labels"]["p_thres"],
                               radial_weight=cfg["labels"]["radial_weight"],
                               noise_seed=derive_seed(cfg["seed"], "labels"))
    path = out / "dataset.jsonl"
    write_dataset(dataset, path, extra_header={"config_hash": chash,
                                               "master_seed": cfg["seed"]})
    n_reach = sum(r.label.reachable for r in dataset.records)
    print(f"wrote {path} ({len(dataset)} records, {n_reach} reachable)")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, chash = _load(args)
    out = _out_dir(args)
    dataset_path = _require_input(args.dataset, "dataset file (--dataset)")
    dataset = read_dataset(dataset_path)
    grid = dataset.world.grid
    tr = cfg["training"]
    meta = {"config_hash": chash, "master_seed": cfg["seed"]}

    net = init_net([dataset.world.obs_dim, *tr["hidden"], 2],
                   seed=derive_seed(cfg["seed"], "net-init"))
    net, report = train(net, dataset, epochs=tr["epochs"],
                        batch_size=tr["batch_size"], lr=tr["lr"],
                        seed=derive_seed(cfg["seed"], "train-regressor"),
                        include_unreachable=tr["include_unreachable"])
    save_model(net, out / "regressor.json", grid, extra=meta)

    clf, clf_report = train_classifier(
        dataset, epochs=tr["epochs"], lr=tr["lr"],
        seed=derive_seed(cfg["seed"], "train-classifier"),
        hidden=tuple(tr["hidden"]), batch_size=tr["batch_size"],
        include_unreachable=tr["include_unreachable"])
    save_classifier(clf, out / "classifier.json", extra=meta)

    train_report = {
        "schema_version": 1,
        "config_hash": chash,
        "master_seed": cfg["seed"],
        "regressor": {
            "epoch_losses": report.epoch_losses,
            "final_val_loss": report.final_val_loss,
            "epochs_run": report.epochs_run,
            "seed": report.seed,
        },
        "classifier": {
            "epoch_losses": clf_report.epoch_losses,
            "train_accuracy": clf_report.train_accuracy,
            "epochs_run": clf_report.epochs_run,
            "seed": clf_report.seed,
        },
    }
    with open(out / "train_report.json", "w", encoding="utf-8") as fh:
        json.dump(train_report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {out / 'regressor.json'} (final loss {report.final_val_loss:.3g})")
    print(f"wrote {out / 'classifier.json'} (train accuracy {clf_report.train_accuracy:.3f})")
    return EXIT_OK


def _build_policy(name: str, cfg: dict, args, grid):
    if name == "static":
        return policy_static()
    if name == "random":
        return policy_random(grid, seed=derive_seed(cfg["seed"], "policy-random"))
    if name == "regression":
        path = _require_input(args.model, "regressor model for the regression policy (--model)")
        net, _ = load_model(path)
        return policy_regression(net, grid)
    if name == "classifier":
        path = _require_input(args.classifier, "classifier model (--classifier)")
        return load_classifier(path)
    if name == "oracle":
        path = _require_input(args.dataset, "dataset for the oracle policy (--dataset)")
        return policy_oracle(read_dataset(path))
    raise ConfigError(f"unknown policy '{name}'")


def cmd_episode(args) -> int:
    cfg, chash = _load(args)
    out = _out_dir(args)
    world = build_world(cfg)
    field = build_field(cfg)
    policy = _build_policy(args.policy, cfg, args, world.grid)
    record = run_episode(world, field, policy, Pose(args.theta, args.r),
                         build_episode_config(cfg),
                         seed=derive_seed(cfg["seed"], "episode"))
    payload = episode_to_dict(record)
    payload["config_hash"] = chash
    payload["master_seed"] = cfg["seed"]
    path = out / "episode.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {path} (p_init {record.p_init:.3f} -> p_final {record.p_final:.3f}, "
          f"success={record.success})")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg, chash = _load(args)
    out = _out_dir(args)
    world = build_world(cfg, obs_noise_override=cfg["eval"]["obs_noise_sigma"])
    field = build_field(cfg)
    policies = []
    for name in cfg["eval"]["policies"]:
        if name == "regression":
            path = _require_input(args.regressor,
                                  "regressor model for the regression policy (--regressor)")
            net, _ = load_model(path)
            policies.append((name, policy_regression(net, world.grid)))
        elif name == "classifier":
            path = _require_input(args.classifier, "classifier model (--classifier)")
            policies.append((name, load_classifier(path)))
        elif name == "oracle":
            path = _require_input(args.dataset, "dataset for the oracle policy (--dataset)")
            policies.append((name, policy_oracle(read_dataset(path))))
        elif name == "random":
            policies.append((name, policy_random(
                world.grid, seed=derive_seed(cfg["seed"], "policy-random"))))
        elif name == "static":
            policies.append((name, policy_static()))
    report = evaluate(world, field, policies, build_eval_config(cfg), jobs=args.jobs)
    extra = {"config_hash": chash}
    write_report(report, out / "report.json", out / "report.csv", extra=extra)
    print(f"wrote {out / 'report.json'} and {out / 'report.csv'}")
    for name, m in report.metrics.items():
        print(f"  {name:<12} success {m.success_rate:5.1f}%   "
              f"improvement {m.improvement_rate:5.1f}%")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="activenav",
        description="Active-perception simulation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("manifold", help="export the confidence manifold as CSV")
    _shared_flags(p)
    p.set_defaults(func=cmd_manifold)

    p = sub.add_parser("labels", help="generate the navigation-label dataset")
    _shared_flags(p)
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("train", help="train the regressor and classifier")
    _shared_flags(p)
    p.add_argument("--dataset", type=Path, required=True, help="dataset JSONL file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("episode", help="run one episode from a given pose")
    _shared_flags(p)
    p.add_argument("--policy", required=True,
                   choices=("static", "random", "classifier", "regression", "oracle"))
    p.add_argument("--theta", type=float, required=True, help="initial angle, radians")
    p.add_argument("--r", type=float, required=True, help="initial radius, meters")
    p.add_argument("--model", type=Path, default=None, help="regressor model JSON")
    p.add_argument("--classifier", type=Path, default=None, help="classifier model JSON")
    p.add_argument("--dataset", type=Path, default=None, help="dataset (oracle policy)")
    p.set_defaults(func=cmd_episode)

    p = sub.add_parser("eval", help="evaluate the configured policies side by side")
    _shared_flags(p)
    p.add_argument("--regressor", type=Path, default=None, help="regressor model JSON")
    p.add_argument("--classifier", type=Path, default=None, help="classifier model JSON")
    p.add_argument("--dataset", type=Path, default=None, help="dataset (oracle policy)")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ActiveNavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
