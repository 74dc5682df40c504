"""Command line interface: ``mogsim <verb> [options]``.

Verbs: settle, grasp, batch, classify, closure, report.  Global options
``--seed``, ``--config`` and ``--out`` are accepted by every verb.

Exit status: 0 success, 1 validation error (bad record, config or input),
2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from dataclasses import replace

import numpy as np

from .classifier import NoGraspError, label_record
from .closure import FrictionModel, force_closure
from .config import PROFILES, ConfigError, ExperimentConfig, load_config, parse_shape
from .geometry import Pose
from .grasp import SimulationOptions, lift_and_count, run_grasp_trial
from .hand import HandConfiguration, HandGeometry, forward_kinematics
from .harness import TrialCapWarning, classify_file, load_dataset, run_batch, summarize, trial_seed
from .records import RecordValidationError, load_record, record_to_json
from .scene import scene_from_text, scene_to_text, settle_pile

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _common(default):
    # Sub-commands use SUPPRESS so a flag given before the verb is not reset.
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=default, help="master or trial seed (default 0 or config)")
    p.add_argument("--config", default=default, help="TOML experiment configuration")
    p.add_argument("--out", default=default, help="output file or directory")
    return p


def build_parser():
    common = _common(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="mogsim", description="Multi-object grasp simulation and labeling.",
                                     parents=[_common(None)])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("settle", parents=[common], help="settle a pile and print it as scene text")
    p.add_argument("--shape", default=None, help="kind:size, e.g. sphere:large")
    p.add_argument("--count", type=int, default=None, help="number of objects")

    p = sub.add_parser("grasp", parents=[common], help="run one grasp trial and print its record")
    p.add_argument("--scene", default=None, help="scene text file (default: settle a fresh pile)")
    p.add_argument("--shape", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--no-trajectory", action="store_true", help="omit the joint trajectory")

    p = sub.add_parser("batch", parents=[common], help="run a batch experiment")
    p.add_argument("--profile", choices=["quick", "full"], default=None)
    p.add_argument("--shape", action="append", default=None, help="repeatable; kind:size")
    p.add_argument("--pile-size", type=int, default=None)
    p.add_argument("--target", type=int, default=None, help="successes per shape group")
    p.add_argument("--max-trials", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-trajectory", action="store_true")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("classify", parents=[common], help="(re)label record files")
    p.add_argument("records", nargs="+")

    p = sub.add_parser("closure", parents=[common], help="force-closure / hold status check")
    p.add_argument("input", help="record file, or JSON with points, normals, center, radius")

    p = sub.add_parser("report", parents=[common], help="summarize a batch output directory")
    p.add_argument("directory")
    return parser


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(master_seed=args.seed)


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _pile(args, cfg, seed):
    spec = parse_shape(args.shape) if args.shape else cfg.shapes[0]
    count = args.count if args.count is not None else cfg.pile_size
    return settle_pile(cfg.make_container(), spec, count, seed), spec


def cmd_settle(args):
    cfg = _config(args)
    scene, _ = _pile(args, cfg, cfg.master_seed)
    _emit(scene_to_text(scene), args.out)
    return EXIT_OK


def cmd_grasp(args):
    cfg = _config(args)
    seed = cfg.master_seed
    if args.scene:
        with open(args.scene, encoding="utf-8") as fh:
            scene = scene_from_text(fh.read())
        label = None
    else:
        label = (parse_shape(args.shape) if args.shape else cfg.shapes[0]).label
        scene, _ = _pile(args, cfg, trial_seed(seed, label, 0, 0))
    options = SimulationOptions(friction=cfg.make_friction(),
                                keep_trajectory=cfg.keep_trajectory and not args.no_trajectory)
    rec = run_grasp_trial(scene, cfg.make_policy(), seed=seed, options=options, master_seed=seed, trial_index=0)
    rec = replace(rec, shape=label)
    rec.labels = label_record(rec, bucketing=cfg.make_bucketing())
    _emit(record_to_json(rec), args.out)
    print(f"held {rec.held_count} object(s); types {rec.labels.get('types')}", file=sys.stderr)
    return EXIT_OK


def cmd_batch(args):
    cfg = _config(args)
    if args.profile:
        cfg = replace(cfg, profile=args.profile, **PROFILES[args.profile])
    cfg = cfg.with_overrides(
        shapes=tuple(args.shape) if args.shape else None,
        pile_size=args.pile_size,
        success_target=args.target,
        max_trials=args.max_trials,
        workers=args.workers,
        out_dir=args.out,
    )
    if args.no_trajectory:
        cfg = replace(cfg, keep_trajectory=False)
    t0 = time.perf_counter()

    def progress(label, rec):
        if not args.quiet:
            types = ",".join(rec.labels.get("types", [])) or "-"
            print(f"{label} trial {rec.trial_index}: held {rec.held_count} {types}", file=sys.stderr)

    with warnings.catch_warnings():
        # Reported once below and flagged in the report itself.
        warnings.simplefilter("ignore", TrialCapWarning)
        _, report = run_batch(cfg, progress=progress)
    for msg in report.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    sys.stdout.write(report.to_text())
    print(f"elapsed {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return EXIT_OK


def cmd_classify(args):
    cfg = _config(args)
    if args.out and len(args.records) > 1:
        raise ConfigError("--out needs exactly one record")
    for path in args.records:
        rec = classify_file(path, args.out, cfg.make_bucketing())
        print(f"{path}: {', '.join(rec.labels['types'])}  [{rec.labels['combination']}]")
    return EXIT_OK


def cmd_closure(args):
    cfg = _config(args)
    with open(args.input, encoding="utf-8") as fh:
        data = json.load(fh)
    if "points" in data:
        mu = data.get("mu", cfg.make_friction().mu)
        res = force_closure(np.array(data["points"], float), np.array(data["normals"], float),
                            np.array(data.get("center", [0.0, 0.0, 0.0]), float), float(data.get("radius", 1.0)),
                            mu, int(data.get("k_edges", 8)))
        out = {"force_closure": res.closed, "degenerate": res.degenerate, "epsilon": res.epsilon}
    else:
        rec = load_record(args.input)
        if rec.final_scene is None or rec.wrist_pose is None:
            raise RecordValidationError([("final_scene", "closure check needs final_scene and wrist_pose")])
        scene = scene_from_text(rec.final_scene)
        geometry = HandGeometry(**(rec.geometry or {}))
        fc = rec.final_config
        hand = forward_kinematics(HandConfiguration(fc["spread"], tuple(fc["base"])), geometry,
                                  Pose(rec.wrist_pose["position"], rec.wrist_pose["quaternion"]))
        friction = FrictionModel(**(rec.friction or {}))
        held, count, statuses = lift_and_count(hand, scene, None, friction, seed=rec.seed or 0)
        out = {"held": [int(h) for h in held], "held_count": count,
               "holds": {str(k): v.to_dict() for k, v in sorted(statuses.items(), key=lambda kv: str(kv[0]))}}
    _emit(json.dumps(out, sort_keys=True, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_report(args):
    report = summarize(load_dataset(args.directory))
    sys.stdout.write(report.to_text())
    if args.out:
        _emit(report.to_json(), args.out)
    return EXIT_OK


_COMMANDS = {
    "settle": cmd_settle,
    "grasp": cmd_grasp,
    "batch": cmd_batch,
    "classify": cmd_classify,
    "closure": cmd_closure,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except (RecordValidationError, ConfigError, NoGraspError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
