"""Command line entry point: ``mosbelief run | eval | synth``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import formats
from .core import InputError, MovingLabel, PointCloud, RegistrationError
from .metrics import ConfusionCounts, confusion
from .pipeline import ALL_STRATEGIES, Engine, EngineConfig, FusionStrategy
from .predictor import FilePredictor, HeuristicConfig, HeuristicPredictor, LogitStore
from .registration import OdometryConfig
from .synthetic import BUNDLED_SCENES, SyntheticScene, write_sequence

logger = logging.getLogger("mosbelief")

UNDECIDED = 2

TABLE_NAMES = {
    FusionStrategy.SCAN_ONLY: "Scan",
    FusionStrategy.VOLUME_SCAN_ONLY: "Volume, Scan Only",
    FusionStrategy.VOLUME_NO_DELAY: "Volume, No Delay",
    FusionStrategy.VOLUME_DELAYED: "Volume",
}

DEFAULT_RUN_CONFIG = {
    "predictor": "file",
    "registration": "icp",
    "heuristic": {},
    "engine": {},
}


class CommandError(Exception):
    pass


def load_run_config(path) -> dict:
    """Merge a YAML run config over the defaults.

    Recognised keys: ``predictor`` (file | heuristic), ``registration``
    (icp | poses), ``heuristic`` (HeuristicConfig fields) and ``engine``
    (EngineConfig fields, with ``odometry`` nested).
    """
    cfg = json.loads(json.dumps(DEFAULT_RUN_CONFIG))
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise CommandError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    return cfg


def build_engine_config(engine: dict, strategies) -> EngineConfig:
    engine = dict(engine)
    fields = {f.name for f in dataclasses.fields(EngineConfig)}
    unknown = set(engine) - fields
    if unknown:
        raise CommandError(f"unknown engine keys: {sorted(unknown)}")
    odometry = OdometryConfig(**engine.pop("odometry", {}))
    if strategies is not None:
        engine["strategies"] = strategies
    return EngineConfig(odometry=odometry, **engine)


def parse_strategies(text: str | None):
    if text is None:
        return None
    try:
        return tuple(FusionStrategy(s.strip()) for s in text.split(",") if s.strip())
    except ValueError as err:
        raise CommandError(f"{err}; choose from {[s.value for s in FusionStrategy]}") from None


def sequence_dir(root, sequence: str | None) -> Path:
    root = Path(root)
    if sequence is None:
        return root
    for candidate in (root / "sequences" / sequence, root / sequence):
        if candidate.is_dir():
            return candidate
    raise CommandError(f"sequence {sequence!r} not found under {root}")


def cmd_run(args) -> int:
    cfg = load_run_config(args.config)
    if args.predictor:
        cfg["predictor"] = args.predictor
    if args.registration:
        cfg["registration"] = args.registration
    engine_cfg = build_engine_config(cfg["engine"], parse_strategies(args.strategies))
    seq = sequence_dir(args.dataset_root, args.sequence)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "config": str(args.config) if args.config else None,
        "config_text": Path(args.config).read_text() if args.config else None,
        "dataset_root": str(args.dataset_root),
        "sequence": args.sequence,
        "strategies": [s.value for s in engine_cfg.strategies],
        "predictor": cfg["predictor"],
        "logits": args.logits,
        "registration": cfg["registration"],
        "output": str(out),
        "seed": args.seed,
        "flush": not args.no_flush,
    }
    (out / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    np.random.seed(args.seed)

    scan_ids = formats.list_scans(seq)
    if not scan_ids:
        raise CommandError(f"no scans found in {seq / 'velodyne'}")
    times_file = seq / "times.txt"
    times = formats.load_times(times_file) if times_file.exists() else None

    if cfg["predictor"] == "file":
        predictor = FilePredictor(LogitStore(Path(args.logits) if args.logits else seq / "logits"))
    elif cfg["predictor"] == "heuristic":
        predictor = HeuristicPredictor(HeuristicConfig(**cfg["heuristic"]))
    else:
        raise CommandError(f"unknown predictor {cfg['predictor']!r}")

    poses = None
    if cfg["registration"] == "poses":
        poses = formats.load_poses(seq / "poses.txt")
        calib = seq / "calib.txt"
        if calib.exists():
            extrinsic = formats.load_calibration(calib)
            poses = [extrinsic @ p for p in poses]
    elif cfg["registration"] != "icp":
        raise CommandError(f"unknown registration {cfg['registration']!r}")

    engine = Engine(predictor, engine_cfg)
    decisions = {s: {} for s in engine_cfg.strategies}
    sizes = {}
    static_clouds = []
    est_poses = []

    def collect(result):
        for strategy, decision in result.decisions.items():
            if decision is not None:
                decisions[strategy][decision.scan_index] = decision.labels
        if result.emitted_static_points is not None:
            static_clouds.append(result.emitted_static_points)

    for idx in scan_ids:
        timestamp = float(times[idx]) if times is not None and idx < len(times) else idx * 0.1
        try:
            scan = formats.load_scan(formats.scan_path(seq, idx), idx, timestamp)
            sizes[idx] = len(scan)
            if len(scan) == 0:
                raise InputError("empty scan")
            pose = None
            if poses is not None:
                if idx >= len(poses):
                    raise InputError("no pose entry")
                pose = poses[idx]
            result = engine.process_scan(scan, pose)
        except (InputError, RegistrationError, ValueError) as err:
            raise CommandError(f"scan {idx}: {err}") from None
        est_poses.append(result.pose)
        collect(result)
    if not args.no_flush:
        for result in engine.flush():
            collect(result)

    for strategy, per_scan in decisions.items():
        for idx in scan_ids:
            labels = per_scan.get(idx)
            if labels is None:
                labels = np.full(sizes[idx], UNDECIDED, dtype=np.uint8)
            formats.write_decisions(out / "decisions" / strategy.value / f"{idx:06d}.dec", labels)
            if args.label_output:
                formats.write_labels(out / "labels" / strategy.value / f"{idx:06d}.label", labels)
    for strategy, belief in engine.beliefs.items():
        formats.write_belief(out / "belief" / f"{strategy.value}.txt", belief)
    static = PointCloud.concatenate(static_clouds)
    formats.write_scan(out / "static_map.bin", static.positions)
    formats.write_poses(out / "poses.txt", est_poses)
    timing = engine.timings.rates()
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    print(
        f"processed {timing['scans']} scans: prediction {timing['prediction_hz']:.1f} Hz, "
        f"belief update {timing['belief_hz']:.1f} Hz, registration {timing['registration_hz']:.1f} Hz"
    )
    return 0


def evaluate(pred_dir, gt_dir, max_range: float | None = None) -> dict[FusionStrategy, tuple[ConfusionCounts, int]]:
    """Accumulate confusion counts per strategy over a whole sequence.

    Returns ``{strategy: (counts, undecided_points)}``. Undecided points are
    excluded from the counts.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    gt_ids = sorted(int(p.stem) for p in (gt_dir / "labels").glob("*.label"))
    if not gt_ids:
        raise CommandError(f"no label files in {gt_dir / 'labels'}")
    results = {}
    for strategy in ALL_STRATEGIES:
        sdir = pred_dir / "decisions" / strategy.value
        if not sdir.is_dir():
            continue
        pred_ids = sorted(int(p.stem) for p in sdir.glob("*.dec"))
        if pred_ids != gt_ids:
            raise CommandError(
                f"{strategy.value}: {len(pred_ids)} prediction files but {len(gt_ids)} label files"
            )
        counts, undecided = ConfusionCounts(), 0
        for idx in gt_ids:
            pred = formats.read_decisions(sdir / f"{idx:06d}.dec")
            gt = formats.load_labels(formats.label_path(gt_dir, idx))
            if len(pred) != len(gt):
                raise CommandError(f"{strategy.value}: scan {idx} has {len(pred)} decisions for {len(gt)} labels")
            valid = pred != UNDECIDED
            if max_range is not None:
                scan = formats.load_scan(formats.scan_path(gt_dir, idx))
                valid &= np.linalg.norm(scan.positions, axis=1) <= max_range
            undecided += int(np.count_nonzero((pred == UNDECIDED) & (gt != MovingLabel.UNLABELED)))
            counts = counts + confusion(pred[valid], gt[valid])
        results[strategy] = (counts, undecided)
    if not results:
        raise CommandError(f"no decision directories in {pred_dir / 'decisions'}")
    return results


def _pct(x: float) -> str:
    return "n/a" if math.isnan(x) else f"{100 * x:.1f}"


def format_table(results) -> str:
    rows = [f"{'Method':<20} {'IoU':>6} {'R':>6} {'P':>6}"]
    for strategy, (c, _) in results.items():
        rows.append(f"{TABLE_NAMES[strategy]:<20} {_pct(c.iou):>6} {_pct(c.recall):>6} {_pct(c.precision):>6}")
    return "\n".join(rows)


def cmd_eval(args) -> int:
    results = evaluate(args.pred_dir, args.gt_dir, args.max_range)
    table = format_table(results)
    print(table)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "iou", "recall", "precision", "tp", "fp", "fn", "tn", "undecided"])
        for strategy, (c, undecided) in results.items():
            writer.writerow([strategy.value, c.iou, c.recall, c.precision, c.tp, c.fp, c.fn, c.tn, undecided])
    out.with_suffix(".txt").write_text(table + "\n")
    return 0


def cmd_synth(args) -> int:
    if args.scene in BUNDLED_SCENES:
        scene = BUNDLED_SCENES[args.scene]()
    else:
        path = Path(args.scene)
        if not path.exists():
            raise CommandError(f"{args.scene!r} is neither a bundled scene ({sorted(BUNDLED_SCENES)}) nor a file")
        try:
            scene = SyntheticScene.from_dict(yaml.safe_load(path.read_text()) or {})
        except (TypeError, ValueError) as err:
            raise CommandError(f"invalid scene config: {err}") from None
    if args.seed is not None:
        scene.seed = args.seed
    if args.flip_rate is not None:
        scene.flip_rate = args.flip_rate
    try:
        scene.validate()
    except ValueError as err:
        raise CommandError(f"invalid scene config: {err}") from None
    out = write_sequence(scene, args.output)
    (out / "scene.yaml").write_text(yaml.safe_dump(scene.to_dict(), sort_keys=False))
    print(f"wrote {scene.num_scans} scans to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mosbelief", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="process a sequence and write decisions, belief and static map")
    run.add_argument("--config", help="YAML run configuration")
    run.add_argument("--dataset-root", required=True)
    run.add_argument("--sequence", help="sequence id under <root>/sequences (omit if root is the sequence)")
    run.add_argument("--strategies", help="comma separated: " + ",".join(s.value for s in FusionStrategy))
    run.add_argument("--predictor", choices=["file", "heuristic"])
    run.add_argument("--logits", help="directory of <scan:06>.logits files (default: <sequence>/logits)")
    run.add_argument("--registration", choices=["icp", "poses"])
    run.add_argument("--output", required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--no-flush", action="store_true", help="leave delayed scans at the end undecided")
    run.add_argument("--label-output", action="store_true", help="also write SemanticKITTI .label files")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="moving IoU / recall / precision per strategy")
    ev.add_argument("pred_dir", help="output directory of 'run'")
    ev.add_argument("gt_dir", help="sequence directory with labels/")
    ev.add_argument("--output", default="metrics.csv")
    ev.add_argument("--max-range", type=float, help="only score points within this range of the sensor")
    ev.set_defaults(func=cmd_eval)

    synth = sub.add_parser("synth", help="write a synthetic KITTI-style sequence")
    synth.add_argument("scene", help=f"scene YAML file or bundled name {sorted(BUNDLED_SCENES)}")
    synth.add_argument("output")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--flip-rate", type=float)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (CommandError, InputError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
