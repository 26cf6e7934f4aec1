"""Batch command-line entry point.

Subcommands: synth, project, autolabel, train, finetune, eval. Every run
is deterministic for a fixed seed (bit-identical outputs), diagnostics go
to stderr, and any input problem exits with code 2. Option defaults may
come from a JSON config file (--config); explicit flags win over it.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import autolabel as al
from . import datasets, fileio
from .evaluation import ConfusionMatrix
from .geometry import wrap_angle
from .labels import UNLABELED
from .neural import (
    FULL_WIDTHS,
    REDUCED_WIDTHS,
    FINETUNE_LR,
    LiLaNet,
    TrainConfig,
    infer_image,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .projection import scan_to_image
from .synth import SensorConfig, default_calibration

BUILTIN_DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "profile": "reduced",
    "gamma_h_deg": 60.0,
    "epsilon_occ_m": 0.5,
    "lr": None,  # per-command: 1e-3 train, 1e-4 finetune
    "batch": 5,
    "iterations": 1000,
}


def _resolve(args, key: str, fallback=None):
    """Explicit flag > config file > built-in default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in args._config:
        return args._config[key]
    if fallback is not None:
        return fallback
    return BUILTIN_DEFAULTS.get(key)


def _profile_widths(profile: str):
    if profile == "full":
        return FULL_WIDTHS
    if profile == "reduced":
        return REDUCED_WIDTHS
    raise ValueError(f"unknown profile {profile!r}")


def cmd_synth(args) -> int:
    sensor = SensorConfig(rings=_resolve(args, "rings", 32), columns=_resolve(args, "columns", 512))
    calib = default_calibration(width=_resolve(args, "camera_width", 400),
                                height=_resolve(args, "camera_height", 120))
    seed = _resolve(args, "seed")
    manifest_path = datasets.generate_dataset(
        args.out_dir,
        n_sequences=_resolve(args, "sequences", 3),
        frames_per_sequence=_resolve(args, "frames_per_seq", 2),
        seed=seed,
        sensor=sensor,
        calib=calib,
        speed_mps=_resolve(args, "speed", 5.0),
        randomize_scenes=not args.fixed_scene,
    )
    manifest = fileio.read_manifest(manifest_path)
    if len(manifest.sequences) >= 3:
        datasets.split_sequences(manifest, seed=seed)
        fileio.write_manifest(manifest_path, manifest)
    print(f"wrote {manifest.frame_count} frames to {manifest_path}", file=sys.stderr)
    return 0


def cmd_project(args) -> int:
    scan = fileio.read_scan(args.scan)
    image = scan_to_image(scan)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.scan).stem
    fileio.write_pfm(out / f"{stem}_depth.pfm", image.depth)
    fileio.write_pfm(out / f"{stem}_reflectivity.pfm", image.reflectivity)
    fileio.write_mask_pgm(out / f"{stem}_valid.pgm", image.valid)
    return 0


def _autolabel_one(task) -> dict:
    """Autolabel a single frame; runs in worker processes under --jobs."""
    (scan_path, semantic_path, pose_path, calib_path, t_c_us, out_path,
     gamma_h, eps_occ, ego_motion, alpha_c_override) = task
    scan = fileio.read_scan(scan_path)
    calib = fileio.read_calibration(calib_path)
    track = fileio.read_pose_log(pose_path)
    alpha_c = calib.camera_axis_heading() if alpha_c_override is None else alpha_c_override
    alpha_h = al.scan_heading_at(scan, t_c_us)
    deviation = wrap_angle(alpha_h - alpha_c)
    kept = al.heading_ok(alpha_c, alpha_h, gamma_h)
    record = {
        "heading_deviation_deg": math.degrees(deviation),
        "kept": bool(kept),
    }
    if kept:
        semantic = fileio.read_pgm(semantic_path)
        bundle = al.FrameBundle(scan=scan, semantic_image=semantic, t_c_us=t_c_us,
                                calibration=calib, odometry=track)
        labeled = al.autolabel_frame(bundle, eps_occ=eps_occ, correct_ego_motion=ego_motion)
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        fileio.write_labeled_scan(out_path, labeled)
        record.update(labeled.provenance_counts())
    return record


def cmd_autolabel(args) -> int:
    manifest = fileio.read_manifest(args.manifest)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gamma_h = math.radians(_resolve(args, "gamma_h_deg"))
    eps_occ = _resolve(args, "epsilon_occ_m")
    jobs = int(_resolve(args, "jobs"))

    tasks = []
    meta = []
    for seq in manifest.sequences:
        for frame in seq.frames:
            stem = Path(frame.scan).stem
            rel_out = f"{seq.id}/{stem}.llls"
            tasks.append((
                str(manifest.resolve(frame.scan)), str(manifest.resolve(frame.semantic)),
                str(manifest.resolve(seq.pose_log)), str(manifest.resolve(seq.calibration)),
                frame.t_c_us, str(out / rel_out), gamma_h, eps_occ,
                not args.no_ego_motion, None,
            ))
            meta.append((seq, frame, rel_out))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_autolabel_one, tasks))
    else:
        records = [_autolabel_one(t) for t in tasks]

    report_lines = []
    labeled_manifest = fileio.read_manifest(args.manifest)
    flat = [(seq, frame) for seq in labeled_manifest.sequences for frame in seq.frames]
    for (seq, frame, rel_out), record, (_, out_frame) in zip(meta, records, flat):
        record = {"sequence": seq.id, "frame": Path(frame.scan).stem, **record}
        report_lines.append(json.dumps(record))
        out_frame.labels = rel_out if record["kept"] else None
    (out / "report.jsonl").write_text("\n".join(report_lines) + "\n")

    # The output manifest points at the autolabeled scans but keeps
    # referring to the inputs where they already live.
    for seq in labeled_manifest.sequences:
        for frame in seq.frames:
            frame.scan = str(Path(args.manifest).parent.joinpath(frame.scan).resolve())
            frame.semantic = str(Path(args.manifest).parent.joinpath(frame.semantic).resolve())
        seq.pose_log = str(Path(args.manifest).parent.joinpath(seq.pose_log).resolve())
        seq.calibration = str(Path(args.manifest).parent.joinpath(seq.calibration).resolve())
    fileio.write_manifest(out / "manifest.json", labeled_manifest)
    kept = sum(1 for r in records if r["kept"])
    print(f"kept {kept}/{len(records)} frames", file=sys.stderr)
    return 0


def _run_training(args, warm_start: str | None) -> int:
    manifest = fileio.read_manifest(args.manifest)
    pairs = datasets.load_pairs(manifest, split=args.split)
    if not pairs:
        raise ValueError(f"no labeled frames in split {args.split!r}")
    seed = int(_resolve(args, "seed"))
    if warm_start is None:
        net = LiLaNet(widths=_profile_widths(_resolve(args, "profile"))).initialize(seed)
        lr = float(_resolve(args, "lr", 1e-3))
    else:
        net = load_checkpoint(warm_start)
        lr = float(_resolve(args, "lr", FINETUNE_LR))
    config = TrainConfig(
        learning_rate=lr,
        batch_size=int(_resolve(args, "batch")),
        iterations=int(_resolve(args, "iterations")),
        seed=seed,
    )
    trace = train(net, pairs, config)
    save_checkpoint(args.out, net)
    if args.trace:
        lines = ["iteration,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(trace)]
        Path(args.trace).write_text("\n".join(lines) + "\n")
    print(f"trained {len(trace)} iterations, final loss {trace[-1]:.4f}" if trace
          else "wrote initial weights (0 iterations)", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    return _run_training(args, warm_start=None)


def cmd_finetune(args) -> int:
    return _run_training(args, warm_start=args.checkpoint)


def cmd_eval(args) -> int:
    manifest = fileio.read_manifest(args.manifest)
    frames = [(seq, f) for seq, f in datasets.split_frames(manifest, args.split) if f.labels]
    if not frames:
        raise ValueError(f"no ground-truth frames in split {args.split!r}")
    cm = ConfusionMatrix()
    skipped_unlabeled_predictions = 0

    if args.checkpoint:
        net = load_checkpoint(args.checkpoint)
        for _, frame in frames:
            truth = fileio.read_labeled_scan(manifest.resolve(frame.labels))
            image = scan_to_image(truth.scan)
            pred, _ = infer_image(net, image)
            cm.accumulate(pred, datasets.label_grid(image, truth))
    elif args.predictions_dir:
        pred_dir = Path(args.predictions_dir)
        for seq, frame in frames:
            truth = fileio.read_labeled_scan(manifest.resolve(frame.labels))
            pred_path = pred_dir / seq.id / (Path(frame.scan).stem + ".llls")
            if not pred_path.exists():
                raise FileNotFoundError(f"no prediction for frame {pred_path}")
            pred = fileio.read_labeled_scan(pred_path)
            if len(pred.labels) != len(truth.labels):
                raise ValueError(f"prediction/truth point counts differ for {pred_path}")
            covered = pred.labels != UNLABELED
            skipped_unlabeled_predictions += int((~covered & (truth.labels != UNLABELED)).sum())
            cm.accumulate(pred.labels[covered], truth.labels[covered])
    else:
        raise ValueError("eval needs --checkpoint or --predictions-dir")

    report = cm.to_report()
    if skipped_unlabeled_predictions:
        report["skipped_unlabeled_predictions"] = skipped_unlabeled_predictions
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(cm.format_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lidarseg", description=__doc__)
    p.add_argument("--config", help="JSON file supplying option defaults")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic ray-cast dataset")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--sequences", type=int)
    sp.add_argument("--frames-per-seq", type=int)
    sp.add_argument("--columns", type=int)
    sp.add_argument("--rings", type=int)
    sp.add_argument("--speed", type=float)
    sp.add_argument("--camera-width", type=int)
    sp.add_argument("--camera-height", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--fixed-scene", action="store_true",
                    help="reuse the fixed example scene for every sequence")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("project", help="scan file -> depth/reflectivity PFMs + validity PGM")
    sp.add_argument("--scan", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("autolabel", help="transfer camera labels onto scans")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--gamma-h-deg", type=float, help="heading window width (default 60)")
    sp.add_argument("--epsilon-occ-m", type=float, help="z-buffer depth slack (default 0.5)")
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--no-ego-motion", action="store_true")
    sp.set_defaults(func=cmd_autolabel)

    for name in ("train", "finetune"):
        sp = sub.add_parser(name, help=f"{name} the network on labeled frames")
        sp.add_argument("--manifest", required=True)
        sp.add_argument("--split", default="train")
        sp.add_argument("--out", required=True, help="output checkpoint path")
        sp.add_argument("--trace", help="write per-iteration loss CSV here")
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--batch", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--profile", choices=("full", "reduced"))
        if name == "finetune":
            sp.add_argument("--checkpoint", required=True, help="warm-start weights")
            sp.set_defaults(func=cmd_finetune)
        else:
            sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="IoU report against ground-truth labels")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--checkpoint", help="run network inference")
    sp.add_argument("--predictions-dir", help="compare precomputed labeled scans")
    sp.add_argument("--out", help="write the JSON report here")
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._config = {}
    if args.config:
        try:
            args._config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            print(f"error: cannot read config: {e}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
