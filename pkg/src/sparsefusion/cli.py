"""Command-line front end.

Exit codes: 0 on success, 2 on malformed input (missing files, bad JSON,
schema mismatches), 3 on constraint violations (invalid configuration
values, unsatisfiable scene constraints).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, serialization
from .assignment import R2D, R3D
from .config import ConfigError, PipelineConfig, resolve_seed
from .evaluation import evaluate
from .pipeline import run_pipeline
from .scene import MaskNoise, SceneConfig, SceneGenerationError, apply_mask_noise, generate_scene, with_masks
from .serialization import SchemaError

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_CONSTRAINT = 3


class UsageError(Exception):
    """Malformed command-line value."""


def _load_config(path, seed):
    if path is None:
        pipeline, scene, noise = PipelineConfig(), SceneConfig(), MaskNoise()
    else:
        pipeline, scene, noise = serialization.load_config(path)
    seed = resolve_seed(seed, pipeline.seed)
    return replace(pipeline, seed=seed), replace(scene, seed=seed), noise


def _scene_files(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    return sorted(directory.glob("*.json"))


def cmd_synth(args) -> int:
    pipeline, scene_cfg, noise = _load_config(args.config, args.seed)
    if args.n_scenes < 0:
        raise UsageError("--n-scenes must be non-negative")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.n_scenes):
        cfg = replace(scene_cfg, seed=scene_cfg.seed + k)
        scene = generate_scene(cfg)
        if noise != MaskNoise():
            scene = with_masks(scene, apply_mask_noise(scene.masks, noise, cfg.seed, scene.cameras))
        serialization.save_scene(scene, out / f"scene_{k:04d}.json")
    print(f"wrote {args.n_scenes} scene(s) to {out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    pipeline, _, _ = _load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = _scene_files(args.scenes)
    for path in files:
        scene = serialization.load_scene(path)
        run = run_pipeline(scene, pipeline)
        serialization.save_detections(run.detections, out / path.name, path.name, run.counts())
        print(f"{path.name}: {len(run.detections)} detection(s)")
    return EXIT_OK


def cmd_assign(args) -> int:
    from .supervision import stage_assignments

    pipeline, _, _ = _load_config(args.config, args.seed)
    lines = ["scene\tstage\tquery\tmodality\tgt\tround\tiou"]
    for path in _scene_files(args.scenes):
        scene = serialization.load_scene(path)
        run = run_pipeline(scene, pipeline)
        for stage, a in zip(("generation", "refinement"), stage_assignments(scene, run, pipeline)):
            for i, q in enumerate(run.queries):
                gt = "NEGATIVE" if a.gt_index[i] < 0 else str(scene.gt[a.gt_index[i]].instance_id)
                iou = f"{a.iou[i]:.6f}" if a.round[i] == R2D else "-"
                lines.append(f"{path.name}\t{stage}\t{i}\t{q.modality}\t{gt}\t{a.round[i]}\t{iou}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    n3 = sum(line.endswith(R3D + "\t-") for line in lines)
    print(f"{len(lines) - 1} row(s), {n3} decided in 3D", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    thresholds = PipelineConfig().eval_thresholds
    if args.thresholds:
        thresholds = _float_list(args.thresholds, "--thresholds")
    dets, gts = [], []
    scenes = _scene_files(args.scenes)
    for path in scenes:
        det_path = Path(args.detections) / path.name
        if not det_path.exists():
            raise FileNotFoundError(f"no detections for {path.name}: {det_path}")
        gts.append(serialization.load_scene(path).gt)
        dets.append(serialization.load_detections(det_path))
    try:
        result = evaluate(dets, gts, thresholds)
    except ValueError as exc:
        raise ConfigError("thresholds", str(exc)) from None
    report = {"schema_version": serialization.SCHEMA_VERSION, "kind": "eval",
              "n_scenes": len(scenes), **result.to_dict()}
    if args.out:
        serialization.write_json(args.out, report)
    for t in result.thresholds:
        print(f"mAP@{t:g}m = {result.map_by_threshold[t]:.4f}")
    print(f"mean mAP = {result.mean_ap:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    pipeline, scene_cfg, _ = _load_config(args.config, args.seed)
    ranges = _float_list(args.ranges, "--ranges")
    if any(r <= 0 for r in ranges):
        raise ConfigError("ranges", "must be positive")
    reports = bench.cost_scan(ranges, args.cell_m, args.channels, scene_cfg, pipeline, args.repeats)
    if args.csv:
        Path(args.csv).write_text(bench.to_csv(reports))
    if args.json:
        Path(args.json).write_text(bench.to_json(reports))
    print(bench.to_table(reports))
    return EXIT_OK


def _float_list(text: str, flag: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsefusion",
                                     description="Sparse LiDAR-camera fusion on synthetic scenes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON run configuration (defaults when omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="base seed; SPARSEFUSION_SEED overrides it")

    p = sub.add_parser("synth", help="generate scene files")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-scenes", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run the pipeline on scene files")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("assign", help="dump two-round assignment tables")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", default=None, help="TSV output (stdout when omitted)")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("eval", help="evaluate detection files against scenes")
    p.add_argument("--detections", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--thresholds", default=None, help="comma-separated distances in meters")
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="dense-grid vs sparse cost scan")
    common(p)
    p.add_argument("--ranges", default="54,100,200")
    p.add_argument("--cell-m", type=float, default=0.2)
    p.add_argument("--channels", type=int, default=256)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--csv", default=None)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_MALFORMED
    try:
        return args.func(args)
    except (FileNotFoundError, SchemaError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except ConfigError as exc:
        print(f"error: invalid value for {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except SceneGenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (TypeError, KeyError, ValueError) as exc:
        print(f"error: malformed input ({type(exc).__name__}: {exc})", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
