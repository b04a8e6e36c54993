"""Command-line entry point.

Subcommands: evaluate | refine | sweep | perturb. Every run writes
machine-readable outputs (JSON/CSV) plus rendered figures, and embeds a
manifest describing the exact configuration. Reports are byte-identical
across reruns with the same inputs and seed; wall-clock timing goes to a
separate run_info.json so it never pollutes the reports.

Exit codes: 0 success, 2 input error, 3 partial failure (some scenes
could not be processed; the rest were, and the failures are listed).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateHeading, NonFiniteLoss, ParseError, TrajComplyError, ValidationError
from .losses import LossConfig, LossWeights
from .metrics import aggregate, evaluate_scene
from .perturb import TurnSpec, apply_turn
from .refine import RefineConfig, alpha_sweep, refine
from .scene import load_predictions, load_scene, save_predictions, save_scene
from . import plots

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PARTIAL = 3

DEFAULT_ALPHAS = "0,0.32,1,3.16,10,31.6"

REPORT_CSV_HEADER = ["id", "minADE", "minFDE", "miss", "offroad", "direction", "diversity"]
TRACE_CSV_HEADER = ["iteration", "L_original", "offroad", "direction", "diversity", "L_final"]
SWEEP_CSV_HEADER = ["alpha", "minADE", "offroad", "direction", "diversity"]


# ---------------------------------------------------------------- configs

def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as err:
        raise ParseError(f"{path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: {err}") from None
    if not isinstance(doc, dict):
        raise ValidationError("$", "config file must hold a JSON object")
    return doc


def _section(doc: dict, name: str) -> dict:
    sect = doc.get(name, {})
    if not isinstance(sect, dict):
        raise ValidationError(name, "config section must be an object")
    return sect


def _merge(cls, file_values: dict, flag_values: dict, section: str):
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        return cls(**merged)
    except TypeError as err:
        raise ValidationError(section, str(err)) from None
    except ValueError as err:
        raise ValidationError(section, str(err)) from None


def build_configs(args) -> tuple[LossConfig, RefineConfig, bool]:
    """Defaults < config file < command-line flags."""
    doc = _load_config_file(getattr(args, "config", None))
    loss_cfg = _merge(LossConfig, _section(doc, "loss"), {
        "offroad_margin": getattr(args, "offroad_margin", None),
        "direction_dist_margin": getattr(args, "direction_dist_margin", None),
        "direction_angle_margin": getattr(args, "direction_angle_margin", None),
        "feasibility_uses_margin": getattr(args, "feasibility_uses_margin", None),
    }, "loss")
    weights = _merge(LossWeights, _section(doc, "weights"), {
        "w_off": getattr(args, "w_off", None),
        "w_dir": getattr(args, "w_dir", None),
        "w_div": getattr(args, "w_div", None),
    }, "weights")
    refine_file = dict(_section(doc, "refine"))
    refine_file.pop("weights", None)
    refine_cfg = _merge(RefineConfig, refine_file, {
        "alpha": getattr(args, "alpha", None),
        "step_size": getattr(args, "step_size", None),
        "max_iters": getattr(args, "max_iters", None),
        "step_decay": getattr(args, "step_decay", None),
        "convergence_tol": getattr(args, "convergence_tol", None),
        "diversity_warmup": getattr(args, "diversity_warmup", None),
        "seed": getattr(args, "seed", None),
    }, "refine")
    refine_cfg = replace(refine_cfg, weights=weights)
    report = _section(doc, "report")
    per_step = getattr(args, "per_step_average", None)
    if per_step is None:
        per_step = bool(report.get("per_step_average", False))
    return loss_cfg, refine_cfg, per_step


def _manifest(args, loss_cfg, refine_cfg, per_step, inputs: dict) -> dict:
    return {
        "command": args.command,
        "version": __version__,
        "inputs": inputs,
        "config": {
            "loss": asdict(loss_cfg),
            "refine": asdict(refine_cfg),
            "report": {"per_step_average": per_step},
        },
    }


# ------------------------------------------------------------------- io

def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _load_scenes_dir(scenes_dir) -> tuple[dict, list[str]]:
    root = Path(scenes_dir)
    if not root.is_dir():
        raise ParseError(f"{scenes_dir}: not a directory")
    files = sorted(root.glob("*.json"))
    scenes, failures = {}, []
    for path in files:
        try:
            scene = load_scene(path)
        except (ParseError, ValidationError) as err:
            failures.append(f"{path.name}: {err}")
            continue
        if scene.id in scenes:
            failures.append(f"{path.name}: duplicate scene id {scene.id!r}")
            continue
        scenes[scene.id] = scene
    if not files:
        raise ParseError(f"{scenes_dir}: no scene files (*.json)")
    return scenes, failures


def _load_corpus(args) -> tuple[list, list[str]]:
    """Matched (scene, predictions) pairs in sorted-id order, plus failures."""
    scenes, failures = _load_scenes_dir(args.scenes)
    preds = load_predictions(args.predictions, scenes, strict=False)
    for sid in sorted(set(preds) - set(scenes)):
        failures.append(f"predictions: unknown scene id {sid!r}")
    for sid in sorted(set(scenes) - set(preds)):
        failures.append(f"scene {sid!r}: no predictions")
    pairs = [(scenes[sid], preds[sid]) for sid in sorted(set(scenes) & set(preds))]
    return pairs, failures


def _pool_map(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks, chunksize=1))
    return [fn(t) for t in tasks]


def _finish(info_dir, manifest, started, failures) -> int:
    _write_json(Path(info_dir) / "run_info.json",
                {"manifest": manifest,
                 "duration_seconds": round(time.perf_counter() - started, 3)})
    if failures:
        for line in failures:
            print(f"failed: {line}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ------------------------------------------------------------- commands

def _eval_task(item):
    scene, preds, loss_cfg, per_step = item
    return evaluate_scene(preds, scene, loss_cfg, per_step)


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    loss_cfg, refine_cfg, per_step = build_configs(args)
    pairs, failures = _load_corpus(args)
    if not pairs:
        print("error: no (scene, predictions) pairs to evaluate", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = _pool_map(_eval_task, [(s, p, loss_cfg, per_step) for s, p in pairs], args.jobs)
    corpus = aggregate(reports)
    manifest = _manifest(args, loss_cfg, refine_cfg, per_step,
                         {"scenes": str(args.scenes), "predictions": str(args.predictions)})
    _write_csv(out / "report.csv", REPORT_CSV_HEADER,
               [[r.scene_id, r.min_ade, r.min_fde, int(r.miss),
                 r.offroad, r.direction, r.diversity] for r in corpus.scenes])
    _write_json(out / "report.json", {
        "manifest": manifest,
        "summary": {
            "scene_count": corpus.scene_count,
            "mean_minADE": corpus.mean_min_ade,
            "mean_minFDE": corpus.mean_min_fde,
            "miss_rate": corpus.miss_rate,
            "mean_offroad": corpus.mean_offroad,
            "mean_direction": corpus.mean_direction,
            "mean_diversity": corpus.mean_diversity,
        },
        "scenes": [{
            "id": r.scene_id, "minADE": r.min_ade, "minFDE": r.min_fde,
            "miss": r.miss, "offroad": r.offroad, "direction": r.direction,
            "diversity": r.diversity, "ade_winner": r.ade_winner,
            "fde_winner": r.fde_winner,
        } for r in corpus.scenes],
        "failures": failures,
    })
    if args.figures:
        plots.render_report(corpus, out / "report_metrics.png")
    return _finish(out, manifest, started, failures)


def _refine_task(item):
    scene, preds, loss_cfg, refine_cfg = item
    try:
        trace = refine(preds, scene, loss_cfg, refine_cfg)
    except (NonFiniteLoss, TrajComplyError) as err:
        return scene.id, None, str(err)
    return scene.id, trace, None


def cmd_refine(args) -> int:
    started = time.perf_counter()
    loss_cfg, refine_cfg, per_step = build_configs(args)
    pairs, failures = _load_corpus(args)
    if not pairs:
        print("error: no (scene, predictions) pairs to refine", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    results = _pool_map(_refine_task, [(s, p, loss_cfg, refine_cfg) for s, p in pairs], args.jobs)
    refined, traces = {}, {}
    for sid, trace, err in results:
        if err is not None:
            failures.append(f"scene {sid!r}: {err}")
            continue
        refined[sid] = trace.final
        traces[sid] = trace.records
        _write_csv(out / "traces" / f"{sid}.csv", TRACE_CSV_HEADER,
                   [[rec.iteration, rec.original, rec.offroad, rec.direction,
                     rec.diversity, rec.final] for rec in trace.records])
    manifest = _manifest(args, loss_cfg, refine_cfg, per_step,
                         {"scenes": str(args.scenes), "predictions": str(args.predictions)})
    _write_json(out / "manifest.json", manifest)
    if refined:
        save_predictions(refined, out / "refined_predictions.json")
        if args.figures:
            plots.render_traces(traces, out / "refine_trace.png")
    return _finish(out, manifest, started, failures)


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    loss_cfg, refine_cfg, per_step = build_configs(args)
    try:
        alphas = [float(tok) for tok in str(args.alphas).split(",") if tok.strip()]
    except ValueError:
        print(f"error: cannot parse --alphas {args.alphas!r}", file=sys.stderr)
        return EXIT_INPUT
    pairs, failures = _load_corpus(args)
    if not pairs:
        print("error: no (scene, predictions) pairs to sweep", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = alpha_sweep(pairs, loss_cfg, refine_cfg, alphas, jobs=args.jobs or 1)
    manifest = _manifest(args, loss_cfg, refine_cfg, per_step,
                         {"scenes": str(args.scenes), "predictions": str(args.predictions),
                          "alphas": alphas})
    _write_csv(out / "sweep.csv", SWEEP_CSV_HEADER,
               [[r.alpha, r.min_ade, r.offroad, r.direction, r.diversity] for r in rows])
    _write_json(out / "manifest.json", manifest)
    if args.figures:
        plots.render_sweep(rows, out / "sweep.png")
    return _finish(out, manifest, started, failures)


def cmd_perturb(args) -> int:
    started = time.perf_counter()
    loss_cfg, refine_cfg, per_step = build_configs(args)
    scenes, failures = _load_scenes_dir(args.scenes)
    if not scenes:
        print("error: no loadable scenes", file=sys.stderr)
        return EXIT_INPUT
    try:
        spec = TurnSpec(trigger_distance=args.distance,
                        turn_angle=float(np.deg2rad(args.angle)),
                        arc_length=args.arc)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    # only scene files and the (non-json) preview go in the top level, so the
    # output directory can be fed straight back into --scenes
    meta = out / "meta"
    meta.mkdir(parents=True, exist_ok=True)
    first_pair = None
    for sid in sorted(scenes):
        try:
            bent = apply_turn(scenes[sid], spec)
        except (DegenerateHeading, ValidationError) as err:
            failures.append(f"scene {sid!r}: {err}")
            continue
        save_scene(bent, out / f"{sid}.json")
        if first_pair is None:
            first_pair = (scenes[sid], bent)
    manifest = _manifest(args, loss_cfg, refine_cfg, per_step,
                         {"scenes": str(args.scenes), "angle_deg": args.angle,
                          "distance": args.distance, "arc": args.arc})
    _write_json(meta / "manifest.json", manifest)
    if args.figures and first_pair is not None:
        plots.render_scene_pair(*first_pair, out / "perturb_preview.png")
    return _finish(meta, manifest, started, failures)


# --------------------------------------------------------------- parser

def _add_common(sub, predictions=True):
    sub.add_argument("--scenes", required=True, help="directory of scenario *.json files")
    if predictions:
        sub.add_argument("--predictions", required=True, help="predictions file")
    sub.add_argument("--config", default=None, help="JSON config file")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--jobs", type=int, default=1, help="worker processes")
    sub.add_argument("--seed", type=int, default=None, help="seed recorded in configs")
    sub.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                     help="render figures next to the delimited outputs")
    for flag, kind in [("--offroad-margin", float), ("--direction-dist-margin", float),
                       ("--direction-angle-margin", float), ("--w-off", float),
                       ("--w-dir", float), ("--w-div", float), ("--alpha", float),
                       ("--step-size", float), ("--max-iters", int),
                       ("--step-decay", float), ("--convergence-tol", float),
                       ("--diversity-warmup", int)]:
        sub.add_argument(flag, type=kind, default=None)
    sub.add_argument("--feasibility-uses-margin", action=argparse.BooleanOptionalAction,
                     default=None)
    sub.add_argument("--per-step-average", action=argparse.BooleanOptionalAction,
                     default=None, help="report offroad/direction per step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajcomply",
        description="Map-compliance metrics, losses, refinement and perturbation "
                    "for trajectory prediction.")
    subs = parser.add_subparsers(dest="command", required=True)

    p_eval = subs.add_parser("evaluate", help="score predictions against a scenario corpus")
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_ref = subs.add_parser("refine", help="gradient-descent refinement of predictions")
    _add_common(p_ref)
    p_ref.set_defaults(func=cmd_refine)

    p_sweep = subs.add_parser("sweep", help="alpha sweep of the accuracy/compliance trade-off")
    _add_common(p_sweep)
    p_sweep.add_argument("--alphas", default=DEFAULT_ALPHAS,
                         help="comma-separated auxiliary weights")
    p_sweep.set_defaults(func=cmd_sweep)

    p_pert = subs.add_parser("perturb", help="bend the road ahead of the ego agent")
    _add_common(p_pert, predictions=False)
    p_pert.add_argument("--angle", type=float, required=True, help="turn angle in degrees")
    p_pert.add_argument("--distance", type=float, default=10.0,
                        help="trigger distance ahead of the ego (m)")
    p_pert.add_argument("--arc", type=float, default=10.0,
                        help="arc length over which the turn is blended (m)")
    p_pert.set_defaults(func=cmd_perturb)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, TrajComplyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
