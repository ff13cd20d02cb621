"""Command-line entry point: ``swarmctl collect|fit|run|vision|replay``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plotting
from .config import OBSERVE_MODES, ConfigError, apply_overrides, load_config
from .dynamics import load_qmatrix, save_qmatrix
from .experiment import fit_records, run_episode
from .geometry import CircleSpec, parse_path, waypoints_array
from .gridsearch import CollectError, DatasetFormatError, collect, enumerate_grid, load_dataset, save_dataset
from .navigator import EpisodeLog, Outcome

EXIT_OK, EXIT_INPUT, EXIT_STUCK, EXIT_BUDGET = 0, 2, 3, 4
OUTCOME_EXIT = {Outcome.SUCCESS: EXIT_OK, Outcome.STUCK: EXIT_STUCK, Outcome.BUDGET_EXCEEDED: EXIT_BUDGET}

PRECEDENCE = "Values come from built-in defaults, then the --config file, then flags (flags win)."


class InputError(Exception):
    """Anything that maps to exit code 2."""


def _writable_file(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "ab"):
            pass
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _out_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


def _config(args):
    """Defaults, then the config file, then flags; fills in the command's output default."""
    cfg = load_config(args.config)
    path = None
    if getattr(args, "path", None):
        try:
            path = parse_path(args.path, laps=getattr(args, "laps", None))
        except ValueError as exc:
            raise InputError(f"--path: {exc}") from None
    elif getattr(args, "laps", None) is not None:
        if not isinstance(cfg.path, CircleSpec):
            raise InputError("--laps only applies to circle paths")
        path = replace(cfg.path, laps=args.laps)
    cfg = apply_overrides(cfg, seed=args.seed, out=getattr(args, "out", None), path=path,
                           alpha=getattr(args, "alpha", None), beta=getattr(args, "beta", None),
                           delta=getattr(args, "delta", None), disturb=getattr(args, "disturb", None),
                           observe=getattr(args, "observe", None))
    return cfg if cfg.out is not None else replace(cfg, out=args.out_default)


# ---------------------------------------------------------------------------
# Commands

def cmd_collect(args) -> int:
    cfg = _config(args)
    grid = enumerate_grid()
    combos = grid.combos()
    if args.dry_run:
        print(f"{len(combos)} combos ({len(grid.transducers)} transducers x "
              f"{len(grid.frequencies)} frequencies x {len(grid.voltages)} voltages)")
        for c, (k, f, v) in enumerate(combos):
            print(f"{c},{k},{f:.3f},{v:g}")
        return EXIT_OK
    out = Path(cfg.out)
    _writable_file(out)
    records = collect(grid, cfg.effective_plant(), cfg.seed)
    save_dataset(records, out)
    plotting.resonance_svg(out.with_name(out.stem + "_resonance.svg"), records)
    print(f"combos: {len(combos)}  records: {len(records)}  -> {out}")
    for k in (1, 2, 3, 4):
        sel = records[records["k"] == k]
        print(f"  k={k}: mean speed {np.mean(np.hypot(sel['dx_dt'], sel['dy_dt'])):.3f} cells/s")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    try:
        records = load_dataset(args.dataset)
    except OSError as exc:
        raise InputError(f"cannot read dataset {args.dataset}: {exc.strerror}") from None
    if len(records) == 0:
        raise InputError(f"{args.dataset}: dataset has no records")
    out = Path(cfg.out)
    _writable_file(out)
    q, res, report = fit_records(records, cfg.learner, cfg.channel.grid_n)
    save_qmatrix(q, out)
    plotting.field_svg(out.with_name(out.stem + "_field.svg"), q.values)
    print(f"Q_global {q.values.shape} -> {out}")
    for k, f0, fit, fb in zip((1, 2, 3, 4), res, report.fitted_cells, report.fallback_cells):
        print(f"  k={k}: f0 = {f0:.3f} MHz  cells fitted {fit}  fallback {fb}")
    return EXIT_OK


def _load_q(path):
    try:
        return load_qmatrix(path)
    except OSError as exc:
        raise InputError(f"cannot read Q file {path}: {exc.strerror}") from None


def cmd_run(args) -> int:
    cfg = _config(args)
    target = cfg.target_path()
    if args.dry_run:
        print(f"path: {len(target.waypoints)} waypoints, delta {cfg.delta:g}")
        print(f"seed {cfg.seed}  alpha {cfg.learner.alpha:g}  beta {cfg.learner.beta:g}  "
              f"observe {cfg.observe}  disturb {cfg.disturb}")
        return EXIT_OK
    q = _load_q(args.q)
    out = _out_dir(Path(cfg.out))
    res = run_episode(cfg, q)
    res.log.save(out / "episode.csv")
    xs = np.append(res.log.column("x"), res.state.observed.x) if len(res.log) else np.array([])
    ys = np.append(res.log.column("y"), res.state.observed.y) if len(res.log) else np.array([])
    ks = np.append(res.log.column("k"), 0) if len(res.log) else np.array([], int)
    note = (f"{res.outcome.value}: {res.state.path.cursor}/{len(res.path.waypoints)} waypoints, "
            f"{len(res.log)} steps, seed {cfg.seed}, beta {cfg.learner.beta:g}")
    plotting.trajectory_svg(out / "trajectory.svg", xs, ys, ks, waypoints_array(res.path),
                            cfg.channel.grid_n, note, cfg.delta)
    print(note)
    print(f"log -> {out / 'episode.csv'}  plot -> {out / 'trajectory.svg'}")
    return OUTCOME_EXIT[res.outcome]


def cmd_replay(args) -> int:
    try:
        log = EpisodeLog.load(args.log)
    except OSError as exc:
        raise InputError(f"cannot read log {args.log}: {exc.strerror}") from None
    if len(log) == 0:
        raise InputError(f"{args.log}: episode log is empty")
    out = _out_dir(Path(args.out or args.out_default))
    tx, ty = log.column("tx"), log.column("ty")
    keep = np.ones(len(tx), dtype=bool)
    keep[1:] = (np.diff(tx) != 0) | (np.diff(ty) != 0)
    wp = np.column_stack([tx[keep], ty[keep]])
    note = f"replay: {len(log)} steps, final cursor {log.rows[-1].cursor}"
    plotting.trajectory_svg(out / "trajectory.svg", log.column("x"), log.column("y"), log.column("k"), wp,
                            annotation=note)
    plotting.error_curve_svg(out / "errors.svg", log.column("err_local"), log.column("err_global"))
    print(note)
    print(f"plots -> {out / 'trajectory.svg'}, {out / 'errors.svg'}")
    return EXIT_OK


def cmd_vision(args) -> int:
    from .vision import VisionPipeline, compress, render_frame, save_detections, write_pgm
    from .vision.corpus import CorpusConfig, make_corpus

    cfg = _config(args)
    if args.frames < 1:
        raise InputError("--frames must be >= 1")
    corpus_cfg = CorpusConfig(n_frames=args.frames)
    if args.dry_run:
        print(f"corpus: {args.frames} frames, seed {cfg.seed}, "
              f"{corpus_cfg.n_contaminants[0]}-{corpus_cfg.n_contaminants[1]} contaminants")
        return EXIT_OK
    out = _out_dir(Path(cfg.out))
    scenes = make_corpus(cfg.seed, corpus_cfg, cfg.channel)
    rng = np.random.Generator(np.random.MT19937(cfg.seed))
    frames = [compress(render_frame(s, rng)) for s in scenes]
    pipe = VisionPipeline.calibrate(frames[:10], channel=cfg.channel)
    dets, errors = [], []
    if args.save_frames:
        (out / "frames").mkdir(exist_ok=True)
    for i, (scene, frame) in enumerate(zip(scenes, frames)):
        if args.save_frames:
            write_pgm(out / "frames" / f"frame_{i:04d}.pgm", frame)
        d = pipe.process_lo(frame)
        if d is not None:
            dets.append(d)
            errors.append(float(np.hypot(d.x - scene.swarm.position.x, d.y - scene.swarm.position.y)))
    save_detections(out / "detections.csv", dets)
    n_detect = sum(d.source == "detect" for d in dets)
    print(f"threshold {pipe.threshold}  frames {len(frames)}  located {len(dets)}  detections {n_detect}")
    if errors:
        print(f"centroid error: mean {np.mean(errors):.3f}  max {np.max(errors):.3f} cells")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser

def _common(p, out_default):
    p.add_argument("--config", type=Path, help="TOML experiment file")
    p.add_argument("--seed", type=int, help="random seed (default 1)")
    p.add_argument("--out", help=f"output location (default {out_default})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swarmctl", description="Learned closed-loop steering of a "
                                 "simulated acoustic microbubble swarm. " + PRECEDENCE)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="run the actuation sweep and write the dataset CSV",
                       description=PRECEDENCE)
    _common(p, "dataset.csv")
    p.add_argument("--disturb", action="store_true", default=None, help="harsher plant")
    p.add_argument("--dry-run", action="store_true", help="list combos, write nothing")
    p.set_defaults(func=cmd_collect, out_default="dataset.csv")

    p = sub.add_parser("fit", help="fit Q_global from a dataset", description=PRECEDENCE)
    p.add_argument("dataset", type=Path)
    _common(p, "qglobal.qdyn")
    p.set_defaults(func=cmd_fit, out_default="qglobal.qdyn")

    p = sub.add_parser("run", help="steer a swarm along a path", description=PRECEDENCE +
                       " Exit codes: 0 success, 2 input error, 3 stuck, 4 budget exceeded.")
    p.add_argument("--q", type=Path, help="Q_global file from `fit` (required unless --dry-run)")
    _common(p, "run/")
    p.add_argument("--path", help="circle | letters:TEXT | polyline:x,y;x,y;...")
    p.add_argument("--laps", type=int, help="circle laps")
    p.add_argument("--alpha", type=float, help="local learning rate")
    p.add_argument("--beta", type=float, help="weight of Q_global in the blend")
    p.add_argument("--delta", type=float, help="goal tolerance on squared distance (cells^2)")
    p.add_argument("--disturb", action="store_true", default=None, help="harsher plant")
    p.add_argument("--observe", choices=OBSERVE_MODES, help="how the swarm position is measured")
    p.add_argument("--dry-run", action="store_true", help="validate and print the setup only")
    p.set_defaults(func=cmd_run, out_default="run")

    p = sub.add_parser("vision", help="render a synthetic corpus and run detection/tracking",
                       description=PRECEDENCE)
    _common(p, "vision/")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--save-frames", action="store_true", help="also write 8-bit PGM frames")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_vision, out_default="vision")

    p = sub.add_parser("replay", help="plot a saved episode log")
    p.add_argument("log", type=Path)
    p.add_argument("--out", help="output directory (default replay/)")
    p.set_defaults(func=cmd_replay, out_default="replay")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="swarmctl: %(message)s")
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "run" and not args.dry_run and args.q is None:
        ap.error("run: --q is required")
    try:
        return args.func(args)
    except (InputError, ConfigError, DatasetFormatError) as exc:
        print(f"swarmctl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, CollectError) as exc:
        print(f"swarmctl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
