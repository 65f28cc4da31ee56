"""Command-line entry point: one subcommand per pipeline stage plus the simulator."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config, gridworld, orchestrator, planner, posesense, vision
from .pgm import PGMError, write_pgm


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _write(path, data):
    if path in (None, "-"):
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
            sys.stdout.buffer.flush()
        else:
            sys.stdout.write(data)
        return
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        with open(path, mode) as fh:
            fh.write(data)
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e.strerror}") from None


def _load_map(path):
    return gridworld.load_map(_read_bytes(path))


def _clearance(args, grid):
    if args.min_clearance is not None:
        return args.min_clearance
    return vision.default_min_clearance(args.robot_radius / grid.resolution)


# subcommands


def cmd_plan(args):
    grid = _load_map(args.map)
    plan = planner.plan_on_grid(grid.obstacles, tuple(args.start), tuple(args.goal), _clearance(args, grid))
    _write(args.out, "".join(f"{c} {r}\n" for r, c in plan.waypoints))
    print(f"{len(plan.waypoints)} waypoints, length {plan.total_length} chamfer units", file=sys.stderr)
    if args.overlay:
        img = np.where(grid.obstacles, 0, 255).astype(np.uint8)
        for r, c in plan.waypoints:
            img[r, c] = 128
        _write(args.overlay, write_pgm(img))


def cmd_dt(args):
    grid = _load_map(args.inp)
    field = vision.chamfer_transform(grid.obstacles)
    out = vision.field_to_pgm16(field)
    _write(args.out, write_pgm(out, 65535, comments=["chamfer 3-4"]))


def cmd_skeleton(args):
    grid = _load_map(args.inp)
    field = vision.chamfer_transform(grid.obstacles)
    skel = vision.skeletonize(field, grid.free, _clearance(args, grid))
    _write(args.out, write_pgm(np.where(skel, 255, 0).astype(np.uint8)))
    roadmap = vision.build_roadmap(skel)
    print(f"skeleton {int(skel.sum())} px, roadmap {len(roadmap.nodes)} nodes, {len(roadmap.edges)} edges", file=sys.stderr)


def cmd_render(args):
    if args.map:
        grid = _load_map(args.map)
        scene = gridworld.RoomScene(grid)
        if args.robot:
            r, c = args.robot
            x, y = grid.center_of((r, c))
            scene = scene.with_robot(gridworld.RobotState(x, y))
    else:
        scene = gridworld.standard_scene()
        if args.robot:
            x, y = scene.map.center_of(tuple(args.robot))
            scene = scene.with_robot(gridworld.RobotState(x, y))
    frame = gridworld.render_topdown(scene, args.noise, seed=args.seed)
    if args.stage == "frame":
        out = frame
    else:
        background = gridworld.render_topdown(scene.with_robot(None), args.noise, seed=[args.seed, 1])
        moving = vision.background_subtract(frame, background, args.threshold)
        if args.stage == "foreground":
            out = np.where(moving, 255, 0).astype(np.uint8)
        else:
            labels = vision.mean_shift_segment(frame)
            if args.stage == "segments":
                out = (labels * (255 // max(1, int(labels.max())))).astype(np.uint8)
            else:
                out = np.where(vision.obstacle_mask(labels, moving), 0, 255).astype(np.uint8)
    _write(args.out, write_pgm(out))


def cmd_gen_data(args):
    poses = list(posesense.PoseClass) if args.pose == "all" else [posesense.PoseClass(args.pose)]
    samples, labels, t0 = [], [], 0.0
    for k, pose in enumerate(poses):
        s = posesense.generate_synthetic(pose, args.duration, args.rate, args.noise, seed=[args.seed, k], t0=t0)
        samples += s
        labels += [pose] * len(s)
        t0 += args.duration
    _write(args.out, posesense.write_csv(samples, labels if args.labels else None))


def cmd_classify(args):
    try:
        samples, truth = posesense.read_csv(_read_bytes(args.inp).decode())
    except UnicodeDecodeError:
        raise ValueError(f"{args.inp} is not a text CSV file") from None
    if args.train:
        train_s, train_l = posesense.read_csv(_read_bytes(args.train).decode())
        if train_l is None:
            raise ValueError("training CSV needs a label column")
        train = list(zip(train_s, train_l))
    else:
        train = []
        for k, pose in enumerate(posesense.PoseClass):
            train += [(s, pose) for s in posesense.generate_synthetic(pose, 15.0, seed=[args.seed, k])]
    if args.model == "bayes":
        model, classify = posesense.train_bayes(train), posesense.classify_bayes
    else:
        model, classify = posesense.train_fuzzy(train), posesense.classify_fuzzy
    preds = [classify(model, s)[0] for s in samples]
    lines = ["t,label\n"] + [f"{s.t!r},{p.value if p else 'None'}\n" for s, p in zip(samples, preds)]
    _write(args.out, "".join(lines))
    if truth is not None and samples:
        acc = sum(p == t for p, t in zip(preds, truth)) / len(samples)
        print(f"accuracy {acc:.4f} on {len(samples)} samples", file=sys.stderr)
    events = posesense.detect_transition(preds, args.debounce, [s.t for s in samples])
    for ev in events:
        print(f"{ev.kind.value} at t={ev.t:.2f}", file=sys.stderr)


def cmd_simulate(args):
    text = _read_bytes(args.scenario).decode("utf-8", errors="replace")
    scene, script, expect = orchestrator.parse_scenario(text, base_dir=Path(args.scenario).parent)
    log = orchestrator.run_scenario(scene, script, seed=args.seed, frames_dir=args.frames_dir)
    _write(args.log, log.to_text())
    results = orchestrator.check_assertions(log, expect) if expect else []
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}", file=sys.stderr)
    if not all(r.passed for r in results):
        return 1
    return 0


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="bedside", description="Bedside robot pipeline stages and simulator.", formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def clearance_opts(sp):
        sp.add_argument("--min-clearance", type=float, default=None, help="skeleton clearance in chamfer units (default: 3 x robot radius in cells)")
        sp.add_argument("--robot-radius", type=float, default=config.ROBOT_RADIUS_M, help="robot radius in metres")

    sp = sub.add_parser("plan", help="plan a path on a map PGM", formatter_class=fmt)
    sp.add_argument("--map", required=True, help="map PGM (0 = obstacle, 255 = free)")
    sp.add_argument("--start", type=int, nargs=2, required=True, metavar=("ROW", "COL"))
    sp.add_argument("--goal", type=int, nargs=2, required=True, metavar=("ROW", "COL"))
    sp.add_argument("--out", default="-", help="waypoint file, one 'x y' (col row) pair per line")
    sp.add_argument("--overlay", default=None, help="optional PGM with the path drawn in grey")
    clearance_opts(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("dt", help="chamfer distance transform of a map", formatter_class=fmt)
    sp.add_argument("--in", dest="inp", required=True, help="map PGM")
    sp.add_argument("--out", required=True, help="16-bit distance PGM")
    sp.set_defaults(func=cmd_dt)

    sp = sub.add_parser("skeleton", help="Voronoi skeleton of a map", formatter_class=fmt)
    sp.add_argument("--in", dest="inp", required=True, help="map PGM")
    sp.add_argument("--out", required=True, help="skeleton PGM (255 = skeleton)")
    clearance_opts(sp)
    sp.set_defaults(func=cmd_skeleton)

    sp = sub.add_parser("render", help="render an overhead camera frame or a vision stage", formatter_class=fmt)
    sp.add_argument("--map", default=None, help="map PGM (default: the standard bedroom)")
    sp.add_argument("--robot", type=int, nargs=2, default=None, metavar=("ROW", "COL"), help="robot cell (default: docked in the standard room, absent on a map)")
    sp.add_argument("--stage", choices=["frame", "foreground", "segments", "obstacles"], default="frame")
    sp.add_argument("--noise", type=float, default=2.0, help="pixel noise sigma")
    sp.add_argument("--threshold", type=int, default=config.BGSUB_THRESHOLD, help="background subtraction threshold")
    sp.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    sp.add_argument("--out", required=True, help="output PGM")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("gen-data", help="synthetic load-cell CSV", formatter_class=fmt)
    sp.add_argument("--pose", default="all", choices=["all"] + [c.value for c in posesense.PoseClass])
    sp.add_argument("--duration", type=float, default=15.0, help="seconds per pose")
    sp.add_argument("--rate", type=float, default=config.SENSOR_RATE_HZ, help="Hz")
    sp.add_argument("--noise", type=float, default=8.0, help="lbf")
    sp.add_argument("--no-labels", dest="labels", action="store_false", help="omit the label column")
    sp.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("classify", help="classify load-cell samples from CSV", formatter_class=fmt)
    sp.add_argument("--in", dest="inp", required=True, help="CSV t,f1,f2,f3,f4[,label]")
    sp.add_argument("--model", choices=["bayes", "fuzzy"], default="bayes")
    sp.add_argument("--train", default=None, help="labelled training CSV (default: synthetic, from --seed)")
    sp.add_argument("--debounce", type=int, default=config.DEBOUNCE_N, help="samples to settle a transition")
    sp.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("simulate", help="run a scenario file", formatter_class=fmt)
    sp.add_argument("--scenario", required=True, help="TOML scenario file")
    sp.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="overrides the scenario's seed")
    sp.add_argument("--log", default="-", help="event log output")
    sp.add_argument("--frames-dir", default=None, help="dump camera frames here as PGM")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args) or 0
    except UsageError as e:
        print(e, file=sys.stderr)
        return 2
    except SystemExit as e:  # --help
        return e.code if isinstance(e.code, int) else 0
    except (ValueError, PGMError, orchestrator.ScenarioError, OSError) as e:
        print(f"bedside: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
