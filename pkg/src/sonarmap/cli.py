"""Command-line front end.

Three subcommands cover the library's capabilities from the shell:

- ``run``    fly one scenario and export maps plus coverage/error/runtime tables
- ``sweep``  repeat the scenario over the keyframe-threshold grid
- ``render`` draw one orthogonal sonar image pair from a given pose

Angles on the command line are degrees; files use the documented YAML/CSV/PGM
formats.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .geometry import Pose2, Pose3
from .pipeline import (
    SWEEP_DISTANCES,
    SWEEP_ROTATIONS_DEG,
    StageError,
    load_scenario,
    run_scenario,
    sweep_keyframes,
)
from .simworld import (
    NoiseParams,
    default_horizontal_config,
    default_vertical_config,
    load_scene,
    render_sonar_pair,
    write_pgm,
)

_MODE_CHOICES = {
    "fusion": ("fusion",),
    "inference": ("inference",),
    "submap": ("submapping",),
    "submapping": ("submapping",),
    "all": ("fusion", "inference", "submapping"),
}


def _parse_floats(text: str, what: str, count: int | None = None) -> tuple:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ValueError(f"{what} must be comma-separated numbers: {exc}") from exc
    if count is not None and len(values) != count:
        raise ValueError(f"{what} needs exactly {count} comma-separated numbers, "
                         f"got {len(values)}")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonarmap",
        description="Dense 3D sonar mapping: orthogonal-pair fusion, object "
                    "height inference, and submapping on a keyframe pose graph.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser(
        "run", help="fly one scenario and export maps and metric tables")
    run_p.add_argument("--config", required=True,
                       help="scenario YAML file")
    run_p.add_argument("--mode", choices=sorted(_MODE_CHOICES),
                       help="assemble only this mode (default: the configured "
                            "modes; 'all' forces all three)")
    run_p.add_argument("--out", help="output directory for CSV/PLY exports")
    run_p.add_argument("--seed", type=int, help="override the configured seed")

    sweep_p = sub.add_parser(
        "sweep", help="run the scenario across the keyframe-threshold grid")
    sweep_p.add_argument("--config", required=True, help="scenario YAML file")
    sweep_p.add_argument("--out", required=True, help="output directory")
    sweep_p.add_argument("--workers", type=int, default=1,
                         help="worker processes (default 1: run serially)")
    sweep_p.add_argument("--distances",
                         help="comma-separated keyframe distances in meters "
                              f"(default {','.join(str(d) for d in SWEEP_DISTANCES)})")
    sweep_p.add_argument("--rotations",
                         help="comma-separated keyframe rotations in degrees "
                              f"(default {','.join(str(r) for r in SWEEP_ROTATIONS_DEG)})")

    render_p = sub.add_parser(
        "render", help="render one orthogonal sonar image pair as PGM files")
    render_p.add_argument("--scene", required=True, help="scene YAML file")
    render_p.add_argument("--pose", required=True,
                          help="body pose as x,y,z,yaw_deg")
    render_p.add_argument("--out", required=True,
                          help="output prefix; writes <out>_horizontal.pgm "
                               "and <out>_vertical.pgm")
    render_p.add_argument("--seed", type=int, default=0,
                          help="noise seed (default 0)")
    return parser


def _cmd_run(args) -> int:
    cfg = load_scenario(args.config)
    modes = _MODE_CHOICES[args.mode] if args.mode else None
    result = run_scenario(cfg, modes=modes, out_dir=args.out, seed=args.seed)
    for mode in result.modes:
        mae, rmse = result.errors[mode]
        print(f"{mode}: {result.coverage[mode]} voxels, "
              f"MAE {mae:.3f} m, RMSE {rmse:.3f} m "
              f"({len(result.graph)} keyframes, {result.n_frames} frames)")
    if args.out:
        print(f"wrote maps and tables to {Path(args.out).resolve()}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_scenario(args.config)
    distances = (_parse_floats(args.distances, "--distances")
                 if args.distances else SWEEP_DISTANCES)
    rotations = (_parse_floats(args.rotations, "--rotations")
                 if args.rotations else SWEEP_ROTATIONS_DEG)
    result = sweep_keyframes(cfg, args.out, distances=distances,
                             rotations_deg=rotations, workers=args.workers)
    cells = len(distances) * len(rotations)
    print(f"swept {cells} keyframing cells: {len(result.rows)} rows, "
          f"{len(result.failures)} failed cells")
    for failure in result.failures:
        print(f"  failed at ({failure.distance} m, {failure.rotation_deg} deg) "
              f"in stage {failure.stage}", file=sys.stderr)
    print(f"wrote tables to {Path(args.out).resolve()}")
    return 0 if result.rows else 1


def _cmd_render(args) -> int:
    scene = load_scene(args.scene)
    x, y, z, yaw_deg = _parse_floats(args.pose, "--pose", count=4)
    pose = Pose3.from_planar(Pose2(x, y, math.radians(yaw_deg)), depth=z)
    h_img, v_img = render_sonar_pair(scene, pose, default_horizontal_config(),
                                     default_vertical_config(), NoiseParams(),
                                     args.seed)
    h_path = Path(f"{args.out}_horizontal.pgm")
    v_path = Path(f"{args.out}_vertical.pgm")
    write_pgm(h_img, h_path)
    write_pgm(v_img, v_path)
    print(f"wrote {h_path} and {v_path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "render": _cmd_render}
    try:
        return handlers[args.command](args)
    except (StageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
