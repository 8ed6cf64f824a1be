"""Command-line interface: ``mmreg <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .coarse import register_coarse
from .config import PipelineConfig, load_config
from .edges import canny
from .errors import RegistrationError
from .evaluation import checkerboard, landmark_error
from .imaging import warp_similarity
from .io import atomic_write, field_to_bytes, image_to_bytes, landmarks_to_text, load_image, load_landmarks
from .metrics import mutual_information
from .pipeline import CHECKER_TILE, StageError, _stage, coarse_report_lines, fine_report_lines, fine_stage, \
    params_json, run_pipeline, write_artifacts
from .synth import SynthOptions, generate_pair


def _add_coarse_flags(p):
    p.add_argument("--bins", type=int, help="histogram bins per axis (64)")
    p.add_argument("--samples", type=int, help="MI samples per evaluation (20000)")
    p.add_argument("--seed", type=int, help="seed for MI sampling (7)")
    p.add_argument("--initial-step", type=float)
    p.add_argument("--min-step", type=float)
    p.add_argument("--max-iterations", type=int)


def _add_fine_flags(p):
    p.add_argument("--levels", type=int, help="Demons pyramid levels (3)")
    p.add_argument("--iters", type=int, help="Demons iterations per level (200)")
    p.add_argument("--sigma", type=float, help="field smoothing sigma in px (1.5)")
    p.add_argument("--tol", type=float, help="relative MSE convergence tolerance (1e-4)")
    p.add_argument("--low", type=float, help="Canny low threshold fraction (0.1)")
    p.add_argument("--high", type=float, help="Canny high threshold fraction (0.25)")
    p.add_argument("--edge-sigma", type=float, help="Canny smoothing sigma (1.4)")
    p.add_argument("--potential-sigma", type=float, help="edge potential sigma (2.0)")
    p.add_argument("--roi", type=int, nargs=4, metavar=("X", "Y", "W", "H"),
                   help="restrict fine registration to this rectangle")


def _apply_flags(cfg: PipelineConfig, args) -> PipelineConfig:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    return cfg.replace(**{
        "bins": get("bins"),
        "n_samples": get("samples"),
        "seed": get("seed"),
        "optimizer.initial_step": get("initial_step"),
        "optimizer.min_step": get("min_step"),
        "optimizer.max_iterations": get("max_iterations"),
        "demons.levels": get("levels"),
        "demons.iterations_per_level": get("iters"),
        "demons.smooth_sigma": get("sigma"),
        "demons.convergence_tol": get("tol"),
        "edges.low_threshold": get("low"),
        "edges.high_threshold": get("high"),
        "edges.gauss_sigma": get("edge_sigma"),
        "edges.potential_sigma": get("potential_sigma"),
        "roi": list(args.roi) if get("roi") else None,
        "scale_factor_mm_per_px": get("scale_mm"),
    })


def _write_all(out_dir, artifacts):
    write_artifacts(artifacts, out_dir)
    for name in sorted(artifacts):
        print(Path(out_dir) / name)


def cmd_coarse(args):
    cfg = _apply_flags(PipelineConfig(), args)
    fixed = _stage("load", load_image, args.fixed)
    moving = _stage("load", load_image, args.moving)
    res = _stage("coarse", register_coarse, fixed, moving, cfg.optimizer, cfg.bins, cfg.n_samples, cfg.seed)
    warped = _stage("coarse", warp_similarity, moving, res.params)
    lines = [f"mi_before     {mutual_information(fixed, moving, cfg.bins):.6f}",
             f"mi_after      {mutual_information(fixed, warped, cfg.bins):.6f}"] + coarse_report_lines(res)
    _write_all(args.out, {
        "coarse_warped.pgm": image_to_bytes(warped),
        "checker_coarse.pgm": image_to_bytes(checkerboard(fixed, warped, CHECKER_TILE)),
        "coarse_params.json": params_json(res.params),
        "report.txt": ("\n".join(lines) + "\n").encode("ascii"),
    })
    return 0


def cmd_fine(args):
    cfg = _apply_flags(PipelineConfig(), args)
    fixed = _stage("load", load_image, args.fixed)
    moving = _stage("load", load_image, args.moving)
    fine = _stage("fine", fine_stage, fixed, moving, cfg)
    _write_all(args.out, {
        "edges_fixed.pgm": image_to_bytes(fine.edges_fixed),
        "edges_moving.pgm": image_to_bytes(fine.edges_moving),
        "fine_warped.pgm": image_to_bytes(fine.warped),
        "checker_fine.pgm": image_to_bytes(checkerboard(fixed, fine.warped, CHECKER_TILE)),
        "field.dfld": field_to_bytes(fine.field),
        "report.txt": ("\n".join(fine_report_lines(fine)) + "\n").encode("ascii"),
    })
    return 0


def cmd_pipeline(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    cfg = _apply_flags(cfg, args)
    if (args.landmarks_fixed is None) != (args.landmarks_moving is None):
        raise StageError("input", ValueError("--landmarks-fixed and --landmarks-moving go together"))
    result = run_pipeline(cfg, args.fixed, args.moving, args.out, args.landmarks_fixed, args.landmarks_moving)
    for name in sorted(result.artifacts):
        print(Path(args.out) / name)
    return 0


def cmd_edges(args):
    cfg = PipelineConfig().replace(**{
        "edges.low_threshold": args.low, "edges.high_threshold": args.high, "edges.gauss_sigma": args.sigma})
    img = _stage("load", load_image, args.input)
    edges = _stage("edges", canny, img, cfg.edges)
    _stage("output", atomic_write, args.out, image_to_bytes(edges))
    return 0


def cmd_synth(args):
    opts = SynthOptions(translation=args.translation, rotation=args.rotation, scale=args.scale,
                        deform=args.deform, gap=args.gap, noise=args.noise,
                        n_landmarks=args.landmarks, size=args.size)
    pair = generate_pair(args.seed, opts)
    truth = {"seed": pair.seed, "tx": pair.truth_params.tx, "ty": pair.truth_params.ty,
             "theta": pair.truth_params.theta, "theta_deg": math.degrees(pair.truth_params.theta),
             "scale": pair.truth_params.scale}
    _write_all(args.out, {
        "fixed.pgm": image_to_bytes(pair.fixed),
        "moving.pgm": image_to_bytes(pair.moving),
        "truth_field.dfld": field_to_bytes(pair.truth_field),
        "landmarks_fixed.csv": landmarks_to_text(pair.landmarks_fixed).encode("ascii"),
        "landmarks_moving.csv": landmarks_to_text(pair.landmarks_moving).encode("ascii"),
        "truth.json": (json.dumps(truth, indent=2, sort_keys=True) + "\n").encode("ascii"),
    })
    return 0


def cmd_eval(args):
    a = _stage("load", load_landmarks, args.landmarks_a)
    b = _stage("load", load_landmarks, args.landmarks_b)
    print(_stage("eval", landmark_error, a, b, args.scale_mm).format())
    return 0


def cmd_overlay(args):
    a = _stage("load", load_image, args.a)
    b = _stage("load", load_image, args.b)
    out = _stage("overlay", checkerboard, a, b, args.tile)
    _stage("output", atomic_write, args.out, image_to_bytes(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmreg", description="Coarse-to-fine multimodal image registration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coarse", help="MI similarity registration")
    p.add_argument("--fixed", required=True)
    p.add_argument("--moving", required=True)
    p.add_argument("--out", required=True)
    _add_coarse_flags(p)
    p.set_defaults(func=cmd_coarse)

    p = sub.add_parser("fine", help="edge maps + Demons on a pre-aligned pair")
    p.add_argument("--fixed", required=True)
    p.add_argument("--moving", required=True)
    p.add_argument("--out", required=True)
    _add_fine_flags(p)
    p.set_defaults(func=cmd_fine)

    p = sub.add_parser("pipeline", help="full coarse -> fine flow")
    p.add_argument("--config")
    p.add_argument("--fixed", required=True)
    p.add_argument("--moving", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--landmarks-fixed")
    p.add_argument("--landmarks-moving")
    p.add_argument("--scale-mm", type=float)
    _add_coarse_flags(p)
    _add_fine_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("edges", help="Canny edge map")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--low", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("synth", help="generate a synthetic visible/IR pair with ground truth")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--deform", type=float, default=6.0, help="max free-form displacement, px")
    p.add_argument("--gap", type=float, default=0.8, help="modality gap strength in [0, 1]")
    p.add_argument("--translation", type=float, default=10.0)
    p.add_argument("--rotation", type=float, default=10.0, help="degrees")
    p.add_argument("--scale", type=float, default=0.1, help="max |scale - 1|")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--landmarks", type=int, default=8)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="landmark error report")
    p.add_argument("--landmarks-a", required=True)
    p.add_argument("--landmarks-b", required=True)
    p.add_argument("--scale-mm", type=float, default=1.2)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("overlay", help="checkerboard fusion of two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--tile", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RegistrationError, OSError, ValueError) as exc:
        print(f"mmreg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
