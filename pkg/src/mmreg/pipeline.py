"""Coarse-to-fine pipeline: MI similarity search, edge maps, Demons, reporting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .coarse import CoarseResult, crop_roi, register_coarse
from .config import PipelineConfig
from .demons import DemonsResult, demons_register
from .edges import canny, edge_potential
from .errors import DimensionMismatch, RegistrationError
from .evaluation import EvalReport, checkerboard, landmark_error, registered_correspondences
from .imaging import SimilarityParams, as_image, warp_field, warp_similarity, zero_field
from .io import atomic_write, field_to_bytes, image_to_bytes, load_image, load_landmarks
from .metrics import mutual_information

CHECKER_TILE = 16


class StageError(RegistrationError):
    """An error raised inside a named pipeline stage."""

    def __init__(self, stage: str, exc: BaseException):
        self.stage = stage
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")


@dataclass
class FineOutput:
    demons: DemonsResult
    field: np.ndarray        # full image size, zero outside the ROI
    warped: np.ndarray
    edges_fixed: np.ndarray
    edges_moving: np.ndarray


@dataclass
class PipelineResult:
    coarse: CoarseResult
    coarse_warped: np.ndarray
    fine: FineOutput
    mi_before: float
    mi_coarse: float
    mi_fine: float
    landmarks: dict = field(default_factory=dict)   # stage name -> EvalReport
    artifacts: dict = field(default_factory=dict)   # file name -> bytes


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (RegistrationError, OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


def fine_stage(fixed, moving, cfg: PipelineConfig) -> FineOutput:
    """Edge maps and Demons on an (already coarsely aligned) pair, optionally inside ``cfg.roi``."""
    fixed = as_image(fixed)
    moving = as_image(moving)
    if fixed.shape != moving.shape:
        raise DimensionMismatch(f"{fixed.shape} vs {moving.shape}")
    if cfg.roi is not None:
        f_roi, m_roi = crop_roi(fixed, cfg.roi), crop_roi(moving, cfg.roi)
    else:
        f_roi, m_roi = fixed, moving
    edges_f = canny(f_roi, cfg.edges)
    edges_m = canny(m_roi, cfg.edges)
    result = demons_register(edge_potential(edges_f, cfg.edges), edge_potential(edges_m, cfg.edges), cfg.demons)
    if cfg.roi is not None:
        x, y, w, h = cfg.roi
        full = zero_field(*fixed.shape)
        full[y:y + h, x:x + w] = result.field
    else:
        full = result.field
    return FineOutput(result, full, warp_field(moving, full), edges_f, edges_m)


def evaluate_landmarks(points_fixed, points_moving, params: SimilarityParams, fld, shape,
                       scale_mm: float) -> EvalReport:
    est = registered_correspondences(points_fixed, params, fld, shape=shape)
    return landmark_error(est, points_moving, scale_mm)


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def format_params(p: SimilarityParams) -> str:
    return (f"tx={_fmt(p.tx)} ty={_fmt(p.ty)} theta_rad={_fmt(p.theta)} "
            f"theta_deg={_fmt(math.degrees(p.theta))} scale={_fmt(p.scale)}")


def coarse_report_lines(coarse: CoarseResult) -> list:
    lines = ["[coarse]", f"params        {format_params(coarse.params)}",
             f"final_mi      {_fmt(coarse.final_mi)}",
             f"converged     {coarse.converged}"]
    for i, lv in enumerate(coarse.levels):
        lines.append(f"level {i}       iterations={lv.iterations} mi={_fmt(lv.final_mi)} converged={lv.converged}")
    return lines


def fine_report_lines(fine: FineOutput) -> list:
    lines = ["[fine]"]
    for i, lv in enumerate(fine.demons.levels):
        last = lv.accepted[-1] if lv.accepted else lv.initial_mse
        lines.append(f"level {i}       {lv.shape[1]}x{lv.shape[0]} iterations={lv.iterations} "
                     f"mse_start={lv.initial_mse:.8f} mse_end={last:.8f} stop={lv.stop_reason}")
    mag = np.hypot(fine.field[..., 0], fine.field[..., 1])
    lines.append(f"field_max_px  {_fmt(float(mag.max()))}")
    lines.append(f"field_mean_px {_fmt(float(mag.mean()))}")
    return lines


def landmark_report_lines(reports: dict) -> list:
    lines = []
    for stage, rep in reports.items():
        lines.append(f"[landmarks {stage}]")
        lines.extend(rep.format().splitlines())
    return lines


def run_pipeline_arrays(fixed, moving, cfg: PipelineConfig = PipelineConfig(),
                        landmarks_fixed=None, landmarks_moving=None) -> PipelineResult:
    """Full coarse-to-fine registration in memory; artifacts are returned as bytes."""
    fixed = _stage("input", as_image, fixed)
    moving = _stage("input", as_image, moving)
    if fixed.shape != moving.shape:
        raise StageError("input", DimensionMismatch(f"fixed {fixed.shape} vs moving {moving.shape}"))

    coarse = _stage("coarse", register_coarse, fixed, moving, cfg.optimizer, cfg.bins, cfg.n_samples, cfg.seed)
    coarse_warped = _stage("coarse", warp_similarity, moving, coarse.params)
    fine = _stage("fine", fine_stage, fixed, coarse_warped, cfg)

    mi_before = mutual_information(fixed, moving, cfg.bins)
    mi_coarse = mutual_information(fixed, coarse_warped, cfg.bins)
    mi_fine = mutual_information(fixed, fine.warped, cfg.bins)

    reports = {}
    if landmarks_fixed is not None and landmarks_moving is not None:
        scale = cfg.scale_factor_mm_per_px
        reports["before"] = _stage("landmarks", landmark_error, landmarks_fixed, landmarks_moving, scale)
        reports["coarse"] = _stage("landmarks", evaluate_landmarks, landmarks_fixed, landmarks_moving,
                                   coarse.params, None, fixed.shape, scale)
        reports["fine"] = _stage("landmarks", evaluate_landmarks, landmarks_fixed, landmarks_moving,
                                 coarse.params, fine.field, fixed.shape, scale)

    result = PipelineResult(coarse, coarse_warped, fine, mi_before, mi_coarse, mi_fine, reports)

    lines = ["mmreg pipeline report", f"image         {fixed.shape[1]}x{fixed.shape[0]}",
             f"roi           {cfg.roi if cfg.roi is not None else 'full'}",
             f"mi_before     {_fmt(mi_before)}", f"mi_coarse     {_fmt(mi_coarse)}",
             f"mi_fine       {_fmt(mi_fine)}"]
    lines += coarse_report_lines(coarse) + fine_report_lines(fine) + landmark_report_lines(reports)

    result.artifacts = {
        "coarse_warped.pgm": image_to_bytes(coarse_warped),
        "checker_coarse.pgm": image_to_bytes(checkerboard(fixed, coarse_warped, CHECKER_TILE)),
        "edges_fixed.pgm": image_to_bytes(fine.edges_fixed),
        "edges_moving.pgm": image_to_bytes(fine.edges_moving),
        "fine_warped.pgm": image_to_bytes(fine.warped),
        "checker_fine.pgm": image_to_bytes(checkerboard(fixed, fine.warped, CHECKER_TILE)),
        "field.dfld": field_to_bytes(fine.field),
        "coarse_params.json": params_json(coarse.params),
        "config.json": (json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n").encode("ascii"),
        "report.txt": ("\n".join(lines) + "\n").encode("ascii"),
    }
    return result


def params_json(p: SimilarityParams) -> bytes:
    data = {"tx": p.tx, "ty": p.ty, "theta": p.theta, "scale": p.scale}
    return (json.dumps(data, indent=2, sort_keys=True) + "\n").encode("ascii")


def write_artifacts(artifacts: dict, out_dir) -> None:
    """Write every artifact atomically; called only after all stages succeeded."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StageError("output", exc) from exc
    for name in sorted(artifacts):
        _stage("output", atomic_write, out / name, artifacts[name])


def run_pipeline(cfg: PipelineConfig, fixed_path, moving_path, out_dir,
                 landmarks_fixed_path=None, landmarks_moving_path=None) -> PipelineResult:
    """Load inputs, run every stage, then write all artifacts to ``out_dir``."""
    fixed = _stage("load", load_image, fixed_path)
    moving = _stage("load", load_image, moving_path)
    lm_f: Optional[np.ndarray] = None
    lm_m: Optional[np.ndarray] = None
    if landmarks_fixed_path is not None and landmarks_moving_path is not None:
        lm_f = _stage("load", load_landmarks, landmarks_fixed_path)
        lm_m = _stage("load", load_landmarks, landmarks_moving_path)
    result = run_pipeline_arrays(fixed, moving, cfg, lm_f, lm_m)
    write_artifacts(result.artifacts, out_dir)
    return result
