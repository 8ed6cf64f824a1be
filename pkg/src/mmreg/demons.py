"""Multi-scale Demons registration with Gaussian field regularization."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DimensionMismatch
from .imaging import as_field, as_image, gaussian_smooth, pyramid, upsample_field2, warp_field, zero_field

CONVERGED = "converged"
MSE_INCREASE = "mse_increase"
MAX_ITERATIONS = "max_iterations"
STOP_REASONS = (CONVERGED, MSE_INCREASE, MAX_ITERATIONS)


@dataclass(frozen=True)
class DemonsConfig:
    levels: int = 3
    iterations_per_level: int = 200
    smooth_sigma: float = 1.5
    convergence_tol: float = 1e-4
    epsilon_denominator: float = 1e-9

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError("levels must be a positive integer")
        if int(self.iterations_per_level) != self.iterations_per_level or self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be a positive integer")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.smooth_sigma < 0:
            raise ValueError("smooth_sigma must be >= 0")
        if not self.epsilon_denominator > 0:
            raise ValueError("epsilon_denominator must be positive")


@dataclass
class LevelTrace:
    shape: tuple
    initial_mse: float
    mse: list = dc_field(default_factory=list)
    stop_reason: str = MAX_ITERATIONS

    @property
    def iterations(self) -> int:
        return len(self.mse)

    @property
    def accepted(self) -> list:
        """MSE values of accepted iterations (a rejected final one is dropped)."""
        if self.stop_reason == MSE_INCREASE:
            return self.mse[:-1]
        return list(self.mse)


@dataclass
class DemonsResult:
    field: np.ndarray
    levels: list  # LevelTrace per pyramid level, coarsest first

    @property
    def mse_trace(self) -> list:
        return [lv.mse for lv in self.levels]

    @property
    def iterations_used(self) -> list:
        return [lv.iterations for lv in self.levels]

    @property
    def stop_reason(self) -> list:
        return [lv.stop_reason for lv in self.levels]


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def static_gradient(static) -> np.ndarray:
    """Central-difference gradient of the static image as an ``(h, w, 2)`` array."""
    gy, gx = np.gradient(as_image(static))
    return np.stack([gx, gy], axis=-1)


def demons_step(static, moving_warped, grad, cfg: DemonsConfig = DemonsConfig()) -> np.ndarray:
    """Thirion force ``diff * grad / (diff**2 + |grad|**2)`` with ``diff = moving - static``.

    The result is the displacement that pushes moving-image content toward
    the static image; it is zero wherever the denominator falls below
    ``cfg.epsilon_denominator``.
    """
    static = np.asarray(static, dtype=np.float64)
    moving_warped = np.asarray(moving_warped, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if static.shape != moving_warped.shape or grad.shape != static.shape + (2,):
        raise DimensionMismatch(
            f"static {static.shape}, moving {moving_warped.shape}, gradient {grad.shape}")
    diff = moving_warped - static
    denom = diff ** 2 + grad[..., 0] ** 2 + grad[..., 1] ** 2
    ok = denom >= cfg.epsilon_denominator
    scale = np.zeros_like(diff)
    scale[ok] = diff[ok] / denom[ok]
    return grad * scale[..., None]


def _register_level(static, moving, field, cfg, trace):
    grad = static_gradient(static)
    warped = warp_field(moving, field)
    prev = trace.initial_mse
    for _ in range(cfg.iterations_per_level):
        force = demons_step(static, warped, grad, cfg)
        # the field samples the moving image, so content moved by +force
        # corresponds to sampling offsets of -force
        candidate = gaussian_smooth(field - force, cfg.smooth_sigma)
        cand_warped = warp_field(moving, candidate)
        value = mse(static, cand_warped)
        trace.mse.append(value)
        if value > prev:
            trace.stop_reason = MSE_INCREASE
            return field
        field, warped = candidate, cand_warped
        decrease = (prev - value) / prev if prev > 0 else 0.0
        prev = value
        if decrease < cfg.convergence_tol:
            trace.stop_reason = CONVERGED
            return field
    trace.stop_reason = MAX_ITERATIONS
    return field


def demons_register(static, moving, cfg: DemonsConfig = DemonsConfig(), init_field=None) -> DemonsResult:
    """Coarse-to-fine Demons; returns a full-resolution sampling field.

    ``warp_field(moving, result.field)`` approximates ``static``.
    """
    static = as_image(static)
    moving = as_image(moving)
    if static.shape != moving.shape:
        raise DimensionMismatch(f"{static.shape} vs {moving.shape}")
    statics = pyramid(static, cfg.levels)
    movings = pyramid(moving, cfg.levels)

    h0, w0 = statics[0].shape
    if init_field is None:
        field = zero_field(h0, w0)
    else:
        field = as_field(init_field)
        if field.shape[:2] != (h0, w0):
            raise DimensionMismatch(f"initial field {field.shape[:2]} vs level {(h0, w0)}")

    levels = []
    for i, (s, m) in enumerate(zip(statics, movings)):
        if i > 0:
            field = upsample_field2(field, s.shape[1], s.shape[0])
        trace = LevelTrace(s.shape, mse(s, warp_field(m, field)))
        field = _register_level(s, m, field, cfg, trace)
        levels.append(trace)
    return DemonsResult(field, levels)
