"""Coarse stage: MI-maximizing similarity search with regular-step gradient ascent."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import OutOfBounds
from .imaging import SimilarityParams, as_image, pyramid, rescale_params
from .metrics import DEFAULT_BINS, MISampler


@dataclass(frozen=True)
class OptimizerConfig:
    initial_step: float = 2.0
    min_step: float = 1e-3
    relaxation: float = 0.5
    max_iterations: int = 200
    fd_epsilon: tuple = (0.5, 0.5, 0.005, 0.005)

    def __post_init__(self):
        if not 0 < self.min_step < self.initial_step:
            raise ValueError("require 0 < min_step < initial_step")
        if not 0 < self.relaxation < 1:
            raise ValueError("relaxation must lie in (0, 1)")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        eps = tuple(float(e) for e in self.fd_epsilon)
        if len(eps) != 4 or any(e <= 0 for e in eps):
            raise ValueError("fd_epsilon needs four positive offsets (tx, ty, theta, scale)")
        object.__setattr__(self, "fd_epsilon", eps)


@dataclass
class CoarseResult:
    params: SimilarityParams
    final_mi: float
    iterations: int
    trace: list = field(default_factory=list)  # [(SimilarityParams, mi), ...]
    converged: bool = False
    levels: list = field(default_factory=list)  # per pyramid level, coarsest first
    steps: list = field(default_factory=list)   # step length used at each iteration


def fd_gradient(objective: Callable[[SimilarityParams], float], p: SimilarityParams,
                eps: Sequence[float]) -> np.ndarray:
    """Central-difference gradient over ``(tx, ty, theta, scale)``."""
    base = p.as_array()
    grad = np.zeros(4)
    for i in range(4):
        step = np.zeros(4)
        step[i] = eps[i]
        hi = objective(SimilarityParams.from_array(base + step))
        lo = objective(SimilarityParams.from_array(base - step))
        grad[i] = (hi - lo) / (2.0 * eps[i])
    return grad


def mi_objective_gradient(fixed, moving, p: SimilarityParams, cfg: OptimizerConfig = OptimizerConfig(),
                          bins: int = DEFAULT_BINS, n_samples: int = 20000, seed: int = 0) -> np.ndarray:
    """Finite-difference gradient of sampled MI, all evaluations sharing one sample set."""
    sampler = MISampler(fixed, moving, n_samples, bins, seed)
    return fd_gradient(sampler, p, cfg.fd_epsilon)


def regular_step_descent(objective: Callable[[SimilarityParams], float], init: SimilarityParams,
                         cfg: OptimizerConfig = OptimizerConfig(),
                         gradient: Optional[Callable[[SimilarityParams], np.ndarray]] = None,
                         radius: float = 1.0) -> CoarseResult:
    """Maximize ``objective`` from ``init`` with a regular-step scheme.

    Moves a fixed step along the normalized ascent direction and multiplies
    the step by ``cfg.relaxation`` whenever the direction reverses (or the
    gradient vanishes). The rotation and scale coordinates are multiplied by
    ``radius`` (half the image diagonal) so a unit step in any coordinate
    moves image content by roughly one pixel.
    """
    if gradient is None:
        def gradient(q):
            return fd_gradient(objective, q, cfg.fd_epsilon)

    scales = np.array([1.0, 1.0, radius, radius])
    p = init.as_array()
    value = objective(init)
    init_value = value
    grad = gradient(init) / scales
    prev_dir = None
    step = cfg.initial_step
    trace = []
    steps = []
    converged = False

    for _ in range(cfg.max_iterations):
        norm = float(np.linalg.norm(grad))
        direction = grad / norm if norm > 0 else None
        if direction is None or (prev_dir is not None and float(direction @ prev_dir) < 0):
            step *= cfg.relaxation
        if step < cfg.min_step:
            converged = True
            trace.append((SimilarityParams.from_array(p), value))
            steps.append(step)
            break
        if direction is not None:
            p = p + step * direction / scales
            if p[3] <= 0:
                p[3] = 1e-6
            q = SimilarityParams.from_array(p)
            value = objective(q)
            grad = gradient(q) / scales
            prev_dir = direction
        trace.append((SimilarityParams.from_array(p), value))
        steps.append(step)

    final = SimilarityParams.from_array(p)
    if value < init_value:
        # never hand back something worse than the start
        final, value = init, init_value
    return CoarseResult(final, value, len(trace), trace, converged, steps=steps)


def register_coarse(fixed, moving, cfg: OptimizerConfig = OptimizerConfig(), bins: int = DEFAULT_BINS,
                    n_samples: int = 20000, seed: int = 0, levels: int = 3,
                    init: Optional[SimilarityParams] = None) -> CoarseResult:
    """Multi-resolution MI registration of ``moving`` onto ``fixed``.

    The returned params ``p`` satisfy ``warp_similarity(moving, p) ~ fixed``.
    """
    fixed = as_image(fixed)
    moving = as_image(moving)
    fixed_levels = pyramid(fixed, levels)
    moving_levels = pyramid(moving, levels)

    p = init if init is not None else SimilarityParams.identity()
    # express the initial guess on the coarsest level
    factor = 2.0 ** (levels - 1)
    p = rescale_params(p, fixed.shape, fixed_levels[0].shape, 1.0 / factor)

    per_level = []
    result = None
    for i, (f, m) in enumerate(zip(fixed_levels, moving_levels)):
        if i > 0:
            p = rescale_params(p, fixed_levels[i - 1].shape, f.shape, 2.0)
        sampler = MISampler(f, m, n_samples, bins, seed)
        radius = 0.5 * math.hypot(*f.shape)
        result = regular_step_descent(sampler, p, cfg, radius=radius)
        per_level.append(result)
        p = result.params
    result.levels = per_level
    return result


def crop_roi(img, rect) -> np.ndarray:
    """Sub-image for ``rect = (x, y, w, h)`` in pixels."""
    img = as_image(img)
    x, y, w, h = (int(v) for v in rect)
    ih, iw = img.shape
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > iw or y + h > ih:
        raise OutOfBounds(f"rect {tuple(rect)} outside {iw}x{ih} image")
    return img[y:y + h, x:x + w].copy()
