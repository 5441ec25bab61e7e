"""Glue between welfare objectives and the box solver."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import constant_controls
from .grad import ObjectiveSpec, objective_and_gradient
from .params import ExogenousPaths, ModelParams
from .solve import SolveOptions, SolveReport, solve_box_max

DEFAULT_MU = 0.1
DEFAULT_S = 0.25


def control_bounds(steps: int, n: int, params: ModelParams):
    lo = np.zeros((steps, n, 2))
    hi = np.ones((steps, n, 2))
    hi[..., 1] = params.s_max
    return lo, hi


def default_guess(steps: int, n: int, params: ModelParams) -> np.ndarray:
    return constant_controls(steps, n, DEFAULT_MU, min(DEFAULT_S, params.s_max))


def optimize_controls(spec: ObjectiveSpec, x_start, exo: ExogenousPaths, params: ModelParams,
                      u_init, opts: SolveOptions | None = None, t0: int = 0,
                      scale: float | None = None):
    """Maximise ``spec`` over its free control entries; returns ``(U_opt, report)``.

    Masked entries keep their ``u_init`` values.
    """
    base = np.array(u_init, dtype=float)
    free = spec.free(base.shape)
    lo, hi = control_bounds(base.shape[0], base.shape[1], params)

    def fun(v):
        U = base.copy()
        U[free] = v
        rep = objective_and_gradient(spec, U, x_start, exo, params, t0=t0)
        return rep.value, rep.full_grad[free]

    report = solve_box_max(fun, lo[free], hi[free], base[free], opts, scale=scale)
    U = base.copy()
    U[free] = report.u_opt
    report.u_opt = U
    return U, report


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("RICE_DG_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map; uses ``RICE_DG_THREADS`` worker threads when > 1."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


__all__ = ["control_bounds", "default_guess", "optimize_controls", "parallel_map", "SolveReport"]
