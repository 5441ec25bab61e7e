"""Box-constrained maximisation by projected limited-memory quasi-Newton steps.

Internally the solver minimises ``-objective / scale`` where ``scale`` is fixed
from the starting point, so tolerances are relative to the objective size.
Each iteration splits the variables into a binding set (at a bound with the
gradient pushing outward) and a free set. Free variables get an L-BFGS
direction, binding ones a scaled gradient step, and an Armijo backtracking
search runs along the projected path. Every iterate is clipped into the box,
so feasibility holds exactly.
"""

from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericalError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 2000
    grad_tol: float = 1e-6
    step_tol: float = 1e-10
    memory: int = 10
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50
    restarts: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.grad_tol <= 0 or self.step_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 1:
            raise ValueError("line-search constants must lie in (0, 1)")
        if self.max_iters < 0 or self.restarts < 0:
            raise ValueError("max_iters and restarts must be nonnegative")


@dataclass
class SolveReport:
    u_opt: np.ndarray
    objective: float
    projected_grad_norm: float
    iterations: int
    converged: bool
    objective_history: list = field(default_factory=list)
    scale: float = 1.0
    message: str = ""
    n_evals: int = 0
    restarts: list = field(default_factory=list)


def project(u, lo, hi):
    return np.minimum(np.maximum(u, lo), hi)


def projected_gradient(u, g, lo, hi):
    """Ascent-convention projected gradient: ``P(u + g) - u``."""
    return project(u + g, lo, hi) - u


def _two_loop(q, s_hist, y_hist, free):
    """Apply the L-BFGS inverse Hessian approximation to ``q`` on ``free``."""
    q = q.copy()
    alphas = []
    pairs = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        sf, yf = s[free], y[free]
        sy = sf @ yf
        if sy <= 1e-12 * np.linalg.norm(sf) * np.linalg.norm(yf) or sy <= 0:
            continue
        pairs.append((sf, yf, 1.0 / sy))
    for sf, yf, rho in pairs:
        a = rho * (sf @ q)
        alphas.append(a)
        q -= a * yf
    if pairs:
        sf, yf, _ = pairs[0]
        q *= (sf @ yf) / (yf @ yf)
        gamma = (sf @ yf) / (yf @ yf)
    else:
        gamma = None
    for (sf, yf, rho), a in zip(reversed(pairs), reversed(alphas)):
        b = rho * (yf @ q)
        q += (a - b) * sf
    return q, gamma


def _minimize(fun, lo, hi, x0, opts: SolveOptions, scale: float) -> SolveReport:
    """Projected L-BFGS on ``f = -objective / scale``."""
    n_evals = 0

    def evaluate(x):
        nonlocal n_evals
        n_evals += 1
        try:
            val, grad = fun(x)
        except (NumericalError, FloatingPointError):
            return np.nan, None
        if not np.isfinite(val):
            return np.nan, None
        return -val / scale, -np.asarray(grad, dtype=float) / scale

    x = x0.copy()
    f, g = evaluate(x)
    if not np.isfinite(f) or g is None or not np.all(np.isfinite(g)):
        return SolveReport(x, np.nan, np.inf, 0, False, [], scale, "objective not finite at start",
                           n_evals)
    history = [-f * scale]
    s_hist: deque = deque(maxlen=opts.memory)
    y_hist: deque = deque(maxlen=opts.memory)
    pg_norm = np.max(np.abs(projected_gradient(x, -g, lo, hi)), initial=0.0)
    converged = pg_norm <= opts.grad_tol
    message = "converged" if converged else ""
    it = 0
    while not converged and it < opts.max_iters:
        it += 1
        # binding set: at a bound with the descent direction pointing outward
        eps = min(1e-8, pg_norm)
        at_lo = (x <= lo + eps) & (g > 0)
        at_hi = (x >= hi - eps) & (g < 0)
        free = ~(at_lo | at_hi)
        d = np.zeros_like(x)
        hv, gamma = _two_loop(g[free], s_hist, y_hist, free) if free.any() else (np.zeros(0), None)
        d[free] = -hv
        if gamma is None:
            gmax = np.max(np.abs(g))
            gamma = min(1.0, 0.1 / gmax) if gmax > 0 else 1.0
            d[free] = -gamma * g[free]
        d[~free] = -gamma * g[~free]
        if g @ d >= 0:
            s_hist.clear()
            y_hist.clear()
            gmax = np.max(np.abs(g))
            d = -min(1.0, 0.1 / gmax) * g if gmax > 0 else -g

        step = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            x_new = project(x + step * d, lo, hi)
            dx = x_new - x
            if not dx.any():
                break
            f_new, g_new = evaluate(x_new)
            if np.isfinite(f_new) and f_new <= f + opts.armijo * (g @ dx) and f_new <= f:
                accepted = True
                break
            step *= opts.backtrack
        if not accepted:
            if s_hist:
                # retry once from a plain projected-gradient direction
                s_hist.clear()
                y_hist.clear()
                continue
            message = "line search failed"
            break
        s_vec, y_vec = dx, g_new - g
        if s_vec @ y_vec > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            s_hist.append(s_vec)
            y_hist.append(y_vec)
        x, f, g = x_new, f_new, g_new
        history.append(-f * scale)
        pg_norm = np.max(np.abs(projected_gradient(x, -g, lo, hi)), initial=0.0)
        if pg_norm <= opts.grad_tol:
            converged = True
            message = "converged"
        elif np.max(np.abs(dx)) < opts.step_tol and abs(history[-1] - history[-2]) <= (
                opts.step_tol * max(1.0, abs(history[-1]))):
            message = "step below step_tol"
            break
    if not converged and not message:
        message = "iteration limit"
    return SolveReport(
        u_opt=x, objective=-f * scale, projected_grad_norm=float(pg_norm), iterations=it,
        converged=bool(converged), objective_history=history, scale=scale, message=message,
        n_evals=n_evals,
    )


def solve_box_max(objective: Callable, lo, hi, u_init, opts: SolveOptions | None = None,
                  scale: float | None = None) -> SolveReport:
    """Maximise ``objective`` over the box ``[lo, hi]``.

    ``objective(u)`` returns ``(value, gradient)``. ``projected_grad_norm`` and
    the convergence test use the gradient divided by ``scale``, which defaults
    to ``max(1, |objective(u_init)|)``. With ``opts.restarts > 0`` additional
    seeded uniform starts are solved and the best objective wins,
    with every run listed in ``report.restarts``.
    """
    opts = opts or SolveOptions()
    lo = np.broadcast_to(np.asarray(lo, dtype=float), np.shape(u_init)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), np.shape(u_init)).copy()
    u0 = np.asarray(u_init, dtype=float)
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")
    x0 = project(u0, lo, hi)
    if np.any(x0 != u0):
        warnings.warn("initial point outside the box; projected", stacklevel=2)
    if scale is None:
        try:
            v0, _ = objective(x0)
        except NumericalError:
            v0 = np.nan
        scale = max(1.0, abs(v0)) if np.isfinite(v0) else 1.0

    best = _minimize(objective, lo, hi, x0, opts, scale)
    if opts.restarts:
        rng = np.random.default_rng(opts.seed)
        runs = [best]
        for _ in range(opts.restarts):
            start = lo + (hi - lo) * rng.random(x0.shape)
            runs.append(_minimize(objective, lo, hi, start, opts, scale))
        best = max(runs, key=lambda r: r.objective if np.isfinite(r.objective) else -np.inf)
        best.restarts = runs
    log.debug("solve_box_max: %s after %d iterations, objective %.10g, pg %.3g",
              best.message, best.iterations, best.objective, best.projected_grad_norm)
    return best
