"""Cooperative solutions: welfare maximisation, Pareto frontier, MPC."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import State, Trajectory, as_state, simulate, step
from .errors import ContractError, RiceError, SolverError
from .grad import ObjectiveSpec
from .params import DEVELOPED, DEVELOPING, ExogenousPaths, ModelParams
from .problem import default_guess, optimize_controls, parallel_map
from .scc import scc_table
from .solve import SolveOptions, SolveReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterSplit:
    developed: tuple = DEVELOPED
    developing: tuple = DEVELOPING

    def __post_init__(self):
        if set(self.developed) & set(self.developing):
            raise ContractError("clusters must be disjoint")

    def check(self, n: int):
        if sorted(self.developed + self.developing) != list(range(n)):
            raise ContractError(f"clusters must cover all {n} regions exactly once")


@dataclass
class SwmResult:
    controls: np.ndarray
    trajectory: Trajectory
    report: SolveReport
    objective: float
    welfare: np.ndarray
    scc: np.ndarray

    @property
    def converged(self) -> bool:
        return self.report.converged


def _start(x0, params: ModelParams) -> State:
    return as_state(params.initial if x0 is None else x0)


def solve_swm(params: ModelParams, exo: ExogenousPaths, opts: SolveOptions | None = None,
              x0=None, weights=None, u_init=None) -> SwmResult:
    """Maximise the Negishi-weighted welfare sum over every control on ``0..T``."""
    steps = params.T + 1
    weights = params.regions.c if weights is None else np.asarray(weights, dtype=float)
    x = _start(x0, params)
    u0 = default_guess(steps, params.n, params) if u_init is None else u_init
    spec = ObjectiveSpec.weighted(weights)
    U, report = optimize_controls(spec, x, exo, params, u0, opts)
    traj = simulate(x, U, exo, params)
    return SwmResult(U, traj, report, report.objective, traj.j.copy(), scc_table(traj, params))


# --------------------------------------------------------------------------
# Pareto frontier
# --------------------------------------------------------------------------


@dataclass
class ParetoPoint:
    """One scalarised solve; ``t_at_final`` is the temperature at step ``T``."""

    p: float
    w_developed: float
    w_developing: float
    u_opt: np.ndarray
    t_at_final: float
    converged: bool
    objective: float = float("nan")


def pareto_point(p: float, params: ModelParams, exo: ExogenousPaths, opts=None, x0=None,
                 split: ClusterSplit = ClusterSplit(), u_init=None) -> ParetoPoint:
    if not 0 <= p <= 1:
        raise ContractError(f"p must lie in [0, 1], got {p}")
    split.check(params.n)
    steps = params.T + 1
    x = _start(x0, params)
    spec = ObjectiveSpec.pareto(p, params.n, split.developed, split.developing)
    u0 = default_guess(steps, params.n, params) if u_init is None else u_init
    U, report = optimize_controls(spec, x, exo, params, u0, opts)
    traj = simulate(x, U, exo, params)
    return ParetoPoint(
        p=float(p),
        w_developed=float(traj.j[list(split.developed)].sum()),
        w_developing=float(traj.j[list(split.developing)].sum()),
        u_opt=U,
        t_at_final=float(traj.t_at[params.T]),
        converged=report.converged,
        objective=report.objective,
    )


def pareto_frontier(p_grid, params: ModelParams, exo: ExogenousPaths, opts=None, x0=None,
                    split: ClusterSplit = ClusterSplit(), warm_start: bool = True) -> list:
    """Solve one scalarised problem per weight in ``p_grid``.

    With ``warm_start`` each point starts from its predecessor's solution
    (sequential); otherwise the points are independent and may run on the
    worker pool. A failing point is recorded as non-converged.
    """
    p_grid = [float(p) for p in p_grid]
    for p in p_grid:
        if not 0 <= p <= 1:
            raise ContractError(f"p must lie in [0, 1], got {p}")

    def one(p, u_init=None):
        try:
            return pareto_point(p, params, exo, opts, x0, split, u_init)
        except RiceError as exc:
            log.warning("pareto point p=%s failed: %s", p, exc)
            nan = float("nan")
            return ParetoPoint(p, nan, nan, u_init, nan, False)

    if not warm_start:
        return parallel_map(one, p_grid)
    points = []
    prev = None
    for p in p_grid:
        pt = one(p, prev)
        points.append(pt)
        if pt.converged:
            prev = pt.u_opt
    return points


def default_p_grid(size: int = 1001) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


# --------------------------------------------------------------------------
# receding horizon (MPC)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MpcConfig:
    """``horizon_end`` (absolute step) truncates windows at the end of the run."""

    t_sim: int
    t_rh: int
    warm_start: bool = True
    horizon_end: int | None = None

    def __post_init__(self):
        if self.t_rh < 1:
            raise ContractError("t_rh must be at least 1")
        if self.t_sim < 0:
            raise ContractError("t_sim must be nonnegative")
        if self.horizon_end is not None and self.horizon_end < self.t_sim:
            raise ContractError("horizon_end must not precede t_sim")


@dataclass
class MpcResult:
    controls: np.ndarray
    trajectory: Trajectory
    objective: float
    windows: list = field(default_factory=list)
    window_controls: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.windows)


def _window_end(t: int, t_rh: int, horizon_end) -> int:
    end = t + t_rh
    return end if horizon_end is None else min(end, horizon_end)


def _shift_guess(prev: np.ndarray, steps: int) -> np.ndarray:
    tail = prev[1:]
    if tail.shape[0] >= steps:
        return tail[:steps].copy()
    pad = np.repeat(tail[-1:] if tail.size else prev[-1:], steps - tail.shape[0], axis=0)
    return np.concatenate([tail, pad])


def mpc_rice(cfg: MpcConfig, params: ModelParams, exo: ExogenousPaths, opts=None, x0=None,
             weights=None) -> MpcResult:
    """Receding-horizon approximation of the welfare-maximising policy.

    At each ``t = 0..t_sim`` the weighted welfare over steps ``t..t+t_rh`` is
    maximised from the observed state and only the first control is applied.
    Exogenous paths are held at their last values past the data horizon.
    """
    n = params.n
    weights = params.regions.c if weights is None else np.asarray(weights, dtype=float)
    last = max(_window_end(t, cfg.t_rh, cfg.horizon_end) for t in range(cfg.t_sim + 1))
    exo = exo.extended(last + 1)
    spec = ObjectiveSpec.weighted(weights)
    x = _start(x0, params)
    x_init = x
    applied, reports, plans = [], [], []
    prev = None
    for t in range(cfg.t_sim + 1):
        end = _window_end(t, cfg.t_rh, cfg.horizon_end)
        steps = end - t + 1
        if cfg.warm_start and prev is not None:
            guess = _shift_guess(prev, steps)
        else:
            guess = default_guess(steps, n, params)
        try:
            U, report = optimize_controls(spec, x, exo, params, guess, opts, t0=t)
        except Exception as exc:
            partial = np.array(applied) if applied else None
            raise SolverError(f"MPC window at t={t} failed: {exc}", partial=partial) from exc
        reports.append(report)
        plans.append(U)
        applied.append(U[0])
        prev = U
        x = step(t, x, U[0], exo, params)
    controls = np.array(applied)
    traj = simulate(x_init, controls, exo, params)
    return MpcResult(controls, traj, float(weights @ traj.j), reports, plans)
