"""Non-cooperative play: recursive best responses and receding-horizon feedback."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .coop import _start, solve_swm
from .dynamics import Trajectory, simulate, step
from .errors import ContractError, SolverError
from .grad import ObjectiveSpec
from .params import ExogenousPaths, ModelParams
from .problem import optimize_controls, parallel_map
from .solve import SolveOptions

log = logging.getLogger(__name__)


def _player_mask(shape, i: int) -> np.ndarray:
    mask = np.ones(shape, dtype=bool)
    mask[:, i, :] = False
    return mask


def best_response(i: int, U, params: ModelParams, exo: ExogenousPaths,
                  opts: SolveOptions | None = None, x0=None, t0: int = 0, window=None,
                  u_init=None):
    """Maximise region ``i``'s welfare with every other region's controls frozen.

    ``U`` supplies the other players' controls (its column ``i`` is the start
    point unless ``u_init`` is given). Returns ``(U_i, report)`` where ``U_i``
    has shape ``(steps, 2)``.
    """
    U = np.array(U, dtype=float)
    if U.ndim != 3 or U.shape[1:] != (params.n, 2):
        raise ContractError(f"control profile must have shape (steps, {params.n}, 2)")
    if u_init is not None:
        U[:, i, :] = u_init
    spec = ObjectiveSpec.region(i, params.n, window=window, mask=_player_mask(U.shape, i))
    try:
        U_opt, report = optimize_controls(spec, _start(x0, params), exo, params, U, opts, t0=t0)
    except Exception as exc:
        raise SolverError(f"best response of player {i} failed: {exc}") from exc
    return U_opt[:, i, :].copy(), report


# --------------------------------------------------------------------------
# recursive best-response algorithm
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BrConfig:
    """``scheme="gauss-seidel"`` is an experimental, sequential-update variant."""

    episodes: int
    tol: float = 1e-4
    opts: SolveOptions = SolveOptions()
    scheme: str = "jacobi"

    def __post_init__(self):
        if self.episodes < 0:
            raise ContractError("episodes must be nonnegative")
        if self.tol <= 0:
            raise ContractError("convergence tolerance must be positive")
        if self.scheme not in ("jacobi", "gauss-seidel"):
            raise ContractError(f"unknown update scheme {self.scheme!r}")


@dataclass
class BrReport:
    profiles: list
    deltas: np.ndarray
    converged_at: int | None
    trajectory: Trajectory
    welfare: np.ndarray
    # improvements[k, i] = (J_i before, J_i after) player i's episode-k solve
    improvements: np.ndarray
    reports: list = field(default_factory=list)
    access_log: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.profiles[-1]


def rba_dg(cfg: BrConfig, params: ModelParams, exo: ExogenousPaths, x0=None, u_coop=None,
           coop_opts: SolveOptions | None = None) -> BrReport:
    """Episodes of simultaneous best responses starting from the cooperative optimum.

    Every player in episode ``k`` best-responds to the episode-``k`` profile of
    the others. ``access_log`` records, for each solve, which episode each
    opponent slice was read from. Iteration stops early once the largest
    per-player change falls to ``cfg.tol``.
    """
    n = params.n
    x = _start(x0, params)
    if u_coop is None:
        u_coop = solve_swm(params, exo, coop_opts or cfg.opts, x0=x).controls
    current = np.array(u_coop, dtype=float)
    profiles = [current.copy()]
    deltas, improvements, reports, access_log = [], [], [], []
    converged_at = None

    for k in range(cfg.episodes):
        working = current.copy()
        version = np.full(n, k)

        def solve_player(i, k=k, version=version, source=current):
            view = source.copy()
            access_log.append((k, i, {j: int(version[j]) for j in range(n) if j != i}))
            before = simulate(x, view, exo, params).j[i]
            ui, rep = best_response(i, view, params, exo, cfg.opts, x0=x)
            view[:, i, :] = ui
            after = simulate(x, view, exo, params).j[i]
            return ui, rep, (before, after)

        if cfg.scheme == "jacobi":
            results = parallel_map(solve_player, range(n))
            for i, (ui, _, _) in enumerate(results):
                working[:, i, :] = ui
        else:
            results = []
            for i in range(n):
                res = solve_player(i, source=working)
                working[:, i, :] = res[0]
                version[i] = k + 1
                results.append(res)
        delta = np.array([np.linalg.norm(working[:, i, :] - current[:, i, :]) for i in range(n)])
        deltas.append(delta)
        improvements.append([r[2] for r in results])
        reports.append([r[1] for r in results])
        current = working
        profiles.append(current.copy())
        log.info("episode %d: max delta %.3e", k + 1, delta.max())
        if delta.max() <= cfg.tol:
            converged_at = k + 1
            break

    traj = simulate(x, current, exo, params)
    return BrReport(
        profiles=profiles,
        deltas=np.array(deltas).reshape(-1, n),
        converged_at=converged_at,
        trajectory=traj,
        welfare=traj.j.copy(),
        improvements=np.array(improvements, dtype=float).reshape(-1, n, 2),
        reports=reports,
        access_log=access_log,
    )


# --------------------------------------------------------------------------
# receding-horizon feedback
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RhfConfig:
    """``horizon_end`` (absolute step) truncates planning windows."""

    t_sim: int
    t_rh: int
    opts: SolveOptions = SolveOptions()
    horizon_end: int | None = None

    def __post_init__(self):
        if self.t_rh < 1:
            raise ContractError("t_rh must be at least 1")
        if self.t_sim < 0:
            raise ContractError("t_sim must be nonnegative")


@dataclass
class RhfResult:
    controls: np.ndarray
    trajectory: Trajectory
    u_coop: np.ndarray
    plans: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(r.converged for step_reports in self.reports for r in step_reports)


def rhfa_dg(cfg: RhfConfig, params: ModelParams, exo: ExogenousPaths, x0=None, u_coop=None,
            coop_opts: SolveOptions | None = None) -> RhfResult:
    """Play the game once with every player planning against frozen opponents.

    Step 0 uses the cooperative solution's first controls. After the step-``t``
    actions are played, each player plans steps ``t+1..t+t_rh`` from
    ``x(t+1)`` assuming the others repeat their step-``t`` actions, and
    commits the first planned control. Plans use absolute-time discounting.
    No planning is done after the last simulated step.
    """
    n = params.n
    x = _start(x0, params)
    x_init = x
    if u_coop is None:
        u_coop = solve_swm(params, exo, coop_opts or cfg.opts, x0=x).controls
    u_coop = np.asarray(u_coop, dtype=float)
    ends = [t + 1 + cfg.t_rh - 1 for t in range(cfg.t_sim)]
    if cfg.horizon_end is not None:
        ends = [min(e, cfg.horizon_end) for e in ends]
    exo_ext = exo.extended(max([cfg.t_sim + 1] + [e + 1 for e in ends]))

    u_t = u_coop[0].copy()
    played = [u_t.copy()]
    plans, reports = [], []
    prev_plan = None
    for t in range(cfg.t_sim + 1):
        x_next = step(t, x, u_t, exo_ext, params)
        if t == cfg.t_sim:
            break
        start = t + 1
        end = ends[t]
        if end < start:
            # window truncated away: keep playing the current action
            played.append(u_t.copy())
            x = x_next
            continue
        steps = end - start + 1
        frozen = np.repeat(u_t[None], steps, axis=0)

        def plan_player(i, frozen=frozen, start=start, x_next=x_next, prev_plan=prev_plan):
            if prev_plan is not None and prev_plan.shape[0] > 1:
                guess = np.concatenate([prev_plan[1:, i, :], prev_plan[-1:, i, :]])[:steps]
                if guess.shape[0] < steps:
                    guess = np.concatenate([guess, np.repeat(guess[-1:], steps - guess.shape[0], 0)])
            else:
                guess = frozen[:, i, :]
            try:
                return best_response(i, frozen, params, exo_ext, cfg.opts, x0=x_next, t0=start,
                                     u_init=guess)
            except SolverError as exc:
                raise SolverError(f"RHFA planning at t={t}: {exc}",
                                  partial=np.array(played)) from exc

        results = parallel_map(plan_player, range(n))
        plan = frozen.copy()
        for i, (ui, _) in enumerate(results):
            plan[:, i, :] = ui
        plans.append(plan)
        reports.append([r for _, r in results])
        prev_plan = plan
        u_t = plan[0].copy()
        played.append(u_t.copy())
        x = x_next

    controls = np.array(played)
    traj = simulate(x_init, controls, exo_ext, params)
    return RhfResult(controls, traj, u_coop, plans, reports)
