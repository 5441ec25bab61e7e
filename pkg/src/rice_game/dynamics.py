"""Forward simulation of the RICE game state recursion.

State ordering follows the model: two temperature layers, three carbon
reservoirs and one capital stock per region. Controls are stored as arrays of
shape ``(steps, n, 2)`` holding ``(mu, s)`` for every step and region.

A run may start at an absolute step ``t0 > 0`` (receding-horizon windows);
exogenous lookups, backstop decline and discounting then use absolute time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericalError
from .params import ExogenousPaths, InitialState, ModelParams, RegionParams

LN2 = math.log(2.0)

STATE_LABELS = ("T_AT", "T_LO", "M_AT", "M_UP", "M_LO")


@dataclass(frozen=True, eq=False)
class State:
    t_at: float
    t_lo: float
    m_at: float
    m_up: float
    m_lo: float
    k: np.ndarray

    @classmethod
    def from_initial(cls, init: InitialState) -> "State":
        return cls(init.t_at0, init.t_lo0, init.m_at0, init.m_up0, init.m_lo0, np.array(init.k0))

    @classmethod
    def from_vector(cls, v) -> "State":
        v = np.asarray(v)
        return cls(v[0], v[1], v[2], v[3], v[4], np.array(v[5:]))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.t_at, self.t_lo, self.m_at, self.m_up, self.m_lo], self.k])

    @property
    def m_total(self) -> float:
        return self.m_at + self.m_up + self.m_lo


def as_state(x) -> State:
    if isinstance(x, State):
        return x
    if isinstance(x, InitialState):
        return State.from_initial(x)
    return State.from_vector(x)


@dataclass(eq=False)
class Trajectory:
    """Result of :func:`simulate`.

    State arrays hold ``steps + 1`` entries (terminal state included); all
    per-step diagnostics hold ``steps`` entries. Regional arrays are indexed
    ``[t, i]`` with ``t`` relative to ``t0``.
    """

    t0: int
    u: np.ndarray
    t_at: np.ndarray
    t_lo: np.ndarray
    m_at: np.ndarray
    m_up: np.ndarray
    m_lo: np.ndarray
    k: np.ndarray
    f: np.ndarray
    e: np.ndarray
    e_total: np.ndarray
    y_gross: np.ndarray
    damage: np.ndarray
    abate: np.ndarray
    theta1: np.ndarray
    net_output: np.ndarray
    c_raw: np.ndarray
    c: np.ndarray
    g: np.ndarray
    disc: np.ndarray
    L: np.ndarray
    sigma: np.ndarray
    j: np.ndarray
    floor_active: np.ndarray
    negative_damage: np.ndarray

    @property
    def steps(self) -> int:
        return self.u.shape[0]

    @property
    def n(self) -> int:
        return self.u.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.steps)

    def state(self, t: int) -> State:
        return State(self.t_at[t], self.t_lo[t], self.m_at[t], self.m_up[t], self.m_lo[t],
                     self.k[t].copy())

    def states(self) -> np.ndarray:
        cols = np.stack([self.t_at, self.t_lo, self.m_at, self.m_up, self.m_lo], axis=1)
        return np.concatenate([cols, self.k], axis=1)

    @property
    def final_state(self) -> State:
        return self.state(self.steps)

    @property
    def flagged(self) -> bool:
        return bool(self.floor_active.any() or self.negative_damage.any())


# --------------------------------------------------------------------------
# elementary relations (vectorised over regions)
# --------------------------------------------------------------------------


def damage_factor(regions: RegionParams, t_at):
    """Output fraction left after climate damage, ``1 - a1 T - a2 T^a3``.

    Not clamped: values can go negative at extreme temperatures.
    """
    if np.any(np.asarray(t_at) < 0):
        warnings.warn("negative atmospheric temperature passed to damage_factor", stacklevel=2)
    return 1.0 - regions.a1 * t_at - regions.a2 * np.power(t_at, regions.a3)


def abatement_cost_coeff(regions: RegionParams, t: int, sigma):
    return regions.pb / (1000.0 * regions.theta2) * (1.0 - regions.delta_pb) ** t * sigma


def radiative_forcing(m_at, f_ex, geophys) -> float:
    if not np.all(np.asarray(m_at) > 0):
        raise ContractError(f"atmospheric carbon must be positive, got {m_at}")
    return geophys.eta * np.log(m_at / geophys.m_at_1750) / LN2 + f_ex


def gross_output(regions: RegionParams, a, k, l):
    if not (np.all(np.asarray(a) > 0) and np.all(np.asarray(k) > 0) and np.all(np.asarray(l) > 0)):
        raise ContractError("gross output needs positive A, K and L")
    return a * np.power(k, regions.gamma) * np.power(l / 1000.0, 1.0 - regions.gamma)


def _floor(x, eps):
    """C^1 floor: identity above ``2 eps``, quadratic blend down to ``eps``."""
    xp = np.maximum(x, 0.0)
    active = x < 2.0 * eps
    value = np.where(active, eps + xp * xp / (4.0 * eps), x)
    slope = np.where(active, xp / (2.0 * eps), 1.0)
    return value, slope, active


def utility(regions: RegionParams, c, l):
    one_m = 1.0 - regions.alpha
    return l * (np.power(c / l, one_m) - 1.0) / one_m


def discount_factors(regions: RegionParams, t: int):
    return 1.0 / (1.0 + regions.rho) ** (5 * t)


# --------------------------------------------------------------------------
# one transition
# --------------------------------------------------------------------------


def _exo_at(exo: ExogenousPaths, t: int, dtype):
    if t >= exo.n_steps:
        raise ContractError(f"exogenous paths end at t={exo.n_steps - 1}, need t={t}")
    return (exo.L[:, t].astype(dtype), exo.A[:, t].astype(dtype), exo.sigma[:, t].astype(dtype),
            exo.e_land[:, t].astype(dtype), dtype(exo.f_ex[t]))


def _terms(t, t_at, m_at, k, mu, s, exo_t, params: ModelParams):
    """Per-step economics at absolute step ``t`` given the current state."""
    r = params.regions
    L, A, sigma, e_land, f_ex = exo_t
    y_gross = A * np.power(k, r.gamma) * np.power(L / 1000.0, 1.0 - r.gamma)
    damage = 1.0 - r.a1 * t_at - r.a2 * np.power(t_at, r.a3)
    theta1 = r.pb / (1000.0 * r.theta2) * (1.0 - r.delta_pb) ** t * sigma
    abate = 1.0 - theta1 * np.power(mu, r.theta2)
    net = damage * abate * y_gross
    c_raw = net * (1.0 - s)
    c, _, active = _floor(c_raw, params.c_floor)
    g = utility(r, c, L)
    e = sigma * (1.0 - mu) * y_gross + e_land
    f = params.geophys.eta * np.log(m_at / params.geophys.m_at_1750) / LN2 + f_ex
    return dict(L=L, sigma=sigma, y_gross=y_gross, damage=damage, theta1=theta1, abate=abate,
                net=net, c_raw=c_raw, c=c, g=g, e=e, f=f, floor_active=active)


def _transition(x, terms, s, e_extra, params: ModelParams):
    gp, r = params.geophys, params.regions
    t_at, t_lo, m_at, m_up, m_lo, k = x
    phi, zeta = gp.phi, gp.zeta
    e_total = terms["e"].sum() + e_extra
    return (
        phi[0, 0] * t_at + phi[0, 1] * t_lo + gp.xi2 * terms["f"],
        phi[1, 0] * t_at + phi[1, 1] * t_lo,
        zeta[0, 0] * m_at + zeta[0, 1] * m_up + gp.xi1 * e_total,
        zeta[1, 0] * m_at + zeta[1, 1] * m_up + zeta[1, 2] * m_lo,
        zeta[2, 1] * m_up + zeta[2, 2] * m_lo,
        (1.0 - r.delta_k) ** 5 * k + 5.0 * terms["net"] * s,
    )


def regional_emissions(regions: RegionParams, t: int, state: State, mu, exo: ExogenousPaths):
    L, A, sigma, e_land, _ = _exo_at(exo, t, float)
    return sigma * (1.0 - np.asarray(mu)) * gross_output(regions, A, state.k, L) + e_land


def consumption(t: int, state: State, u, exo: ExogenousPaths, params: ModelParams):
    """Floored consumption per region for controls ``u`` of shape ``(n, 2)``."""
    u = np.asarray(u, dtype=float)
    x = as_state(state)
    terms = _terms(t, x.t_at, x.m_at, x.k, u[:, 0], u[:, 1], _exo_at(exo, t, float), params)
    return terms["c"]


def step(t: int, x, u, exo: ExogenousPaths, params: ModelParams, e_pulse: float = 0.0) -> State:
    u = np.asarray(u, dtype=float)
    x = as_state(x)
    terms = _terms(t, x.t_at, x.m_at, x.k, u[:, 0], u[:, 1], _exo_at(exo, t, float), params)
    nxt = _transition((x.t_at, x.t_lo, x.m_at, x.m_up, x.m_lo, x.k), terms, u[:, 1], e_pulse, params)
    return State(*nxt)


# --------------------------------------------------------------------------
# full trajectory
# --------------------------------------------------------------------------


def check_controls(U, n: int, params: ModelParams) -> np.ndarray:
    U = np.asarray(U)
    if U.ndim != 3 or U.shape[1:] != (n, 2) or U.shape[0] < 1:
        raise ContractError(f"controls must have shape (steps, {n}, 2), got {U.shape}")
    mu, s = U[..., 0], U[..., 1]
    if np.any(mu < 0) or np.any(mu > 1) or np.any(s < 0) or np.any(s > params.s_max):
        raise ContractError(f"controls outside [0,1] x [0,{params.s_max}]")
    return U


def simulate(x0, U, exo: ExogenousPaths, params: ModelParams, t0: int = 0,
             e_pulse=None, dtype=np.float64, check_bounds: bool = True) -> Trajectory:
    """Roll the dynamics forward from ``x0`` at absolute step ``t0``.

    ``U`` has shape ``(steps, n, 2)``; the trajectory covers absolute steps
    ``t0 .. t0 + steps`` (states) and ``t0 .. t0 + steps - 1`` (diagnostics).
    ``e_pulse`` is an optional per-step global emissions pulse (GtCO2) added to
    the carbon balance, used for marginal-damage checks.
    """
    n = params.n
    U = np.asarray(U)
    if check_bounds:
        check_controls(U, n, params)
    elif U.ndim != 3 or U.shape[1:] != (n, 2):
        raise ContractError(f"controls must have shape (steps, {n}, 2), got {U.shape}")
    steps = U.shape[0]
    if exo.n != n:
        raise ContractError(f"exogenous paths cover {exo.n} regions, model has {n}")
    if exo.n_steps < t0 + steps:
        raise ContractError(f"exogenous paths have {exo.n_steps} steps, run needs {t0 + steps}")
    if e_pulse is not None:
        e_pulse = np.asarray(e_pulse, dtype=dtype)
        if e_pulse.shape != (steps,):
            raise ContractError("e_pulse must have one entry per step")

    x = as_state(x0)
    U = U.astype(dtype)
    scal = np.zeros((5, steps + 1), dtype=dtype)
    k = np.zeros((steps + 1, n), dtype=dtype)
    state = tuple(dtype(v) for v in (x.t_at, x.t_lo, x.m_at, x.m_up, x.m_lo)) + (np.asarray(x.k, dtype=dtype),)
    scal[:, 0] = state[:5]
    k[0] = state[5]
    per_step = {name: np.zeros((steps, n), dtype=dtype)
                for name in ("L", "sigma", "y_gross", "damage", "theta1", "abate", "net", "c_raw", "c", "g", "e")}
    f = np.zeros(steps, dtype=dtype)
    e_total = np.zeros(steps, dtype=dtype)
    floor_active = np.zeros((steps, n), dtype=bool)

    for s_idx in range(steps):
        t = t0 + s_idx
        if not state[2] > 0:
            raise NumericalError(f"nonpositive atmospheric carbon at t={t}", t=t, variable="M_AT")
        mu, sv = U[s_idx, :, 0], U[s_idx, :, 1]
        terms = _terms(t, state[0], state[2], state[5], mu, sv, _exo_at(exo, t, dtype), params)
        extra = e_pulse[s_idx] if e_pulse is not None else 0.0
        state = _transition(state, terms, sv, extra, params)
        for name in per_step:
            per_step[name][s_idx] = terms[name]
        f[s_idx] = terms["f"]
        e_total[s_idx] = terms["e"].sum()
        floor_active[s_idx] = terms["floor_active"]
        scal[:, s_idx + 1] = state[:5]
        k[s_idx + 1] = state[5]

    _check_finite(t0, scal, k, per_step, f)
    times = t0 + np.arange(steps)
    disc = np.stack([discount_factors(params.regions, t) for t in times]).astype(dtype)
    j = (per_step["g"] * disc).sum(axis=0)
    return Trajectory(
        t0=t0, u=U, t_at=scal[0], t_lo=scal[1], m_at=scal[2], m_up=scal[3], m_lo=scal[4], k=k,
        f=f, e=per_step["e"], e_total=e_total, y_gross=per_step["y_gross"],
        damage=per_step["damage"], abate=per_step["abate"], theta1=per_step["theta1"],
        net_output=per_step["net"], c_raw=per_step["c_raw"], c=per_step["c"], g=per_step["g"],
        disc=disc, L=per_step["L"], sigma=per_step["sigma"], j=j, floor_active=floor_active,
        negative_damage=per_step["damage"] <= 0,
    )


def _check_finite(t0, scal, k, per_step, f):
    for label, arr in zip(STATE_LABELS, scal):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise NumericalError(f"non-finite {label} at t={t0 + bad[0]}", t=t0 + bad[0], variable=label)
    bad = np.argwhere(~np.isfinite(k))
    if bad.size:
        t = t0 + bad[0][0]
        raise NumericalError(f"non-finite K[{bad[0][1]}] at t={t}", t=t, variable=f"K[{bad[0][1]}]")
    for name, arr in per_step.items():
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            t = t0 + bad[0][0]
            raise NumericalError(f"non-finite {name}[{bad[0][1]}] at t={t}", t=t, variable=name)
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size:
        raise NumericalError(f"non-finite F at t={t0 + bad[0]}", t=t0 + bad[0], variable="F")


def welfare(traj: Trajectory, i: int, params: ModelParams | None = None) -> float:
    """Discounted utility of region ``i`` summed over the trajectory's steps."""
    return float(traj.j[i])


def weighted_welfare(traj: Trajectory, params: ModelParams, weights=None) -> float:
    w = params.regions.c if weights is None else np.asarray(weights, dtype=float)
    return float(np.dot(w, traj.j))


def constant_controls(steps: int, n: int, mu: float = 0.1, s: float = 0.25) -> np.ndarray:
    U = np.empty((steps, n, 2))
    U[..., 0] = mu
    U[..., 1] = s
    return U
