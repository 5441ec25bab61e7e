"""Reverse-mode gradients of welfare objectives with respect to controls.

The recursion structure is fixed, so the adjoint is written out by hand: one
forward pass through :func:`~rice_game.dynamics.simulate` stores every
intermediate, and one backward sweep propagates state adjoints from the
terminal state to ``x(t0)``. :func:`fd_gradient` is the independent
central-difference check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dynamics import LN2, Trajectory, _floor, simulate
from .errors import ContractError, NumericalError
from .params import DEVELOPED, DEVELOPING, ExogenousPaths, ModelParams


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """Weighted sum of discounted regional utilities over a step window.

    ``window`` is an inclusive ``(start, end)`` pair of step offsets into the
    control profile (``None`` means every step). ``mask`` marks frozen control
    entries; it affects differentiation only.
    """

    weights: np.ndarray
    window: tuple | None = None
    mask: np.ndarray | None = None
    kind: str = "weighted"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ContractError("objective weights must be a finite vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.mask is not None:
            m = np.array(self.mask, dtype=bool)
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)

    @classmethod
    def weighted(cls, weights, **kw) -> "ObjectiveSpec":
        return cls(weights, kind="weighted", **kw)

    @classmethod
    def region(cls, i: int, n: int, **kw) -> "ObjectiveSpec":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w, kind=f"region:{i}", **kw)

    @classmethod
    def pareto(cls, p: float, n: int = 12, developed=DEVELOPED, developing=DEVELOPING,
               **kw) -> "ObjectiveSpec":
        if not 0 <= p <= 1:
            raise ContractError(f"Pareto weight must lie in [0, 1], got {p}")
        w = np.zeros(n)
        w[list(developed)] = p
        w[list(developing)] = 1.0 - p
        return cls(w, kind=f"pareto:{p!r}", **kw)

    def resolved_window(self, steps: int) -> tuple:
        if self.window is None:
            return 0, steps - 1
        lo, hi = self.window
        if not 0 <= lo <= hi < steps:
            raise ContractError(f"window {self.window} outside 0..{steps - 1}")
        return lo, hi

    def free(self, shape) -> np.ndarray:
        if self.mask is None:
            return np.ones(shape, dtype=bool)
        if self.mask.shape != tuple(shape):
            raise ContractError(f"mask shape {self.mask.shape} != control shape {tuple(shape)}")
        return ~self.mask

    def value(self, traj: Trajectory) -> float:
        lo, hi = self.resolved_window(traj.steps)
        terms = traj.g[lo:hi + 1] * traj.disc[lo:hi + 1]
        return terms.sum(axis=0) @ self.weights


@dataclass
class GradientReport:
    value: float
    grad: np.ndarray
    max_abs_component: float
    wall_time: float
    full_grad: np.ndarray
    trajectory: Trajectory


@dataclass
class Adjoint:
    d_mu: np.ndarray
    d_s: np.ndarray
    # lam[t] is d(objective)/d(state at relative step t); lam[steps] is zero.
    lam: np.ndarray

    @property
    def d_u(self) -> np.ndarray:
        return np.stack([self.d_mu, self.d_s], axis=-1)


def reverse_sweep(traj: Trajectory, weights, window: tuple, params: ModelParams) -> Adjoint:
    r, gp = params.regions, params.geophys
    phi, zeta = gp.phi, gp.zeta
    steps, n = traj.steps, traj.n
    lo, hi = window
    w = np.asarray(weights, dtype=float)
    decay = (1.0 - r.delta_k) ** 5

    d_mu = np.zeros((steps, n))
    d_s = np.zeros((steps, n))
    lam = np.zeros((steps + 1, n + 5))
    l_tat = l_tlo = l_mat = l_mup = l_mlo = 0.0
    l_k = np.zeros(n)
    for s in range(steps - 1, -1, -1):
        mu, sv = traj.u[s, :, 0], traj.u[s, :, 1]
        y, dam, ab, net = traj.y_gross[s], traj.damage[s], traj.abate[s], traj.net_output[s]
        sigma, t_at = traj.sigma[s], traj.t_at[s]
        if lo <= s <= hi:
            dc = w * traj.disc[s] * np.power(traj.c[s] / traj.L[s], -r.alpha)
        else:
            dc = np.zeros(n)
        _, slope, _ = _floor(traj.c_raw[s], params.c_floor)
        dc_raw = dc * slope

        d_net = dc_raw * (1.0 - sv) + 5.0 * l_k * sv
        d_s[s] = 5.0 * l_k * net - dc_raw * net
        d_e = gp.xi1 * l_mat
        d_f = gp.xi2 * l_tat
        d_y = d_net * dam * ab + d_e * sigma * (1.0 - mu)
        d_dam = d_net * ab * y
        d_ab = d_net * dam * y
        d_mu[s] = -d_ab * traj.theta1[s] * r.theta2 * np.power(mu, r.theta2 - 1.0) - d_e * sigma * y

        new_k = decay * l_k + d_y * r.gamma * y / traj.k[s]
        ddam_dt = -r.a1 - r.a2 * r.a3 * np.power(t_at, r.a3 - 1.0)
        new = (
            phi[0, 0] * l_tat + phi[1, 0] * l_tlo + np.dot(d_dam, ddam_dt),
            phi[0, 1] * l_tat + phi[1, 1] * l_tlo,
            zeta[0, 0] * l_mat + zeta[1, 0] * l_mup + d_f * gp.eta / (traj.m_at[s] * LN2),
            zeta[0, 1] * l_mat + zeta[1, 1] * l_mup + zeta[2, 1] * l_mlo,
            zeta[1, 2] * l_mup + zeta[2, 2] * l_mlo,
        )
        l_tat, l_tlo, l_mat, l_mup, l_mlo = new
        l_k = new_k
        lam[s, :5] = new
        lam[s, 5:] = new_k
        if not (np.isfinite(lam[s]).all() and np.isfinite(d_mu[s]).all() and np.isfinite(d_s[s]).all()):
            bad = "state adjoint" if not np.isfinite(lam[s]).all() else "control gradient"
            raise NumericalError(f"non-finite {bad} at t={traj.t0 + s}", t=traj.t0 + s, variable=bad)
    return Adjoint(d_mu, d_s, lam)


def objective_and_gradient(spec: ObjectiveSpec, U, x_start, exo: ExogenousPaths,
                           params: ModelParams, t0: int = 0) -> GradientReport:
    """Objective value and its exact gradient over the unmasked control entries.

    The gradient vector follows C order of the ``(steps, n, 2)`` control array
    with masked entries dropped.
    """
    start = time.perf_counter()
    U = np.asarray(U, dtype=float)
    if spec.weights.shape != (params.n,):
        raise ContractError(f"objective has {spec.weights.size} weights, model has {params.n} regions")
    free = spec.free(U.shape)
    window = spec.resolved_window(U.shape[0])
    traj = simulate(x_start, U, exo, params, t0=t0)
    value = float(spec.value(traj))
    if not np.isfinite(value):
        raise NumericalError("non-finite objective", t=t0, variable="objective")
    if not spec.weights.any():
        full = np.zeros(U.shape)
    else:
        full = reverse_sweep(traj, spec.weights, window, params).d_u
    grad = full[free]
    return GradientReport(
        value=value,
        grad=grad,
        max_abs_component=float(np.max(np.abs(grad))) if grad.size else 0.0,
        wall_time=time.perf_counter() - start,
        full_grad=full,
        trajectory=traj,
    )


def fd_gradient(spec: ObjectiveSpec, U, x_start, exo: ExogenousPaths, params: ModelParams,
                h=None, t0: int = 0, entries=None, dtype=np.float64) -> np.ndarray:
    """Central differences over the free entries (or the given subset of them).

    ``h`` defaults to ``1e-6 * max(1, |u|)`` per entry. Bounds are not
    enforced while probing. ``dtype=np.longdouble`` evaluates the objective in
    extended precision, which shrinks cancellation error in the differences.
    """
    U = np.asarray(U, dtype=dtype)
    free_idx = np.flatnonzero(spec.free(U.shape).ravel())
    if entries is not None:
        free_idx = free_idx[np.asarray(entries, dtype=int)]
    window = spec.resolved_window(U.shape[0])
    w = spec.weights.astype(dtype)

    def value(V):
        traj = simulate(x_start, V, exo, params, t0=t0, dtype=dtype, check_bounds=False)
        lo, hi = window
        return ((traj.g[lo:hi + 1] * traj.disc[lo:hi + 1]).sum(axis=0) * w).sum()

    out = np.zeros(free_idx.size)
    if not spec.weights.any():
        return out
    flat = U.ravel()
    for j, idx in enumerate(free_idx):
        step = h if h is not None else 1e-6 * max(1.0, abs(float(flat[idx])))
        up, dn = flat.copy(), flat.copy()
        up[idx] = flat[idx] + dtype(step)
        dn[idx] = flat[idx] - dtype(step)
        out[j] = float((value(up.reshape(U.shape)) - value(dn.reshape(U.shape))) / (up[idx] - dn[idx]))
    return out
