"""Regional social cost of carbon from adjoint welfare sensitivities."""

from __future__ import annotations

import numpy as np

from .dynamics import Trajectory
from .errors import NumericalError
from .grad import reverse_sweep
from .params import ModelParams


def welfare_sensitivities(traj: Trajectory, i: int, params: ModelParams):
    """``(dJ_i/dE(t), dJ_i/dC_i(t))`` for every step of ``traj``.

    The emissions sensitivity is the total derivative of region ``i``'s welfare
    with respect to a pulse of global emissions (GtCO2) entering the carbon
    balance at step ``t``; the consumption sensitivity is the discounted
    marginal utility of consumption at ``t``.
    """
    w = np.zeros(traj.n)
    w[i] = 1.0
    adj = reverse_sweep(traj, w, (0, traj.steps - 1), params)
    d_e = params.geophys.xi1 * adj.lam[1:, 2]
    d_c = traj.disc[:, i] * np.power(traj.c[:, i] / traj.L[:, i], -params.regions.alpha[i])
    return d_e, d_c


def scc_path(traj: Trajectory, i: int, params: ModelParams) -> np.ndarray:
    """SCC of region ``i`` in USD/tCO2 at every step."""
    d_e, d_c = welfare_sensitivities(traj, i, params)
    if not np.all(d_c > 0):
        raise NumericalError(f"nonpositive marginal utility for region {i}", variable="dJ/dC")
    return -1000.0 * d_e / d_c


def scc(traj: Trajectory, i: int, t: int, params: ModelParams, method: str = "adjoint") -> float:
    """SCC of region ``i`` at relative step ``t``.

    ``method="instantaneous"`` instead returns the within-period trade-off
    ``1000 * (dC_i/dmu_i) / (dE_i/dmu_i)`` at fixed state, i.e. the marginal
    consumption cost of abating one more tonne. It ignores future damages
    and is provided for comparison only.
    """
    if method == "adjoint":
        return float(scc_path(traj, i, params)[t])
    if method == "instantaneous":
        return float(instantaneous_tradeoff(traj, params)[t, i])
    raise ValueError(f"unknown SCC method {method!r}")


def instantaneous_tradeoff(traj: Trajectory, params: ModelParams) -> np.ndarray:
    r = params.regions
    mu, s = traj.u[..., 0], traj.u[..., 1]
    dc_dmu = -traj.theta1 * r.theta2 * np.power(mu, r.theta2 - 1.0) * traj.damage * traj.y_gross * (1.0 - s)
    de_dmu = -traj.sigma * traj.y_gross
    return 1000.0 * dc_dmu / de_dmu


def scc_table(traj: Trajectory, params: ModelParams) -> np.ndarray:
    """SCC for every region, shape ``(steps, n)``."""
    return np.stack([scc_path(traj, i, params) for i in range(traj.n)], axis=1)
