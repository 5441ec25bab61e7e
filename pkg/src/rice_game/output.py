"""Result files: trajectory CSV, JSON summaries and whitespace ``.dat`` plot data.

Every float is written with ``repr`` (shortest round-trip decimal), so files
are byte-stable across reruns and parse back to the exact same doubles.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .params import ModelParams

TRAJECTORY_HEADER = ["t", "year", "T_AT", "T_LO", "M_AT", "M_UP", "M_LO", "region", "K", "mu",
                     "s", "E", "C", "g", "damage", "abate", "F", "SCC"]


def fmt(x) -> str:
    return repr(float(x))


def year(params: ModelParams, t: int) -> int:
    return params.horizon.year0 + params.horizon.delta_years * int(t)


def write_trajectory_csv(path, traj: Trajectory, params: ModelParams, scc=None) -> Path:
    """Region-expanded rows for every step with controls (``t0 .. t0+steps-1``)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for s in range(traj.steps):
            t = traj.t0 + s
            shared = [fmt(traj.t_at[s]), fmt(traj.t_lo[s]), fmt(traj.m_at[s]), fmt(traj.m_up[s]),
                      fmt(traj.m_lo[s])]
            for i, name in enumerate(params.regions.names):
                w.writerow([t, year(params, t), *shared, name, fmt(traj.k[s, i]),
                            fmt(traj.u[s, i, 0]), fmt(traj.u[s, i, 1]), fmt(traj.e[s, i]),
                            fmt(traj.c[s, i]), fmt(traj.g[s, i]), fmt(traj.damage[s, i]),
                            fmt(traj.abate[s, i]), fmt(traj.f[s]),
                            "" if scc is None else fmt(scc[s, i])])
    return path


def read_trajectory_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def trajectory_summary(traj: Trajectory, params: ModelParams) -> dict:
    final = traj.final_state
    names = params.regions.names
    return {
        "welfare": {name: float(traj.j[i]) for i, name in enumerate(names)},
        "weighted_welfare": float(params.regions.c @ traj.j),
        "final_state": {
            "t": traj.t0 + traj.steps,
            "year": year(params, traj.t0 + traj.steps),
            "T_AT": float(final.t_at), "T_LO": float(final.t_lo),
            "M_AT": float(final.m_at), "M_UP": float(final.m_up), "M_LO": float(final.m_lo),
            "K": {name: float(final.k[i]) for i, name in enumerate(names)},
        },
        "diagnostics": {
            "consumption_floor_steps": int(traj.floor_active.sum()),
            "negative_damage_steps": int(traj.negative_damage.sum()),
        },
    }


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n",
                    encoding="utf-8")
    return path


def write_dat(path, header: list, columns: list, rows) -> Path:
    """Whitespace-delimited table; ``header`` lines become ``#`` comments."""
    path = Path(path)
    lines = [f"# {h}" for h in header]
    lines.append("# " + " ".join(columns))
    for row in rows:
        lines.append(" ".join(str(v) if isinstance(v, (int, np.integer)) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _years(params, traj):
    return [year(params, t) for t in traj.times]


def _region_table(path, params, traj, values, label, unit):
    names = list(params.regions.names)
    rows = [[y, *values[s]] for s, y in enumerate(_years(params, traj))]
    return write_dat(path, ["x: calendar year", f"y: {label} ({unit})"], ["year", *names], rows)


def _comparison(path, params, series: dict, label, unit, regional: bool):
    """Columns ``year`` then one column per series (per region if ``regional``)."""
    names = list(params.regions.names)
    steps = min(traj.steps for traj, _ in series.values())
    first = next(iter(series.values()))[0]
    cols, data = ["year"], []
    for key, (traj, values) in series.items():
        if regional:
            cols += [f"{key}:{name}" for name in names]
            data.append(np.asarray(values)[:steps])
        else:
            cols.append(key)
            data.append(np.asarray(values)[:steps, None])
    table = np.concatenate(data, axis=1) if data else np.zeros((steps, 0))
    rows = [[year(params, first.t0 + s), *table[s]] for s in range(steps)]
    return write_dat(path, ["x: calendar year", f"y: {label} ({unit})"], cols, rows)


def emit_plot_data(result, kind: str, out_dir, params: ModelParams) -> list:
    """Write the plot-data files for a result of the given ``kind``.

    Kinds: ``swm`` (an object with ``trajectory`` and ``scc``), ``pareto`` (a
    list of points), ``mpc``/``br``/``rhfa`` (a mapping of series name to
    trajectory, e.g. ``{"swm": ..., "mpc": ...}``) and ``br_deltas`` (an
    ``(episodes, n)`` array).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if kind == "swm":
        traj = result.trajectory
        files.append(_region_table(out / "mu.dat", params, traj, traj.u[..., 0], "emission-reduction rate", "-"))
        files.append(_region_table(out / "s.dat", params, traj, traj.u[..., 1], "saving rate", "-"))
        rows = [[y, traj.t_at[s]] for s, y in enumerate(_years(params, traj))]
        files.append(write_dat(out / "t_at.dat",
                               ["x: calendar year", "y: atmospheric temperature deviation (degC)"],
                               ["year", "T_AT"], rows))
        files.append(_region_table(out / "scc.dat", params, traj, result.scc,
                                   "social cost of CO2", "USD/tCO2"))
    elif kind == "pareto":
        pts = [p for p in result if p.converged]
        files.append(write_dat(out / "pareto_frontier.dat",
                               ["x: p (-)", "y: cluster welfare (utility units)"],
                               ["p", "w_developed", "w_developing"],
                               [[p.p, p.w_developed, p.w_developing] for p in pts]))
        files.append(write_dat(out / "pareto_t_at_final.dat",
                               ["x: p (-)", "y: final-step atmospheric temperature deviation (degC)"],
                               ["p", "t_at_final"], [[p.p, p.t_at_final] for p in pts]))
    elif kind in ("mpc", "br", "rhfa"):
        prefix = "mpc_vs_swm" if kind == "mpc" else f"comparison_{kind}"
        files.append(_comparison(out / f"{prefix}_t_at.dat", params,
                                 {k: (tr, tr.t_at[:tr.steps]) for k, tr in result.items()},
                                 "atmospheric temperature deviation", "degC", regional=False))
        files.append(_comparison(out / f"{prefix}_mu.dat", params,
                                 {k: (tr, tr.u[..., 0]) for k, tr in result.items()},
                                 "emission-reduction rate", "-", regional=True))
    elif kind == "br_deltas":
        deltas = np.asarray(result).reshape(-1, params.n)
        rows = [[k + 1, *deltas[k]] for k in range(deltas.shape[0])]
        files.append(write_dat(out / "br_deltas.dat",
                               ["x: episode k", "y: ||U_i^(k) - U_i^(k-1)||_2 (-)"],
                               ["k", *params.regions.names], rows))
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return files


def write_pareto_csv(path, points) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "w_developed", "w_developing", "t_at_final", "converged"])
        for p in points:
            w.writerow([fmt(p.p), fmt(p.w_developed), fmt(p.w_developing), fmt(p.t_at_final),
                        str(bool(p.converged)).lower()])
    return path


def write_deltas_csv(path, deltas, names) -> Path:
    path = Path(path)
    deltas = np.asarray(deltas).reshape(-1, len(names))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "region", "delta"])
        for k in range(deltas.shape[0]):
            for i, name in enumerate(names):
                w.writerow([k + 1, name, fmt(deltas[k, i])])
    return path
