"""Command-line front end: ``rice-game <command> [options]``.

Exit codes: 0 on success (including non-converged solves, which are reported
as ``"converged": false``), 2 on usage errors, 3 on configuration or schema
errors, 1 on any other failure. Errors are printed to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from types import SimpleNamespace

from . import __version__
from .coop import MpcConfig, default_p_grid, mpc_rice, pareto_frontier, solve_swm
from .dynamics import constant_controls, simulate
from .errors import ConfigError, ContractError, SchemaError
from .noncoop import BrConfig, RhfConfig, rba_dg, rhfa_dg
from .output import (emit_plot_data, trajectory_summary, write_deltas_csv, write_json,
                     write_pareto_csv, write_trajectory_csv)
from .params import (dump_config, generate_exogenous, load_config, load_exogenous,
                     params_to_dict, write_exogenous)
from .scc import scc_table
from .solve import SolveOptions

log = logging.getLogger("rice_game")

COMMANDS = ("simulate", "swm", "pareto", "mpc", "br", "rhfa", "scc", "gen-exo", "validate")


def _common(parser: argparse.ArgumentParser, solver: bool = True):
    parser.add_argument("--config", default="default",
                        help="YAML config file, or 'default' for the built-in calibration")
    parser.add_argument("--exo", help="exogenous CSV (forcing read from <stem>_forcing.csv)")
    parser.add_argument("--out", help="output directory (default: results/<command>-<timestamp>)")
    parser.add_argument("--t", type=int, dest="horizon", help="override the horizon T")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("-v", "--verbose", action="store_true")
    if solver:
        parser.add_argument("--max-iters", type=int, default=2000)
        parser.add_argument("--grad-tol", type=float, default=1e-6)
        parser.add_argument("--restarts", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rice-game", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a constant policy")
    _common(p, solver=False)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--s", type=float, default=0.25)

    p = sub.add_parser("swm", help="social welfare maximisation")
    _common(p)

    p = sub.add_parser("pareto", help="developed/developing Pareto frontier")
    _common(p)
    p.add_argument("--grid", type=int, default=1001, help="number of p values in [0, 1]")

    p = sub.add_parser("mpc", help="receding-horizon welfare maximisation")
    _common(p)
    p.add_argument("--t-sim", type=int, required=True)
    p.add_argument("--t-rh", type=int, required=True)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--cap", action="store_true", help="truncate windows at the horizon T")

    p = sub.add_parser("br", help="recursive best-response algorithm")
    _common(p)
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--gauss-seidel", action="store_true",
                   help="sequential updates (experimental; the default is simultaneous)")

    p = sub.add_parser("rhfa", help="receding-horizon feedback play")
    _common(p)
    p.add_argument("--t-sim", type=int, required=True)
    p.add_argument("--t-rh", type=int, required=True)
    p.add_argument("--cap", action="store_true", help="truncate windows at the horizon T")

    p = sub.add_parser("scc", help="social cost of CO2 along a policy")
    _common(p)
    p.add_argument("--policy", choices=("fixed", "swm"), default="fixed")
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--s", type=float, default=0.25)

    p = sub.add_parser("gen-exo", help="write generated exogenous paths as CSV")
    _common(p, solver=False)

    p = sub.add_parser("validate", help="validate a config and/or exogenous file")
    _common(p, solver=False)
    return parser


class Run:
    """Resolved inputs plus the output directory of one command."""

    def __init__(self, args):
        self.args = args
        params, gen = load_config(args.config)
        if args.horizon is not None:
            if args.horizon < 0:
                raise ConfigError("--t must be nonnegative")
            params = params.with_horizon(args.horizon)
        self.params, self.gen = params, gen
        if args.exo:
            self.exo = load_exogenous(args.exo, params.horizon, params.regions.names)
        else:
            self.exo = generate_exogenous(gen, params.horizon)
        if self.exo.names != params.regions.names:
            raise SchemaError("exogenous regions do not match the configured regions")
        if getattr(args, "max_iters", None) is not None:
            try:
                self.opts = SolveOptions(max_iters=args.max_iters, grad_tol=args.grad_tol,
                                         restarts=args.restarts, seed=args.seed)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        else:
            self.opts = None
        if args.out:
            self.out = Path(args.out)
        else:
            stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
            self.out = Path("results") / f"{args.command}-{stamp}"
        self.out.mkdir(parents=True, exist_ok=True)

    def write_manifest(self, argv):
        opts = self.opts
        manifest = {
            "command": self.args.command,
            "argv": list(argv),
            "config": params_to_dict(self.params, self.gen),
            "exogenous": self.args.exo or "generated",
            "solver": None if opts is None else {
                "max_iters": opts.max_iters, "grad_tol": opts.grad_tol,
                "restarts": opts.restarts, "seed": opts.seed,
            },
            "seed": self.args.seed,
            "version": __version__,
            "started": datetime.now(timezone.utc).isoformat(),
            "output_dir": str(self.out),
        }
        write_json(self.out / "manifest.json", manifest)


def _report_dict(report) -> dict:
    return {
        "converged": bool(report.converged),
        "objective": float(report.objective),
        "projected_grad_norm": float(report.projected_grad_norm),
        "iterations": int(report.iterations),
        "message": report.message,
    }


def cmd_simulate(run: Run) -> dict:
    p = run.params
    U = constant_controls(p.T + 1, p.n, run.args.mu, run.args.s)
    traj = simulate(p.initial, U, run.exo, p)
    scc = scc_table(traj, p)
    write_trajectory_csv(run.out / "trajectory.csv", traj, p, scc)
    return trajectory_summary(traj, p)


def cmd_swm(run: Run) -> dict:
    p = run.params
    res = solve_swm(p, run.exo, run.opts)
    write_trajectory_csv(run.out / "trajectory.csv", res.trajectory, p, res.scc)
    emit_plot_data(res, "swm", run.out, p)
    return {**trajectory_summary(res.trajectory, p), "solver": _report_dict(res.report),
            "converged": res.converged}


def cmd_pareto(run: Run) -> dict:
    if run.args.grid < 0:
        raise ConfigError("--grid must be nonnegative")
    points = pareto_frontier(default_p_grid(run.args.grid), run.params, run.exo, run.opts)
    write_pareto_csv(run.out / "pareto.csv", points)
    emit_plot_data(points, "pareto", run.out, run.params)
    return {"points": len(points), "converged": all(pt.converged for pt in points),
            "non_converged_p": [pt.p for pt in points if not pt.converged]}


def cmd_mpc(run: Run) -> dict:
    a, p = run.args, run.params
    cfg = MpcConfig(a.t_sim, a.t_rh, warm_start=not a.no_warm_start,
                    horizon_end=p.T if a.cap else None)
    res = mpc_rice(cfg, p, run.exo, run.opts)
    swm = solve_swm(p, run.exo, run.opts)
    write_trajectory_csv(run.out / "trajectory.csv", res.trajectory, p, scc_table(res.trajectory, p))
    write_trajectory_csv(run.out / "trajectory_swm.csv", swm.trajectory, p, swm.scc)
    emit_plot_data({"swm": swm.trajectory, "mpc": res.trajectory}, "mpc", run.out, p)
    return {**trajectory_summary(res.trajectory, p), "objective": res.objective,
            "swm_objective": swm.objective, "converged": res.converged,
            "windows": [_report_dict(r) for r in res.windows]}


def cmd_br(run: Run) -> dict:
    a, p = run.args, run.params
    swm = solve_swm(p, run.exo, run.opts)
    cfg = BrConfig(a.episodes, a.tol, run.opts, "gauss-seidel" if a.gauss_seidel else "jacobi")
    rep = rba_dg(cfg, p, run.exo, u_coop=swm.controls)
    write_deltas_csv(run.out / "br_deltas.csv", rep.deltas, p.regions.names)
    write_trajectory_csv(run.out / "trajectory.csv", rep.trajectory, p, scc_table(rep.trajectory, p))
    emit_plot_data(rep.deltas, "br_deltas", run.out, p)
    emit_plot_data({"swm": swm.trajectory, "br": rep.trajectory}, "br", run.out, p)
    return {**trajectory_summary(rep.trajectory, p), "converged": rep.converged_at is not None,
            "converged_at": rep.converged_at, "episodes_run": int(rep.deltas.shape[0]),
            "scheme": cfg.scheme}


def cmd_rhfa(run: Run) -> dict:
    a, p = run.args, run.params
    swm = solve_swm(p, run.exo, run.opts)
    cfg = RhfConfig(a.t_sim, a.t_rh, run.opts or SolveOptions(), horizon_end=p.T if a.cap else None)
    res = rhfa_dg(cfg, p, run.exo, u_coop=swm.controls)
    write_trajectory_csv(run.out / "trajectory.csv", res.trajectory, p, scc_table(res.trajectory, p))
    emit_plot_data({"swm": swm.trajectory, "rhfa": res.trajectory}, "rhfa", run.out, p)
    return {**trajectory_summary(res.trajectory, p), "converged": res.converged}


def cmd_scc(run: Run) -> dict:
    a, p = run.args, run.params
    if a.policy == "swm":
        res = solve_swm(p, run.exo, run.opts)
        traj, table, extra = res.trajectory, res.scc, {"converged": res.converged}
    else:
        traj = simulate(p.initial, constant_controls(p.T + 1, p.n, a.mu, a.s), run.exo, p)
        table, extra = scc_table(traj, p), {}
    write_trajectory_csv(run.out / "trajectory.csv", traj, p, table)
    emit_plot_data(SimpleNamespace(trajectory=traj, scc=table), "swm", run.out, p)
    return {**trajectory_summary(traj, p), **extra,
            "scc_t0": {name: float(table[0, i]) for i, name in enumerate(p.regions.names)}}


def cmd_gen_exo(run: Run) -> dict:
    regional, forcing = write_exogenous(run.exo, run.out / "exogenous.csv")
    (run.out / "config.yaml").write_text(dump_config(run.params, run.gen), encoding="utf-8")
    return {"files": [regional.name, forcing.name, "config.yaml"], "steps": run.exo.n_steps}


def cmd_validate(run: Run) -> dict:
    return {"valid": True, "regions": run.params.n, "steps": run.exo.n_steps}


HANDLERS = {
    "simulate": cmd_simulate, "swm": cmd_swm, "pareto": cmd_pareto, "mpc": cmd_mpc,
    "br": cmd_br, "rhfa": cmd_rhfa, "scc": cmd_scc, "gen-exo": cmd_gen_exo,
    "validate": cmd_validate,
}


def _fail(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)
    return code


def dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = Run(args)
        run.write_manifest(argv)
        summary = HANDLERS[args.command](run)
    except (ConfigError, SchemaError) as exc:
        return _fail("config" if isinstance(exc, ConfigError) else "schema", exc, 3)
    except ContractError as exc:
        return _fail("contract", exc, 1)
    except Exception as exc:  # noqa: BLE001 - reported as a one-line error
        log.debug("unhandled error", exc_info=True)
        return _fail("runtime", exc, 1)
    summary = {"command": args.command, **summary}
    write_json(run.out / "summary.json", summary)
    print(run.out)
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
