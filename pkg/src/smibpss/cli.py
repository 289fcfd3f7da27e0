"""Command-line front end.

Exit codes: 0 ok, 2 bad configuration or arguments, 3 no equilibrium,
4 instability detected, 5 I/O failure, 6 invalid CCT bracket.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    BracketError,
    NonMonotoneError,
    SettlingError,
    cct_search,
    compute_metrics,
    robustness_margin,
)
from .config import Config, ConfigError, load_config
from .engine import ControllerKind, SimOutcome, load_step_scenario, run_scenario
from .model import EquilibriumError, compute_coefficients, compute_equilibrium

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EQUILIBRIUM = 3
EXIT_UNSTABLE = 4
EXIT_IO = 5
EXIT_BRACKET = 6

_COMPARED = (ControllerKind.BSFL, ControllerKind.DFL, ControllerKind.CPSS)


class _ArgError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _controller(text: str) -> ControllerKind:
    try:
        return ControllerKind(text)
    except ValueError:
        choices = ", ".join(k.value for k in ControllerKind)
        raise argparse.ArgumentTypeError(f"unknown controller {text!r} (choose {choices})")


# -- report helpers -----------------------------------------------------------


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to float, non-finite to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, report: dict) -> None:
    text = json.dumps(_clean(report), indent=2) + "\n"
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def _header(cfg: Config) -> dict:
    return {"tool": "smibpss", "version": __version__, "config_digest": cfg.digest()}


def _equilibrium_report(cfg: Config) -> dict:
    eq = compute_equilibrium(cfg.machine, cfg.operating_point)
    c = compute_coefficients(cfg.machine, eq)
    return {
        "delta0_rad": eq.delta0,
        "delta0_deg": math.degrees(eq.delta0),
        "eqp0": eq.eqp0,
        "uf0": eq.uf0,
        "efd0": eq.efd0,
        "vb": eq.vb,
        "id0": eq.id0,
        "iq0": eq.iq0,
        "coefficients": dataclasses.asdict(c),
    }


def _reference_time(events) -> float:
    times = [e.t for e in events if e.kind.value in ("clear_fault", "step_pm")]
    return max(times) if times else 0.0


def _run_report(cfg: Config, outcome: SimOutcome, t_ref: float, name: str) -> dict:
    s = outcome.series
    rep = {
        "scenario": name,
        "controller": s.metadata["controller"],
        "stable": outcome.stable,
        "instability_time": outcome.instability_time,
        "t_ref": t_ref,
        "scenario_digest": s.metadata["scenario_digest"],
        "metrics": {},
    }
    if outcome.stable:
        a = cfg.analysis
        for sig in ("delta", "pe", "vt"):
            try:
                m = compute_metrics(s, sig, t_ref, band_frac=a.band_frac, backswing_frac=a.backswing_frac)
                rep["metrics"][sig] = m.as_dict()
            except SettlingError as exc:
                rep["metrics"][sig] = {"error": str(exc)}
        after = s.t >= t_ref
        vt0 = cfg.operating_point.vt0
        rep["vt_max_excursion"] = float(np.max(np.abs(s.vt[after] - vt0)))
        rep["delta_max_deg"] = math.degrees(float(np.max(s.delta)))
    return rep


def _settling(rep: dict, sig: str) -> float:
    m = rep["metrics"].get(sig, {})
    v = m.get("settling_time_2pct")
    return math.inf if v is None else v


# -- commands -------------------------------------------------------------------


def cmd_equilibrium(args) -> int:
    cfg = load_config(args.config)
    rep = _equilibrium_report(cfg)
    c = rep["coefficients"]
    print(f"config digest   {cfg.digest()}")
    print(f"delta0          {rep['delta0_rad']:.10f} rad  ({rep['delta0_deg']:.6f} deg)")
    for key in ("eqp0", "uf0", "efd0", "vb", "id0", "iq0"):
        print(f"{key:<15} {rep[key]:.10f}")
    for key, val in c.items():
        print(f"{key:<15} {val:.10g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    kind = args.controller or ControllerKind(cfg.scenario.controller)
    gains = cfg.gains_for(kind)
    sc = cfg.build_scenario(kind)
    compute_equilibrium(cfg.machine, cfg.operating_point)
    outcome = run_scenario(sc, cfg.machine, cfg.operating_point, gains)
    out = Path(args.out or cfg.output.csv)
    summary = Path(args.summary or cfg.output.summary)
    outcome.series.to_csv(out)
    report = _header(cfg)
    report["equilibrium"] = _equilibrium_report(cfg)
    report["csv"] = str(out)
    report["runs"] = [_run_report(cfg, outcome, _reference_time(sc.events), "configured")]
    _write_json(summary, report)
    verdict = "stable" if outcome.stable else f"UNSTABLE at t={outcome.instability_time:.4f} s"
    print(f"{kind.value}: {verdict}; wrote {out} and {summary}")
    return EXIT_OK if outcome.stable else EXIT_UNSTABLE


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    for kind in _COMPARED:
        cfg.gains_for(kind)
    compute_equilibrium(cfg.machine, cfg.operating_point)
    ls = cfg.load_step
    runs = {"fault": [], "load_step": []}
    for kind in _COMPARED:
        gains = cfg.gains_for(kind)
        sc = cfg.build_scenario(kind)
        o = run_scenario(sc, cfg.machine, cfg.operating_point, gains)
        runs["fault"].append(_run_report(cfg, o, _reference_time(sc.events), "fault"))
        sc = load_step_scenario(
            kind, ls.t, ls.factor, ls.duration, cfg.scenario.dt, cfg.output.record_stride
        )
        o = run_scenario(sc, cfg.machine, cfg.operating_point, gains)
        rep = _run_report(cfg, o, ls.t, "load_step")
        after = o.series.t >= ls.t
        rep["pe_max"] = float(np.max(o.series.pe[after])) if o.stable else None
        runs["load_step"].append(rep)

    fault = {r["controller"]: r for r in runs["fault"]}
    order = [_settling(fault[k.value], "delta") for k in _COMPARED]
    verdicts = {
        "all_fault_runs_stable": all(r["stable"] for r in runs["fault"]),
        "settling_order_bsfl_dfl_cpss": order[0] < order[1] < order[2],
    }
    report = _header(cfg)
    report["equilibrium"] = _equilibrium_report(cfg)
    report["runs"] = runs["fault"] + runs["load_step"]
    report["verdicts"] = verdicts

    print(f"{'scenario':<10} {'ctrl':<5} {'stable':<7} {'Ts delta':>9} {'Ts pe':>9} "
          f"{'swing deg':>10} {'dVt max':>8}")
    for r in report["runs"]:
        swing = r["metrics"].get("delta", {}).get("first_swing_peak")
        print(
            f"{r['scenario']:<10} {r['controller']:<5} {str(r['stable']):<7} "
            f"{_settling(r, 'delta'):9.3f} {_settling(r, 'pe'):9.3f} "
            f"{math.degrees(swing) if swing is not None else math.nan:10.2f} "
            f"{r.get('vt_max_excursion', math.nan):8.3f}"
        )
    for key, val in verdicts.items():
        print(f"{key}: {val}")
    if args.out:
        _write_json(args.out, report)
    return EXIT_OK


def cmd_cct(args) -> int:
    cfg = load_config(args.config)
    a = cfg.analysis
    lo = a.cct_lo if args.lo is None else args.lo
    hi = a.cct_hi if args.hi is None else args.hi
    tol = a.cct_tol if args.tol is None else args.tol
    if not lo < hi:
        raise _ArgError(f"--lo must be below --hi (got {lo} and {hi})")
    if tol < cfg.scenario.dt:
        raise _ArgError(f"--tol must be at least dt={cfg.scenario.dt}")
    kinds = args.controller or [ControllerKind(cfg.scenario.controller)]
    fault = cfg.fault_events()
    if fault is None:
        raise ConfigError("scenario.events", "a fault (apply_fault, clear_fault) is required")
    compute_equilibrium(cfg.machine, cfg.operating_point)
    report = _header(cfg)

    if args.sweep:
        return _cct_sweep(cfg, kinds, args.sweep, report, args.out)

    results = []
    for kind in kinds:
        r = cct_search(
            cfg.machine,
            cfg.operating_point,
            kind,
            cfg.gains_for(kind),
            fault_start=fault[0],
            horizon=a.cct_horizon,
            lo=lo,
            hi=hi,
            tol=tol,
            dt=cfg.scenario.dt,
        )
        results.append(
            {
                "controller": kind.value,
                "fault_start": r.fault_start,
                "cct_duration": r.duration,
                "cct_clearing_time": r.clearing_time,
                "tol": r.tol,
                "trace": [{"duration": d, "stable": s} for d, s in r.trace],
            }
        )
        print(f"{kind.value}: longest stable fault {r.duration:.4f} s "
              f"(cleared at t = {r.clearing_time:.4f} s)")
        for d, s in r.trace:
            print(f"  probe {d:.4f} s  {'stable' if s else 'unstable'}")
    report["cct"] = results
    if args.out:
        _write_json(args.out, report)
    return EXIT_OK


def _cct_sweep(cfg: Config, kinds, p0s, report, out) -> int:
    rows = []
    for kind in kinds:
        sc = cfg.build_scenario(kind)
        t_ref = _reference_time(sc.events)
        for p0 in p0s:
            op = dataclasses.replace(cfg.operating_point, p0=p0)
            compute_equilibrium(cfg.machine, op)
            o = run_scenario(sc, cfg.machine, op, cfg.gains_for(kind))
            sub = dataclasses.replace(cfg, operating_point=op)
            rep = _run_report(sub, o, t_ref, f"fault_p0={p0}")
            rep["p0"] = p0
            rows.append(rep)
            verdict = "stable" if o.stable else "UNSTABLE"
            print(f"{kind.value} p0={p0:.3f}: {verdict}, settling delta {_settling(rep, 'delta'):.3f} s")
    report["sweep"] = rows
    if out:
        _write_json(out, report)
    return EXIT_OK if all(r["stable"] for r in rows) else EXIT_UNSTABLE


def _parse_q(spec: str) -> np.ndarray:
    spec = spec.strip()
    if spec == "identity":
        return np.eye(3)
    kind, _, rest = spec.partition(":")
    try:
        vals = [float(v) for v in rest.split(",")]
    except ValueError:
        raise _ArgError(f"bad --q value {spec!r}") from None
    if kind == "scalar" and len(vals) == 1:
        return vals[0] * np.eye(3)
    if kind == "diag" and len(vals) == 3:
        return np.diag(vals)
    if kind == "full" and len(vals) == 9:
        return np.array(vals).reshape(3, 3)
    raise _ArgError(f"bad --q value {spec!r} (identity, scalar:c, diag:a,b,c or full:9 values)")


def cmd_robustness(args) -> int:
    lambdas = args.lambdas
    if len(lambdas) != 3:
        raise _ArgError("--lambda needs exactly three values")
    if any(not v > 0 for v in lambdas):
        raise _ArgError("--lambda values must all be positive")
    if args.gamma2 < 0:
        raise _ArgError("--gamma2 must be non-negative")
    try:
        rep = robustness_margin(lambdas, _parse_q(args.q), args.gamma2)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise _ArgError(str(exc)) from None
    np.set_printoptions(precision=10, suppress=False)
    print("P =")
    print(rep.P)
    print(f"||PB||_2         {rep.pb_norm:.12g}")
    print(f"lambda_min(Q)    {rep.lambda_min_q:.12g}")
    print(f"gamma1_max       {rep.gamma1_max:.12g}")
    print(f"bound coeff      {rep.ultimate_bound_coeff:.12g}")
    print(f"ultimate bound   {rep.ultimate_bound:.12g}  (gamma2 = {rep.gamma2:g})")
    print(f"residual         {rep.residual:.3e}")
    if args.out:
        _write_json(args.out, {"tool": "smibpss", "version": __version__, "lyapunov": rep.as_dict()})
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smibpss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("equilibrium", help="print the steady state and model coefficients")
    s.add_argument("config")
    s.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("simulate", help="run the configured scenario")
    s.add_argument("config")
    s.add_argument("--controller", type=_controller)
    s.add_argument("--out", help="CSV path (default from config)")
    s.add_argument("--summary", help="summary JSON path (default from config)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="fault and load-step runs for all three controllers")
    s.add_argument("config")
    s.add_argument("--out", help="summary JSON path")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("cct", help="critical clearing time by bisection")
    s.add_argument("config")
    s.add_argument("--controller", type=_controller, nargs="+")
    s.add_argument("--lo", type=float)
    s.add_argument("--hi", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--sweep", type=_float_list, metavar="P0,P0,...",
                   help="instead of bisecting, run the configured fault at each p0")
    s.add_argument("--out", help="summary JSON path")
    s.set_defaults(func=cmd_cct)

    s = sub.add_parser("robustness", help="Lyapunov margin of the backstepping chain")
    s.add_argument("--lambda", dest="lambdas", type=_float_list, default=[5.0, 10.0, 15.0],
                   metavar="L1,L2,L3")
    s.add_argument("--q", default="identity", help="identity | scalar:c | diag:a,b,c | full:9 values")
    s.add_argument("--gamma2", type=float, default=0.0)
    s.add_argument("--out", help="JSON path")
    s.set_defaults(func=cmd_robustness)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, _ArgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EquilibriumError as exc:
        print(f"error: no equilibrium: {exc}", file=sys.stderr)
        return EXIT_EQUILIBRIUM
    except (BracketError, NonMonotoneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
