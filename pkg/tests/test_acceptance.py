"""Acceptance suite: one pass/fail line per criterion.

Each test records its verdict with the measured numbers, then asserts it.
The lines are printed together at the end of the pytest run.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from smibpss import controllers as ctl
from smibpss.analysis import (
    SettlingError,
    cct_search,
    chain_coordinates,
    compute_metrics,
    linearization_residual,
    robustness_margin,
    solve_lyapunov,
)
from smibpss.cli import main as cli_main
from smibpss.config import load_config
from smibpss.engine import (
    ControllerKind,
    Scenario,
    fault_scenario,
    load_step_scenario,
    run_scenario,
)
from smibpss.model import NetworkMode, OperatingPoint, compute_coefficients, compute_equilibrium, plant_derivatives

from conftest import ACCEPTANCE_LINES

BSFL, DFL, CPSS = ControllerKind.BSFL, ControllerKind.DFL, ControllerKind.CPSS
T_FAULT, T_CLEAR = 0.6, 0.78


@pytest.fixture(scope="module")
def cfg(config_path):
    return load_config(config_path)


def _verdict(n: int, title: str, ok: bool, detail: str, elapsed: float, budget: float):
    ok = ok and elapsed < budget
    status = "PASS" if ok else "FAIL"
    line = f"criterion {n:>2} {status}  {title}: {detail} [{elapsed:.2f} s of {budget:g} s]"
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _settling(series, signal, t_ref):
    try:
        return compute_metrics(series, signal, t_ref)
    except SettlingError:
        return None


def _ts(m):
    return math.inf if m is None else m.settling_time_2pct


# 1 -----------------------------------------------------------------------------


def test_criterion_1_equilibrium_closure(cfg):
    t0 = time.perf_counter()
    p, op = cfg.machine, cfg.operating_point
    eq = compute_equilibrium(p, op)
    c = compute_coefficients(p, eq)
    d = plant_derivatives((eq.delta0, 0.0, eq.eqp0), eq.efd0, NetworkMode.NORMAL, p, eq, c)
    s = math.sin(eq.delta0)
    eqp_alpha = (c.a7 + c.a4 * math.sin(2 * eq.delta0)) / (c.a3 * s)
    uf_alpha = (c.a5 * eqp_alpha - c.a6 * math.cos(eq.delta0)) / c.a
    d_max = max(map(abs, d))
    e_eqp, e_uf = abs(eqp_alpha - eq.eqp0), abs(uf_alpha - eq.uf0)
    ok = d_max < 1e-10 and e_eqp < 1e-9 and e_uf < 1e-9
    _verdict(1, "equilibrium closure", ok,
             f"max|dx/dt|={d_max:.1e} (<1e-10), |dEq'0|={e_eqp:.1e}, |duf0|={e_uf:.1e} (<1e-9)",
             time.perf_counter() - t0, 1.0)


# 2 -----------------------------------------------------------------------------


def _chain_check(kind, cfg):
    p, op = cfg.machine, cfg.operating_point
    eq = compute_equilibrium(p, op)
    coeffs = compute_coefficients(p, eq)
    gains = cfg.gains_for(kind)
    sc = Scenario(duration=2.0, controller=kind, record_stride=10)
    s = run_scenario(sc, p, op, gains, offset=(0.05, 0.0, 0.0)).series
    clean = not s.sat.any() and not s.guard.any()
    coords = chain_coordinates(s, kind, gains, p, eq)
    res = linearization_residual(coords, s.t, kind, gains)
    A = ctl.chain_matrix(gains.lambdas) if kind is BSFL else ctl.companion_matrix(gains)
    exact = np.array([expm(A * t) @ coords[0] for t in s.t])
    err = np.abs(coords - exact).max()
    return clean, res, err


def test_criterion_2_exact_linearization(cfg):
    t0 = time.perf_counter()
    parts, ok = [], True
    for kind in (BSFL, DFL):
        clean, res, err = _chain_check(kind, cfg)
        ok &= clean and res.max() < 1e-5 and err < 1e-4
        parts.append(f"{kind.value}: unsaturated={clean}, residuals={np.array2string(res, precision=1)} "
                     f"(<1e-5), max|xi-expm|={err:.1e} (<1e-4)")
    _verdict(2, "exact linearization", ok, "; ".join(parts), time.perf_counter() - t0, 5.0)


# 3 -----------------------------------------------------------------------------


def test_criterion_3_partials_oracle(cfg):
    t0 = time.perf_counter()
    p, op = cfg.machine, cfg.operating_point
    eq = compute_equilibrium(p, op)
    c = compute_coefficients(p, eq)
    g = cfg.controllers.bsfl
    rng = np.random.default_rng(2024)
    worst, h = 0.0, 1e-5
    for xi1, xi2 in zip(rng.uniform(0.05, math.pi - 0.05, 1000) - eq.delta0, rng.uniform(-5, 5, 1000)):
        an = ctl.bsfl_partials(xi1, g, c, eq)
        fd = (
            (ctl._phi2(xi1 + h, xi2, g, c, eq) - ctl._phi2(xi1 - h, xi2, g, c, eq)) / (2 * h),
            (ctl._phi2(xi1, xi2 + h, g, c, eq) - ctl._phi2(xi1, xi2 - h, g, c, eq)) / (2 * h),
            (ctl._a2(xi1 + h, xi2, g, c, eq) - ctl._a2(xi1 - h, xi2, g, c, eq)) / (2 * h),
            (ctl._a2(xi1, xi2 + h, g, c, eq) - ctl._a2(xi1, xi2 - h, g, c, eq)) / (2 * h),
        )
        for a, b in zip(an, fd):
            worst = max(worst, abs(a - b) / max(abs(a), 1.0))
    _verdict(3, "partial-derivative oracle", worst < 1e-6,
             f"worst relative error over 1000 states {worst:.1e} (<1e-6)", time.perf_counter() - t0, 5.0)


# 4 -----------------------------------------------------------------------------


def test_criterion_4_fault_experiment(cfg):
    t0 = time.perf_counter()
    p, op = cfg.machine, cfg.operating_point
    runs = {k: run_scenario(cfg.build_scenario(k), p, op, cfg.gains_for(k)) for k in (BSFL, DFL, CPSS)}
    elapsed = time.perf_counter() - t0

    m_d = _settling(runs[BSFL].series, "delta", T_CLEAR) if runs[BSFL].stable else None
    m_p = _settling(runs[BSFL].series, "pe", T_CLEAR) if runs[BSFL].stable else None
    ts = {k: _ts(_settling(o.series, "delta", T_CLEAR)) if o.stable else math.inf for k, o in runs.items()}
    bsfl_ok = (
        m_d is not None and m_p is not None
        and m_d.settling_time_2pct <= 1.5 and m_p.settling_time_2pct <= 1.5
        and not m_d.backswing_detected and not m_p.backswing_detected
    )
    order_ok = ts[BSFL] < ts[DFL] < ts[CPSS]
    dfl_ok = 1.5 <= ts[DFL] <= 4.5
    cpss_ok = 2.75 <= ts[CPSS] <= 8.25

    def fmt(o, k):
        return f"{ts[k]:.2f}s" if o.stable else f"unstable@{o.instability_time:.3f}s"

    detail = (
        f"bsfl Ts(delta)={_ts(m_d):.2f}s Ts(pe)={_ts(m_p):.2f}s (<=1.5) "
        f"backswing={m_d.backswing_detected if m_d else None}; "
        f"dfl {fmt(runs[DFL], DFL)} (1.5..4.5); cpss {fmt(runs[CPSS], CPSS)} (2.75..8.25); "
        f"order bsfl<dfl<cpss={order_ok}"
    )
    _verdict(4, "fault experiment", bsfl_ok and order_ok and dfl_ok and cpss_ok, detail, elapsed, 30.0)


# 5 -----------------------------------------------------------------------------


def test_criterion_5_load_step(cfg):
    t0 = time.perf_counter()
    p, op, ls = cfg.machine, cfg.operating_point, cfg.load_step
    runs = {}
    for k in (BSFL, DFL, CPSS):
        sc = load_step_scenario(k, ls.t, ls.factor, ls.duration, cfg.scenario.dt, cfg.output.record_stride)
        runs[k] = run_scenario(sc, p, op, cfg.gains_for(k))
    elapsed = time.perf_counter() - t0

    m = _settling(runs[BSFL].series, "pe", ls.t)
    peak = {}
    for k in (DFL, CPSS):
        mk = _settling(runs[k].series, "pe", ls.t) if runs[k].stable else None
        peak[k] = mk.first_swing_peak if mk else math.nan
    bsfl_ok = m is not None and m.settling_time_2pct <= 0.75 and m.overshoot_pct <= 2.0
    base_ok = any(v >= 1.1 for v in peak.values())
    over_final = 100 * (m.first_swing_peak - m.final_value) / m.final_value if m else math.nan
    detail = (
        f"bsfl Ts(pe)={_ts(m):.3f}s (<=0.75), overshoot={m.overshoot_pct if m else math.nan:.1f}% of the step "
        f"({over_final:.1f}% of final value) (<=2%); first-swing pe dfl={peak[DFL]:.3f} "
        f"cpss={peak[CPSS]:.3f} (one >=1.1)"
    )
    _verdict(5, "load-step experiment", bsfl_ok and base_ok, detail, elapsed, 30.0)


# 6 -----------------------------------------------------------------------------


def test_criterion_6_cct(cfg):
    t0 = time.perf_counter()
    a = cfg.analysis
    res = {
        k: cct_search(cfg.machine, cfg.operating_point, k, cfg.gains_for(k), fault_start=T_FAULT,
                      horizon=a.cct_horizon, lo=a.cct_lo, hi=a.cct_hi, tol=1e-3)
        for k in (BSFL, DFL)
    }
    elapsed = time.perf_counter() - t0
    b, d = res[BSFL], res[DFL]
    order_ok = b.duration > d.duration
    band_ok = all(0.7 <= r.clearing_time <= 1.05 for r in res.values())
    detail = (
        f"bsfl cleared by t={b.clearing_time:.4f}s (fault {b.duration:.4f}s), "
        f"dfl by t={d.clearing_time:.4f}s (fault {d.duration:.4f}s); "
        f"bsfl>dfl={order_ok}; clearing instants in [0.7, 1.05]={band_ok}"
    )
    _verdict(6, "critical clearing time", order_ok and band_ok, detail, elapsed, 180.0)


# 7 -----------------------------------------------------------------------------


def test_criterion_7_operating_points(cfg):
    t0 = time.perf_counter()
    parts, ok = [], True
    for p0 in (0.6, 0.8, 1.0):
        op = OperatingPoint(p0, cfg.operating_point.q0, cfg.operating_point.vt0)
        o = run_scenario(cfg.build_scenario(BSFL), cfg.machine, op, cfg.gains_for(BSFL))
        if o.stable:
            ts = _ts(_settling(o.series, "delta", T_CLEAR))
            ok &= ts < 2.0
            parts.append(f"p0={p0}: Ts={ts:.2f}s")
        else:
            ok = False
            parts.append(f"p0={p0}: unstable@{o.instability_time:.3f}s")
    _verdict(7, "operating-point independence", ok, ", ".join(parts) + " (stable, <2 s)",
             time.perf_counter() - t0, 30.0)


# 8 -----------------------------------------------------------------------------


def test_criterion_8_lyapunov(cfg):
    t0 = time.perf_counter()
    r = robustness_margin(cfg.controllers.bsfl.lambdas, np.eye(3), gamma2=0.0)
    spd = bool(np.all(np.linalg.eigvalsh(r.P) > 0)) and np.array_equal(r.P, r.P.T)
    e_id = np.abs(solve_lyapunov(-np.eye(3), np.eye(3)) - np.eye(3) / 2).max()
    e_diag = np.abs(solve_lyapunov(np.diag([-5.0, -10.0, -15.0]), np.eye(3)) - np.diag([1 / 10, 1 / 20, 1 / 30])).max()
    ok = r.residual < 1e-10 and spd and r.gamma1_max > 0 and r.ultimate_bound == 0.0 and e_id < 1e-12 and e_diag < 1e-12
    detail = (
        f"residual={r.residual:.1e}, P SPD={spd}, gamma1_max={r.gamma1_max:.4f}, bound(gamma2=0)={r.ultimate_bound}, "
        f"A=-I err={e_id:.1e}, diagonal err={e_diag:.1e}"
    )
    _verdict(8, "Lyapunov suite", ok, detail, time.perf_counter() - t0, 1.0)


# 9 -----------------------------------------------------------------------------


def test_criterion_9_integrator_order(cfg):
    t0 = time.perf_counter()
    states = []
    for dt in (2e-4, 1e-4, 5e-5):
        sc = fault_scenario(BSFL, T_FAULT, T_CLEAR, duration=2.0, dt=dt, record_stride=int(round(1e-2 / dt)))
        s = run_scenario(sc, cfg.machine, cfg.operating_point, cfg.gains_for(BSFL)).series
        states.append(np.column_stack([s.delta, s.domega, s.eqp]))
    e1 = np.abs(states[0] - states[1]).max()
    e2 = np.abs(states[1] - states[2]).max()
    order = math.log2(e1 / e2)
    _verdict(9, "integrator order", order >= 3.8,
             f"bsfl fault run 0-2 s, max state error {e1:.2e} -> {e2:.2e}, order {order:.2f} (>=3.8)",
             time.perf_counter() - t0, 60.0)


# 10 ----------------------------------------------------------------------------


def test_criterion_10_determinism(config_path, tmp_path, capsys):
    t0 = time.perf_counter()
    blobs = []
    for i in range(2):
        csv = tmp_path / f"run{i}.csv"
        code = cli_main(["simulate", str(config_path), "--out", str(csv), "--summary", str(tmp_path / f"s{i}.json")])
        blobs.append((code, csv.read_bytes()))
    capsys.readouterr()
    same = blobs[0][1] == blobs[1][1]
    _verdict(10, "determinism", same and blobs[0][0] == blobs[1][0],
             f"two simulate runs, {len(blobs[0][1])} bytes each, identical={same}",
             time.perf_counter() - t0, 10.0)
