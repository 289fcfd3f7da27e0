"""Post-processing: response metrics, critical clearing time, Lyapunov
robustness margins and the exact-linearization residual check."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import controllers as ctl
from .engine import ControllerKind, TimeSeries, fault_scenario, run_scenario
from .model import (
    Equilibrium,
    MachineParams,
    NetworkMode,
    OperatingPoint,
    compute_coefficients,
    compute_equilibrium,
    plant_derivatives,
)

__all__ = [
    "Metrics",
    "SettlingError",
    "BracketError",
    "NonMonotoneError",
    "NonHurwitzError",
    "CctResult",
    "LyapunovReport",
    "compute_metrics",
    "bisect_threshold",
    "cct_search",
    "solve_lyapunov",
    "robustness_margin",
    "linearization_residual",
    "chain_coordinates",
    "estimate_gamma",
]


class SettlingError(ValueError):
    """The signal never stays inside the settling band."""


class BracketError(ValueError):
    pass


class NonMonotoneError(RuntimeError):
    pass


class NonHurwitzError(ValueError):
    pass


# -- response metrics ---------------------------------------------------------


@dataclass
class Metrics:
    settling_time_2pct: float
    first_swing_peak: float
    first_swing_time: float
    overshoot_pct: float
    backswing_detected: bool
    final_value: float = 0.0
    band: float = 0.0

    def as_dict(self) -> dict:
        return {
            "settling_time_2pct": self.settling_time_2pct,
            "first_swing_peak": self.first_swing_peak,
            "first_swing_time": self.first_swing_time,
            "overshoot_pct": self.overshoot_pct,
            "backswing_detected": self.backswing_detected,
            "final_value": self.final_value,
        }


def _first_extremum(x: np.ndarray, tol: float) -> int | None:
    d = np.diff(x)
    sig = np.where(np.abs(d) > tol, np.sign(d), 0.0)
    nz = np.flatnonzero(sig)
    if len(nz) < 2:
        return None
    flips = np.flatnonzero(sig[nz[1:]] != sig[nz[:-1]])
    if len(flips) == 0:
        return None
    # extremum sits at the end of the last rising (or falling) difference
    return int(nz[flips[0]] + 1)


def compute_metrics(
    series: TimeSeries,
    signal: str,
    t_ref: float,
    final_value: float | None = None,
    band_frac: float = 0.02,
    backswing_frac: float = 0.10,
) -> Metrics:
    """Settling time, first swing, overshoot and backswing of one column.

    The band is ``band_frac`` of the final value, or of the largest excursion
    when the final value is zero.  Times are measured from ``t_ref``.
    """
    t_all = series.t
    m = t_all >= t_ref - 1e-12
    t = t_all[m] - t_ref
    x = np.asarray(series.column(signal), dtype=float)[m]
    if len(x) < 2:
        raise SettlingError("fewer than two samples after t_ref")
    if final_value is None:
        tail = max(1, int(math.ceil(0.05 * len(x))))
        final_value = float(np.mean(x[-tail:]))
    dev = x - final_value
    scale = float(np.max(np.abs(dev)))
    if abs(final_value) > 1e-9 * max(scale, 1e-300):
        band = band_frac * abs(final_value)
    else:
        band = band_frac * scale

    outside = np.flatnonzero(np.abs(dev) > band)
    if len(outside) == 0:
        settling = 0.0
    elif outside[-1] == len(x) - 1:
        raise SettlingError(f"{signal} never settles inside the +/-{band:.3g} band")
    else:
        i = outside[-1]
        # interpolate the band crossing between samples i and i+1
        a, b = abs(dev[i]), abs(dev[i + 1])
        frac = (a - band) / (a - b) if a != b else 0.0
        settling = float(t[i] + frac * (t[i + 1] - t[i]))

    k = _first_extremum(x, tol=1e-12 * max(1.0, scale))
    if k is None:
        k = int(np.argmax(np.abs(dev)))
    peak, t_peak = float(x[k]), float(t[k])

    step = final_value - x[0]
    if abs(step) > 1e-9 * max(1.0, abs(final_value)):
        over = float(np.max(np.sign(step) * dev))
        overshoot = float(100.0 * max(0.0, over) / abs(step))
    else:
        overshoot = 0.0

    amp = peak - final_value
    backswing = False
    if abs(amp) > band:
        after = (t > t_peak) & (t <= max(settling, t_peak))
        opposite = -np.sign(amp) * dev[after]
        backswing = bool(np.any(opposite > backswing_frac * abs(amp)))
    return Metrics(settling, peak, t_peak, overshoot, backswing, final_value, band)


# -- critical clearing time ---------------------------------------------------


@dataclass
class CctResult:
    duration: float
    clearing_time: float
    fault_start: float
    tol: float
    trace: list = field(default_factory=list)


def bisect_threshold(
    is_stable: Callable[[float], bool],
    lo: float,
    hi: float,
    tol: float,
    snap: float | None = None,
    trace: list | None = None,
    grid: int = 0,
) -> float:
    """Largest stable value in ``[lo, hi)`` for a monotone stability oracle.

    ``lo`` must be stable and ``hi`` unstable.  With ``snap`` every probe is
    rounded to a multiple of ``snap``.  ``grid`` interior points are probed
    before bisecting, which exposes a non-monotone oracle on that grid.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    trace = [] if trace is None else trace

    def probe(v):
        ok = bool(is_stable(v))
        for w, s in trace:
            if (w <= v and not s and ok) or (w >= v and s and not ok):
                raise NonMonotoneError(f"probe at {v} contradicts earlier probe at {w}")
        trace.append((v, ok))
        return ok

    if not probe(lo):
        raise BracketError(f"lower bracket {lo} is not stable")
    if probe(hi):
        raise BracketError(f"upper bracket {hi} is stable")
    for v in np.linspace(lo, hi, grid + 2)[1:-1]:
        v = round(v / snap) * snap if snap else float(v)
        if probe(v):
            lo = max(lo, v)
        else:
            hi = min(hi, v)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if snap:
            mid = round(mid / snap) * snap
            if not lo < mid < hi:
                break
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return lo


def cct_search(
    params: MachineParams,
    op: OperatingPoint,
    controller: ControllerKind,
    gains=None,
    fault_start: float = 0.6,
    horizon: float = 5.0,
    lo: float = 0.01,
    hi: float = 0.6,
    tol: float = 1e-3,
    dt: float = 1e-4,
    grid: int = 0,
) -> CctResult:
    """Longest stable bolted-fault duration, by bisection.

    ``horizon`` is the total simulated time of every probe.
    """
    if tol < dt:
        raise ValueError(f"tol={tol} must be >= dt={dt}")

    def stable(duration: float) -> bool:
        sc = fault_scenario(
            controller,
            t_fault=fault_start,
            t_clear=round((fault_start + duration) / dt) * dt,
            duration=horizon,
            dt=dt,
            record_stride=1000,
        )
        return run_scenario(sc, params, op, gains).stable

    trace: list = []
    d = bisect_threshold(stable, lo, hi, tol, snap=dt, trace=trace, grid=grid)
    return CctResult(d, fault_start + d, fault_start, tol, trace)


# -- Lyapunov robustness ------------------------------------------------------


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``P A + A^T P = -Q`` for symmetric positive definite ``P``.

    Uses the Kronecker form ``(I kron A^T + A^T kron I) vec(P) = -vec(Q)``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise ValueError("A and Q must be square and of equal size")
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    if np.any(np.linalg.eigvalsh(0.5 * (Q + Q.T)) <= 0):
        raise ValueError("Q must be positive definite")
    eig = np.linalg.eigvals(A)
    if np.any(eig.real >= 0):
        raise NonHurwitzError(f"A is not Hurwitz, eigenvalues {eig}")
    eye = np.eye(n)
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    vec_p = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    P = vec_p.reshape(n, n, order="F")
    P = 0.5 * (P + P.T)
    np.linalg.cholesky(P)
    return P


@dataclass
class LyapunovReport:
    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    pb_norm: float
    lambda_min_q: float
    gamma1_max: float
    ultimate_bound_coeff: float
    residual: float
    gamma2: float = 0.0

    @property
    def ultimate_bound(self) -> float:
        """Radius ``8 ||PB|| gamma2 / lambda_min(Q)``."""
        return self.ultimate_bound_coeff * self.gamma2

    def as_dict(self) -> dict:
        return {
            "lambdas": [-float(v) for v in np.diag(self.A)],
            "P": self.P.tolist(),
            "Q": self.Q.tolist(),
            "pb_norm": self.pb_norm,
            "lambda_min_q": self.lambda_min_q,
            "gamma1_max": self.gamma1_max,
            "ultimate_bound_coeff": self.ultimate_bound_coeff,
            "gamma2": self.gamma2,
            "ultimate_bound": self.ultimate_bound,
            "residual": self.residual,
        }


def robustness_margin(lambdas, Q=None, gamma2: float = 0.0) -> LyapunovReport:
    """Tolerable perturbation growth for the backstepping chain.

    A perturbation entering the last chain equation with
    ``||d(xi)|| <= gamma1 ||xi|| + gamma2`` keeps the origin (ultimately)
    bounded when ``gamma1 < gamma1_max``.
    """
    if any(not v > 0 for v in lambdas):
        raise ValueError("all lambdas must be positive")
    if gamma2 < 0:
        raise ValueError("gamma2 must be non-negative")
    A = ctl.chain_matrix(lambdas)
    Q = np.eye(3) if Q is None else np.asarray(Q, dtype=float)
    B = np.array([[0.0], [0.0], [1.0]])
    P = solve_lyapunov(A, Q)
    pb = float(np.linalg.norm(P @ B, 2))
    lmin = float(np.linalg.eigvalsh(Q).min())
    residual = float(np.abs(P @ A + A.T @ P + Q).max())
    return LyapunovReport(
        A=A,
        B=B,
        P=P,
        Q=Q,
        pb_norm=pb,
        lambda_min_q=lmin,
        gamma1_max=lmin / (4.0 * pb),
        ultimate_bound_coeff=8.0 * pb / lmin,
        residual=residual,
        gamma2=gamma2,
    )


# -- exact-linearization residuals -------------------------------------------


def chain_coordinates(series: TimeSeries, kind: ControllerKind, gains, params, eq):
    """Transformed coordinates (xi or z) of every recorded sample."""
    coeffs = compute_coefficients(params, eq)
    xs = np.column_stack([series.delta - eq.delta0, series.domega, series.eqp - eq.eqp0])
    if kind is ControllerKind.BSFL:
        return np.array([ctl.bsfl_transform(x, gains, coeffs, eq) for x in xs])
    if kind is ControllerKind.DFL:
        return np.array([ctl.dfl_transform(x, coeffs, eq) for x in xs])
    raise ValueError(f"no chain coordinates for controller {kind.value!r}")


def _d4(y: np.ndarray, h: float) -> np.ndarray:
    # fourth-order central difference on interior points
    return (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * h)


def linearization_residual(
    coords: np.ndarray,
    t: np.ndarray,
    kind: ControllerKind,
    gains,
) -> np.ndarray:
    """Relative residual of each closed-loop chain equation.

    ``coords`` holds xi (backstepping) or z (DFL) sampled on the uniform grid
    ``t``.  Returns ``max|r_i| / max|coord_i|`` for the three equations.
    """
    coords = np.asarray(coords, dtype=float)
    if len(coords) < 10:
        raise ValueError("segment too short: need at least 10 samples")
    h = float(t[1] - t[0])
    if not np.allclose(np.diff(t), h, rtol=1e-6, atol=1e-12):
        raise ValueError("time grid must be uniform")
    dot = np.column_stack([_d4(coords[:, i], h) for i in range(3)])
    c = coords[2:-2]
    if kind is ControllerKind.BSFL:
        A = ctl.chain_matrix(gains.lambdas)
    elif kind is ControllerKind.DFL:
        A = ctl.companion_matrix(gains)
    else:
        raise ValueError(f"no chain for controller {kind.value!r}")
    r = dot - c @ A.T
    scale = np.abs(coords).max(axis=0)
    scale[scale == 0] = 1.0
    return np.abs(r).max(axis=0) / scale


# -- empirical perturbation bound --------------------------------------------


def estimate_gamma(
    params_true: MachineParams,
    params_model: MachineParams,
    op: OperatingPoint,
    gains: ctl.BsflGains | None = None,
    n_samples: int = 500,
    radius: float = 0.2,
    seed: int = 0,
) -> tuple[float, float]:
    """Estimate ``(gamma1, gamma2)`` of the chain perturbation ``d(xi)``.

    The controller is built from ``params_model``; the plant runs with
    ``params_true`` (same bus voltage and mechanical power).  ``d(xi)`` is
    ``xi_dot - A xi`` along the true flow, sampled over deviation states with
    ``|x1| <= radius`` rad and proportional spreads in the other states.
    """
    gains = gains or ctl.BsflGains()
    # the characterization concerns the unsaturated law
    unclamped = dataclasses.replace(params_model, efd_max=math.inf, efd_min=-math.inf)
    eq = compute_equilibrium(params_model, op)
    c_model = compute_coefficients(params_model, eq)
    c_true = compute_coefficients(params_true, eq)
    A = ctl.chain_matrix(gains.lambdas)
    rng = np.random.default_rng(seed)

    def xi(x):
        return np.array(ctl.bsfl_transform(x, gains, c_model, eq))

    def perturbation(x):
        u = ctl.bsfl_control(x, gains, c_model, eq, unclamped)
        y = (x[0] + eq.delta0, x[1], x[2] + eq.eqp0)
        xdot = np.array(
            plant_derivatives(y, u.efd, NetworkMode.NORMAL, params_true, eq, c_true)
        )
        h = 1e-7
        J = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h * max(1.0, abs(x[j]))
            J[:, j] = (xi(x + e) - xi(x - e)) / (2 * e[j])
        z = xi(x)
        return J @ xdot - A @ z, z

    d0, _ = perturbation(np.zeros(3))
    gamma2 = float(np.linalg.norm(d0))
    ratios = []
    for _ in range(n_samples):
        x = rng.uniform(-1, 1, 3) * np.array([radius, radius / c_model.a1 * 10, radius])
        d, z = perturbation(x)
        nz = np.linalg.norm(z)
        if nz > 0:
            ratios.append(max(0.0, np.linalg.norm(d) - gamma2) / nz)
    return float(max(ratios)), gamma2
