"""Excitation controllers: backstepping linearization, direct feedback
linearization and a conventional AVR + exciter + PSS.

The two linearizing laws are pure functions of the deviation state
``x = (delta - delta0, domega, eqp - eqp0)`` and return a field voltage.  Both
divide by ``sin(delta)``; inside the guard band they hold the previously
commanded field voltage (``efd_hold``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .model import Coefficients, Equilibrium, MachineParams

__all__ = [
    "BsflGains",
    "DflGains",
    "CpssParams",
    "CpssState",
    "XiVector",
    "ZVector",
    "ControlOutput",
    "bsfl_transform",
    "bsfl_partials",
    "bsfl_a3",
    "bsfl_control",
    "dfl_transform",
    "dfl_drift",
    "dfl_control",
    "cpss_reference",
    "cpss_init",
    "cpss_derivatives",
    "chain_matrix",
    "companion_matrix",
]


@dataclass(frozen=True)
class BsflGains:
    l1: float = 5.0
    l2: float = 10.0
    l3: float = 15.0
    sin_eps: float = 1e-3

    def __post_init__(self) -> None:
        if not (self.l1 > 0 and self.l2 > 0 and self.l3 > 0):
            raise ValueError("BsflGains violates l1, l2, l3 > 0")
        if not 0 < self.sin_eps < 0.1:
            raise ValueError("BsflGains violates 0 < sin_eps < 0.1")

    @property
    def lambdas(self) -> tuple[float, float, float]:
        return (self.l1, self.l2, self.l3)


@dataclass(frozen=True)
class DflGains:
    k1: float = 1100.0
    k2: float = 185.0
    k3: float = 11.0
    sin_eps: float = 1e-3

    def __post_init__(self) -> None:
        roots = np.roots([1.0, self.k3, self.k2, self.k1])
        if not np.all(roots.real < 0):
            raise ValueError(
                "DflGains violates Hurwitz condition: roots of "
                f"s^3 + {self.k3}s^2 + {self.k2}s + {self.k1} are {roots}"
            )
        if not 0 < self.sin_eps < 0.1:
            raise ValueError("DflGains violates 0 < sin_eps < 0.1")


@dataclass(frozen=True)
class CpssParams:
    """Bus-fed thyristor exciter with AVR and speed-input PSS.

    ``vref=None`` means "back-compute from the equilibrium" (see
    :func:`cpss_reference`).
    """

    ke: float = 400.0
    te: float = 0.05
    kfe: float = 0.025
    tfe: float = 1.0
    tr: float = 0.6e-3
    kstab: float = 17.57
    tw: float = 6.6
    t1: float = 1.48
    t2: float = 0.33
    t3: float = 3.55
    t4: float = 11.57
    vpss_max: float = 0.15
    vpss_min: float = -0.15
    efd_max: float = 4.5
    efd_min: float = -4.5
    vref: float | None = None

    def __post_init__(self) -> None:
        for name in ("te", "tfe", "tr", "tw", "t1", "t2", "t3", "t4"):
            if not getattr(self, name) > 0:
                raise ValueError(f"CpssParams violates {name} > 0")
        if not self.vpss_max > 0 > self.vpss_min:
            raise ValueError("CpssParams violates vpss_max > 0 > vpss_min")
        if not self.efd_max > 0 > self.efd_min:
            raise ValueError("CpssParams violates efd_max > 0 > efd_min")


class CpssState(NamedTuple):
    x_tr: float
    x_w: float
    x_ll1: float
    x_ll2: float
    x_amp: float
    x_fb: float


class XiVector(NamedTuple):
    xi1: float
    xi2: float
    xi3: float


class ZVector(NamedTuple):
    z1: float
    z2: float
    z3: float


class ControlOutput(NamedTuple):
    efd: float
    guard: bool
    sat: bool
    command: float


def _clamp(v: float, lo: float, hi: float) -> tuple[float, bool]:
    if v > hi:
        return hi, True
    if v < lo:
        return lo, True
    return v, False


def _f2(x1: float, x2: float, c: Coefficients, eq: Equilibrium) -> float:
    # drift of the speed equation with eqp frozen at its equilibrium value
    d = x1 + eq.delta0
    return -c.a2 * x2 - c.a3 * eq.eqp0 * math.sin(d) + c.a4 * math.sin(2 * d) + c.a7


def _f3(x1: float, x3: float, c: Coefficients, eq: Equilibrium) -> float:
    # field drift in deviation form; the constant terms cancel at equilibrium
    return -c.a5 * x3 + c.a6 * (math.cos(x1 + eq.delta0) - math.cos(eq.delta0))


# -- backstepping feedback linearization ------------------------------------


def bsfl_transform(x, gains: BsflGains, coeffs: Coefficients, eq: Equilibrium) -> XiVector:
    """Map deviation state ``x`` to chain coordinates ``xi``."""
    x1, x2, x3 = x
    c = coeffs
    l1, l2 = gains.l1, gains.l2
    xi1 = x1
    xi2 = c.a1 * x2 + l1 * x1
    phi2 = -c.a1 * c.a3 * math.sin(x1 + eq.delta0)
    a2 = l2 * xi2 + c.a1 * _f2(x1, x2, c, eq) + l1 * (-l1 * xi1 + xi2)
    return XiVector(xi1, xi2, phi2 * x3 + a2)


def _phi2(xi1: float, xi2: float, gains, c, eq) -> float:
    return -c.a1 * c.a3 * math.sin(xi1 + eq.delta0)


def _a2(xi1: float, xi2: float, gains: BsflGains, c: Coefficients, eq: Equilibrium) -> float:
    l1, l2 = gains.l1, gains.l2
    x2 = (xi2 - l1 * xi1) / c.a1
    return l2 * xi2 + c.a1 * _f2(xi1, x2, c, eq) + l1 * (-l1 * xi1 + xi2)


def bsfl_partials(xi1: float, gains: BsflGains, coeffs: Coefficients, eq: Equilibrium):
    """Analytic partials ``(dphi2/dxi1, dphi2/dxi2, da2/dxi1, da2/dxi2)``.

    ``phi2`` and ``a2`` are taken as functions of ``(xi1, xi2)`` through
    ``x1 = xi1`` and ``x2 = (xi2 - l1*xi1)/a1``.
    """
    c = coeffs
    l1, l2 = gains.l1, gains.l2
    d = xi1 + eq.delta0
    dphi2_1 = -c.a1 * c.a3 * math.cos(d)
    dphi2_2 = 0.0
    da2_1 = (
        c.a2 * l1
        - l1 * l1
        - c.a1 * c.a3 * eq.eqp0 * math.cos(d)
        + 2 * c.a1 * c.a4 * math.cos(2 * d)
    )
    da2_2 = l1 + l2 - c.a2
    return dphi2_1, dphi2_2, da2_1, da2_2


def bsfl_a3(x, gains: BsflGains, coeffs: Coefficients, eq: Equilibrium) -> float:
    """Last-stage term ``a3`` of the recursion, evaluated in one pass.

    Equivalent to composing :func:`bsfl_transform` and :func:`bsfl_partials`
    but shares the trigonometric terms (this is the simulator's hot path).
    """
    x1, x2, x3 = x
    c = coeffs
    l1, l2, l3 = gains.l1, gains.l2, gains.l3
    d = x1 + eq.delta0
    sd, cd = math.sin(d), math.cos(d)
    a1a3 = c.a1 * c.a3
    f2 = -c.a2 * x2 - c.a3 * eq.eqp0 * sd + c.a4 * 2.0 * sd * cd + c.a7
    f3 = -c.a5 * x3 + c.a6 * (cd - math.cos(eq.delta0))
    xi2 = c.a1 * x2 + l1 * x1
    phi2 = -a1a3 * sd
    xi3 = phi2 * x3 + l2 * xi2 + c.a1 * f2 + l1 * (-l1 * x1 + xi2)
    da2_1 = c.a2 * l1 - l1 * l1 - a1a3 * eq.eqp0 * cd + 2 * c.a1 * c.a4 * (cd * cd - sd * sd)
    da2_2 = l1 + l2 - c.a2
    return (
        l3 * xi3
        + phi2 * f3
        + (-a1a3 * cd * x3 + da2_1) * (-l1 * x1 + xi2)
        + da2_2 * (-l2 * xi2 + xi3)
    )


def bsfl_control(
    x,
    gains: BsflGains,
    coeffs: Coefficients,
    eq: Equilibrium,
    params: MachineParams,
    efd_hold: float | None = None,
) -> ControlOutput:
    """Field voltage from the backstepping law ``duf = -a3 / (a*phi2)``."""
    s = math.sin(x[0] + eq.delta0)
    if abs(s) < gains.sin_eps:
        hold = eq.efd0 if efd_hold is None else efd_hold
        return ControlOutput(hold, True, False, hold)
    gain = -coeffs.a * coeffs.a1 * coeffs.a3 * s
    duf = -bsfl_a3(x, gains, coeffs, eq) / gain
    command = params.ke * (eq.uf0 + duf)
    efd, sat = _clamp(command, params.efd_min, params.efd_max)
    return ControlOutput(efd, False, sat, command)


def chain_matrix(lambdas) -> np.ndarray:
    """Closed-loop matrix of the backstepping chain (upper bidiagonal)."""
    l1, l2, l3 = lambdas
    return np.array([[-l1, 1.0, 0.0], [0.0, -l2, 1.0], [0.0, 0.0, -l3]])


# -- direct feedback linearization -------------------------------------------


def dfl_transform(x, coeffs: Coefficients, eq: Equilibrium) -> ZVector:
    x1, x2, x3 = x
    c = coeffs
    g2 = -c.a3 * math.sin(x1 + eq.delta0)
    return ZVector(x1, c.a1 * x2, c.a1 * (_f2(x1, x2, c, eq) + g2 * x3))


def dfl_drift(x, coeffs: Coefficients, eq: Equilibrium) -> float:
    """Derivative of ``z3`` along the unforced flow (``duf = 0``)."""
    x1, x2, x3 = x
    c = coeffs
    d = x1 + eq.delta0
    sd, cd = math.sin(d), math.cos(d)
    dz3_dx1 = c.a1 * (-c.a3 * (eq.eqp0 + x3) * cd + 2 * c.a4 * math.cos(2 * d))
    dz3_dx2 = -c.a1 * c.a2
    dz3_dx3 = -c.a1 * c.a3 * sd
    x2dot = _f2(x1, x2, c, eq) - c.a3 * sd * x3
    return dz3_dx1 * c.a1 * x2 + dz3_dx2 * x2dot + dz3_dx3 * _f3(x1, x3, c, eq)


def dfl_control(
    x,
    gains: DflGains,
    coeffs: Coefficients,
    eq: Equilibrium,
    params: MachineParams,
    efd_hold: float | None = None,
) -> ControlOutput:
    """Field voltage from ``duf = alpha(x) + beta(x)*v`` with ``v = -K z``."""
    c = coeffs
    s = math.sin(x[0] + eq.delta0)
    if abs(s) < gains.sin_eps:
        hold = eq.efd0 if efd_hold is None else efd_hold
        return ControlOutput(hold, True, False, hold)
    z1, z2, z3 = dfl_transform(x, c, eq)
    v = -(gains.k1 * z1 + gains.k2 * z2 + gains.k3 * z3)
    beta = -1.0 / (c.a * c.a1 * c.a3 * s)
    alpha = -beta * dfl_drift(x, c, eq)
    duf = alpha + beta * v
    command = params.ke * (eq.uf0 + duf)
    efd, sat = _clamp(command, params.efd_min, params.efd_max)
    return ControlOutput(efd, False, sat, command)


def companion_matrix(gains: DflGains) -> np.ndarray:
    """Closed-loop matrix of the DFL integrator chain under ``v = -K z``."""
    return np.array(
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-gains.k1, -gains.k2, -gains.k3]]
    )


# -- conventional AVR + exciter + PSS ----------------------------------------


def cpss_reference(p: CpssParams, eq: Equilibrium, vt0: float) -> CpssParams:
    """Return ``p`` with ``vref`` set so the loop holds ``efd0`` at ``vt0``."""
    if not p.efd_min <= eq.efd0 <= p.efd_max:
        raise ValueError(
            f"steady field voltage {eq.efd0:.6g} outside exciter ceiling "
            f"[{p.efd_min}, {p.efd_max}]"
        )
    return replace(p, vref=vt0 + eq.efd0 / p.ke)


def cpss_init(p: CpssParams, eq: Equilibrium, vt0: float) -> CpssState:
    if not p.efd_min <= eq.efd0 <= p.efd_max:
        raise ValueError(
            f"steady field voltage {eq.efd0:.6g} outside exciter ceiling "
            f"[{p.efd_min}, {p.efd_max}]"
        )
    return CpssState(x_tr=vt0, x_w=0.0, x_ll1=0.0, x_ll2=0.0, x_amp=eq.efd0, x_fb=eq.efd0)


def _lead_lag(u: float, x: float, tn: float, td: float) -> tuple[float, float]:
    return (u - x) / td, x + tn / td * (u - x)


def cpss_derivatives(
    s: CpssState, p: CpssParams, vt: float, domega: float
) -> tuple[CpssState, float, bool]:
    """Block derivatives, clamped field voltage and saturation flag."""
    if p.vref is None:
        raise ValueError("CpssParams.vref unresolved; call cpss_reference first")
    dx_tr = (vt - s.x_tr) / p.tr

    u_w = p.kstab * domega
    dx_w = (u_w - s.x_w) / p.tw
    y_w = u_w - s.x_w
    dx_ll1, y1 = _lead_lag(y_w, s.x_ll1, p.t1, p.t2)
    dx_ll2, y2 = _lead_lag(y1, s.x_ll2, p.t3, p.t4)
    vpss = min(max(y2, p.vpss_min), p.vpss_max)

    efd, sat = _clamp(s.x_amp, p.efd_min, p.efd_max)
    dx_fb = (efd - s.x_fb) / p.tfe
    y_fb = p.kfe / p.tfe * (efd - s.x_fb)

    err = p.vref - s.x_tr + vpss
    dx_amp = (p.ke * (err - y_fb) - s.x_amp) / p.te
    # non-windup: the amplifier state may not move further past its limit
    if (s.x_amp >= p.efd_max and dx_amp > 0) or (s.x_amp <= p.efd_min and dx_amp < 0):
        dx_amp = 0.0
    return CpssState(dx_tr, dx_w, dx_ll1, dx_ll2, dx_amp, dx_fb), efd, sat
