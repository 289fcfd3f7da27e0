"""Single-machine infinite-bus plant (one-axis synchronous generator model).

State is ``(delta, domega, eqp)``: rotor angle against the infinite bus in
radians, speed deviation in pu and q-axis transient EMF in pu.  The network is
lossless; a bolted three-phase fault at the generator terminals collapses the
terminal voltage and the electrical power to zero.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

__all__ = [
    "MachineParams",
    "OperatingPoint",
    "Equilibrium",
    "Coefficients",
    "PlantState",
    "NetworkMode",
    "PlantOutputs",
    "EquilibriumError",
    "compute_equilibrium",
    "compute_coefficients",
    "plant_derivatives",
    "plant_outputs",
]


class EquilibriumError(ValueError):
    """Raised when no valid steady state exists for an operating point."""


@dataclass(frozen=True)
class MachineParams:
    """Physical constants of the machine, exciter ceiling and line.

    Reactances are in pu on the machine base, time constants and the inertia
    constant ``m`` (= 2H) in seconds, ``omega_base`` in rad/s.
    """

    xd: float = 1.7
    xq: float = 1.64
    xdp: float = 0.245
    xe: float = 0.2
    tdop: float = 5.9
    m: float = 6.6
    d: float = 0.0
    ke: float = 400.0
    omega_base: float = 2.0 * math.pi * 60.0
    efd_max: float = 4.5
    efd_min: float = -4.5

    def __post_init__(self) -> None:
        checks = [
            (self.xd > self.xdp > 0, "xd > xdp > 0"),
            (self.xq > 0, "xq > 0"),
            (self.xe >= 0, "xe >= 0"),
            (self.tdop > 0, "tdop > 0"),
            (self.m > 0, "m > 0"),
            (self.d >= 0, "d >= 0"),
            (self.ke > 0, "ke > 0"),
            (self.omega_base > 0, "omega_base > 0"),
            (self.efd_max > 0 > self.efd_min, "efd_max > 0 > efd_min"),
        ]
        for ok, rule in checks:
            if not ok:
                raise ValueError(f"MachineParams violates {rule}")


@dataclass(frozen=True)
class OperatingPoint:
    p0: float = 0.8
    q0: float = 0.496
    vt0: float = 1.0

    def __post_init__(self) -> None:
        if not self.p0 > 0:
            raise ValueError("OperatingPoint violates p0 > 0")


@dataclass(frozen=True)
class Equilibrium:
    delta0: float
    eqp0: float
    uf0: float
    efd0: float
    pm: float
    vb: float
    id0: float
    iq0: float


@dataclass(frozen=True)
class Coefficients:
    """Lumped model coefficients.

    With these (all of ``a3``..``a6`` positive) the plant reads::

        d(delta)/dt  = a1*domega
        d(domega)/dt = -a2*domega - a3*eqp*sin(delta) + a4*sin(2*delta) + a7
        d(eqp)/dt    = -a5*eqp + a6*cos(delta) + a*uf
    """

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    a7: float
    a: float


class PlantState(NamedTuple):
    delta: float
    domega: float
    eqp: float


class NetworkMode(enum.Enum):
    NORMAL = "normal"
    BOLTED_FAULT = "bolted_fault"


class PlantOutputs(NamedTuple):
    pe: float
    vt: float
    id: float
    iq: float
    vtd: float
    vtq: float


def _to_rotor_frame(phasor: complex, angle: float) -> tuple[float, float]:
    """Return (d, q) components of a network phasor, q axis at ``angle``."""
    r = phasor * cmath.exp(-1j * (angle - math.pi / 2))
    return r.real, r.imag


def compute_equilibrium(params: MachineParams, op: OperatingPoint) -> Equilibrium:
    """Steady state for a terminal dispatch ``(p0, q0, vt0)``.

    The terminal voltage is the reference phasor.  The result is checked
    against the closed-form coefficient relations and must agree to 1e-6.
    """
    if op.vt0 <= 0:
        raise EquilibriumError("degenerate phasor: vt0 must be positive")
    vt = complex(op.vt0, 0.0)
    cur = complex(op.p0, -op.q0) / vt.conjugate()
    vb_ph = vt - 1j * params.xe * cur
    eq_ph = vt + 1j * params.xq * cur
    if abs(vb_ph) == 0 or abs(eq_ph) == 0:
        raise EquilibriumError("degenerate phasor: zero bus or internal voltage")
    theta_b = cmath.phase(vb_ph)
    theta_e = cmath.phase(eq_ph)
    delta0 = theta_e - theta_b
    if not 0 < delta0 < math.pi:
        raise EquilibriumError(f"rotor angle {delta0:.6g} rad outside (0, pi)")

    id0, iq0 = _to_rotor_frame(cur, theta_e)
    _, vtq = _to_rotor_frame(vt, theta_e)
    eqp0 = vtq + params.xdp * id0
    efd0 = eqp0 + (params.xd - params.xdp) * id0
    eq = Equilibrium(
        delta0=delta0,
        eqp0=eqp0,
        uf0=efd0 / params.ke,
        efd0=efd0,
        pm=op.p0,
        vb=abs(vb_ph),
        id0=id0,
        iq0=iq0,
    )
    if eqp0 <= 0:
        raise EquilibriumError(f"non-positive transient EMF {eqp0:.6g}")

    c = compute_coefficients(params, eq)
    eqp_alt = (c.a7 + c.a4 * math.sin(2 * delta0)) / (c.a3 * math.sin(delta0))
    uf_alt = (c.a5 * eqp_alt - c.a6 * math.cos(delta0)) / c.a
    if abs(eqp_alt - eqp0) > 1e-6 or abs(uf_alt - eq.uf0) > 1e-6:
        raise EquilibriumError(
            "phasor and coefficient routes disagree: "
            f"eqp0 {eqp0!r} vs {eqp_alt!r}, uf0 {eq.uf0!r} vs {uf_alt!r}"
        )
    return eq


def compute_coefficients(params: MachineParams, eq: Equilibrium) -> Coefficients:
    p = params
    xd_sum = p.xdp + p.xe
    xq_sum = p.xq + p.xe
    return Coefficients(
        a1=p.omega_base,
        a2=p.d / p.m,
        a3=eq.vb / (p.m * xd_sum),
        a4=eq.vb**2 / (2 * p.m) * (1 / xd_sum - 1 / xq_sum),
        a5=(1 + (p.xd - p.xdp) / xd_sum) / p.tdop,
        a6=eq.vb * (p.xd - p.xdp) / (p.tdop * xd_sum),
        a7=eq.pm / p.m,
        a=p.ke / p.tdop,
    )


def plant_derivatives(
    state,
    efd: float,
    mode: NetworkMode,
    params: MachineParams,
    eq: Equilibrium,
    coeffs: Coefficients,
    pm: float | None = None,
) -> tuple[float, float, float]:
    """Time derivative of ``(delta, domega, eqp)``.

    ``pm`` overrides the equilibrium mechanical power (load-step events); the
    caller is responsible for clamping ``efd`` to the exciter ceiling.
    """
    delta, domega, eqp = state[0], state[1], state[2]
    c = coeffs
    a7 = c.a7 if pm is None else pm / params.m
    ddelta = c.a1 * domega
    if mode is NetworkMode.NORMAL:
        sd = math.sin(delta)
        ddomega = -c.a2 * domega - c.a3 * eqp * sd + c.a4 * math.sin(2 * delta) + a7
        deqp = -c.a5 * eqp + c.a6 * math.cos(delta) + efd / params.tdop
    else:
        ddomega = -c.a2 * domega + a7
        deqp = (efd - params.xd / params.xdp * eqp) / params.tdop
    return ddelta, ddomega, deqp


def plant_outputs(
    state, mode: NetworkMode, params: MachineParams, eq: Equilibrium
) -> PlantOutputs:
    delta, eqp = state[0], state[2]
    if mode is NetworkMode.BOLTED_FAULT:
        return PlantOutputs(0.0, 0.0, eqp / params.xdp, 0.0, 0.0, 0.0)
    vb = eq.vb
    sd, cd = math.sin(delta), math.cos(delta)
    i_d = (eqp - vb * cd) / (params.xdp + params.xe)
    i_q = vb * sd / (params.xq + params.xe)
    vtq = vb * cd + params.xe * i_d
    vtd = vb * sd - params.xe * i_q
    pe = vb / (params.xdp + params.xe) * eqp * sd + 0.5 * vb**2 * (
        1 / (params.xq + params.xe) - 1 / (params.xdp + params.xe)
    ) * math.sin(2 * delta)
    return PlantOutputs(pe, math.hypot(vtd, vtq), i_d, i_q, vtd, vtq)
