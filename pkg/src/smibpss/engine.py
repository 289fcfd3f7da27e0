"""Fixed-step simulation of the plant with an excitation controller.

The coupled plant + controller system is integrated with classical RK4.  The
control law is evaluated at every stage, events switch the network mode or the
mechanical power exactly on grid points, and a run stops as soon as the rotor
angle leaves ``(0, pi)``.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from . import controllers as ctl
from .model import (
    Coefficients,
    Equilibrium,
    MachineParams,
    NetworkMode,
    OperatingPoint,
    compute_coefficients,
    compute_equilibrium,
    plant_derivatives,
    plant_outputs,
)

__all__ = [
    "EventKind",
    "Event",
    "ControllerKind",
    "Scenario",
    "TimeSeries",
    "SimOutcome",
    "ControllerContext",
    "rk4_increment",
    "rk4_step",
    "step_rk4",
    "run_scenario",
    "fault_scenario",
    "load_step_scenario",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "t", "delta_rad", "domega_pu", "eqp_pu", "pe_pu", "vt_pu", "efd_pu", "uf_pu", "guard", "sat",
)
_FIELDS = ("t", "delta", "domega", "eqp", "pe", "vt", "efd", "uf", "guard", "sat")


class EventKind(enum.Enum):
    APPLY_FAULT = "apply_fault"
    CLEAR_FAULT = "clear_fault"
    STEP_PM = "step_pm"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    factor: float = 1.0

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError("Event violates t >= 0")
        if self.kind is EventKind.STEP_PM and not self.factor > 0:
            raise ValueError("Event violates StepPm factor > 0")


class ControllerKind(enum.Enum):
    BSFL = "bsfl"
    DFL = "dfl"
    CPSS = "cpss"
    OPEN_LOOP = "open"


@dataclass(frozen=True)
class Scenario:
    duration: float
    dt: float = 1e-4
    events: tuple[Event, ...] = ()
    controller: ControllerKind = ControllerKind.BSFL
    record_stride: int = 10
    locate_switches: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        if not self.dt > 0:
            raise ValueError("Scenario violates dt > 0")
        if not self.duration > 0:
            raise ValueError("Scenario violates duration > 0")
        if self.record_stride < 1:
            raise ValueError("Scenario violates record_stride >= 1")
        times = [e.t for e in self.events]
        if times != sorted(times):
            raise ValueError("Scenario events must be sorted by time")
        for e in self.events:
            k = e.t / self.dt
            if abs(k - round(k)) > 1e-6:
                raise ValueError(f"event at t={e.t} is not on the dt={self.dt} grid")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def event_steps(self) -> dict[int, list[Event]]:
        out: dict[int, list[Event]] = {}
        for e in self.events:
            out.setdefault(int(round(e.t / self.dt)), []).append(e)
        return out


def fault_scenario(
    controller: ControllerKind,
    t_fault: float = 0.6,
    t_clear: float = 0.78,
    duration: float = 10.0,
    dt: float = 1e-4,
    record_stride: int = 10,
) -> Scenario:
    return Scenario(
        duration=duration,
        dt=dt,
        events=(Event(t_fault, EventKind.APPLY_FAULT), Event(t_clear, EventKind.CLEAR_FAULT)),
        controller=controller,
        record_stride=record_stride,
    )


def load_step_scenario(
    controller: ControllerKind,
    t_step: float = 1.0,
    factor: float = 1.2,
    duration: float = 10.0,
    dt: float = 1e-4,
    record_stride: int = 10,
) -> Scenario:
    return Scenario(
        duration=duration,
        dt=dt,
        events=(Event(t_step, EventKind.STEP_PM, factor),),
        controller=controller,
        record_stride=record_stride,
    )


@dataclass
class TimeSeries:
    """Recorded trajectory on a uniform grid.

    Columns are numpy arrays; ``guard`` and ``sat`` are integer flags.
    """

    t: np.ndarray
    delta: np.ndarray
    domega: np.ndarray
    eqp: np.ndarray
    pe: np.ndarray
    vt: np.ndarray
    efd: np.ndarray
    uf: np.ndarray
    guard: np.ndarray
    sat: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        if name not in _FIELDS:
            raise KeyError(f"unknown column {name!r}")
        return getattr(self, name)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        cols = [getattr(self, f) for f in _FIELDS]
        for i in range(len(self.t)):
            row = [repr(float(c[i])) for c in cols[:8]]
            row += [str(int(cols[8][i])), str(int(cols[9][i]))]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        cols = {f: data[:, i] for i, f in enumerate(_FIELDS)}
        cols["guard"] = cols["guard"].astype(int)
        cols["sat"] = cols["sat"].astype(int)
        return cls(**cols)


@dataclass
class SimOutcome:
    series: TimeSeries
    stable: bool
    instability_time: float | None = None


@dataclass
class ControllerContext:
    """Everything the stage derivative needs besides the state."""

    kind: ControllerKind
    params: MachineParams
    eq: Equilibrium
    coeffs: Coefficients
    gains: object = None
    efd_hold: float = 0.0

    @property
    def n_states(self) -> int:
        return 9 if self.kind is ControllerKind.CPSS else 3


def _digest(obj) -> str:
    def enc(o):
        if dataclasses.is_dataclass(o):
            return dataclasses.asdict(o)
        if isinstance(o, enum.Enum):
            return o.value
        raise TypeError(type(o))

    blob = json.dumps(obj, default=enc, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class StageEval(NamedTuple):
    dy: tuple
    efd: float
    guard: bool
    sat: bool
    command: float


def evaluate(y, mode: NetworkMode, pm: float, ctx: ControllerContext) -> StageEval:
    """Stage derivative of the bundle and the controller output at ``y``."""
    p, eq = ctx.params, ctx.eq
    kind = ctx.kind
    if kind is ControllerKind.CPSS:
        vt = plant_outputs(y, mode, p, eq).vt
        dc, efd, sat = ctl.cpss_derivatives(ctl.CpssState(*y[3:]), ctx.gains, vt, y[1])
        dp = plant_derivatives(y, efd, mode, p, eq, ctx.coeffs, pm)
        return StageEval(dp + tuple(dc), efd, False, sat, efd)
    if kind is ControllerKind.OPEN_LOOP:
        dp = plant_derivatives(y, eq.efd0, mode, p, eq, ctx.coeffs, pm)
        return StageEval(dp, eq.efd0, False, False, eq.efd0)
    x = (y[0] - eq.delta0, y[1], y[2] - eq.eqp0)
    law = ctl.bsfl_control if kind is ControllerKind.BSFL else ctl.dfl_control
    out = law(x, ctx.gains, ctx.coeffs, eq, p, ctx.efd_hold)
    dp = plant_derivatives(y, out.efd, mode, p, eq, ctx.coeffs, pm)
    return StageEval(dp, out.efd, out.guard, out.sat, out.command)


def rk4_increment(f: Callable, y: Sequence[float], dt: float, k1=None) -> tuple:
    """Increment ``y(t + dt) - y(t)`` of one classical Runge-Kutta step."""
    if k1 is None:
        k1 = f(y)
    h = 0.5 * dt
    k2 = f(tuple(a + h * b for a, b in zip(y, k1)))
    k3 = f(tuple(a + h * b for a, b in zip(y, k2)))
    k4 = f(tuple(a + dt * b for a, b in zip(y, k3)))
    s = dt / 6.0
    return tuple(s * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for b1, b2, b3, b4 in zip(k1, k2, k3, k4))


def rk4_step(f: Callable, y: Sequence[float], dt: float, k1=None) -> tuple:
    """One classical Runge-Kutta step for ``dy/dt = f(y)``.

    ``k1`` may be supplied when ``f(y)`` is already known.
    """
    return tuple(a + b for a, b in zip(y, rk4_increment(f, y, dt, k1)))


def _kahan_add(y, comp, incr):
    # compensated update keeps round-off from accumulating over 1e5 steps
    out, new_comp = [], []
    for a, c, b in zip(y, comp, incr):
        b = b - c
        t = a + b
        new_comp.append((t - a) - b)
        out.append(t)
    return tuple(out), tuple(new_comp)


def step_rk4(y, dt: float, mode: NetworkMode, pm: float, ctx: ControllerContext) -> tuple:
    """Advance the plant (+ exciter states) by one RK4 step.

    Saturation is applied inside every stage evaluation.
    """
    return rk4_step(lambda s: evaluate(s, mode, pm, ctx).dy, y, dt)


def _default_gains(kind: ControllerKind):
    return {
        ControllerKind.BSFL: ctl.BsflGains(),
        ControllerKind.DFL: ctl.DflGains(),
        ControllerKind.CPSS: ctl.CpssParams(),
        ControllerKind.OPEN_LOOP: None,
    }[kind]


def make_context(
    kind: ControllerKind, params: MachineParams, op: OperatingPoint, gains=None
) -> tuple[ControllerContext, tuple]:
    """Build the controller context and the equilibrium state bundle."""
    eq = compute_equilibrium(params, op)
    coeffs = compute_coefficients(params, eq)
    if gains is None:
        gains = _default_gains(kind)
    y0: tuple = (eq.delta0, 0.0, eq.eqp0)
    if kind is ControllerKind.CPSS:
        if gains.vref is None:
            gains = ctl.cpss_reference(gains, eq, op.vt0)
        y0 = y0 + tuple(ctl.cpss_init(gains, eq, op.vt0))
    ctx = ControllerContext(kind, params, eq, coeffs, gains, eq.efd0)
    return ctx, y0


def _check_step(sc: Scenario, ctx: ControllerContext) -> None:
    if ctx.kind is ControllerKind.CPSS:
        g = ctx.gains
        if not (sc.dt < g.te / 5 and sc.dt < g.tr / 5):
            raise ValueError(
                f"dt={sc.dt} too large for the exciter (needs dt < te/5 and dt < tr/5)"
            )


def _side(ev: StageEval, params: MachineParams) -> int:
    if ev.command > params.efd_max:
        return 1
    if ev.command < params.efd_min:
        return -1
    return 0


def _split_at_switch(deriv, f, y, ev, y_new, ev_new, dt, params, depth=0):
    """Re-integrate a step that crosses a field-voltage limit.

    The clamp makes the right-hand side non-smooth; a fixed RK4 step straddling
    the corner is only second-order accurate.  The crossing instant is located
    by root finding on the unclamped command along the RK4 sub-step and the step
    is completed in two smooth pieces.
    """
    s0, s1 = _side(ev, params), _side(ev_new, params)
    if s0 == s1 or ev.guard or ev_new.guard or depth > 4:
        return y_new, ev_new
    # first limit met when leaving the starting region
    if s0 == 0:
        bound = params.efd_max if s1 > 0 else params.efd_min
    else:
        bound = params.efd_max if s0 > 0 else params.efd_min

    def g(theta):
        if theta == 0.0:
            return ev.command - bound
        return f(rk4_step(deriv, y, theta * dt, k1=ev.dy)).command - bound

    g0, g1 = g(0.0), g(1.0)
    if g0 == 0.0 or g0 * g1 > 0:
        return y_new, ev_new
    theta = brentq(g, 0.0, 1.0, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    if not 0.0 < theta < 1.0:
        return y_new, ev_new
    y_mid = rk4_step(deriv, y, theta * dt, k1=ev.dy)
    ev_mid = f(y_mid)
    rest = (1.0 - theta) * dt
    y_end = rk4_step(deriv, y_mid, rest, k1=ev_mid.dy)
    ev_end = f(y_end)
    # a second corner inside the remainder (rare)
    return _split_at_switch(deriv, f, y_mid, ev_mid, y_end, ev_end, rest, params, depth + 1)


def run_scenario(
    sc: Scenario,
    params: MachineParams,
    op: OperatingPoint,
    gains=None,
    angle_limits: tuple[float, float] = (0.0, math.pi),
    offset: Sequence[float] | None = None,
) -> SimOutcome:
    """Simulate ``sc`` from the equilibrium of ``op``.

    ``gains`` is the parameter block of the selected controller
    (:class:`BsflGains`, :class:`DflGains` or :class:`CpssParams`); ``None``
    selects the tuned defaults.  ``offset`` is an initial deviation of
    ``(delta, domega, eqp)`` from the equilibrium.
    """
    ctx, y = make_context(sc.controller, params, op, gains)
    if offset is not None:
        if len(offset) != 3:
            raise ValueError("offset must have three components")
        y = tuple(a + b for a, b in zip(y[:3], offset)) + y[3:]
    _check_step(sc, ctx)
    eq = ctx.eq
    mode = NetworkMode.NORMAL
    pm = eq.pm
    events = sc.event_steps()
    dt = sc.dt
    stride = sc.record_stride
    rows: list[tuple] = []

    def f(s):
        return evaluate(s, mode, pm, ctx)

    def deriv(s):
        return evaluate(s, mode, pm, ctx).dy

    def record(k, y, ev):
        out = plant_outputs(y, mode, params, eq)
        rows.append(
            (k * dt, y[0], y[1], y[2], out.pe, out.vt, ev.efd, ev.efd / params.ke, ev.guard, ev.sat)
        )

    locate = sc.locate_switches and ctx.kind in (ControllerKind.BSFL, ControllerKind.DFL)
    lo, hi = angle_limits
    stable = True
    t_unstable = None
    n = sc.n_steps
    ev = None
    zeros = (0.0,) * len(y)
    comp = zeros
    for k in range(n + 1):
        step_events = events.get(k, ())
        for e in step_events:
            if e.kind is EventKind.APPLY_FAULT:
                mode = NetworkMode.BOLTED_FAULT
            elif e.kind is EventKind.CLEAR_FAULT:
                mode = NetworkMode.NORMAL
            else:
                pm = pm * e.factor
        if ev is None or step_events:
            ev = f(y)
        if not ev.guard:
            ctx.efd_hold = ev.efd
        if k % stride == 0 or k == n:
            record(k, y, ev)
        if not lo < y[0] < hi or not all(map(math.isfinite, y)):
            stable = False
            t_unstable = k * dt
            if k % stride != 0 and k != n:
                record(k, y, ev)
            break
        if k == n:
            break
        y_new, comp_new = _kahan_add(y, comp, rk4_increment(deriv, y, dt, k1=ev.dy))
        ev_new = f(y_new)
        if locate:
            y_split, ev_new = _split_at_switch(deriv, f, y, ev, y_new, ev_new, dt, params)
            if y_split is not y_new:
                y_new, comp_new = y_split, zeros
        y, comp, ev = y_new, comp_new, ev_new

    cols = list(zip(*rows))
    arrays = {name: np.asarray(c, dtype=float) for name, c in zip(_FIELDS, cols)}
    arrays["guard"] = arrays["guard"].astype(int)
    arrays["sat"] = arrays["sat"].astype(int)
    meta = {
        "scenario_digest": _digest(sc),
        "parameter_digest": _digest([params, op, ctx.gains]),
        "controller": sc.controller.value,
    }
    return SimOutcome(TimeSeries(**arrays, metadata=meta), stable, t_unstable)
