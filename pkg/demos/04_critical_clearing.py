"""Longest fault the system survives, found by bisection on the fault
duration (fault applied at 0.6 s, 1 ms tolerance).  Takes about a minute."""

import math

from smibpss import ControllerKind, MachineParams, OperatingPoint, cct_search

params = MachineParams()

for p0 in (0.6, 0.8):
    op = OperatingPoint(p0=p0)
    for kind in (ControllerKind.BSFL, ControllerKind.DFL, ControllerKind.CPSS):
        r = cct_search(params, op, kind, fault_start=0.6, horizon=5.0)
        print(
            f"p0={p0:.1f} {kind.value:>5}: longest stable fault {r.duration * 1e3:6.1f} ms, "
            f"cleared by t = {r.clearing_time:.3f} s ({len(r.trace)} simulations)"
        )

# A 50 Hz machine swings more slowly and tolerates longer faults.
slow = MachineParams(omega_base=2 * math.pi * 50)
r = cct_search(slow, OperatingPoint(), ControllerKind.BSFL)
print(f"\n50 Hz base, bsfl: cleared by t = {r.clearing_time:.3f} s")
