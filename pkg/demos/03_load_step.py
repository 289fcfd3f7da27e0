"""A 20 % step in mechanical power at t = 1 s.

The backstepping loop moves to the new operating point along the designed
linear chain; the baselines swing through it first.
"""

from smibpss import ControllerKind, MachineParams, OperatingPoint, load_step_scenario, run_scenario
from smibpss.analysis import compute_metrics

params, op = MachineParams(), OperatingPoint()

print(f"{'':>5} {'settling':>9} {'peak pe':>8} {'overshoot':>10}")
for kind in (ControllerKind.BSFL, ControllerKind.DFL, ControllerKind.CPSS):
    out = run_scenario(load_step_scenario(kind, t_step=1.0, factor=1.2), params, op)
    m = compute_metrics(out.series, "pe", 1.0)
    print(f"{kind.value:>5} {m.settling_time_2pct:8.3f}s {m.first_swing_peak:8.4f} {m.overshoot_pct:9.1f}%")

# Overshoot is relative to the size of the step (0.8 -> 0.96 pu).
