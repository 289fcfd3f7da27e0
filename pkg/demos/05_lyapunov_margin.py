"""How much model error the backstepping chain tolerates.

The margin gamma1_max bounds the growth rate of a perturbation entering the
last chain equation.  We compare it with an empirical estimate for a plant
whose line reactance differs from the one the controller was designed for.
"""

import numpy as np

from smibpss import MachineParams, OperatingPoint, robustness_margin
from smibpss.analysis import estimate_gamma

rep = robustness_margin((5, 10, 15))
np.set_printoptions(precision=5, suppress=True)
print("P =\n", rep.P)
print(f"gamma1_max = {rep.gamma1_max:.4f}, ultimate bound = {rep.ultimate_bound_coeff:.4f} * gamma2")

# Faster chains buy a larger margin.
for lams in [(2, 4, 6), (5, 10, 15), (10, 20, 30)]:
    print(f"lambda = {lams}: gamma1_max = {robustness_margin(lams).gamma1_max:.3f}")

print()
nominal, op = MachineParams(), OperatingPoint()
for rel in (0.02, 0.05, 0.10, 0.20):
    true = MachineParams(xe=nominal.xe * (1 + rel))
    g1, g2 = estimate_gamma(true, nominal, op, n_samples=300)
    verdict = "inside" if g1 < rep.gamma1_max else "outside"
    print(f"xe +{rel:.0%}: gamma1 ~ {g1:6.2f} ({verdict} the margin), gamma2 ~ {g2:6.2f}, "
          f"bound radius {rep.ultimate_bound_coeff * g2:.2f}")
