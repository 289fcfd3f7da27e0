"""Steady state of the machine at its rated dispatch, and what the
linearized open-loop plant looks like around it."""

import math

import numpy as np

from smibpss import MachineParams, NetworkMode, OperatingPoint, compute_coefficients, compute_equilibrium
from smibpss.model import plant_derivatives, plant_outputs

params = MachineParams()
op = OperatingPoint(p0=0.8, q0=0.496, vt0=1.0)
eq = compute_equilibrium(params, op)
c = compute_coefficients(params, eq)

print(f"rotor angle   {eq.delta0:.6f} rad = {math.degrees(eq.delta0):.3f} deg")
print(f"E'q0          {eq.eqp0:.6f} pu")
print(f"Efd0          {eq.efd0:.6f} pu  (uf0 = {eq.uf0:.3e})")
print(f"bus voltage   {eq.vb:.6f} pu")
print()
for name in ("a1", "a2", "a3", "a4", "a5", "a6", "a7", "a"):
    print(f"{name:>3} = {getattr(c, name):.6g}")

# The steady state must reproduce the dispatch it was computed from.
y0 = np.array([eq.delta0, 0.0, eq.eqp0])
out = plant_outputs(y0, NetworkMode.NORMAL, params, eq)
print(f"\nrecovered pe = {out.pe:.12f}, vt = {out.vt:.12f}")


# Jacobian by central differences with the field voltage frozen
def f(y):
    return np.array(plant_derivatives(y, eq.efd0, NetworkMode.NORMAL, params, eq, c))


J = np.column_stack([(f(y0 + e) - f(y0 - e)) / 2e-7 for e in np.eye(3) * 1e-7])
lam = np.linalg.eigvals(J)
print("open-loop eigenvalues:", np.array2string(lam, precision=4))

# Lightly damped electromechanical mode, as expected with D = 0.
osc = lam[np.argmax(lam.imag)]
print(f"swing mode {abs(osc.imag) / (2 * math.pi):.2f} Hz, damping ratio {-osc.real / abs(osc):.3f}")
