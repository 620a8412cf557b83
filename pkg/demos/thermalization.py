"""Does the qubit reach the Gibbs state?

The PC equation relaxes onto the thermal state exactly.  The full WCSB
equation keeps coupling-order coherences in the energy basis, so its fidelity
saturates slightly below one.  The gap shrinks roughly with the square of
the coupling.

    python demos/thermalization.py
"""

import math

from spinboson import BathParams, QubitState, SystemParams, evolve
from spinboson.diagnostics import fidelity, pc_steady_state, thermal_state, trace_distance

sys = SystemParams(1.25, math.pi / 4)
T = 0.5
gibbs = thermal_state(sys, T)

for c in (0.1, 0.05):
    bath = BathParams(c, 15.0, T)
    for eq in ("WCSB", "PC"):
        end = evolve(eq, sys, bath, QubitState.charged(), 400.0, 5e-3).final()
        print(f"coupling {c:4.2f} {eq:4s}: 1 - F = {1 - fidelity(end, gibbs):.3e}")

ss = pc_steady_state(sys, BathParams(0.1, 15.0, T))
print(f"PC fixed point vs Gibbs: trace distance {trace_distance(ss, gibbs):.1e}")
