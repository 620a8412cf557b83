"""The qubit as a quantum battery.

A charged state loses its extractable work to the bath.  Under dissipation the
battery ends passive, with capacity fixed by the temperature.  Under dephasing
the populations freeze, the coherence dies, and what remains is incoherent
work equal to the full capacity.

    python demos/battery.py
"""

import math

from spinboson import BathParams, SystemParams
from spinboson.battery import battery_scan, thermal_capacity

sys0 = SystemParams(2.5, 0.0)
bath = BathParams(0.1, 10.0, 1.0)
print(f"Gibbs capacity w0 tanh(w0/2T) = {thermal_capacity(sys0, 1.0):.4f}")

for theta in (0.0, math.pi / 4, math.pi / 2):
    b = battery_scan("WCSB", SystemParams(2.5, theta), bath, t_end=60.0)
    print(
        f"theta {theta:5.3f}: energy {b.energy[0]:+.3f} -> {b.energy[-1]:+.3f}, "
        f"ergotropy {b.ergotropy[0]:.3f} -> {b.ergotropy[-1]:.2e}, "
        f"capacity {b.capacity[0]:.3f} -> {b.capacity[-1]:.3f}"
    )

b = battery_scan("PC", SystemParams(2.25, 0.0), BathParams(0.4, 15.0, 0.2), t_end=25.0)
print(f"PC discharge: capacity returns to {b.capacity[-1]:.4f} (initial {b.capacity[0]:.4f})")
