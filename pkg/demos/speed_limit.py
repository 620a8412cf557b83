"""How fast can the qubit move?

The Wigner-Yanase bound compares the angle travelled with the time-averaged
size of the generator output.  Pure dephasing moves the state along a shorter
route, so its bound sits below the dissipative one on average.

    python demos/speed_limit.py
"""

import math

from spinboson import BathParams, QubitState, SystemParams, evolve
from spinboson.diagnostics import coherence_series, qsl_time

bath = BathParams(0.4, 15.0, 0.2)
rho0 = QubitState.charged()

for theta in (0.0, math.pi / 4, math.pi / 2):
    tr = evolve("WCSB", SystemParams(1.25, theta), bath, rho0, 20.0, 1e-3)
    q = qsl_time(tr)
    coh = coherence_series(tr.bloch)
    print(
        f"theta {theta:5.3f}: mean tau_QSL {q.tau_qsl.mean():6.3f}, "
        f"tau_QSL(20) {q.tau_qsl[-1]:6.3f}, coherence(20) {coh[-1]:.4f}, "
        f"op norm binding at every sample: {bool((q.winner == 0).all())}"
    )
