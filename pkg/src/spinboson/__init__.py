"""Spin-boson qubit under second-order time-convolutionless master equations.

Modules: ``bath`` (Drude-Lorentz correlations, xi, rates), ``dynamics``
(generators, RK4, phase-covariant closed form), ``diagnostics``
(non-Markovianity, speed limit, coherence, steady state), ``battery``
(energy, ergotropy, capacity) and ``cli``.
"""

from .bath import BathError, BathParams, QuadratureError, RateSet, SystemParams, corr, rates, xi_analytic, xi_quadrature
from .dynamics import Equation, MasterEquation, QubitState, Trajectory, evolve, integrate, pc_analytic
from .diagnostics import blp_scan, fidelity, pc_steady_state, qsl_time, rhp_g, thermal_state, trace_distance
from .battery import anti_ergotropy, battery_scan, capacity, ergotropy, ergotropy_split

__version__ = "0.1.0"
