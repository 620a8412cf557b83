"""The qubit as a quantum battery: energy, power, ergotropy and its bounds.

H_S = (w0/2) sz with |0> excited.  Every quantity has a closed form in the
Bloch vector; ergotropy and anti-ergotropy also have a spectral route through
the passive and active states, used as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bath import BathParams, SystemParams
from .dynamics import SZ, Equation, MasterEquation, QubitState, Trajectory, evolve

__all__ = [
    "BatteryRecord",
    "BatterySeries",
    "hamiltonian",
    "energy",
    "inst_power",
    "passive_state",
    "active_state",
    "ergotropy",
    "ergotropy_spectral",
    "ergotropy_split",
    "anti_ergotropy",
    "anti_ergotropy_spectral",
    "capacity",
    "charging_power",
    "battery_series",
    "battery_scan",
    "thermal_capacity",
]

DEGENERATE_RADIUS = 1e-12


def _state(rho) -> QubitState:
    return rho if isinstance(rho, QubitState) else QubitState.from_matrix(rho)


def hamiltonian(sys: SystemParams) -> np.ndarray:
    return 0.5 * sys.omega0 * SZ


def energy(rho, sys: SystemParams) -> float:
    """Tr[rho H_S] = (w0/2) z."""
    return 0.5 * sys.omega0 * _state(rho).bloch_z


def _generator(equation, sys: SystemParams, p: BathParams) -> MasterEquation:
    eq = Equation.parse(equation)
    return MasterEquation(Equation.PC if eq is Equation.PC_ANALYTIC else eq, sys, p)


def _bloch_dot(rho, t: float, equation, sys: SystemParams, p: BathParams) -> np.ndarray:
    d = _generator(equation, sys, p)(_state(rho), t)
    return np.array([2 * d[1, 0].real, 2 * d[1, 0].imag, (d[0, 0] - d[1, 1]).real])


def inst_power(rho, t: float, equation, sys: SystemParams, p: BathParams) -> float:
    """dE/dt = (w0/2) Tr[sz L_t(rho)], taken from the generator."""
    return 0.5 * sys.omega0 * float(_bloch_dot(rho, t, equation, sys, p)[2])


def _rearranged(rho, sys: SystemParams, descending_energy: bool) -> QubitState:
    # eigenvalues of rho, largest first; ties keep index order
    lam = np.sort(np.clip(np.linalg.eigvalsh(_state(rho).matrix), 0.0, 1.0))[::-1]
    vecs = np.linalg.eigh(hamiltonian(sys))[1]  # ascending energy
    if descending_energy:
        vecs = vecs[:, ::-1]
    m = sum(lam[j] * np.outer(vecs[:, j], vecs[:, j].conj()) for j in range(2))
    m = m / np.trace(m).real
    return QubitState.from_matrix(m)


def passive_state(rho, sys: SystemParams) -> QubitState:
    """Largest population on the lowest level."""
    return _rearranged(rho, sys, descending_energy=False)


def active_state(rho, sys: SystemParams) -> QubitState:
    """Largest population on the highest level."""
    return _rearranged(rho, sys, descending_energy=True)


def ergotropy(rho, sys: SystemParams) -> float:
    """(w0/2)(z + |r|)."""
    s = _state(rho)
    return 0.5 * sys.omega0 * (s.bloch_z + s.radius)


def ergotropy_spectral(rho, sys: SystemParams) -> float:
    """Tr[rho H] - Tr[rho_p H] through the passive state."""
    H = hamiltonian(sys)
    s = _state(rho)
    return float(np.trace(s.matrix @ H).real - np.trace(passive_state(s, sys).matrix @ H).real)


def anti_ergotropy(rho, sys: SystemParams) -> float:
    """(w0/2)(z - |r|), never positive."""
    s = _state(rho)
    return 0.5 * sys.omega0 * (s.bloch_z - s.radius)


def anti_ergotropy_spectral(rho, sys: SystemParams) -> float:
    H = hamiltonian(sys)
    s = _state(rho)
    return float(np.trace(s.matrix @ H).real - np.trace(active_state(s, sys).matrix @ H).real)


def capacity(rho, sys: SystemParams) -> float:
    """w0 |r|: the energy window between the active and passive states."""
    return sys.omega0 * _state(rho).radius


def _radius(b: np.ndarray) -> np.ndarray:
    return np.hypot(np.hypot(b[..., 0], b[..., 1]), b[..., 2])


def _split_arrays(b: np.ndarray, w0: float):
    z = b[..., 2]
    r = _radius(b)
    erg = 0.5 * w0 * (z + r)
    incoh = np.where(z < 0, 0.0, w0 * z)
    coh = np.where(z < 0, erg, 0.5 * w0 * (r - z))
    return erg, incoh, coh


def ergotropy_split(rho, sys: SystemParams) -> tuple[float, float]:
    """(incoherent, coherent) parts; incoherent is w0 z for z >= 0 and 0 otherwise.

    The coherent part is evaluated from its own piecewise form and checked
    against the difference W - W_i.
    """
    s = _state(rho)
    erg, incoh, coh = _split_arrays(s.bloch, sys.omega0)
    if abs(float(erg) - float(incoh) - float(coh)) > 1e-10 * max(1.0, sys.omega0):
        raise ArithmeticError("ergotropy split is inconsistent")
    return float(incoh), float(coh)


def _charging(b: np.ndarray, bdot: np.ndarray, w0: float):
    r = _radius(b)
    degenerate = r < DEGENERATE_RADIUS
    proj = np.sum(b * bdot, axis=-1) / np.where(degenerate, 1.0, r)
    proj = np.where(degenerate, 0.0, proj)
    return 0.5 * w0 * (bdot[..., 2] + proj), degenerate


def charging_power(rho, t: float, equation, sys: SystemParams, p: BathParams, return_flag: bool = False):
    """dW/dt = (w0/2)[z' + (x x' + y y' + z z')/|r|] with the dots from the generator.

    At |r| < 1e-12 the second term is undefined and set to 0; pass
    ``return_flag=True`` to also get that degeneracy flag.
    """
    s = _state(rho)
    val, deg = _charging(s.bloch, _bloch_dot(s, t, equation, sys, p), sys.omega0)
    return (float(val), bool(deg)) if return_flag else float(val)


@dataclass(frozen=True)
class BatteryRecord:
    t: float
    energy: float
    inst_power: float
    ergotropy: float
    erg_incoh: float
    erg_coh: float
    anti_ergotropy: float
    capacity: float
    charging_power: float
    degenerate: bool = False
    flag: int = 0


@dataclass(frozen=True)
class BatterySeries:
    """All battery quantities along a trajectory, one array per field."""

    t: np.ndarray
    energy: np.ndarray
    inst_power: np.ndarray
    ergotropy: np.ndarray
    erg_incoh: np.ndarray
    erg_coh: np.ndarray
    anti_ergotropy: np.ndarray
    capacity: np.ndarray
    charging_power: np.ndarray
    degenerate: np.ndarray
    flags: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> BatteryRecord:
        return BatteryRecord(
            *(float(getattr(self, f)[k]) for f in self._float_fields()),
            degenerate=bool(self.degenerate[k]),
            flag=int(self.flags[k]),
        )

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @staticmethod
    def _float_fields():
        return (
            "t",
            "energy",
            "inst_power",
            "ergotropy",
            "erg_incoh",
            "erg_coh",
            "anti_ergotropy",
            "capacity",
            "charging_power",
        )


def battery_series(traj: Trajectory, sys: SystemParams) -> BatterySeries:
    """Battery quantities from a trajectory; derivatives come from its stored generator output."""
    b, bdot, w0 = traj.bloch, traj.derivs, sys.omega0
    erg, incoh, coh = _split_arrays(b, w0)
    r = _radius(b)
    cp, deg = _charging(b, bdot, w0)
    return BatterySeries(
        t=np.asarray(traj.times),
        energy=0.5 * w0 * b[:, 2],
        inst_power=0.5 * w0 * bdot[:, 2],
        ergotropy=erg,
        erg_incoh=incoh,
        erg_coh=coh,
        anti_ergotropy=0.5 * w0 * (b[:, 2] - r),
        capacity=w0 * r,
        charging_power=cp,
        degenerate=deg,
        flags=np.asarray(traj.flags),
    )


def battery_scan(
    equation, sys: SystemParams, p: BathParams, rho0=None, t_end: float = 20.0, dt: float = 1e-3
) -> BatterySeries:
    """Evolve from ``rho0`` (default (sqrt3/2)|0> + (1/2)|1>) and evaluate every battery quantity."""
    s0 = QubitState.charged() if rho0 is None else _state(rho0)
    return battery_series(evolve(equation, sys, p, s0, t_end, dt), sys)


def thermal_capacity(sys: SystemParams, T: float) -> float:
    """w0 tanh(w0 / 2T), the capacity of the Gibbs state."""
    return sys.omega0 * math.tanh(sys.omega0 / (2.0 * T))
