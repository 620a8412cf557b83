"""Master equations for the qubit and their time integration.

States live on the Bloch ball.  The generators are linear maps, so in the
Pauli basis (I, sx, sy, sz) each one is a real 4x4 matrix acting on
(1, x, y, z); the integrator works with those matrices directly, which keeps
the trace and Hermiticity exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bath import BathParams, RateSet, SystemParams, QuadratureError, rates

__all__ = [
    "SX",
    "SY",
    "SZ",
    "SP",
    "SM",
    "I2",
    "PAULI",
    "QubitState",
    "Trajectory",
    "Equation",
    "MasterEquation",
    "wcsb_generator",
    "pc_generator",
    "lindblad_rhs",
    "integrate",
    "PCIntegrals",
    "pc_integrals",
    "pc_analytic",
    "evolve",
    "CLAMP_EIG",
]

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
# |0> is the excited state, so sigma_+ = |0><1|
SP = np.array([[0, 1], [0, 0]], dtype=complex)
SM = np.array([[0, 0], [1, 0]], dtype=complex)
PAULI = np.stack([I2, SX, SY, SZ])
_JUMPS = np.stack([SP, SM, SZ])

CLAMP_EIG = 1e-6

FLAG_OK, FLAG_CLAMPED, FLAG_VIOLATION = 0, 1, 2


@dataclass(frozen=True)
class QubitState:
    """Qubit density matrix stored by its Bloch vector.

    Storing (x, y, z) makes the matrix Hermitian with unit trace by
    construction; ``matrix`` rebuilds rho = (I + r.sigma)/2.
    """

    bloch_x: float
    bloch_y: float
    bloch_z: float

    @classmethod
    def from_bloch(cls, r) -> "QubitState":
        x, y, z = (float(v) for v in r)
        return cls(x, y, z)

    @classmethod
    def from_matrix(cls, rho, atol: float = 1e-10) -> "QubitState":
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {rho.shape}")
        if np.abs(rho - rho.conj().T).max() > atol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > atol:
            raise ValueError("density matrix does not have unit trace")
        return cls(
            float(2 * rho[1, 0].real),
            float(2 * rho[1, 0].imag),
            float((rho[0, 0] - rho[1, 1]).real),
        )

    @classmethod
    def from_ket(cls, psi) -> "QubitState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @classmethod
    def excited(cls) -> "QubitState":
        """|0><0|."""
        return cls(0.0, 0.0, 1.0)

    @classmethod
    def ground(cls) -> "QubitState":
        """|1><1|."""
        return cls(0.0, 0.0, -1.0)

    @classmethod
    def plus(cls) -> "QubitState":
        """|+><+| with |+> = (|0> + |1>)/sqrt 2."""
        return cls(1.0, 0.0, 0.0)

    @classmethod
    def mixed(cls) -> "QubitState":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def charged(cls) -> "QubitState":
        """(sqrt3/2)|0> + (1/2)|1>, Bloch vector (sqrt3/2, 0, 1/2)."""
        return cls(math.sqrt(3.0) / 2.0, 0.0, 0.5)

    @property
    def bloch(self) -> np.ndarray:
        return np.array([self.bloch_x, self.bloch_y, self.bloch_z])

    @property
    def matrix(self) -> np.ndarray:
        x, y, z = self.bloch_x, self.bloch_y, self.bloch_z
        return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]], dtype=complex)

    @property
    def radius(self) -> float:
        return math.hypot(self.bloch_x, self.bloch_y, self.bloch_z)

    @property
    def eigvals(self) -> tuple[float, float]:
        """Eigenvalues, descending."""
        r = self.radius
        return (0.5 * (1 + r), 0.5 * (1 - r))


def _bloch_to_matrix(b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    out = np.empty(b.shape[:-1] + (2, 2), dtype=complex)
    x, y, z = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0, 0] = 0.5 * (1 + z)
    out[..., 1, 1] = 0.5 * (1 - z)
    out[..., 0, 1] = 0.5 * (x - 1j * y)
    out[..., 1, 0] = 0.5 * (x + 1j * y)
    return out


@dataclass
class Trajectory:
    """Sampled solution of a master equation.

    ``bloch`` and ``derivs`` have shape (n, 3); ``derivs`` holds the generator
    output at each sample, so diagnostics never need finite differences.
    ``flags`` is 0 for a clean sample, 1 where a tiny negative eigenvalue was
    clamped away and 2 where positivity was violated beyond the clamp.
    """

    times: np.ndarray
    bloch: np.ndarray
    derivs: np.ndarray
    flags: np.ndarray
    meta: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.times) != len(self.bloch):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> list[QubitState]:
        return [QubitState(*map(float, b)) for b in self.bloch]

    @property
    def matrices(self) -> np.ndarray:
        return _bloch_to_matrix(self.bloch)

    @property
    def deriv_matrices(self) -> np.ndarray:
        """Generator output d rho/dt at each sample (traceless, Hermitian)."""
        d = self.derivs
        out = np.empty(d.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0, 0] = 0.5 * d[..., 2]
        out[..., 1, 1] = -0.5 * d[..., 2]
        out[..., 0, 1] = 0.5 * (d[..., 0] - 1j * d[..., 1])
        out[..., 1, 0] = 0.5 * (d[..., 0] + 1j * d[..., 1])
        return out

    @property
    def positivity_violated(self) -> bool:
        return bool(np.any(self.flags == FLAG_VIOLATION))

    def final(self) -> QubitState:
        return QubitState(*map(float, self.bloch[-1]))


class Equation(str, enum.Enum):
    WCSB = "WCSB"
    PC = "PC"
    PC_ANALYTIC = "PC-analytic"

    @classmethod
    def parse(cls, tag) -> "Equation":
        if isinstance(tag, cls):
            return tag
        key = str(tag).strip().upper().replace("_", "-")
        for e in cls:
            if e.value.upper() == key:
                return e
        raise ValueError(f"unknown equation {tag!r}; expected one of WCSB, PC, PC-analytic")


# ---------------------------------------------------------------------------
# generators


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """-i[H, rho] + sum_kj gamma_kj (A_k rho A_j^+ - {A_j^+ A_k, rho}/2), A = (s+, s-, sz).

    All arguments broadcast over leading axes.
    """
    Aconj = _JUMPS.conj()
    jump = np.einsum("...kj,kab,...bc,jdc->...ad", gamma, _JUMPS, rho, Aconj)
    M = np.einsum("...kj,jba,kbc->...ac", gamma, Aconj, _JUMPS)
    return -1j * (H @ rho - rho @ H) + jump - 0.5 * (M @ rho + rho @ M)


def _wcsb_parts(r: RateSet, sys: SystemParams):
    H = 0.5 * sys.omega0 * SZ + r.lamb_matrix()
    return H, r.matrix()


def _pc_parts(r: RateSet, sys: SystemParams):
    shape = np.shape(r.gamma_zz)
    H = np.broadcast_to(0.5 * sys.omega0 * SZ, shape + (2, 2)) + (0.5 * np.asarray(r.lamb11))[..., None, None] * SZ
    g = np.zeros(shape + (3, 3), dtype=complex)
    g[..., 0, 0] = r.gamma_pp
    g[..., 1, 1] = r.gamma_mm
    g[..., 2, 2] = r.gamma_zz
    return H, g


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, QubitState) else np.asarray(rho, dtype=complex)


def wcsb_generator(rho, t: float, sys: SystemParams, p: BathParams) -> np.ndarray:
    """d rho/dt of the full second-order TCL equation with all nine rate pairs."""
    H, g = _wcsb_parts(rates(t, sys, p), sys)
    return lindblad_rhs(_as_matrix(rho), H, g)


def pc_generator(rho, t: float, sys: SystemParams, p: BathParams) -> np.ndarray:
    """d rho/dt of the secular (phase-covariant) equation."""
    H, g = _pc_parts(rates(t, sys, p), sys)
    return lindblad_rhs(_as_matrix(rho), H, g)


def _superop_direct(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Real matrix L_ij = Tr[sigma_i D(sigma_j / 2)], shape (..., 4, 4)."""
    shape = H.shape[:-2]
    basis = 0.5 * PAULI.reshape((1,) * len(shape) + (4, 2, 2))
    out = lindblad_rhs(basis, H[..., None, :, :], g[..., None, :, :])
    L = np.einsum("iab,...jba->...ij", PAULI, out)
    return np.ascontiguousarray(L.real)


def _hermitian_basis(d: int) -> np.ndarray:
    """Real basis of d x d Hermitian matrices: E_kk, then E_kj + E_jk and i(E_kj - E_jk) for k < j."""
    out = []
    for k in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[k, k] = 1
        out.append(m)
    for k in range(d):
        for j in range(k + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[k, j] = m[j, k] = 1
            out.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[k, j], m[j, k] = 1j, -1j
            out.append(m)
    return np.stack(out)


def _hermitian_coords(M: np.ndarray) -> np.ndarray:
    """Coordinates of Hermitian ``M`` (..., d, d) in the ``_hermitian_basis`` order."""
    d = M.shape[-1]
    cols = [M[..., k, k].real for k in range(d)]
    for k in range(d):
        for j in range(k + 1, d):
            cols.append(M[..., k, j].real)
            cols.append(M[..., k, j].imag)
    return np.stack(cols, axis=-1)


_HB2 = _hermitian_basis(2)
_HB3 = _hermitian_basis(3)
# the map (H, gamma) -> L is real-linear; tabulate it once on the 4 + 9 basis elements
_SUPER_BASIS = np.concatenate(
    [
        _superop_direct(_HB2, np.zeros((4, 3, 3), dtype=complex)),
        _superop_direct(np.zeros((9, 2, 2), dtype=complex), _HB3),
    ]
).reshape(13, 16)


def _superop_from_parts(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Real matrix L_ij = Tr[sigma_i D(sigma_j / 2)], shape (..., 4, 4)."""
    coords = np.concatenate([_hermitian_coords(H), _hermitian_coords(g)], axis=-1)
    return (coords @ _SUPER_BASIS).reshape(coords.shape[:-1] + (4, 4))


class MasterEquation:
    """A time-dependent generator bound to its parameters.

    Calling it as ``gen(rho, t)`` gives the 2x2 time derivative;
    ``superoperator(t)`` gives the Pauli-basis matrix for an array of times,
    which is what the fast integration path uses.
    """

    def __init__(self, equation, sys: SystemParams, bath: BathParams):
        self.equation = Equation.parse(equation)
        self.sys = sys
        self.bath = bath
        self._parts = _wcsb_parts if self.equation is Equation.WCSB else _pc_parts

    def __repr__(self) -> str:
        return f"MasterEquation({self.equation.value}, {self.sys}, {self.bath})"

    def __call__(self, rho, t: float) -> np.ndarray:
        H, g = self._parts(rates(t, self.sys, self.bath), self.sys)
        return lindblad_rhs(_as_matrix(rho), H, g)

    def rates(self, t) -> RateSet:
        return rates(t, self.sys, self.bath)

    def parts(self, t):
        """(H, gamma) at ``t``; gamma is the 3x3 rate matrix over (+, -, z)."""
        return self._parts(rates(t, self.sys, self.bath), self.sys)

    def superoperator(self, t) -> np.ndarray:
        H, g = self._parts(rates(t, self.sys, self.bath), self.sys)
        return _superop_from_parts(np.asarray(H), np.asarray(g))

    def bloch_derivative(self, bloch, t) -> np.ndarray:
        b = np.asarray(bloch, dtype=float)
        L = self.superoperator(t)
        y = np.concatenate([np.ones(b.shape[:-1] + (1,)), b], axis=-1)
        return np.einsum("...ij,...j->...i", L, y)[..., 1:]


# ---------------------------------------------------------------------------
# integration


def _clamp(b: np.ndarray) -> int:
    """Pull a slightly overlong Bloch vector back onto the sphere, in place."""
    r = math.sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
    if r <= 1.0:
        return FLAG_OK
    # smallest eigenvalue is (1 - r)/2
    if r - 1.0 < 2.0 * CLAMP_EIG:
        b /= r
        return FLAG_CLAMPED
    return FLAG_VIOLATION


def _step_count(t_end: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not t_end >= 0:
        raise ValueError(f"t_end must be >= 0, got {t_end}")
    return int(round(t_end / dt)) if t_end > 0 else 0


_START_OCTAVES = 30
_START_PER_OCTAVE = 8
_START_SPAN = 64


def _substep_plan(times: np.ndarray) -> dict[int, np.ndarray]:
    """Internal sub-step edges for the first steps of a run.

    The rates grow like s log s from zero, so their higher derivatives blow up
    like 1/s and plain RK4 on a uniform grid converges only at second order.
    Step 0 is split geometrically (ratio 2^(-1/8), down to ~1e-9 of a step)
    and step k < 64 into ceil(64/k) equal parts, which keeps the local error
    of every sub-step at fourth order.
    """
    n = len(times) - 1
    plan = {}
    if n == 0:
        return plan
    k = np.arange(_START_OCTAVES * _START_PER_OCTAVE, -1, -1)
    plan[0] = np.concatenate([[0.0], times[1] * 2.0 ** (-k / _START_PER_OCTAVE)])
    for j in range(1, min(n, _START_SPAN)):
        m = -(-_START_SPAN // j)
        if m > 1:
            plan[j] = np.linspace(times[j], times[j + 1], m + 1)
    return plan


def integrate(
    gen: Callable, rho0, t_end: float, dt: float, meta: dict | None = None, graded_start: bool = True
) -> Trajectory:
    """Classical RK4 on the fixed grid 0, dt, 2 dt, ..., t_end.

    ``gen(rho, t)`` returns d rho/dt.  A ``MasterEquation`` is integrated in
    the Pauli basis with all per-step propagators built in one vectorised pass;
    any other callable goes through the plain matrix RK4 with
    re-Hermitisation and trace renormalisation after every step.  The number
    of steps is round(t_end/dt) and the step is adjusted to land on t_end.
    With ``graded_start`` the first steps are internally split into finer
    sub-steps (see ``_substep_plan``); samples stay on the uniform grid.
    """
    state = rho0 if isinstance(rho0, QubitState) else QubitState.from_matrix(rho0)
    n = _step_count(t_end, dt)
    h = t_end / n if n else dt
    times = h * np.arange(n + 1)
    if n:
        times[-1] = t_end
    info = dict(meta or {})
    info.setdefault("dt", h)
    if isinstance(gen, MasterEquation):
        info.setdefault("equation", gen.equation.value)
        info.setdefault("sys", gen.sys)
        info.setdefault("bath", gen.bath)
        bloch, derivs, flags = _integrate_pauli(gen, state.bloch, times, h, graded_start)
    else:
        bloch, derivs, flags = _integrate_matrix(gen, state.matrix, times, h, graded_start)
    warnings = []
    n_clamped = int(np.sum(flags == FLAG_CLAMPED))
    n_bad = int(np.sum(flags == FLAG_VIOLATION))
    if n_clamped:
        warnings.append(f"{n_clamped} samples clamped to the Bloch sphere")
    if n_bad:
        warnings.append(f"{n_bad} samples violate positivity beyond {CLAMP_EIG:g}")
    return Trajectory(times, bloch, derivs, flags, info, warnings)


def _rk4_propagators(L1: np.ndarray, L2: np.ndarray, L3: np.ndarray, h) -> np.ndarray:
    """One RK4 step of y' = L(t) y as a matrix, given L at the start, midpoint and end."""
    h = np.asarray(h, dtype=float).reshape(-1, 1, 1)
    eye = np.eye(L1.shape[-1])
    K1 = L1
    K2 = L2 @ (eye + 0.5 * h * K1)
    K3 = L2 @ (eye + 0.5 * h * K2)
    K4 = L3 @ (eye + h * K3)
    return eye + h / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def _integrate_pauli(gen: MasterEquation, b0: np.ndarray, times: np.ndarray, h: float, graded: bool):
    n = len(times) - 1
    L_nodes = gen.superoperator(times)
    bloch = np.empty((n + 1, 3))
    flags = np.zeros(n + 1, dtype=np.int8)
    bloch[0] = b0
    if n:
        L_mid = gen.superoperator(times[:-1] + 0.5 * h)
        prop = _rk4_propagators(L_nodes[:-1], L_mid, L_nodes[1:], h)
        if graded:
            plan = _substep_plan(times)
            lo = np.concatenate([plan[j][:-1] for j in plan])
            hi = np.concatenate([plan[j][1:] for j in plan])
            w = hi - lo
            sub = _rk4_propagators(gen.superoperator(lo), gen.superoperator(lo + 0.5 * w), gen.superoperator(hi), w)
            pos = 0
            for j, e in plan.items():
                P = np.eye(4)
                for q in sub[pos : pos + len(e) - 1]:
                    P = q @ P
                pos += len(e) - 1
                prop[j] = P
        # row 0 of every propagator is (1, 0, 0, 0) by trace preservation
        A = np.ascontiguousarray(prop[:, 1:, 1:])
        c = np.ascontiguousarray(prop[:, 1:, 0])
        b = b0.astype(float).copy()
        for k in range(n):
            b = A[k] @ b + c[k]
            flags[k + 1] = _clamp(b)
            bloch[k + 1] = b
    y = np.concatenate([np.ones((n + 1, 1)), bloch], axis=1)
    derivs = np.einsum("kij,kj->ki", L_nodes, y)[:, 1:]
    return bloch, derivs, flags


def _rk4_matrix_step(gen: Callable, rho: np.ndarray, t: float, h: float) -> np.ndarray:
    k1 = np.asarray(gen(rho, t), dtype=complex)
    k2 = np.asarray(gen(rho + 0.5 * h * k1, t + 0.5 * h), dtype=complex)
    k3 = np.asarray(gen(rho + 0.5 * h * k2, t + 0.5 * h), dtype=complex)
    k4 = np.asarray(gen(rho + h * k3, t + h), dtype=complex)
    rho = rho + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _integrate_matrix(gen: Callable, rho0: np.ndarray, times: np.ndarray, h: float, graded: bool):
    n = len(times) - 1
    bloch = np.empty((n + 1, 3))
    derivs = np.empty((n + 1, 3))
    flags = np.zeros(n + 1, dtype=np.int8)
    rho = np.array(rho0, dtype=complex)
    bloch[0] = _deriv_bloch(rho - 0.5 * I2)
    plan = _substep_plan(times) if graded else {}
    for k in range(n):
        t = times[k]
        derivs[k] = _deriv_bloch(np.asarray(gen(rho, t), dtype=complex))
        if k in plan:
            e = plan[k]
            for a, b in zip(e[:-1], e[1:]):
                rho = _rk4_matrix_step(gen, rho, a, b - a)
        else:
            rho = _rk4_matrix_step(gen, rho, t, times[k + 1] - t)
        b = _deriv_bloch(rho - 0.5 * I2)
        flags[k + 1] = _clamp(b)
        bloch[k + 1] = b
        rho = _bloch_to_matrix(b)
    derivs[n] = _deriv_bloch(np.asarray(gen(rho, times[n]), dtype=complex))
    return bloch, derivs, flags


def _deriv_bloch(d: np.ndarray) -> np.ndarray:
    """Bloch components Tr[sigma_k d] of a traceless Hermitian matrix."""
    return np.array([2 * d[1, 0].real, 2 * d[1, 0].imag, (d[0, 0] - d[1, 1]).real])


# ---------------------------------------------------------------------------
# phase-covariant closed form


@dataclass(frozen=True)
class PCIntegrals:
    """G, Gamma, Gamma-tilde and chi; scalars or arrays matching the requested times."""

    bigG: np.ndarray | float
    bigGamma: np.ndarray | float
    bigGammaTilde: np.ndarray | float
    chi: np.ndarray | float


def _legendre_rule(order: int):
    """Gauss-Legendre nodes/weights on [0, 1] and the matrix mapping node values to
    running integrals from 0 up to each node (exact for polynomials of degree < order)."""
    x, w = np.polynomial.legendre.leggauss(order)
    V = np.polynomial.legendre.legvander(x, order - 1)
    coef = np.linalg.inv(V)  # column j: Legendre coefficients of the j-th Lagrange basis
    S = np.empty((order, order))
    for j in range(order):
        S[:, j] = np.polynomial.legendre.legval(x, np.polynomial.legendre.legint(coef[:, j], lbnd=-1))
    return 0.5 * (x + 1.0), 0.5 * w, 0.5 * S


_RULES = {m: _legendre_rule(m) for m in (6, 10)}


def _pc_panels(t_grid: np.ndarray, h_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Panel edges covering [0, max t] containing every grid time, graded toward 0.

    Returns the edges and, for every grid time, the index of the edge equal to it.
    """
    pts = np.unique(np.concatenate([[0.0], t_grid]))
    edges = [0.0]
    first = pts[1] if len(pts) > 1 else 0.0
    if first > 0:
        h0 = min(first, h_max)
        edges.extend(h0 * 0.5 ** np.arange(48, 0, -1))
    for a, b in zip(pts[:-1], pts[1:]):
        m = max(1, int(math.ceil((b - a) / h_max)))
        edges.extend(np.linspace(a, b, m + 1)[1:])
    edges = np.unique(np.asarray(edges))
    where = np.searchsorted(edges, t_grid)
    return edges, where


def _pc_cumulative(edges: np.ndarray, sys: SystemParams, p: BathParams, order: int):
    """Running values of (G, Gamma, Gamma-tilde, chi) at every panel edge."""
    x, w, S = _RULES[order]
    a, b = edges[:-1], edges[1:]
    L = (b - a)[:, None]
    nodes = a[:, None] + L * x[None, :]
    r = rates(nodes.ravel(), sys, p)
    shape = nodes.shape
    gpp = np.reshape(r.gamma_pp, shape)
    gmm = np.reshape(r.gamma_mm, shape)
    gzz = np.reshape(r.gamma_zz, shape)
    # lamb11 = (cos^2/4) Im xi(-w0); the printed chi integrand is 2 w0 + 2 lamb11
    chi_rate = 2.0 * sys.omega0 + 2.0 * np.reshape(r.lamb11, shape)

    def cum(f):
        panel = np.sum(L * w[None, :] * f, axis=1)
        return np.concatenate([[0.0], np.cumsum(panel)])

    Gam = cum(gpp + gmm)
    Gam_nodes = Gam[:-1, None] + L * ((gpp + gmm) @ S.T)
    G = cum(np.exp(Gam_nodes) * gmm)
    return G, Gam, cum(2.0 * gzz), cum(chi_rate)


def pc_integrals(t, sys: SystemParams, p: BathParams, h_max: float = 0.05, tol: float = 1e-9) -> PCIntegrals:
    """G, Gamma, Gamma-tilde and chi for the closed-form phase-covariant solution.

    Composite Gauss-Legendre on panels no wider than ``h_max`` with geometric
    grading into t = 0, where the rates behave like s log s.  G needs Gamma
    inside each panel, which comes from the exact polynomial running integral
    of the rule.  Orders 6 and 10 are both evaluated and must agree to ``tol``
    relative, otherwise QuadratureError.  Accepts a scalar or an array of times.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("pc_integrals requires t >= 0")
    flat = np.atleast_1d(t_arr).ravel()
    if not np.any(flat > 0):
        z = np.zeros(t_arr.shape)
        return PCIntegrals(*(z if z.ndim else 0.0 for _ in range(4)))
    edges, where = _pc_panels(flat, h_max)
    lo = _pc_cumulative(edges, sys, p, 6)
    hi = _pc_cumulative(edges, sys, p, 10)
    for a, b in zip(lo, hi):
        scale = max(1.0, float(np.abs(b).max()))
        if np.abs(a - b).max() > tol * scale:
            raise QuadratureError(f"pc_integrals: orders 6 and 10 differ by {np.abs(a - b).max():.3g}")
    vals = [np.reshape(v[where], t_arr.shape) for v in hi]
    if t_arr.ndim == 0:
        vals = [float(v) for v in vals]
    return PCIntegrals(*vals)


def pc_analytic(rho0, t, sys: SystemParams, p: BathParams, integrals: PCIntegrals | None = None):
    """Closed-form phase-covariant evolution of ``rho0`` to time(s) ``t``.

    The transverse Bloch components rotate as
    x + iy -> (x0 + i y0) exp(i chi/2 - Gamma/2 - Gamma-tilde).  The factor 1/2
    makes the rotation frequency w0 + lamb11, the one generated by the
    commutator of the phase-covariant equation.  Returns a QubitState for
    scalar ``t`` and an (n, 3) Bloch array for an array.
    """
    s0 = rho0 if isinstance(rho0, QubitState) else QubitState.from_matrix(rho0)
    I = integrals if integrals is not None else pc_integrals(t, sys, p)
    G, Gam, Gt, chi = (np.asarray(v, dtype=float) for v in (I.bigG, I.bigGamma, I.bigGammaTilde, I.chi))
    w = (s0.bloch_x + 1j * s0.bloch_y) * np.exp(0.5j * chi - 0.5 * Gam - Gt)
    z = 1.0 - np.exp(-Gam) * (2.0 * G + 1.0 - s0.bloch_z)
    if np.ndim(t) == 0:
        return QubitState(float(w.real), float(w.imag), float(z))
    return np.stack([w.real, w.imag, z], axis=-1)


def evolve(equation, sys: SystemParams, bath: BathParams, rho0, t_end: float, dt: float = 1e-3) -> Trajectory:
    """Trajectory on the uniform grid for any equation tag.

    WCSB and PC are integrated with RK4; PC-analytic evaluates the closed form
    on the same grid, with the generator supplying the derivatives.
    """
    eq = Equation.parse(equation)
    if eq is not Equation.PC_ANALYTIC:
        return integrate(MasterEquation(eq, sys, bath), rho0, t_end, dt)
    gen = MasterEquation(Equation.PC, sys, bath)
    s0 = rho0 if isinstance(rho0, QubitState) else QubitState.from_matrix(rho0)
    n = _step_count(t_end, dt)
    h = t_end / n if n else dt
    times = h * np.arange(n + 1)
    if n:
        times[-1] = t_end
    bloch = pc_analytic(s0, times, sys, bath)
    derivs = gen.bloch_derivative(bloch, times)
    flags = np.zeros(n + 1, dtype=np.int8)
    meta = {"dt": h, "equation": eq.value, "sys": sys, "bath": bath}
    return Trajectory(times, bloch, derivs, flags, meta, [])
