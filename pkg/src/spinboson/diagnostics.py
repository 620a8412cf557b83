"""Dynamical diagnostics: distinguishability, CP-divisibility, speed limit,
coherence and steady state."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .bath import BathParams, SystemParams, coupling_factors, rates
from .dynamics import (
    FLAG_VIOLATION,
    Equation,
    MasterEquation,
    QubitState,
    Trajectory,
    evolve,
    lindblad_rhs,
)

__all__ = [
    "SteadyStateError",
    "NormTriple",
    "QSLRecord",
    "QSLSeries",
    "BLPResult",
    "trace_distance",
    "trace_distance_bloch",
    "blp_pair",
    "blp_scan",
    "choi_g",
    "rhp_g",
    "rhp_g_series",
    "generator_norms",
    "qsl_time",
    "von_neumann_entropy",
    "rel_entropy_coherence",
    "coherence_series",
    "coherence_local_maxima",
    "thermal_state",
    "fidelity",
    "pc_steady_state",
]

SLOPE_TOL = 1e-9
G_FLOOR = 1e-9
EPSILON = 1e-6


class SteadyStateError(ValueError):
    """No unique dissipative steady state (pure dephasing), or rates never plateau."""


def _state(rho) -> QubitState:
    return rho if isinstance(rho, QubitState) else QubitState.from_matrix(rho)


def _mat(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, QubitState) else np.asarray(rho, dtype=complex)


# ---------------------------------------------------------------------------
# trace distance / BLP


def trace_distance(rho1, rho2) -> float:
    """Half the sum of singular values of rho1 - rho2."""
    d = _mat(rho1) - _mat(rho2)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def blp_pair() -> tuple[QubitState, QubitState]:
    """|+><+| and |0><0|, the pair whose distinguishability is tracked."""
    return QubitState.plus(), QubitState.excited()


@dataclass(frozen=True)
class BLPResult:
    times: np.ndarray
    distance: np.ndarray
    intervals: list  # (t_start, t_end) where dD/dt > SLOPE_TOL
    warnings: tuple = ()
    positivity_violated: bool = False

    @property
    def revivals(self) -> int:
        return len(self.intervals)


def _positive_runs(times: np.ndarray, mask: np.ndarray) -> list[tuple[float, float]]:
    runs = []
    idx = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(np.int8), [0]])))
    for a, b in zip(idx[::2], idx[1::2]):
        runs.append((float(times[a]), float(times[b - 1])))
    return runs


def blp_scan(equation, sys: SystemParams, p: BathParams, t_end: float, dt: float = 1e-3) -> BLPResult:
    """Trace distance between the two evolving BLP states and its growth intervals.

    The slope is a centred finite difference on the sampled distance; an
    interval counts as a revival only where the slope exceeds 1e-9.
    """
    r1, r2 = blp_pair()
    a = evolve(equation, sys, p, r1, t_end, dt)
    b = evolve(equation, sys, p, r2, t_end, dt)
    D = trace_distance_bloch(a.bloch, b.bloch)
    slope = np.gradient(D, a.times)
    warn = tuple(a.warnings) + tuple(b.warnings)
    violated = a.positivity_violated or b.positivity_violated
    return BLPResult(a.times, D, _positive_runs(a.times, slope > SLOPE_TOL), warn, violated)


# ---------------------------------------------------------------------------
# RHP witness

_PHI = np.zeros((4, 4), dtype=complex)
for _i in range(2):
    for _j in range(2):
        _PHI[2 * _i + _i, 2 * _j + _j] = 0.5
_UNITS = np.zeros((2, 2, 2, 2), dtype=complex)
for _i in range(2):
    for _j in range(2):
        _UNITS[_i, _j, _i, _j] = 1.0


def _choi_generator(images: np.ndarray) -> np.ndarray:
    """(L x I)(|Phi><Phi|) from images[..., i, j] = L(|i><j|), shape (..., 4, 4)."""
    # entry ((a, i), (b, j)) = L(|i><j|)[a, b] / 2
    X = 0.5 * np.einsum("...ijab->...aibj", images)
    return X.reshape(images.shape[:-4] + (4, 4))


def _g_from_choi(X: np.ndarray, epsilon: float) -> np.ndarray:
    def g(eps):
        lam = np.linalg.eigvalsh(_PHI + eps * X)
        # ||C||_1 - 1 = 2 * sum|negative eigenvalues| because Tr X = 0
        return 2.0 * np.sum(np.where(lam < 0, -lam, 0.0), axis=-1) / eps

    val = 2.0 * g(0.5 * epsilon) - g(epsilon)
    return np.where(np.abs(val) < G_FLOOR, 0.0, val)


def choi_g(apply: Callable[[np.ndarray], np.ndarray], epsilon: float = EPSILON) -> float:
    """g = lim (||(1 + eps L x 1)(|Phi><Phi|)||_1 - 1)/eps for a linear map ``apply``.

    Evaluated at eps and eps/2 and Richardson-extrapolated; values below
    1e-9 in magnitude are reported as 0.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    images = np.empty((2, 2, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            images[i, j] = apply(_UNITS[i, j])
    return float(_g_from_choi(_choi_generator(images), epsilon))


def rhp_g_series(times, equation, sys: SystemParams, p: BathParams, epsilon: float = EPSILON) -> np.ndarray:
    """g(t) on an array of times, vectorised."""
    eq = Equation.parse(equation)
    if eq is Equation.PC_ANALYTIC:
        eq = Equation.PC
    t = np.atleast_1d(np.asarray(times, dtype=float))
    H, gam = MasterEquation(eq, sys, p).parts(t)
    images = lindblad_rhs(_UNITS, np.asarray(H)[:, None, None], np.asarray(gam)[:, None, None])
    return _g_from_choi(_choi_generator(images), epsilon)


def rhp_g(t: float, equation, sys: SystemParams, p: BathParams, epsilon: float = EPSILON) -> float:
    """RHP witness g(t); positive exactly when the generator fails to be CP at t."""
    return float(rhp_g_series([t], equation, sys, p, epsilon)[0])


# ---------------------------------------------------------------------------
# quantum speed limit


@dataclass(frozen=True)
class NormTriple:
    op: float
    tr: float
    hs: float


@dataclass(frozen=True)
class QSLRecord:
    t: float
    bures_angle: float
    lam: NormTriple
    tau_qsl: float
    unreliable: bool = False


@dataclass(frozen=True)
class QSLSeries:
    """Speed-limit data for every sample after t = 0, stored as arrays.

    Iterating yields ``QSLRecord`` objects.  ``winner`` is the index (0 op,
    1 tr, 2 hs) of the norm giving the largest reciprocal at each sample.
    """

    t: np.ndarray
    bures_angle: np.ndarray
    lam_op: np.ndarray
    lam_tr: np.ndarray
    lam_hs: np.ndarray
    tau_qsl: np.ndarray
    winner: np.ndarray
    unreliable: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> QSLRecord:
        return QSLRecord(
            float(self.t[k]),
            float(self.bures_angle[k]),
            NormTriple(float(self.lam_op[k]), float(self.lam_tr[k]), float(self.lam_hs[k])),
            float(self.tau_qsl[k]),
            bool(self.unreliable[k]),
        )

    def __iter__(self) -> Iterator[QSLRecord]:
        return (self[k] for k in range(len(self)))


def generator_norms(derivs: np.ndarray) -> np.ndarray:
    """Operator, trace and Hilbert-Schmidt norms of d rho/dt given as Bloch derivatives (n, 3).

    Computed from the singular values of the 2x2 matrices; shape (n, 3).
    """
    d = np.asarray(derivs, dtype=float)
    m = np.empty(d.shape[:-1] + (2, 2), dtype=complex)
    m[..., 0, 0] = 0.5 * d[..., 2]
    m[..., 1, 1] = -0.5 * d[..., 2]
    m[..., 0, 1] = 0.5 * (d[..., 0] - 1j * d[..., 1])
    m[..., 1, 0] = 0.5 * (d[..., 0] + 1j * d[..., 1])
    sv = np.linalg.svd(m, compute_uv=False)
    hi, lo = sv.max(axis=-1), sv.min(axis=-1)
    return np.stack([hi, sv.sum(axis=-1), np.hypot(hi, lo)], axis=-1)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.sqrt(np.clip(w, 0.0, None))
    return np.einsum("...ij,...j,...kj->...ik", v, w, v.conj())


def qsl_time(traj: Trajectory) -> QSLSeries:
    """Wigner-Yanase speed-limit time along a trajectory.

    Lambda is the trapezoid running mean of the generator-output norms;
    tau = sin^2(B) * max(1/Lambda_op, 1/Lambda_tr, 1/Lambda_hs) where B is the
    arccos of the affinity Tr[sqrt rho(0) sqrt rho(t)], clipped into [-1, 1].
    A vanishing Lambda (no motion yet) gives tau = 0.
    """
    t = np.asarray(traj.times, dtype=float)
    norms = generator_norms(traj.derivs)
    h = np.diff(t)[:, None]
    cum = np.concatenate([np.zeros((1, 3)), np.cumsum(0.5 * h * (norms[1:] + norms[:-1]), axis=0)])
    keep = t > 0
    lam = cum[keep] / t[keep, None]
    mats = traj.matrices
    s0 = _sqrtm_psd(mats[0])
    st = _sqrtm_psd(mats[keep])
    aff = np.einsum("ij,...ji->...", s0, st).real
    B = np.arccos(np.clip(aff, -1.0, 1.0))
    with np.errstate(divide="ignore"):
        recip = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), np.inf)
    winner = np.argmax(recip, axis=1)
    best = recip[np.arange(len(recip)), winner]
    s2 = np.sin(B) ** 2
    tau = np.where(np.isinf(best), 0.0, s2 * np.where(np.isinf(best), 0.0, best))
    unreliable = traj.flags[keep] == FLAG_VIOLATION
    return QSLSeries(t[keep], B, lam[:, 0], lam[:, 1], lam[:, 2], tau, winner, unreliable)


# ---------------------------------------------------------------------------
# coherence, thermal state, fidelity


def von_neumann_entropy(rho, base: float = 2.0) -> float:
    lam = np.clip(np.linalg.eigvalsh(_mat(rho)), 0.0, 1.0)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)) / math.log(base))


def rel_entropy_coherence(rho, base: float = 2.0) -> float:
    """S(diag rho) - S(rho); bits by default, nats with ``base=math.e``."""
    m = _mat(rho)
    diag = np.diag(np.diag(m))
    return max(0.0, von_neumann_entropy(diag, base) - von_neumann_entropy(m, base))


def coherence_series(bloch: np.ndarray, base: float = 2.0) -> np.ndarray:
    """Relative entropy of coherence for an (n, 3) array of Bloch vectors."""
    b = np.asarray(bloch, dtype=float)

    def h(p):
        p = np.clip(p, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        return terms

    r = np.linalg.norm(b, axis=-1)
    z = b[..., 2]
    s_diag = h(0.5 * (1 + z)) + h(0.5 * (1 - z))
    s_rho = h(0.5 * (1 + r)) + h(0.5 * (1 - r))
    return np.maximum(0.0, (s_diag - s_rho) / math.log(base))


def thermal_state(sys: SystemParams, T: float) -> QubitState:
    """Gibbs state of (w0/2) sz: Bloch vector (0, 0, -tanh(w0 / 2T))."""
    if not T > 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    return QubitState(0.0, 0.0, -math.tanh(sys.omega0 / (2.0 * T)))


def fidelity(rho, sigma) -> float:
    """(Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2.

    For a qubit this equals Tr[rho sigma] + 2 sqrt(det rho det sigma), which
    in Bloch form is (1 + r.s + sqrt((1 - |r|^2)(1 - |s|^2)))/2 and avoids
    square roots of near-singular matrices.
    """
    r = _state(rho).bloch
    s = _state(sigma).bloch
    dets = max(0.0, 1.0 - r @ r) * max(0.0, 1.0 - s @ s)
    return float(min(1.0, max(0.0, 0.5 * (1.0 + r @ s + math.sqrt(dets)))))


def pc_steady_state(sys: SystemParams, p: BathParams, t_start: float = 1.0, t_max: float = 1e6) -> QubitState:
    """Fixed point of the phase-covariant populations at plateaued rates.

    The excited population is gamma_pp / (gamma_pp + gamma_mm) at the first
    doubling time t* where both rates changed by less than 1e-8 relative
    since t*/2.
    """
    c, _ = coupling_factors(sys.theta)
    if c == 0.0 or p.coupling == 0.0:
        raise SteadyStateError("pure dephasing has no unique dissipative steady state")
    t = t_start
    prev = rates(0.5 * t, sys, p)
    while t <= t_max:
        cur = rates(t, sys, p)
        ok = all(
            abs(a - b) < 1e-8 * abs(a)
            for a, b in ((cur.gamma_pp, prev.gamma_pp), (cur.gamma_mm, prev.gamma_mm))
        )
        if ok:
            up = cur.gamma_pp / (cur.gamma_pp + cur.gamma_mm)
            return QubitState(0.0, 0.0, float(2.0 * up - 1.0))
        prev = cur
        t *= 2.0
    raise SteadyStateError(f"rates did not plateau before t = {t_max:g}")


def coherence_local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima of a sampled curve."""
    v = np.asarray(values)
    return np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1


def trace_distance_bloch(b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """Trace distance from Bloch vectors, |r1 - r2| / 2."""
    return 0.5 * np.linalg.norm(np.asarray(b1) - np.asarray(b2), axis=-1)
