import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from spinboson.bath import BathParams, SystemParams
from spinboson.dynamics import MasterEquation, QubitState, integrate, evolve
from spinboson.diagnostics import (
    SteadyStateError,
    blp_pair,
    blp_scan,
    choi_g,
    coherence_local_maxima,
    coherence_series,
    fidelity,
    generator_norms,
    pc_steady_state,
    qsl_time,
    rel_entropy_coherence,
    rhp_g,
    rhp_g_series,
    thermal_state,
    trace_distance,
    trace_distance_bloch,
    von_neumann_entropy,
)

FIG1 = BathParams(0.4, 15.0, 0.2)
FIG3 = BathParams(0.4, 15.0, 1.0)
FIG5 = BathParams(0.1, 15.0, 0.5)
THETAS = (0.0, math.pi / 4, math.pi / 2)
GRID = np.linspace(0.0, 10.0, 1001)

states = st.tuples(st.floats(0, 1), st.floats(0, math.pi), st.floats(0, 2 * math.pi)).map(
    lambda a: QubitState(
        a[0] * math.sin(a[1]) * math.cos(a[2]), a[0] * math.sin(a[1]) * math.sin(a[2]), a[0] * math.cos(a[1])
    )
)


def kossakowski_g(t, eq, sys, p):
    """Sum of the negative canonical rates: eigenvalues of the rate matrix in the
    orthonormal jump basis (s+, s-, sz/sqrt2)."""
    _, gam = MasterEquation(eq, sys, p).parts(t)
    D = np.diag([1.0, 1.0, math.sqrt(2.0)])
    mu = np.linalg.eigvalsh(D @ gam @ D)
    return float(-np.sum(mu[mu < 0]))


# -- trace distance ------------------------------------------------------------


def test_trace_distance_basic():
    assert trace_distance(QubitState.plus(), QubitState.plus()) == 0
    assert abs(trace_distance(QubitState.excited(), QubitState.ground()) - 1) < 1e-15
    a, b = blp_pair()
    assert abs(trace_distance(a, b) - math.sqrt(2) / 2) < 1e-15


@settings(max_examples=300)
@given(states, states, states)
def test_trace_distance_metric(a, b, c):
    dab = trace_distance(a, b)
    assert dab == trace_distance(b, a)
    assert dab <= trace_distance(a, c) + trace_distance(c, b) + 1e-12
    assert -1e-15 <= dab <= 1 + 1e-15
    sv = np.linalg.svd(a.matrix - b.matrix, compute_uv=False)
    assert abs(dab - 0.5 * sv.sum()) < 1e-12
    assert abs(dab - trace_distance_bloch(a.bloch, b.bloch)) < 1e-12


# -- BLP -------------------------------------------------------------------------


def test_blp_dephasing_monotone():
    res = blp_scan("WCSB", SystemParams(1.25, math.pi / 2), FIG1, 15.0)
    assert res.revivals == 0
    assert abs(res.distance[0] - math.sqrt(2) / 2) < 1e-15


def test_blp_dissipative_revives():
    assert blp_scan("WCSB", SystemParams(1.25, 0.0), FIG1, 15.0).revivals >= 1


@pytest.mark.parametrize("theta", THETAS)
def test_blp_phase_covariant_monotone(theta):
    assert blp_scan("PC", SystemParams(1.25, theta), FIG1, 15.0).revivals == 0


# -- RHP -------------------------------------------------------------------------


def test_rhp_zero_generator():
    for eps in (1e-3, 1e-6):
        assert choi_g(lambda m: 0 * m, eps) == 0


def test_rhp_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        choi_g(lambda m: 0 * m, 0.0)


def test_rhp_negative_rate_lindblad():
    # a single jump with rate -0.3 on sigma_- gives g = 0.3
    from spinboson.dynamics import SM, SP

    def L(rho):
        return -0.3 * (SM @ rho @ SP - 0.5 * (SP @ SM @ rho + rho @ SP @ SM))

    assert abs(choi_g(L) - 0.3) < 1e-9


@pytest.mark.parametrize("eq", ["WCSB", "PC"])
def test_rhp_zero_for_dephasing(eq):
    assert np.all(rhp_g_series(GRID, eq, SystemParams(2.25, math.pi / 2), FIG1) == 0)


def test_rhp_positive_for_dissipative_wcsb():
    assert rhp_g_series(GRID, "WCSB", SystemParams(2.25, 0.0), FIG1).max() > 0


@pytest.mark.parametrize("eq", ["WCSB", "PC"])
@pytest.mark.parametrize("theta", [0.0, math.pi / 4, 1.2])
def test_rhp_matches_kossakowski_eigenvalues(eq, theta):
    sys = SystemParams(2.25, theta)
    for t in (0.05, 0.3, 1.0, 2.5, 6.0):
        assert abs(rhp_g(t, eq, sys, FIG1) - kossakowski_g(t, eq, sys, FIG1)) < 1e-8


@pytest.mark.parametrize("eq", ["WCSB", "PC"])
@pytest.mark.parametrize("theta", THETAS)
def test_rhp_epsilon_stability(eq, theta):
    sys = SystemParams(2.25, theta)
    a = rhp_g_series(GRID, eq, sys, FIG1, 1e-6)
    b = rhp_g_series(GRID, eq, sys, FIG1, 1e-7)
    assert np.abs(a - b).max() < 1e-4


def test_rhp_scalar_matches_series():
    sys = SystemParams(2.25, 0.0)
    s = rhp_g_series(GRID[:50], "WCSB", sys, FIG1)
    assert np.abs(s - np.array([rhp_g(t, "WCSB", sys, FIG1) for t in GRID[:50]])).max() < 1e-12


# -- quantum speed limit ------------------------------------------------------------


def test_qsl_constant_trajectory():
    tr = integrate(lambda rho, t: np.zeros((2, 2)), QubitState.charged(), 1.0, 0.01)
    q = qsl_time(tr)
    assert len(q) == 100
    assert np.all(q.bures_angle == 0) and np.all(q.tau_qsl == 0)


@settings(max_examples=300)
@given(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50)))
def test_norm_triple_ordering(d):
    op, tr, hs = generator_norms(np.array([d]))[0]
    assert op <= hs * (1 + 1e-12) + 1e-300
    assert hs <= tr * (1 + 1e-12) + 1e-300


@pytest.mark.parametrize("eq, w0", [("WCSB", 1.25), ("PC", 2.25)])
@pytest.mark.parametrize("theta", THETAS)
def test_qsl_bound_and_operator_norm(eq, w0, theta):
    tr = evolve(eq, SystemParams(w0, theta), FIG1, QubitState.charged(), 20.0, 1e-3)
    q = qsl_time(tr)
    assert np.all(q.tau_qsl <= q.t + 1e-9)
    assert np.all(q.winner == 0)
    assert np.all((q.bures_angle >= 0) & (q.bures_angle <= math.pi / 2))
    rec = q[len(q) - 1]
    assert rec.t == 20.0 and rec.lam.op == q.lam_op[-1]


@pytest.mark.parametrize("eq, w0", [("WCSB", 1.25), ("PC", 2.25)])
def test_qsl_dephasing_lower(eq, w0):
    tau = {}
    for theta in (0.0, math.pi / 2):
        tr = evolve(eq, SystemParams(w0, theta), FIG1, QubitState.charged(), 20.0, 1e-3)
        q = qsl_time(tr)
        tau[theta] = q.tau_qsl
    assert tau[math.pi / 2].mean() < tau[0.0].mean()
    # past the initial transient the dephasing curve lies below pointwise
    late = q.t >= 2.0
    assert np.all(tau[math.pi / 2][late] < tau[0.0][late])


def test_qsl_flags_unreliable_samples():
    tr = evolve("WCSB", SystemParams(1.25, math.pi / 4), FIG1, QubitState.plus(), 15.0, 1e-3)
    q = qsl_time(tr)
    assert np.array_equal(q.unreliable, tr.flags[1:] == 2)
    assert q.unreliable.any()


# -- coherence ---------------------------------------------------------------------


def test_coherence_values():
    assert rel_entropy_coherence(QubitState(0.0, 0.0, 0.4)) == 0
    assert abs(rel_entropy_coherence(QubitState.plus()) - 1) < 1e-15
    # h2((1+z)/2) - h2((1+r)/2) with r = sqrt(0.34), evaluated with mpmath
    assert abs(rel_entropy_coherence(QubitState(0.5, 0.0, 0.3)) - 0.195553918776236) < 1e-14
    assert abs(rel_entropy_coherence(QubitState.plus(), base=math.e) - math.log(2)) < 1e-15


@settings(max_examples=300)
@given(states)
def test_coherence_series_matches_matrix_route(s):
    v = coherence_series(s.bloch[None, :])[0]
    assert abs(v - rel_entropy_coherence(s)) < 1e-12
    assert v >= 0
    assert 0 <= von_neumann_entropy(s) <= 1 + 1e-15


def test_coherence_revives_after_initial_decay():
    tr = evolve("WCSB", SystemParams(1.25, 0.0), FIG1, QubitState.charged(), 20.0, 1e-3)
    c = coherence_series(tr.bloch)
    peaks = coherence_local_maxima(c)
    assert len(peaks) >= 1
    assert c[peaks[0]] < c[0]


# -- thermal state, fidelity, steady state -------------------------------------------


def test_thermal_state_limits():
    sys = SystemParams(1.25, 0.0)
    assert abs(thermal_state(sys, 1e12).bloch_z) < 1e-11
    assert abs(thermal_state(sys, 0.5).bloch_z - -0.8482836399575129) < 1e-15
    assert thermal_state(sys, 1e-4).bloch_z == -1.0
    with pytest.raises(ValueError):
        thermal_state(sys, 0.0)


def test_fidelity_basic():
    s = QubitState(0.2, -0.1, 0.5)
    assert abs(fidelity(s, s) - 1) < 1e-12
    assert fidelity(QubitState.excited(), QubitState.ground()) == 0


@settings(max_examples=300)
@given(states, states)
def test_fidelity_symmetric_and_bounded(a, b):
    f = fidelity(a, b)
    assert abs(f - fidelity(b, a)) < 1e-10
    assert 0 <= f <= 1
    # general route through matrix square roots; loses accuracy near pure states
    sa = scipy.linalg.sqrtm(a.matrix)
    ref = np.sum(np.linalg.svd(sa @ scipy.linalg.sqrtm(b.matrix), compute_uv=False)) ** 2
    assert abs(f - ref) < 1e-6


def test_pc_steady_state_matches_thermal():
    sys = SystemParams(1.25, math.pi / 4)
    ss = pc_steady_state(sys, FIG5)
    assert trace_distance(ss, thermal_state(sys, 0.5)) < 1e-3
    assert ss.bloch_x == 0 and ss.bloch_y == 0


def test_pc_steady_state_high_temperature():
    ss = pc_steady_state(SystemParams(1.25, 0.0), BathParams(0.1, 15.0, 2000.0))
    assert ss.radius < 1e-3


def test_pc_steady_state_rejects_dephasing():
    with pytest.raises(SteadyStateError):
        pc_steady_state(SystemParams(1.25, math.pi / 2), FIG5)


def test_pc_run_reaches_thermal_state():
    sys = SystemParams(1.25, math.pi / 4)
    tr = evolve("PC", sys, FIG5, QubitState.charged(), 150.0, 1e-3)
    assert fidelity(tr.final(), thermal_state(sys, 0.5)) > 0.999


def test_wcsb_thermal_infidelity_scales_with_coupling_squared():
    # the second-order steady state deviates from the Gibbs state at first order
    # in the coupling, so the infidelity falls like coupling^2
    sys = SystemParams(1.25, math.pi / 4)
    infid = []
    for c in (0.1, 0.01):
        tr = evolve("WCSB", sys, FIG5.with_(coupling=c), QubitState.charged(), 150.0 if c > 0.05 else 1500.0, 5e-3)
        infid.append(1 - fidelity(tr.final(), thermal_state(sys, 0.5)))
    assert 50 < infid[0] / infid[1] < 200
