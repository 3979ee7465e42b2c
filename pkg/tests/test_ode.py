import numpy as np
import pytest

from cepp.equilibria import block_boundary, coexistence, scalar_boundary
from cepp.lyapunov import build_candidate
from cepp.model import invariant_region, vector_field
from cepp.ode import IntegrationError, attractor_check, default_horizon, integrate
from conftest import linear_two_strain, mm_two_strain, scalar_block, two_block_model


def _interior(m, rng, n):
    X = invariant_region(m).sample(rng, n)
    return np.maximum(X, 1e-2)


def test_equilibrium_stays_put():
    m = mm_two_strain(1.95, 2.0)
    E = coexistence(m)
    res = integrate(m, E.state, 1e3)
    assert np.abs(res.states - E.state).max() < 1e-8


def test_orbit_stays_in_gamma():
    m = linear_two_strain()
    rng = np.random.default_rng(0)
    for x0 in invariant_region(m).sample(rng, 5):
        res = integrate(m, x0, 50.0)
        assert res.states.min() >= 0
        assert res.states.sum(axis=1).max() <= m.s0 + 1e-9
        assert len(res.times) >= 501


def test_mass_identity_along_orbit():
    m = two_block_model()
    res = integrate(m, [2.0, 0.1, 0.1, 0.1, 0.1], 20.0, n_out=20_000)
    X, t = res.states, res.times
    total = X.sum(axis=1)
    rates = np.concatenate([st.removal_rates for st in m.strains])
    rhs = m.Lambda - m.mu * X[:, 0] - X[:, 1:] @ rates
    deriv = np.gradient(total, t)
    # central differences on the output grid are O(dt^2)
    assert np.abs(deriv - rhs)[1:-1].max() < 1e-6
    F = vector_field(m, X)
    np.testing.assert_allclose(F.sum(axis=1), rhs, atol=1e-12)


def test_integrator_order():
    m = linear_two_strain()
    x0 = [2.0, 0.3, 0.4]
    ref = integrate(m, x0, 5.0, tol=1e-13, atol=1e-14).final
    errs = []
    for tol in (1e-5, 1e-6, 1e-7):
        errs.append(np.abs(integrate(m, x0, 5.0, tol=tol, atol=tol * 1e-3).final - ref).max())
    # a 5(4) pair scales the error roughly like the tolerance
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] / errs[2] > 10


def test_integrate_rejects_bad_initial():
    m = linear_two_strain()
    with pytest.raises(ValueError):
        integrate(m, [1.0, -0.1, 0.0], 1.0)
    with pytest.raises(ValueError):
        integrate(m, [1.0, 0.0], 1.0)


def test_integration_error_carries_state():
    err = IntegrationError("x", np.ones(3), 2.0)
    assert err.t == 2.0 and err.last_state.shape == (3,)


def test_attractor_region_ii():
    m = mm_two_strain(2.0, 0.05)
    E1 = scalar_boundary(m, 0)
    rng = np.random.default_rng(1)
    cand = build_candidate(m, E1)
    out = attractor_check(m, E1, _interior(m, rng, 10), candidate=cand)
    assert all(v.converged for v in out)
    assert all(v.lyapunov_monotone for v in out)


def test_attractor_interior():
    m = mm_two_strain(1.95, 2.0)
    E = coexistence(m)
    rng = np.random.default_rng(2)
    out = attractor_check(m, E, _interior(m, rng, 10))
    assert all(v.converged and v.distance < 1e-6 for v in out)
    assert all(v.lyapunov_monotone is None for v in out)


def test_attractor_two_block_ea():
    m = two_block_model()
    EA = block_boundary(m, 0)
    rng = np.random.default_rng(3)
    out = attractor_check(m, EA, _interior(m, rng, 5))
    assert all(v.converged for v in out)


def test_default_horizon():
    m = mm_two_strain(1.95, 2.0)
    T = default_horizon(m, coexistence(m))
    assert 0 < T <= 1e4


def test_tie_continuum_reports_position():
    blk = scalar_block().strains[1]
    m = scalar_block(beta1=blk.slope)
    E = coexistence(m)
    assert E.continuum == (0, 1)
    (v,) = attractor_check(m, E, [[2.0, 0.2, 0.1, 0.1]], T=2000.0)
    top = 1.0 - m.mu / blk.slope
    assert v.continuum_xi is not None and 0 < v.continuum_xi < top
    assert v.converged
