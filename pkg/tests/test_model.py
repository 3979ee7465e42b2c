import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cepp.model import (
    Incidence,
    LinearIncidence,
    MichaelisMenten,
    ModelValidationError,
    MultiStrainModel,
    RankOneBlock,
    ScalarStrain,
    TabulatedConcave,
    invariant_region,
    jacobian,
    load_model,
    model_from_dict,
    model_to_dict,
    parse_number,
    to_stoichiometric,
    validate_assumptions,
    vector_field,
)
from conftest import ROOT, linear_two_strain, scalar_block, two_block_model


class Doubled(Incidence):
    kind = "doubled"

    def f(self, i):
        return 2.0 * np.asarray(i, dtype=float)

    def df(self, i):
        return 2.0


def test_dfe_is_equilibrium():
    for m in (linear_two_strain(), two_block_model(), scalar_block()):
        x = np.zeros(m.dim)
        x[0] = m.s0
        np.testing.assert_array_equal(vector_field(m, x), 0.0)


def test_linear_boundary_state_is_equilibrium():
    m = linear_two_strain()
    assert np.abs(vector_field(m, [1.0, 0.75, 0.0])).max() < 1e-15


def test_mass_balance_identity():
    rng = np.random.default_rng(0)
    for m in (linear_two_strain(), scalar_block(), two_block_model(),
              MultiStrainModel(1.0, 0.25, (ScalarStrain(1.0, 1.0, MichaelisMenten(2.0)), ScalarStrain(0.7, 1.3)))):
        X = invariant_region(m).sample(rng, 10_000)
        F = vector_field(m, X)
        rates = np.concatenate([[0.0]] + [np.array(st.removal_rates) for st in m.strains])
        expected = m.Lambda - m.mu * X[:, 0] - X[:, 1:] @ rates[1:]
        assert np.abs(F.sum(axis=1) - expected).max() < 1e-12


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    m = MultiStrainModel(1.0, 0.25, (ScalarStrain(1.0, 1.0, MichaelisMenten(1.0)),
                                      RankOneBlock((0.3, 0.7), (1.0, 2.0), (1.0, 3.0))))
    for x in invariant_region(m).sample(rng, 5) + 0.01:
        J = jacobian(m, x)
        h = 1e-7
        Jfd = np.column_stack([(vector_field(m, x + h * e) - vector_field(m, x - h * e)) / (2 * h) for e in np.eye(m.dim)])
        np.testing.assert_allclose(J, Jfd, atol=1e-6)


def test_validation_mm_passes():
    m = MultiStrainModel(1.0, 0.25, (ScalarStrain(1.0, 1.0, MichaelisMenten(1.0)),))
    rep = validate_assumptions(m)
    assert rep.passed
    assert rep.get("A2").passed


def test_validation_slope_two_fails_a1():
    m = MultiStrainModel(1.0, 0.25, (ScalarStrain(1.0, 1.0, Doubled()),))
    rep = validate_assumptions(m)
    a1 = rep.get("A1", 0)
    assert not a1.passed
    assert a1.witness is not None


def test_validation_linear_flags_linear_case():
    m = linear_two_strain()
    rep = validate_assumptions(m)
    assert rep.passed
    assert "linear" in rep.get("g_monotone", 0).note


def test_a2_violation_downgrades_region():
    m = MultiStrainModel(1.0, 2.0, (ScalarStrain(1.0, 1.0),))
    assert not m.a2_holds
    with pytest.warns(UserWarning):
        with pytest.raises(ModelValidationError):
            invariant_region(m)
    with pytest.warns(UserWarning):
        reg = invariant_region(m, box=(0.0, 1.0))
    assert not reg.guaranteed
    x = reg.sample(np.random.default_rng(0), 100)
    assert reg.contains(x).all()


def test_invariant_region_bound_and_boundary():
    reg = invariant_region(linear_two_strain())
    assert reg.bound == 4.0
    assert reg.contains([3.0, 1.0, 0.0])
    assert not reg.contains([3.0, 1.0, 0.1])


def test_stoichiometric_two_scalar():
    net = to_stoichiometric(linear_two_strain())
    assert net.species == ("s", "i1", "i2")
    assert net.n_reactions == 6
    assert net.chemical_condition()


def test_stoichiometric_block_and_empty():
    net = to_stoichiometric(scalar_block())
    assert net.chemical_condition()
    assert net.species == ("s", "i1", "z2_1", "z2_2")
    for r in net.producers(2) + net.producers(3):
        assert net.supports[r] & {2, 3}
    empty = to_stoichiometric(MultiStrainModel(1.0, 0.25, ()))
    assert empty.species == ("s",)
    assert empty.n_reactions == 2


def test_stoichiometric_rates_reproduce_vector_field():
    rng = np.random.default_rng(2)
    for m in (scalar_block(), two_block_model(),
              MultiStrainModel(1.0, 0.25, (ScalarStrain(1.0, 1.0, MichaelisMenten(1.0)),))):
        net = to_stoichiometric(m)
        for x in invariant_region(m).sample(rng, 5):
            np.testing.assert_allclose(net.Gamma @ net.rates(x), vector_field(m, x), atol=1e-14)


def test_tabulated_concave():
    inc = TabulatedConcave(((1.0, 2.0), (2.0, 3.0), (4.0, 4.0)))
    assert inc.f(0.0) == 0.0
    assert inc.f(0.5) == pytest.approx(0.5)
    assert inc.g_infimum == pytest.approx(0.25)
    with pytest.raises(ModelValidationError, match="concave"):
        TabulatedConcave(((1.0, 1.0), (2.0, 3.0)))
    with pytest.raises(ModelValidationError, match="decreases"):
        TabulatedConcave(((1.0, 1.0), (2.0, 0.5)))


def test_strain_validation():
    with pytest.raises(ModelValidationError):
        ScalarStrain(0.0, 1.0)
    with pytest.raises(ModelValidationError, match="sum to 1"):
        RankOneBlock((0.5, 0.6), (1.0, 1.0), (1.0, 1.0))
    with pytest.raises(ModelValidationError):
        MultiStrainModel(0.0, 1.0, ())


def test_parse_number():
    assert parse_number("3/4") == 0.75
    assert parse_number(" 5 / 2 ") == 2.5
    assert parse_number("0.125") == 0.125
    assert parse_number(2) == 2.0
    with pytest.raises(ModelValidationError):
        parse_number("abc")
    with pytest.raises(ModelValidationError):
        parse_number(True)


def test_model_file_roundtrip():
    m = load_model(ROOT / "models" / "two_block.json")
    assert m.mu == 0.25
    assert np.allclose(m.strains[0].ell, (0.75, 0.25))
    again = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
    assert again == m


def test_model_errors_have_paths(tmp_path):
    with pytest.raises(ModelValidationError, match=r"strains\[0\]\.beta"):
        model_from_dict({"lambda": 1, "mu": 1, "strains": [{"type": "scalar", "beta": "x", "v": 1}]})
    with pytest.raises(ModelValidationError, match="missing field 'mu'"):
        model_from_dict({"lambda": 1})
    p = tmp_path / "bad.json"
    p.write_text('{\n "lambda": 1,\n "mu": ]\n}')
    with pytest.raises(ModelValidationError, match=r"bad.json:3:"):
        load_model(p)


def test_with_param():
    m = linear_two_strain()
    assert m.with_param("beta2", 0.9).strains[1].beta == 0.9
    b = two_block_model().with_param("vdiag2_1", 2.0)
    assert b.strains[1].vdiag[0] == 2.0
    with pytest.raises(ModelValidationError):
        m.with_param("alpha1", 1.0)


@given(st.floats(0.01, 10.0), st.floats(0.01, 100.0))
def test_mm_normalization(alpha, ibar):
    inc = MichaelisMenten(alpha)
    F = inc.normalized(ibar)
    assert F(0.0) == 0.0
    assert F(1.0) == pytest.approx(1.0)
    y = np.linspace(0.0, 5.0, 101)
    Fy = F(y)
    assert np.all(np.diff(Fy) > 0)
    assert np.all(np.diff(Fy, 2) <= 1e-12)


@given(st.floats(0.01, 10.0), st.lists(st.floats(1e-6, 1e3), min_size=2, max_size=20))
def test_mm_g_strictly_decreasing(alpha, pts):
    inc = MichaelisMenten(alpha)
    x = np.unique(pts)
    # points closer than rounding cannot separate g in floating point
    x = x[np.concatenate([[True], np.diff(x) > 1e-9 * x[1:]])]
    if x.size < 2:
        return
    g = inc.g(x)
    assert np.all(np.diff(g) < 0)


def test_linear_g_is_one():
    inc = LinearIncidence()
    assert inc.g(3.0) == 1.0
    assert inc.is_linear
