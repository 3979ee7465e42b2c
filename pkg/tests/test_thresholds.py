import numpy as np
import pytest

from cepp.equilibria import block_boundary, dfe, face_equilibrium, scalar_boundary
from cepp.model import MichaelisMenten, MultiStrainModel, RankOneBlock, ScalarStrain
from cepp.thresholds import (
    basic_reproduction_numbers,
    invasion_numbers,
    reproduction_numbers,
    sign_equivalence_check,
    strain_ngm,
    transversal_jacobian,
)
from conftest import ELL, W, linear_two_strain, scalar_block, two_block_model


def test_dfe_basic_numbers():
    m = linear_two_strain()
    rd = reproduction_numbers(m, dfe(m))
    assert rd.at_state == (4.0, 2.0)
    assert basic_reproduction_numbers(m) == (4.0, 2.0)


def test_invasion_at_p1():
    m = linear_two_strain()
    E1 = scalar_boundary(m, 0)
    assert invasion_numbers(m, E1) == {1: 0.5}
    TJ = transversal_jacobian(m, E1)
    assert TJ.absent == (1,)
    assert TJ.abscissa == pytest.approx(-0.5, abs=1e-15)
    assert TJ.hurwitz


def test_transversal_at_dfe_is_diagonal():
    m = linear_two_strain()
    TJ = transversal_jacobian(m, dfe(m))
    np.testing.assert_allclose(TJ.matrix(), np.diag([3.0, 1.0]), atol=1e-15)


def test_block_spectral_numbers():
    m = two_block_model()
    R = basic_reproduction_numbers(m)
    assert abs(R[0] - 1.75) < 1e-10 and abs(R[1] - 1.2) < 1e-10
    for j, st in enumerate(m.strains):
        assert abs(strain_ngm(st, m.s0).rho - R[j]) < 1e-12


def _random_scalar_block(rng):
    k = int(rng.integers(1, 5))
    blk = RankOneBlock(rng.dirichlet(np.ones(k)), rng.uniform(0.1, 2.0, k), rng.uniform(0.3, 3.0, k))
    return MultiStrainModel(1.0, 0.25, (ScalarStrain(float(rng.uniform(0.1, 3.0)), float(rng.uniform(0.3, 2.0))), blk))


def test_invasion_ratio_identity():
    rng = np.random.default_rng(5)
    n = 0
    while n < 100:
        m = _random_scalar_block(rng)
        R1, Rb = basic_reproduction_numbers(m)
        if R1 <= 1 or Rb <= 1:
            continue
        Rb_at_E1 = invasion_numbers(m, scalar_boundary(m, 0))[1]
        R1_at_Eb = invasion_numbers(m, block_boundary(m, 1))[0]
        assert abs(Rb_at_E1 - Rb / R1) < 1e-12 * max(1.0, Rb / R1)
        assert abs(Rb_at_E1 * R1_at_Eb - 1.0) < 1e-12
        n += 1


def _random_two_strain(rng):
    strains = []
    for _ in range(2):
        if rng.random() < 0.5:
            k = int(rng.integers(1, 4))
            strains.append(RankOneBlock(rng.dirichlet(np.ones(k)), rng.uniform(0.1, 2.0, k), rng.uniform(0.3, 3.0, k)))
        else:
            inc = MichaelisMenten(float(rng.uniform(0.1, 3.0))) if rng.random() < 0.5 else None
            beta, v = float(rng.uniform(0.05, 3.0)), float(rng.uniform(0.3, 2.0))
            strains.append(ScalarStrain(beta, v, inc) if inc else ScalarStrain(beta, v))
    return MultiStrainModel(1.0, 0.25, tuple(strains))


def test_transversal_sign_matches_invasion_sign():
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 500:
        m = _random_two_strain(rng)
        for present in ((), (0,), (1,)):
            E = face_equilibrium(m, present)
            if not E.exists:
                continue
            inv = invasion_numbers(m, E)
            TJ = transversal_jacobian(m, E)
            for j, a in zip(TJ.absent, TJ.abscissae):
                if abs(inv[j] - 1.0) < 1e-6:
                    continue
                eig = np.linalg.eigvals(TJ.blocks[TJ.absent.index(j)].entries).real.max()
                assert np.sign(a) == np.sign(inv[j] - 1.0) == np.sign(eig)
                checked += 1


def test_invasion_below_basic_strict():
    rng = np.random.default_rng(7)
    for _ in range(500):
        m = _random_two_strain(rng)
        R = basic_reproduction_numbers(m)
        for j in (0, 1):
            E = face_equilibrium(m, (j,))
            if E.exists:
                other = 1 - j
                assert invasion_numbers(m, E)[other] < R[other]


def test_sign_equivalence_examples():
    w, ell = np.array(W), np.array(ELL)
    VA = np.diag([1.0, 2.0])
    assert sign_equivalence_check(4.0 * np.outer(w, ell) - VA, 1.75)
    sA = 16 / 7
    block = sA * np.outer(w, ell) - VA
    assert abs(np.linalg.eigvals(block).real.max()) < 1e-12
    assert sign_equivalence_check(block, sA * 7 / 16)
    assert sign_equivalence_check(np.array([[0.0]]), 1.0)
    assert not sign_equivalence_check(np.array([[0.5]]), 0.9)


def test_scalar_block_invader_sign():
    # block invading E1: abscissa sign equals sign(R_b / R_1 - 1)
    for beta1 in (0.3, 0.5, 0.9):
        m = scalar_block(beta1=beta1)
        R1, Rb = basic_reproduction_numbers(m)
        TJ = transversal_jacobian(m, scalar_boundary(m, 0))
        assert np.sign(TJ.abscissa) == np.sign(Rb / R1 - 1.0)


def test_requires_existing_equilibrium():
    m = linear_two_strain(beta1=0.1)
    with pytest.raises(ValueError):
        reproduction_numbers(m, scalar_boundary(m, 0))
