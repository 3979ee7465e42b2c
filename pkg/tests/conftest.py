import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cepp.model import LinearIncidence, MichaelisMenten, MultiStrainModel, RankOneBlock, ScalarStrain

settings.register_profile("cepp", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("cepp")

HERE = Path(__file__).parent
ROOT = HERE.parent

ELL = (3 / 4, 1 / 4)
W = (1 / 2, 1 / 2)

ACCEPTANCE_LINES = []


def two_block_model():
    return MultiStrainModel(1.0, 0.25, (RankOneBlock(W, ELL, (1.0, 2.0)), RankOneBlock(W, ELL, (1.5, 2.5))))


def linear_two_strain(beta1=1.0, beta2=0.5, v1=1.0, v2=1.0):
    return MultiStrainModel(1.0, 0.25, (ScalarStrain(beta1, v1), ScalarStrain(beta2, v2)))


def mm_two_strain(beta1, beta2, alpha1=1.0, alpha2=1.0, v1=1.0, v2=1.0):
    return MultiStrainModel(
        1.0, 0.25, (ScalarStrain(beta1, v1, MichaelisMenten(alpha1)), ScalarStrain(beta2, v2, MichaelisMenten(alpha2)))
    )


def scalar_block(beta1=0.5, vdiag=(1.0, 2.0), v1=1.0, w=W, ell=ELL):
    return MultiStrainModel(1.0, 0.25, (ScalarStrain(beta1, v1, LinearIncidence()), RankOneBlock(w, ell, vdiag)))


@pytest.fixture
def two_block():
    return two_block_model()


@pytest.fixture
def mm_regions():
    return json.loads((HERE / "fixtures" / "mm_regions.json").read_text())


def random_metzler(rng, n, density=0.5):
    a = rng.uniform(-3.0, 3.0, (n, n))
    off = ~np.eye(n, dtype=bool)
    a[off] = np.abs(a[off]) * (rng.random((n, n))[off] < density)
    return a


def random_irreducible_metzler(rng, n):
    a = random_metzler(rng, n, density=0.4)
    # a Hamiltonian cycle guarantees strong connectivity
    perm = rng.permutation(n)
    for k in range(n):
        i, j = perm[k], perm[(k + 1) % n]
        a[i, j] = max(a[i, j], rng.uniform(0.1, 2.0))
    return a


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
