import itertools

import numpy as np
import pytest

from cepp.cep import (
    GLOBAL_PROVED,
    LOCAL_ONLY,
    UNDETERMINED,
    SiphonCapError,
    build_lattice,
    cep_walk,
    classify_region,
    is_siphon,
    minimal_siphons,
    model_siphons,
    partition_sweep,
)
from cepp.model import MultiStrainModel, RankOneBlock, ScalarStrain, to_stoichiometric
from conftest import linear_two_strain, mm_two_strain, scalar_block, two_block_model


def brute_force_minimal_siphons(net):
    n = len(net.species)
    G = np.asarray(net.Gamma)
    sets = []
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            S = set(S)
            ok = all(not (set(np.flatnonzero(G[:, r] > 0)) & S) or (set(net.supports[r]) & S)
                     for r in range(net.n_reactions))
            if ok:
                sets.append(frozenset(S))
    return {S for S in sets if not any(T < S for T in sets)}


@pytest.mark.parametrize("model", [linear_two_strain(), scalar_block(), two_block_model(),
                                   MultiStrainModel(1.0, 0.25, tuple(ScalarStrain(1.0, 1.0) for _ in range(3)))])
def test_siphons_match_brute_force_and_strain_blocks(model):
    net = to_stoichiometric(model)
    got = {s.species for s in minimal_siphons(net)}
    assert got == brute_force_minimal_siphons(net)
    assert got == {frozenset(model.indices(j)) for j in range(model.n_strains)}
    for S in got:
        assert is_siphon(net, S)


def test_siphon_names():
    names = sorted(s.names for s in model_siphons(scalar_block()))
    assert names == [("i1",), ("z2_1", "z2_2")]
    assert model_siphons(MultiStrainModel(1.0, 0.25, ())) == []


def test_siphon_cap():
    strains = tuple(RankOneBlock(np.full(5, 0.2), np.ones(5), np.ones(5)) for _ in range(5))
    with pytest.raises(SiphonCapError, match="cap"):
        model_siphons(MultiStrainModel(1.0, 0.25, strains))


def test_lattice_two_strain():
    lat = build_lattice(linear_two_strain())
    assert len(lat) == 4
    assert lat[frozenset({0, 1})].label == "DFE"
    assert lat[frozenset({1})].exists
    assert lat[frozenset({1})].invasion == {1: 0.5}
    assert lat[frozenset({0})].exists
    assert not lat[frozenset()].exists


def test_lattice_power_set():
    m = MultiStrainModel(1.0, 0.25, tuple(ScalarStrain(b, 1.0) for b in (1.0, 0.8, 0.6)))
    assert len(build_lattice(m)) == 8


def test_lattice_region_ii_missing_faces():
    lat = build_lattice(mm_two_strain(2.0, 0.05))
    assert not lat[frozenset({0})].exists
    assert not lat[frozenset()].exists


def test_walk_linear_dominance():
    (trace,) = cep_walk(linear_two_strain())
    assert [st.node for st in trace] == ["DFE", "E[1]"]
    assert trace[0].invader == 0 and trace[0].invader_number == 4.0
    assert trace[-1].invasion == {1: 0.5}


def test_walk_reaches_interior():
    (trace,) = cep_walk(mm_two_strain(1.95, 2.0))
    assert trace[-1].node == "E[1,2]"
    assert len(trace) == 3
    s = [st.s for st in trace]
    assert all(a > b for a, b in zip(s, s[1:]))


def test_walk_tie_branches():
    traces = cep_walk(linear_two_strain(1.0, 1.0))
    assert len(traces) == 2
    assert sorted(tr[1].node for tr in traces) == ["E[1]", "E[2]"]
    rep = classify_region(linear_two_strain(1.0, 1.0))
    assert rep.branched and rep.certificate == UNDETERMINED and rep.region == "threshold"


def test_classify_second_strain_region():
    rep = classify_region(mm_two_strain(0.05, 2.0))
    assert rep.attractor == "E[2]"
    assert rep.certificate == GLOBAL_PROVED
    q = {x.quantity: x for x in rep.inequalities}
    assert set(q) == {"R1(E[2])", "R2(DFE)"}
    assert q["R2(DFE)"].direction == ">" and q["R2(DFE)"].holds
    assert q["R1(E[2])"].direction == "<" and q["R1(E[2])"].holds


def test_classify_mm_region_fixture(mm_regions):
    for region, pt in mm_regions["regions"].items():
        rep = classify_region(mm_two_strain(pt["beta1"], pt["beta2"]))
        assert rep.region == region
        assert rep.attractor == pt["attractor"]
        assert rep.certificate == GLOBAL_PROVED


def test_classify_block_wins():
    m = scalar_block(beta1=0.2)
    rep = classify_region(m)
    assert rep.attractor == "E[2]" and rep.certificate == GLOBAL_PROVED


def test_classify_two_block_local_only():
    rep = classify_region(two_block_model())
    assert rep.attractor == "E[1]"
    assert rep.certificate == LOCAL_ONLY


def test_classify_near_threshold():
    rep = classify_region(linear_two_strain(beta1=0.25, beta2=0.1))
    assert rep.region == "threshold" and rep.certificate == UNDETERMINED


def _scalar_block_expected(R1, Rb):
    if max(R1, Rb) <= 1:
        return "DFE"
    return "E[1]" if R1 > Rb else "E[2]"


def test_scalar_block_case_analysis_random():
    rng = np.random.default_rng(12)
    n = 0
    while n < 100:
        k = int(rng.integers(1, 4))
        blk = RankOneBlock(rng.dirichlet(np.ones(k)), rng.uniform(0.1, 2.0, k), rng.uniform(0.3, 3.0, k))
        m = MultiStrainModel(1.0, 0.25, (ScalarStrain(float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.3, 2.0))), blk))
        R1, Rb = 4.0 * m.strains[0].slope, 4.0 * blk.slope
        if min(abs(R1 - 1), abs(Rb - 1), abs(R1 - Rb)) < 1e-3:
            continue
        rep = classify_region(m)
        assert rep.attractor == _scalar_block_expected(R1, Rb)
        assert rep.certificate == GLOBAL_PROVED
        n += 1


def _linear_label(b1, b2):
    R1, R2 = 4 * b1, 4 * b2
    if max(R1, R2) < 1:
        return "Omega[DFE]"
    return "Omega[E[1]]" if R1 > R2 else "Omega[E[2]]"


def test_partition_linear_grid():
    t = partition_sweep(linear_two_strain(), ["beta1=0.05:2:21", ("beta2", 0.05, 2.0, 21)])
    assert t.header() == ["beta1", "beta2", "region", "attractor", "margin", "certificate"]
    assert len(t.rows) == 441
    assert {"Omega[DFE]", "Omega[E[1]]", "Omega[E[2]]"} <= t.labels()
    for b1, b2, region, *_ in t.rows:
        if min(abs(4 * b1 - 1), abs(4 * b2 - 1), abs(b1 - b2)) > 1e-6:
            assert region == _linear_label(b1, b2)


def test_partition_mm_four_regions():
    t = partition_sweep(mm_two_strain(1.0, 1.0), ["beta1=0.05:2:20", "beta2=0.05:2:20"])
    assert {"Omega[DFE]", "Omega[E[1]]", "Omega[E[2]]", "Omega[E[1,2]]"} <= t.labels()


def test_single_parameter_threshold_switch():
    t = partition_sweep(linear_two_strain(beta2=0.05), ["beta1=0.1:0.4:31"])
    regions = [r[1] for r in t.rows]
    switch = regions.index("Omega[E[1]]")
    assert all(a in ("Omega[DFE]", "threshold") for a in regions[:switch])
    assert all(a == "Omega[E[1]]" for a in regions[switch:])
    assert abs(t.rows[switch][0] - 0.25) <= 0.01 + 1e-12


def test_scalar_block_tie_cells_codim_one():
    blk = scalar_block().strains[1]
    t = partition_sweep(scalar_block(), [("beta1", 0.5 * blk.slope, 1.5 * blk.slope, 41)])
    flagged = [r for r in t.rows if r[1] == "threshold"]
    assert len(flagged) == 1
    assert flagged[0][0] == pytest.approx(blk.slope, rel=1e-12)


def test_partition_errors_and_determinism():
    with pytest.raises(ValueError):
        partition_sweep(linear_two_strain(), [])
    a = partition_sweep(linear_two_strain(), ["beta1=0.1:1:7"])
    b = partition_sweep(linear_two_strain(), ["beta1=0.1:1:7"], workers=2)
    assert a.rows == b.rows
