"""Siphon lattice and the competitive-exclusion walk.

Lattice nodes are named by the set of *absent* strains.  The walk starts at
the disease-free node and repeatedly admits the dominant invader until no
absent strain can invade.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibria import FaceEquilibrium, Inequality, face_equilibrium
from .model import (
    MultiStrainModel,
    RankOneBlock,
    ScalarStrain,
    StoichiometricNetwork,
    to_stoichiometric,
    validate_assumptions,
)
from .thresholds import invasion_numbers, transversal_jacobian

__all__ = [
    "SiphonSet",
    "SiphonCapError",
    "WalkError",
    "LatticeNode",
    "WalkStep",
    "CepReport",
    "PartitionTable",
    "is_siphon",
    "minimal_siphons",
    "model_siphons",
    "build_lattice",
    "cep_walk",
    "classify_region",
    "partition_sweep",
    "GLOBAL_PROVED",
    "LOCAL_ONLY",
    "OBSTRUCTED",
    "UNDETERMINED",
]

SPECIES_CAP = 24
STRAIN_CAP = 12
GRID_CAP = 1_000_000
INVADE_TOL = 1e-9
TIE_TOL = 1e-9
MARGIN_RTOL = 1e-6

GLOBAL_PROVED = "GlobalProved"
LOCAL_ONLY = "LocalOnly"
OBSTRUCTED = "Obstructed"
UNDETERMINED = "Undetermined"


class SiphonCapError(ValueError):
    pass


class WalkError(RuntimeError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


# ---------------------------------------------------------------------------
# siphons


@dataclass(frozen=True)
class SiphonSet:
    species: frozenset
    minimal: bool = True
    names: tuple = ()

    def __iter__(self):
        return iter(sorted(self.species))

    def __len__(self):
        return len(self.species)


def _masks(net: StoichiometricNetwork):
    prod, supp = [], []
    G = np.asarray(net.Gamma)
    for r in range(net.n_reactions):
        prod.append(sum(1 << i for i in np.flatnonzero(G[:, r] > 0)))
        supp.append(sum(1 << i for i in net.supports[r]))
    return list(zip(prod, supp))


def _is_siphon_mask(S: int, masks) -> bool:
    return all(not (p & S) or (q & S) for p, q in masks)


def is_siphon(net: StoichiometricNetwork, species) -> bool:
    """Every reaction producing a member consumes a member."""
    S = sum(1 << int(i) for i in species)
    return S != 0 and _is_siphon_mask(S, _masks(net))


def minimal_siphons(net: StoichiometricNetwork) -> list:
    """All minimal siphons, by size-increasing enumeration with superset pruning."""
    n = len(net.species)
    if n > SPECIES_CAP:
        raise SiphonCapError(
            f"{n} species exceeds the enumeration cap of {SPECIES_CAP}; reduce the model or split blocks"
        )
    masks = _masks(net)
    found = []
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            S = 0
            for i in combo:
                S |= 1 << i
            if any(m & S == m for m in found):
                continue
            if _is_siphon_mask(S, masks):
                found.append(S)
    out = []
    for S in found:
        idx = frozenset(i for i in range(n) if S >> i & 1)
        out.append(SiphonSet(idx, True, tuple(net.species[i] for i in sorted(idx))))
    return out


def model_siphons(model: MultiStrainModel) -> list:
    return minimal_siphons(to_stoichiometric(model))


# ---------------------------------------------------------------------------
# lattice


@dataclass(frozen=True)
class LatticeNode:
    absent: frozenset
    equilibrium: FaceEquilibrium
    invasion: dict = field(default_factory=dict)

    @property
    def present(self) -> tuple:
        return self.equilibrium.present

    @property
    def exists(self) -> bool:
        return self.equilibrium.exists

    @property
    def label(self) -> str:
        return self.equilibrium.label


def _node(model, present, cache) -> LatticeNode:
    key = tuple(sorted(present))
    if key not in cache:
        E = face_equilibrium(model, key)
        inv = invasion_numbers(model, E) if E.exists else {}
        absent = frozenset(range(model.n_strains)) - frozenset(key)
        cache[key] = LatticeNode(absent, E, inv)
    return cache[key]


def build_lattice(model: MultiStrainModel) -> dict:
    """``{absent frozenset: LatticeNode}`` over all ``2^n`` faces."""
    n = model.n_strains
    if n > STRAIN_CAP:
        raise ValueError(f"{n} strains exceeds the lattice cap of {STRAIN_CAP}")
    cache = {}
    out = {}
    for size in range(n + 1):
        for present in itertools.combinations(range(n), size):
            node = _node(model, present, cache)
            out[node.absent] = node
    return out


# ---------------------------------------------------------------------------
# walk


@dataclass(frozen=True)
class WalkStep:
    node: str
    present: tuple
    s: float
    invasion: dict
    invader: int | None = None
    invader_number: float | None = None

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "present": [j + 1 for j in self.present],
            "s": self.s,
            "invasion": {str(j + 1): v for j, v in self.invasion.items()},
            "invader": None if self.invader is None else self.invader + 1,
            "invader_number": self.invader_number,
        }


def _walk(model, present, cache, trace, out):
    node = _node(model, present, cache)
    E = node.equilibrium
    if not E.exists:
        raise WalkError(f"face {E.label} reached by the walk does not exist ({E.note or 'thresholds inconsistent'})",
                        trace)
    inv = node.invasion
    invaders = {j: r for j, r in inv.items() if r > 1.0 + INVADE_TOL}
    if not invaders:
        out.append(trace + [WalkStep(E.label, E.present, E.s, dict(inv))])
        return
    top = max(invaders.values())
    for j in sorted(j for j, r in invaders.items() if r >= top - TIE_TOL):
        step = WalkStep(E.label, E.present, E.s, dict(inv), j, invaders[j])
        nxt = tuple(sorted(E.present + (j,)))
        if len(nxt) >= 3 and not face_equilibrium(model, nxt).constructed:
            raise WalkError("walk reached a face with three or more present strains; not constructed",
                            trace + [step])
        _walk(model, nxt, cache, trace + [step], out)


def cep_walk(model: MultiStrainModel, _cache=None) -> list:
    """All walk traces (more than one only when dominant invaders tie)."""
    cache = {} if _cache is None else _cache
    out = []
    _walk(model, (), cache, [], out)
    return out


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True, eq=False)
class CepReport:
    traces: tuple
    terminal: LatticeNode | None
    inequalities: tuple
    certificate: str
    region: str
    near_threshold: bool
    seed: int | None = None
    note: str = ""
    scan: object = None

    @property
    def attractor(self) -> str:
        return self.terminal.label if self.terminal is not None else "none"

    @property
    def margin(self) -> float:
        return min((abs(q.value - q.threshold) for q in self.inequalities), default=math.inf)

    @property
    def branched(self) -> bool:
        return len(self.traces) > 1

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "attractor": self.attractor,
            "certificate": self.certificate,
            "near_threshold": self.near_threshold,
            "margin": self.margin,
            "inequalities": [q.to_dict() for q in self.inequalities],
            "traces": [[st.to_dict() for st in tr] for tr in self.traces],
            "seed": self.seed,
            "note": self.note,
            "scan": None if self.scan is None else self.scan.to_dict(),
        }


def _region_inequalities(model, present, cache) -> tuple:
    E = _node(model, present, cache)
    out = []
    for j, r in sorted(E.invasion.items()):
        out.append(Inequality(f"R{j + 1}({E.label})", r, 1.0, "<"))
    for k in present:
        sub = tuple(p for p in present if p != k)
        node = _node(model, sub, cache)
        if not node.exists:
            out.append(Inequality(f"exists({node.label})", 0.0, 1.0, ">"))
            continue
        out.append(Inequality(f"R{k + 1}({node.label})", node.invasion[k], 1.0, ">"))
    return tuple(out)


def _certified_family(model: MultiStrainModel) -> bool:
    if not model.a2_holds:
        return False
    scal = [st for st in model.strains if isinstance(st, ScalarStrain)]
    blocks = [st for st in model.strains if isinstance(st, RankOneBlock)]
    if not blocks:
        if not validate_assumptions(model).passed:
            return False
        return all(st.incidence.is_linear or st.incidence.g_strictly_decreasing for st in scal)
    if len(blocks) == 1 and len(scal) <= 1:
        return all(st.incidence.is_linear for st in scal)
    return False


def classify_region(model: MultiStrainModel, scan_samples: int = 0, seed: int = 0, _cache=None) -> CepReport:
    """Walk, attach the terminal inequalities and a certificate status.

    ``Undetermined`` is used on ties and within the threshold margin, where
    no attractor is claimed.  With ``scan_samples`` the standard candidate
    at the terminal is sampled; violations turn the status into
    ``Obstructed``.
    """
    from .lyapunov import build_candidate, verify_nonpositivity

    cache = {} if _cache is None else _cache
    traces = cep_walk(model, cache)
    if len(traces) > 1:
        terms = sorted({tr[-1].node for tr in traces})
        return CepReport(tuple(traces), None, (), UNDETERMINED, "threshold", True, seed,
                         "dominant invaders tie; branches end at " + ", ".join(terms))
    trace = traces[0]
    present = trace[-1].present
    terminal = _node(model, present, cache)
    ineq = _region_inequalities(model, present, cache)
    near = any(abs(q.value - q.threshold) <= MARGIN_RTOL * max(1.0, abs(q.threshold)) for q in ineq)
    near = near or any(_node(model, st.present, cache).equilibrium.near_nonhyperbolic for st in trace)
    region = "threshold" if near else f"Omega[{terminal.label}]"
    if near:
        return CepReport(tuple(traces), terminal, ineq, UNDETERMINED, region, True, seed,
                         "within the threshold margin; excluded from stability claims")
    cert = GLOBAL_PROVED if _certified_family(model) else LOCAL_ONLY
    note = ""
    scan = None
    if cert == LOCAL_ONLY:
        TJ = transversal_jacobian(model, terminal.equilibrium)
        if TJ.abscissae and not TJ.hurwitz:
            cert, note = UNDETERMINED, "transversal Jacobian not Hurwitz at the terminal"
    if scan_samples and model.a2_holds:
        cand = build_candidate(model, terminal.equilibrium)
        scan = verify_nonpositivity(cand, scan_samples, seed)
        if scan.violation_count:
            cert = OBSTRUCTED
            note = f"standard candidate: {scan.violation_count} sampled violations"
    return CepReport(tuple(traces), terminal, ineq, cert, region, False, seed, note, scan)


# ---------------------------------------------------------------------------
# partition sweeps


@dataclass(frozen=True, eq=False)
class PartitionTable:
    names: tuple
    grids: tuple
    rows: tuple

    columns = ("region", "attractor", "margin", "certificate")

    def labels(self) -> set:
        return {r[len(self.names)] for r in self.rows}

    def header(self) -> list:
        return list(self.names) + list(self.columns)


def _parse_vary(vary):
    out = []
    for v in vary:
        if isinstance(v, str):
            name, rng = v.split("=", 1)
            lo, hi, steps = rng.split(":")
            v = (name.strip(), float(lo), float(hi), int(steps))
        name, lo, hi, steps = v
        if steps < 1:
            raise ValueError(f"{name}: need at least one grid step")
        out.append((name, float(lo), float(hi), int(steps)))
    if not 1 <= len(out) <= 2:
        raise ValueError("vary one or two parameters")
    return out


def _sweep_point(args):
    template, names, values = args
    m = template
    for name, val in zip(names, values):
        m = m.with_param(name, val)
    try:
        rep = classify_region(m)
        return tuple(values) + (rep.region, rep.attractor if rep.region != "threshold" else "none",
                                rep.margin, rep.certificate)
    except Exception as exc:  # reported per cell, never aborts the sweep
        return tuple(values) + ("error", "none", float("nan"), f"error: {exc}")


def partition_sweep(template: MultiStrainModel, vary, workers=None) -> PartitionTable:
    """Classify every grid point; rows ordered by grid index."""
    axes = _parse_vary(vary)
    grids = tuple(np.linspace(lo, hi, steps) if steps > 1 else np.array([lo]) for _, lo, hi, steps in axes)
    total = math.prod(len(g) for g in grids)
    if total > GRID_CAP:
        raise ValueError(f"{total} grid points exceeds the cap of {GRID_CAP}")
    names = tuple(a[0] for a in axes)
    jobs = [(template, names, tuple(float(v) for v in pt)) for pt in itertools.product(*grids)]
    if workers is None:
        workers = int(os.environ.get("CEPP_THREADS", "1") or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        rows = [_sweep_point(j) for j in jobs]
    return PartitionTable(names, grids, tuple(rows))
