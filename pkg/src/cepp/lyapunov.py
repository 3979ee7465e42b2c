"""Perron-Volterra Lyapunov candidates and their sampled verification.

A candidate at a face equilibrium ``E`` is a sum of Volterra entropy terms
``l z* G(z/z*)`` on resident variables plus a linear functional on invading
variables.  Its derivative along the flow has the closed form

    Vdot = sum_t l_t (1 - z*_t / z_t) f_t(x) + sum_k c_k f_k(x),

which is what :func:`vdot` evaluates (batched).  Nonpositivity is never
asserted; it is sampled, and the report says what was seen.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibria import FaceEquilibrium, face_equilibrium
from .linalg import perron_vectors, numerical_rank
from .model import MultiStrainModel, RankOneBlock, ScalarStrain, invariant_region, vector_field
from .thresholds import transversal_jacobian

__all__ = [
    "LyapunovDomainError",
    "LocalCertificateError",
    "bregman",
    "entropy_bracket",
    "am_hm_product",
    "bracket_bn",
    "LyapunovCandidate",
    "build_candidate",
    "VdotReport",
    "verify_nonpositivity",
    "sample_states",
    "two_block_terms",
    "ReducedTable",
    "reduced_test",
    "AlignmentReport",
    "perron_alignment",
    "LocalCertificate",
    "local_certificate",
    "transversal_left_weights",
    "DEFAULT_LAMBDA_GRID",
]

VIOLATION_TOL = 1e-12
CLAMP = 1e-6
BOUNDARY_FRACTION = 0.1
BOUNDARY_OFFSET = 1e-3
CHUNK = 4096
ALIGN_RTOL = 1e-9
DEFAULT_LAMBDA_GRID = tuple(2.0 ** -k for k in range(11))


class LyapunovDomainError(ValueError):
    """Entropy term evaluated at a nonpositive argument."""


class LocalCertificateError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scalar building blocks


def bregman(u):
    """``G(u) = u - 1 - ln u`` for ``u > 0``."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise LyapunovDomainError("G(u) needs u > 0")
    out = u - 1.0 - np.log(u)
    return out if out.ndim else float(out)


def entropy_bracket(x, y, F):
    """``B(x, y) = G(1/x) + G(x F(y)/y) - G(F(y)) + G(y)``; ``F`` normalized."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise LyapunovDomainError("entropy bracket needs x > 0 and y > 0")
    Fy = np.asarray(F(y), dtype=float)
    out = bregman(1.0 / x) + bregman(x * Fy / y) - bregman(Fy) + bregman(y)
    return out if np.ndim(out) else float(out)


def am_hm_product(alpha, y):
    """``(sum a_j y_j)(sum a_j / y_j)`` along the last axis."""
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum(alpha * y, axis=-1) * np.sum(alpha / y, axis=-1)


def bracket_bn(u, y, alpha):
    """``2 - 1/u - u ybar sum a_j / y_j`` with ``ybar = sum a_j y_j``."""
    u = np.asarray(u, dtype=float)
    return 2.0 - 1.0 / u - u * am_hm_product(alpha, y)


# ---------------------------------------------------------------------------
# candidates


@dataclass(frozen=True, eq=False)
class LyapunovCandidate:
    """``V(x) = sum_t l_t r_t G(x[i_t]/r_t) + c . x``.

    ``entropy_index`` may repeat an index; the augmented family puts a
    second-equilibrium entropy on invader components that also carry
    linear weights.
    """

    model: MultiStrainModel
    equilibrium: FaceEquilibrium
    entropy_index: np.ndarray
    entropy_ref: np.ndarray
    entropy_weight: np.ndarray
    linear_weight: np.ndarray
    delta: float = 0.0
    flagged: bool = False

    @property
    def resident_index(self) -> np.ndarray:
        n = self.n_resident
        return self.entropy_index[:n]

    @property
    def n_resident(self) -> int:
        return 1 + sum(self.model.strains[j].size for j in self.equilibrium.present)

    def clamp_floor(self) -> np.ndarray:
        floor = np.zeros(self.model.dim)
        np.maximum.at(floor, self.entropy_index, CLAMP * self.entropy_ref)
        return floor

    def _ratios(self, x):
        z = x[..., self.entropy_index]
        if np.any(~(z > 0)):
            raise LyapunovDomainError("resident component is zero; entropy term undefined")
        return z / self.entropy_ref

    def V(self, state):
        x = np.asarray(state, dtype=float)
        u = self._ratios(x)
        out = np.sum(self.entropy_weight * self.entropy_ref * (u - 1.0 - np.log(u)), axis=-1)
        out = out + x @ self.linear_weight
        return out if np.ndim(out) else float(out)

    def vdot(self, state, rhs=None):
        x = np.asarray(state, dtype=float)
        u = self._ratios(x)
        f = vector_field(self.model, x) if rhs is None else rhs
        fe = f[..., self.entropy_index]
        out = np.sum(self.entropy_weight * (1.0 - 1.0 / u) * fe, axis=-1) + f @ self.linear_weight
        return out if np.ndim(out) else float(out)

    def gradient(self, state):
        x = np.asarray(state, dtype=float)
        u = self._ratios(x)
        g = np.broadcast_to(self.linear_weight, x.shape).copy()
        contrib = self.entropy_weight * (1.0 - 1.0 / u)
        for t, k in enumerate(self.entropy_index):
            g[..., k] += contrib[..., t]
        return g

    def describe(self) -> dict:
        names = self.model.species_names()
        return {
            "equilibrium": self.equilibrium.label,
            "delta": self.delta,
            "entropy": [
                {"species": names[int(k)], "ref": float(r), "weight": float(w)}
                for k, r, w in zip(self.entropy_index, self.entropy_ref, self.entropy_weight)
            ],
            "linear": {names[k]: float(c) for k, c in enumerate(self.linear_weight) if c != 0.0},
            "flagged_near_threshold": self.flagged,
        }


def _resident_terms(model: MultiStrainModel, E: FaceEquilibrium):
    idx, ref, wt = [0], [E.s], [1.0]
    for j in E.present:
        st = model.strains[j]
        sl = model.slice(j)
        if isinstance(st, ScalarStrain):
            idx.append(sl.start)
            ref.append(E.state[sl.start])
            wt.append(1.0)
        else:
            R = st.slope
            for k in range(st.size):
                idx.append(sl.start + k)
                ref.append(E.state[sl.start + k])
                wt.append(st.ell[k] / (R * st.vdiag[k]))
    return idx, ref, wt


def build_candidate(model: MultiStrainModel, E: FaceEquilibrium | None = None, delta: float = 0.0,
                    partner: FaceEquilibrium | None = None) -> LyapunovCandidate:
    """Standard Perron-Volterra candidate at ``E`` (overall scale 1).

    With ``delta > 0`` and a single resident block, the entropy of the
    invading block's own boundary equilibrium (``partner``, computed when
    omitted) is added with weights ``delta l_k w_k / (v_k R)``.
    """
    if E is None:
        E = face_equilibrium(model, ())
    if not E.exists:
        raise ValueError(f"{E.label} does not exist")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    idx, ref, wt = _resident_terms(model, E)
    lin = np.zeros(model.dim)
    block_resident = any(isinstance(model.strains[j], RankOneBlock) for j in E.present)
    for j in sorted(E.absent(model.n_strains)):
        st = model.strains[j]
        sl = model.slice(j)
        if isinstance(st, ScalarStrain):
            lin[sl.start] = st.slope * E.s if block_resident else 1.0
        else:
            lin[sl] = st.ell / st.vdiag / st.slope
    if delta > 0:
        invaders = [j for j in sorted(E.absent(model.n_strains)) if isinstance(model.strains[j], RankOneBlock)]
        if len(invaders) != 1:
            raise ValueError("augmented candidate needs exactly one invading rank-one block")
        j = invaders[0]
        st = model.strains[j]
        if partner is None:
            partner = face_equilibrium(model, (j,))
        if not partner.exists:
            raise ValueError(f"augmented candidate: {partner.label} does not exist")
        sl = model.slice(j)
        for k in range(st.size):
            idx.append(sl.start + k)
            ref.append(partner.state[sl.start + k])
            wt.append(delta * st.ell[k] * st.w[k] / (st.vdiag[k] * st.slope))
    return LyapunovCandidate(
        model=model,
        equilibrium=E,
        entropy_index=np.array(idx, dtype=int),
        entropy_ref=np.array(ref, dtype=float),
        entropy_weight=np.array(wt, dtype=float),
        linear_weight=lin,
        delta=float(delta),
        flagged=E.near_nonhyperbolic,
    )


# ---------------------------------------------------------------------------
# two-block decomposition


def _two_block_roles(cand: LyapunovCandidate):
    model, E = cand.model, cand.equilibrium
    if model.n_strains != 2 or not all(isinstance(st, RankOneBlock) for st in model.strains):
        return None
    if len(E.present) != 1:
        return None
    a = E.present[0]
    return a, 1 - a


def two_block_terms(cand: LyapunovCandidate, state) -> dict | None:
    """``T1..T4`` at a resident-block equilibrium of a two-block model.

    ``closure`` is ``Vdot - (T1 + T2 + T3 + T4)``; the standard candidate
    only (``delta = 0``).  Returns ``None`` when the decomposition does not
    apply.
    """
    roles = _two_block_roles(cand)
    if roles is None or cand.delta != 0:
        return None
    ja, jb = roles
    model, E = cand.model, cand.equilibrium
    A, B = model.strains[ja], model.strains[jb]
    x = np.asarray(state, dtype=float)
    sa, sb = model.slice(ja), model.slice(jb)
    s = x[..., 0]
    xs = E.state[sa]
    s_A = E.s
    xi = model.Lambda - model.mu * s_A
    u = s / s_A
    y = x[..., sa] / xs
    alpha = A.ell * A.w / A.vdiag / A.slope
    ybar = y @ alpha
    z = x[..., sb]
    phi_B = z @ B.ell
    T1 = -model.mu * s_A * (u - 1.0) ** 2 / u
    T2 = xi * ((1.0 - 1.0 / u) * (1.0 - u * ybar)
               + np.sum(alpha * (1.0 - 1.0 / y) * (u[..., None] * ybar[..., None] - y), axis=-1))
    cB = B.ell / B.vdiag / B.slope
    T3 = (s_A * B.slope - 1.0) * ((z * B.vdiag) @ cB)
    T4 = s * phi_B * (np.sum(alpha / y, axis=-1) - 1.0)
    closure = cand.vdot(x) - (T1 + T2 + T3 + T4)
    return {"T1": T1, "T2": T2, "T3": T3, "T4": T4, "closure": closure}


# ---------------------------------------------------------------------------
# sampled verification


def _worker_count(workers):
    if workers is None:
        workers = int(os.environ.get("CEPP_THREADS", "1") or 1)
    return max(1, int(workers))


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chunk)])))


def _sample_chunk(model, E, region, seed, chunk, n, boundary_fraction):
    rng = _chunk_rng(seed, chunk)
    x = region.sample(rng, n)
    nb = int(round(boundary_fraction * n))
    if nb and E is not None and E.exists:
        res = [0] + [k for j in E.present for k in model.indices(j)]
        ref = E.state[res]
        x[:nb, res] = ref * BOUNDARY_OFFSET * (1.0 - rng.random((nb, len(res))))
    return x


def sample_states(model: MultiStrainModel, E: FaceEquilibrium | None, n: int, seed: int, region=None,
                  boundary_fraction: float = BOUNDARY_FRACTION) -> np.ndarray:
    """Deterministic samples: uniform over ``region`` plus boundary-biased rows.

    In every chunk of :data:`CHUNK` rows the leading ``boundary_fraction``
    rows have ``E``'s resident components set to ``ref * (0, 1e-3]``.
    """
    region = region if region is not None else invariant_region(model)
    out = []
    for c, start in enumerate(range(0, n, CHUNK)):
        out.append(_sample_chunk(model, E, region, seed, c, min(CHUNK, n - start), boundary_fraction))
    return np.concatenate(out) if out else np.zeros((0, model.dim))


@dataclass(frozen=True, eq=False)
class VdotReport:
    sample_count: int
    max_vdot: float
    argmax: np.ndarray
    violation_count: int
    seed: int
    tol: float = VIOLATION_TOL
    clamped_count: int = 0
    terms_at_argmax: dict | None = None
    violations: np.ndarray = field(default_factory=lambda: np.zeros((0,)))

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "max_vdot": self.max_vdot,
            "argmax": self.argmax.tolist(),
            "violation_count": self.violation_count,
            "seed": self.seed,
            "tol": self.tol,
            "clamped_count": self.clamped_count,
            "clamp": f"entropy components clamped to >= {CLAMP} * reference",
            "terms_at_argmax": self.terms_at_argmax,
        }


def _eval_chunk(args):
    cand, region, seed, c, n, bfrac, keep = args
    x = _sample_chunk(cand.model, cand.equilibrium, region, seed, c, n, bfrac)
    floor = cand.clamp_floor()
    clamped = int(np.any(x < floor, axis=1).sum())
    x = np.maximum(x, floor)
    vd = cand.vdot(x)
    vals = np.column_stack([cand.V(x), vd]) if keep else None
    k = int(np.argmax(vd))
    viol = np.flatnonzero(vd > VIOLATION_TOL)
    return float(vd[k]), x[k], len(viol), clamped, viol, x if keep else None, vals


def verify_nonpositivity(cand: LyapunovCandidate, n: int = 100_000, seed: int = 0, region=None,
                         boundary_fraction: float = BOUNDARY_FRACTION, workers=None,
                         keep_samples: bool = False):
    """Sample ``Vdot`` and count values above :data:`VIOLATION_TOL`.

    Chunks are keyed by index so the result does not depend on worker
    count.  With ``keep_samples`` the states and ``(V, Vdot)`` values are
    returned alongside the report.
    """
    region = region if region is not None else invariant_region(cand.model)
    jobs = [
        (cand, region, seed, c, min(CHUNK, n - start), boundary_fraction, keep_samples)
        for c, start in enumerate(range(0, n, CHUNK))
    ]
    workers = _worker_count(workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_eval_chunk, jobs))
    else:
        results = [_eval_chunk(j) for j in jobs]
    best, arg, nviol, nclamp = -np.inf, None, 0, 0
    viol_idx = []
    for c, (mx, xa, nv, ncl, vi, _, _) in enumerate(results):
        if mx > best:
            best, arg = mx, xa
        nviol += nv
        nclamp += ncl
        viol_idx.append(vi + c * CHUNK)
    terms = two_block_terms(cand, arg) if arg is not None else None
    if terms is not None:
        terms = {k: float(v) for k, v in terms.items()}
    report = VdotReport(
        sample_count=n,
        max_vdot=float(best),
        argmax=np.asarray(arg),
        violation_count=nviol,
        seed=int(seed),
        clamped_count=nclamp,
        terms_at_argmax=terms,
        violations=np.concatenate(viol_idx) if viol_idx else np.zeros(0, dtype=int),
    )
    if not keep_samples:
        return report
    X = np.concatenate([r[5] for r in results])
    vals = np.concatenate([r[6] for r in results])
    return report, X, vals


# ---------------------------------------------------------------------------
# reduced slice


@dataclass(frozen=True, eq=False)
class ReducedTable:
    y1: np.ndarray
    ztilde: np.ndarray
    vdot: np.ndarray

    @property
    def sign(self) -> np.ndarray:
        return np.sign(np.where(np.abs(self.vdot) <= VIOLATION_TOL, 0.0, self.vdot)).astype(int)

    def positive(self) -> list:
        return [(float(self.y1[a]), float(self.ztilde[b])) for a, b in zip(*np.nonzero(self.vdot > VIOLATION_TOL))]


def reduced_test(model: MultiStrainModel, cand: LyapunovCandidate, y1_grid, ztilde_grid) -> ReducedTable:
    """Full ``Vdot`` on ``{s = s_A, x2 = x2*, x1 = y1 x1*, z1 = z2 = z~}``."""
    roles = _two_block_roles(cand)
    if roles is None:
        raise ValueError("reduced test needs a two-block model and a single-block resident face")
    ja, jb = roles
    sa, sb = model.slice(ja), model.slice(jb)
    if sa.stop - sa.start != 2:
        raise ValueError("reduced test needs a 2-component resident block")
    E = cand.equilibrium
    y1 = np.asarray(y1_grid, dtype=float)
    zt = np.asarray(ztilde_grid, dtype=float)
    Y, Z = np.meshgrid(y1, zt, indexing="ij")
    x = np.broadcast_to(E.state, Y.shape + (model.dim,)).copy()
    x[..., sa.start] = Y * E.state[sa.start]
    x[..., sb] = Z[..., None]
    floor = cand.clamp_floor()
    x = np.maximum(x, floor)
    return ReducedTable(y1, zt, cand.vdot(x))


# ---------------------------------------------------------------------------
# alignment diagnostic and local certificate


def transversal_left_weights(model: MultiStrainModel, E: FaceEquilibrium) -> np.ndarray:
    """Concatenated left Perron vectors of the transversal blocks (full dim).

    Each block's vector is positive on its irreducible block; using one per
    block keeps the invader functional strictly positive when the
    transversal Jacobian is reducible across strains.
    """
    TJ = transversal_jacobian(model, E)
    ell = np.zeros(model.dim)
    for j, blk in zip(TJ.absent, TJ.blocks):
        ell[model.slice(j)] = perron_vectors(blk, "left").vector
    return ell


def _production(st, s):
    if isinstance(st, ScalarStrain):
        return np.array([[st.beta * s]])
    return st.production(s)


@dataclass(frozen=True)
class AlignmentReport:
    numerical_rank: int
    aligned: bool
    singular_values: tuple
    rows: int


def perron_alignment(model: MultiStrainModel, E: FaceEquilibrium, y_samples=None, n: int = 200,
                     seed: int = 0) -> AlignmentReport:
    """Rank of the rows ``l^T A(y)`` over resident states ``y``.

    ``A(y)`` is the transversal production matrix (block diagonal over the
    absent strains) and ``l`` the transversal left Perron weights at ``E``.
    ``y_samples`` are full states; only resident components matter.
    """
    absent = sorted(E.absent(model.n_strains))
    if not absent:
        return AlignmentReport(0, True, (), 0)
    ell_full = transversal_left_weights(model, E)
    idx = [k for j in absent for k in model.indices(j)]
    ell = ell_full[idx]
    if y_samples is None:
        y_samples = sample_states(model, E, n, seed, boundary_fraction=0.0)
    rows = []
    for y in np.atleast_2d(y_samples):
        d = len(idx)
        A = np.zeros((d, d))
        k = 0
        for j in absent:
            st = model.strains[j]
            A[k:k + st.size, k:k + st.size] = _production(st, float(y[0]))
            k += st.size
        rows.append(ell @ A)
    R = np.array(rows)
    sv = np.linalg.svd(R, compute_uv=False)
    rank = numerical_rank(R, rtol=ALIGN_RTOL)
    return AlignmentReport(rank, rank <= 1, tuple(float(v) for v in sv), len(rows))


@dataclass(frozen=True)
class LocalCertificate:
    best_lambda: float | None
    results: tuple
    radius: float
    samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "best_lambda": self.best_lambda,
            "radius": self.radius,
            "samples": self.samples,
            "seed": self.seed,
            "grid": [{"lambda": lam, "violations": nv, "max_vdot": mx} for lam, nv, mx in self.results],
        }


def local_certificate(model: MultiStrainModel, E: FaceEquilibrium, lambda_grid=DEFAULT_LAMBDA_GRID,
                      radius: float = 1e-2, samples: int = 2000, seed: int = 0) -> LocalCertificate:
    """Search ``lambda`` for ``L = lambda H + l^T x`` with ``Ldot < 0`` near ``E``.

    ``H`` is the resident entropy of the standard candidate and ``l`` the
    transversal left Perron weights.  Samples lie in the shell
    ``0.05 r <= |x - E| <= r``, reflected into the orthant.
    """
    if not E.exists:
        raise ValueError(f"{E.label} does not exist")
    TJ = transversal_jacobian(model, E)
    if TJ.abscissae and not TJ.hurwitz:
        raise LocalCertificateError("invader not excluded; local certificate inapplicable")
    idx, ref, wt = _resident_terms(model, E)
    idx = np.array(idx)
    ref = np.array(ref)
    wt = np.array(wt)
    ell = transversal_left_weights(model, E)
    rng = _chunk_rng(seed, 0)
    d = rng.standard_normal((samples, model.dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * (0.05 + 0.95 * rng.random(samples))
    x = np.abs(E.state + r[:, None] * d)
    x[:, idx] = np.maximum(x[:, idx], CLAMP * ref)
    f = vector_field(model, x)
    u = x[:, idx] / ref
    Hdot = np.sum(wt * (1.0 - 1.0 / u) * f[:, idx], axis=1)
    Ldot_lin = f @ ell
    results = []
    best = None
    for lam in sorted(lambda_grid, reverse=True):
        Ld = lam * Hdot + Ldot_lin
        nv = int(np.sum(Ld >= 0.0))
        results.append((float(lam), nv, float(Ld.max())))
        if nv == 0 and best is None:
            best = float(lam)
    return LocalCertificate(best, tuple(results), radius, samples, seed)
