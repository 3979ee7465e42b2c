"""Small dense kernels for Metzler matrices.

Everything here works on matrices of dimension at most a few dozen: the
transversal Jacobians and next-generation matrices of strain blocks.  The
Perron data are obtained from the irreducible diagonal blocks of the
Frobenius normal form by shifted power iteration, with a dense eigensolve as
fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "MetzlerMatrix",
    "FrobeniusForm",
    "RegularSplitting",
    "NgmData",
    "PerronVector",
    "ConvergenceError",
    "NotMetzlerError",
    "SplittingError",
    "frobenius_normal_form",
    "spectral_abscissa",
    "perron_vectors",
    "ngm",
    "numerical_rank",
]

TIE_TOL = 1e-10
POWER_MAXITER = 10_000
POWER_RQ_TOL = 1e-13
DENSE_FALLBACK_DIM = 8


class NotMetzlerError(ValueError):
    pass


class SplittingError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


class MetzlerMatrix:
    """Square real matrix with nonnegative off-diagonal entries.

    Construction fails with :class:`NotMetzlerError` when an off-diagonal
    entry is negative.  The underlying array is read-only.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = _frozen(entries)
        if a.ndim == 0:
            a = _frozen(a.reshape(1, 1))
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
        off = a[~np.eye(a.shape[0], dtype=bool)]
        if off.size and off.min() < 0:
            i, j = np.argwhere((a < 0) & ~np.eye(a.shape[0], dtype=bool))[0]
            raise NotMetzlerError(
                f"entry ({i}, {j}) = {a[i, j]!r} is negative off the diagonal"
            )
        self._a = a

    @property
    def entries(self) -> np.ndarray:
        return self._a

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._a
        return self._a.astype(dtype)

    def __repr__(self):
        return f"MetzlerMatrix({self._a.tolist()!r})"

    def shifted(self, c: float) -> "MetzlerMatrix":
        return MetzlerMatrix(self._a + c * np.eye(self.dim))


def _as_metzler(M) -> MetzlerMatrix:
    return M if isinstance(M, MetzlerMatrix) else MetzlerMatrix(M)


@dataclass(frozen=True)
class FrobeniusForm:
    """Permutation to block upper-triangular form with irreducible blocks.

    ``permutation[k]`` is the original index placed at position ``k``, so
    ``M[np.ix_(permutation, permutation)]`` is block upper triangular and
    its diagonal blocks are ``block_matrices`` in order.
    """

    permutation: tuple
    blocks: tuple
    block_matrices: tuple
    abscissa_per_block: tuple
    orientation: str = "upper"

    @property
    def abscissa(self) -> float:
        return max(self.abscissa_per_block)

    def permuted(self, M) -> np.ndarray:
        a = np.asarray(M, dtype=float)
        p = list(self.permutation)
        return a[np.ix_(p, p)]


@dataclass(frozen=True)
class RegularSplitting:
    F: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        F = _frozen(self.F)
        V = _frozen(self.V)
        if F.shape != V.shape or F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise SplittingError("F and V must be square matrices of equal shape")
        if F.min() < 0:
            raise SplittingError("not a regular splitting: F has a negative entry")
        try:
            Vinv = np.linalg.inv(V)
        except np.linalg.LinAlgError as exc:
            raise SplittingError("V is singular") from exc
        if not np.all(np.isfinite(Vinv)) or np.linalg.cond(V) > 1e14:
            raise SplittingError("V is singular")
        if Vinv.min() < -1e-14 * max(1.0, np.abs(Vinv).max()):
            raise SplittingError("not a regular splitting: V^-1 has a negative entry")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "_Vinv", _frozen(np.clip(Vinv, 0.0, None)))

    @property
    def V_inverse(self) -> np.ndarray:
        return self._Vinv

    @property
    def source(self) -> np.ndarray:
        return self.F - self.V


@dataclass(frozen=True)
class PerronVector:
    """Dominant eigenpair of a Metzler matrix with a nonnegative vector.

    ``degenerate`` is set when two irreducible blocks share the spectral
    abscissa within :data:`TIE_TOL`; ``candidates`` then holds one vector
    per tied block and ``vector`` is the first of them.
    """

    value: float
    vector: np.ndarray
    side: str
    degenerate: bool = False
    candidates: tuple = ()
    support: tuple = ()


@dataclass(frozen=True)
class NgmData:
    K: np.ndarray
    rho: float
    left_perron: np.ndarray
    right_perron: np.ndarray
    rank: int
    degenerate: bool = False

    @property
    def rank_one(self) -> bool:
        return self.rank == 1


# ---------------------------------------------------------------------------
# structure


def _strong_components(a: np.ndarray):
    n = a.shape[0]
    # edge j -> i iff a[i, j] != 0, i.e. the adjacency is a^T off the diagonal
    adj = (a != 0) & ~np.eye(n, dtype=bool)
    if n == 1 or adj.sum() == n * (n - 1):
        return 1, np.zeros(n, dtype=np.int32), adj
    ncomp, labels = connected_components(adj.T.astype(np.int8), directed=True, connection="strong")
    return ncomp, labels, adj


def frobenius_normal_form(M) -> FrobeniusForm:
    """Strongly connected decomposition ordered to give an upper block form.

    An entry ``M[i, j] != 0`` (``i != j``) couples column ``j`` into row
    ``i``.  Blocks are ordered so that every such coupling lies on or above
    the block diagonal.
    """
    M = _as_metzler(M)
    a = M.entries
    ncomp, labels, adj = _strong_components(a)

    # condensation DAG: comp(j) -> comp(i) when a[i, j] != 0
    succ = [set() for _ in range(ncomp)]
    for i, j in zip(*np.nonzero(adj)):
        src, dst = labels[j], labels[i]  # column j feeds row i
        if src != dst:
            succ[src].add(dst)
    # Kahn on the reversed DAG gives sinks-last order; we need targets first
    indeg = [0] * ncomp
    for c in range(ncomp):
        for d in succ[c]:
            indeg[d] += 1
    order = []
    ready = sorted(c for c in range(ncomp) if indeg[c] == 0)
    while ready:
        c = ready.pop(0)
        order.append(c)
        for d in sorted(succ[c]):
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
        ready.sort()
    order.reverse()  # targets of couplings come first -> upper triangular

    blocks = []
    for c in order:
        blocks.append(tuple(int(k) for k in np.flatnonzero(labels == c)))
    permutation = tuple(k for b in blocks for k in b)
    mats = []
    absc = []
    for b in blocks:
        sub = MetzlerMatrix(a[np.ix_(b, b)])
        mats.append(sub)
        absc.append(_irreducible_perron(sub.entries, "right")[0])
    return FrobeniusForm(permutation, tuple(blocks), tuple(mats), tuple(absc))


def is_irreducible(M) -> bool:
    M = _as_metzler(M)
    if M.dim == 1:
        return True
    ncomp, _, _ = _strong_components(M.entries)
    return ncomp == 1


# ---------------------------------------------------------------------------
# spectral data


def _dense_perron(a: np.ndarray, side: str):
    mat = a.T if side == "left" else a
    vals, vecs = np.linalg.eig(mat)
    k = int(np.argmax(vals.real))
    lam = float(vals[k].real)
    v = vecs[:, k].real
    if v.sum() < 0:
        v = -v
    v = np.clip(v, 0.0, None)
    s = v.sum()
    if s <= 0:
        raise ConvergenceError("dense eigensolve returned no nonnegative Perron vector")
    return lam, v / s


def _irreducible_perron(a: np.ndarray, side: str):
    """Perron root and vector (sum 1) of an irreducible Metzler block."""
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0]), np.ones(1)
    shift = float(np.abs(np.diag(a)).max()) + 1.0
    P = (a.T if side == "left" else a) + shift * np.eye(n)
    v = np.full(n, 1.0 / n)
    rq_old = np.inf
    converged = False
    for it in range(1, POWER_MAXITER + 1):
        w = P @ v
        rq = w.sum()  # v sums to one and w >= 0: Collatz-Wielandt estimate
        v = w / rq
        if abs(rq - rq_old) < POWER_RQ_TOL * max(1.0, abs(rq)):
            converged = True
            break
        rq_old = rq
    lam = rq - shift
    mat = P - shift * np.eye(n)
    residual = float(np.abs(mat @ v - lam * v).max())
    scale = max(1.0, float(np.abs(a).max()))
    if converged and residual < 1e-11 * scale:
        return float(lam), v
    if n <= DENSE_FALLBACK_DIM:
        return _dense_perron(a, side)
    raise ConvergenceError(
        f"power iteration did not converge (residual {residual:.3e} after {it} iterations)",
        residual=residual,
        iterations=it,
    )


def spectral_abscissa(M) -> float:
    """Largest real part of the spectrum; a real eigenvalue for Metzler M."""
    return frobenius_normal_form(M).abscissa


def _chain_vector(a, form: FrobeniusForm, j: int, lam: float, side: str):
    """Eigenvector of ``a`` for the Perron root of block ``j``.

    In the upper block form a right eigenvector is supported on blocks that
    precede ``j`` (they receive input from it), a left one on blocks that
    follow.  Each nonsingular block solve ``(lam I - B_k)^{-1}`` is
    entrywise nonnegative, so the assembled vector stays nonnegative.
    """
    n = a.shape[0]
    blocks = form.blocks
    _, u = _irreducible_perron(a[np.ix_(blocks[j], blocks[j])], side)
    vec = np.zeros(n)
    vec[list(blocks[j])] = u
    if side == "right":
        seq = range(j - 1, -1, -1)
    else:
        seq = range(j + 1, len(blocks))
    for k in seq:
        bk = list(blocks[k])
        if form.abscissa_per_block[k] >= lam - TIE_TOL:
            continue
        Bk = a[np.ix_(bk, bk)]
        if side == "right":
            rhs = a[bk, :] @ vec
        else:
            rhs = vec @ a[:, bk]
        if not np.any(rhs):
            continue
        lhs = lam * np.eye(len(bk)) - (Bk if side == "right" else Bk.T)
        sol = np.linalg.solve(lhs, rhs)
        vec[bk] = np.clip(sol, 0.0, None)
    return vec / vec.sum()


def perron_vectors(M, side: str = "right") -> PerronVector:
    """Nonnegative dominant eigenvector (sum 1) on the given side."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    M = _as_metzler(M)
    a = M.entries
    form = frobenius_normal_form(M)
    lam = form.abscissa
    tied = [k for k, x in enumerate(form.abscissa_per_block) if x >= lam - TIE_TOL]
    cands = tuple(_frozen(_chain_vector(a, form, k, lam, side)) for k in tied)
    support = tuple(form.blocks[k] for k in tied)
    return PerronVector(
        value=float(lam),
        vector=cands[0],
        side=side,
        degenerate=len(tied) > 1,
        candidates=cands,
        support=support,
    )


def numerical_rank(a, rtol: float = 1e-12) -> int:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def ngm(F, V) -> NgmData:
    """Next-generation matrix ``K = F V^{-1}`` with its Perron data.

    Raises :class:`SplittingError` when ``(F, V)`` is not a regular
    splitting.
    """
    split = F if isinstance(F, RegularSplitting) else RegularSplitting(F, V)
    K = split.F @ split.V_inverse
    K = np.where(K < 0, 0.0, K)
    if not np.any(K):
        n = K.shape[0]
        u = _frozen(np.full(n, 1.0 / n))
        return NgmData(_frozen(K), 0.0, u, u, 0, degenerate=n > 1)
    right = perron_vectors(K, "right")
    left = perron_vectors(K, "left")
    return NgmData(
        K=_frozen(K),
        rho=max(0.0, right.value),
        left_perron=left.vector,
        right_perron=right.vector,
        rank=numerical_rank(K),
        degenerate=right.degenerate,
    )
