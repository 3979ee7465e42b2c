"""Multi-strain compartmental models.

State layout is fixed: ``s`` first, then every strain's infected block in
declaration order (one component for a scalar strain, ``n`` for a rank-one
block).  All vector-field routines accept a single state of shape ``(d,)``
or a batch of shape ``(N, d)``.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

__all__ = [
    "Incidence",
    "LinearIncidence",
    "MichaelisMenten",
    "TabulatedConcave",
    "ScalarStrain",
    "RankOneBlock",
    "MultiStrainModel",
    "StoichiometricNetwork",
    "ValidationReport",
    "AssumptionCheck",
    "InvariantRegion",
    "ModelValidationError",
    "vector_field",
    "jacobian",
    "validate_assumptions",
    "invariant_region",
    "to_stoichiometric",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "parse_number",
]


class ModelValidationError(ValueError):
    """Raised for malformed model definitions."""


# ---------------------------------------------------------------------------
# incidence functions


class Incidence:
    """Saturating transmission nonlinearity ``f`` with ``g(i) = f(i)/i``.

    Subclasses implement ``f`` and ``df`` on scalars or arrays.
    ``kernel_code`` is the integer understood by :mod:`cepp.kernels`
    (``None`` means only the generic Python solvers apply).
    """

    kind = "abstract"
    kernel_code = None
    kernel_param = 0.0

    def f(self, i):
        raise NotImplementedError

    def df(self, i):
        raise NotImplementedError

    def g(self, i):
        i = np.asarray(i, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(i > 0, self.f(i) / np.where(i > 0, i, 1.0), 1.0)
        return out if out.ndim else float(out)

    @property
    def is_linear(self) -> bool:
        return False

    @property
    def g_strictly_decreasing(self) -> bool:
        return False

    @property
    def g_infimum(self) -> float:
        """``lim_{i -> inf} g(i)``."""
        return 0.0

    def normalized(self, ibar: float) -> Callable:
        """``F(y) = f(ibar * y) / f(ibar)``."""
        fb = float(self.f(ibar))
        return lambda y: self.f(ibar * np.asarray(y, dtype=float)) / fb

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class LinearIncidence(Incidence):
    kind = "linear"
    kernel_code = 0

    def f(self, i):
        return np.asarray(i, dtype=float) * 1.0 if np.ndim(i) else float(i)

    def df(self, i):
        return np.ones_like(np.asarray(i, dtype=float)) if np.ndim(i) else 1.0

    def g(self, i):
        return np.ones_like(np.asarray(i, dtype=float)) if np.ndim(i) else 1.0

    @property
    def is_linear(self) -> bool:
        return True

    @property
    def g_infimum(self) -> float:
        return 1.0


@dataclass(frozen=True)
class MichaelisMenten(Incidence):
    alpha: float = 1.0
    kind = "michaelis_menten"
    kernel_code = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ModelValidationError("michaelis_menten alpha must be positive")

    @property
    def kernel_param(self) -> float:
        return float(self.alpha)

    def f(self, i):
        i = np.asarray(i, dtype=float)
        out = i / (1.0 + self.alpha * i)
        return out if out.ndim else float(out)

    def df(self, i):
        i = np.asarray(i, dtype=float)
        out = 1.0 / (1.0 + self.alpha * i) ** 2
        return out if out.ndim else float(out)

    def g(self, i):
        i = np.asarray(i, dtype=float)
        out = 1.0 / (1.0 + self.alpha * i)
        return out if out.ndim else float(out)

    @property
    def g_strictly_decreasing(self) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class TabulatedConcave(Incidence):
    """Piecewise-linear interpolant of user samples ``(i_k, f_k)``.

    The origin is prepended when missing, values are rescaled so the first
    segment has slope one, and the last segment is extended linearly.
    Samples that are not increasing and concave are rejected.
    """

    points: tuple = ()
    kind = "tabulated"

    def __post_init__(self):
        pts = sorted((float(a), float(b)) for a, b in self.points)
        if not pts or pts[0][0] != 0.0:
            pts.insert(0, (0.0, 0.0))
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if len(xs) < 2 or np.any(np.diff(xs) <= 0):
            raise ModelValidationError("tabulated incidence needs distinct sample abscissae")
        if ys[0] != 0.0:
            raise ModelValidationError("tabulated incidence must satisfy f(0) = 0")
        slopes = np.diff(ys) / np.diff(xs)
        if np.any(slopes < 0):
            k = int(np.argmax(slopes < 0))
            raise ModelValidationError(f"tabulated incidence decreases on [{xs[k]}, {xs[k + 1]}]")
        if slopes[0] <= 0:
            raise ModelValidationError("tabulated incidence must have positive initial slope")
        if np.any(np.diff(slopes) > 1e-12 * max(1.0, slopes[0])):
            k = int(np.argmax(np.diff(slopes) > 1e-12 * max(1.0, slopes[0])))
            raise ModelValidationError(
                f"tabulated incidence is not concave at i = {xs[k + 1]} (second difference > 0)"
            )
        ys = ys / slopes[0]
        object.__setattr__(self, "points", tuple(zip(xs.tolist(), ys.tolist())))
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_slopes", slopes / slopes[0])

    def f(self, i):
        i = np.asarray(i, dtype=float)
        xs, ys, sl = self._xs, self._ys, self._slopes
        out = np.interp(i, xs, ys)
        out = np.where(i > xs[-1], ys[-1] + sl[-1] * (i - xs[-1]), out)
        return out if out.ndim else float(out)

    def df(self, i):
        i = np.asarray(i, dtype=float)
        k = np.clip(np.searchsorted(self._xs, i, side="right") - 1, 0, len(self._slopes) - 1)
        out = self._slopes[k]
        return out if np.ndim(out) else float(out)

    @property
    def is_linear(self) -> bool:
        return bool(np.all(np.abs(self._slopes - 1.0) < 1e-15))

    @property
    def g_infimum(self) -> float:
        return float(self._slopes[-1])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "points": [list(p) for p in self.points]}


# ---------------------------------------------------------------------------
# strains and models


@dataclass(frozen=True)
class ScalarStrain:
    beta: float
    v: float
    incidence: Incidence = field(default_factory=LinearIncidence)

    def __post_init__(self):
        if not (self.beta > 0 and self.v > 0):
            raise ModelValidationError("scalar strain rates beta and v must be positive")

    size = 1

    @property
    def slope(self) -> float:
        """Reproduction slope ``beta / v``."""
        return self.beta / self.v

    @property
    def removal_rates(self) -> tuple:
        return (self.v,)

    def to_dict(self) -> dict:
        return {"type": "scalar", "beta": self.beta, "v": self.v, "incidence": self.incidence.to_dict()}


def _positive_vector(name, values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0 or np.any(~(arr > 0)):
        raise ModelValidationError(f"{name} must be a nonempty vector of positive entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RankOneBlock:
    """Irreducible rank-one block ``z' = (s w l^T - V) z``."""

    w: np.ndarray
    ell: np.ndarray
    vdiag: np.ndarray

    def __post_init__(self):
        w = _positive_vector("w", self.w)
        ell = _positive_vector("ell", self.ell)
        vd = _positive_vector("vdiag", self.vdiag)
        if not (w.size == ell.size == vd.size):
            raise ModelValidationError("w, ell and vdiag must have equal length")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ModelValidationError(f"w must sum to 1 (got {w.sum()!r})")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "vdiag", vd)

    @property
    def size(self) -> int:
        return int(self.w.size)

    @property
    def slope(self) -> float:
        """``l^T V^{-1} w``."""
        return float(self.ell @ (self.w / self.vdiag))

    @property
    def removal_rates(self) -> tuple:
        return tuple(self.vdiag.tolist())

    @property
    def V(self) -> np.ndarray:
        return np.diag(self.vdiag)

    def production(self, s: float) -> np.ndarray:
        return s * np.outer(self.w, self.ell)

    def to_dict(self) -> dict:
        return {"type": "rank1", "w": self.w.tolist(), "ell": self.ell.tolist(), "vdiag": self.vdiag.tolist()}

    def __eq__(self, other):
        return (
            isinstance(other, RankOneBlock)
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.ell, other.ell)
            and np.array_equal(self.vdiag, other.vdiag)
        )

    def __hash__(self):
        return hash((tuple(self.w), tuple(self.ell), tuple(self.vdiag)))


@dataclass(frozen=True)
class MultiStrainModel:
    Lambda: float
    mu: float
    strains: tuple = ()

    def __post_init__(self):
        if not (self.Lambda > 0 and self.mu > 0):
            raise ModelValidationError("Lambda and mu must be positive")
        object.__setattr__(self, "strains", tuple(self.strains))
        offsets = []
        k = 1
        for st in self.strains:
            if not isinstance(st, (ScalarStrain, RankOneBlock)):
                raise ModelValidationError(f"unsupported strain {st!r}")
            offsets.append(k)
            k += st.size
        object.__setattr__(self, "_offsets", tuple(offsets))
        object.__setattr__(self, "_dim", k)

    @property
    def n_strains(self) -> int:
        return len(self.strains)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def s0(self) -> float:
        return self.Lambda / self.mu

    def slice(self, j: int) -> slice:
        a = self._offsets[j]
        return slice(a, a + self.strains[j].size)

    def indices(self, j: int) -> list:
        sl = self.slice(j)
        return list(range(sl.start, sl.stop))

    @property
    def a2_holds(self) -> bool:
        rates = [r for st in self.strains for r in st.removal_rates]
        return not rates or self.mu <= min(rates)

    def slopes(self) -> np.ndarray:
        return np.array([st.slope for st in self.strains])

    def species_names(self) -> list:
        names = ["s"]
        for j, st in enumerate(self.strains, start=1):
            if isinstance(st, ScalarStrain):
                names.append(f"i{j}")
            else:
                names.extend(f"z{j}_{k}" for k in range(1, st.size + 1))
        return names

    def state(self, s: float, *infected) -> np.ndarray:
        """Assemble a state vector; missing strains default to zero."""
        x = np.zeros(self.dim)
        x[0] = s
        for j, val in enumerate(infected):
            x[self.slice(j)] = val
        return x

    def with_param(self, name: str, value: float) -> "MultiStrainModel":
        """Copy with one named parameter replaced.

        Names: ``lambda``, ``mu``, ``beta<j>``, ``v<j>``, ``alpha<j>`` for
        scalar strains and ``w<j>_<k>``, ``ell<j>_<k>``, ``vdiag<j>_<k>`` for
        blocks (1-based).
        """
        value = float(value)
        if name in ("lambda", "Lambda"):
            return replace(self, Lambda=value)
        if name == "mu":
            return replace(self, mu=value)
        m = re.fullmatch(r"(beta|v|alpha)(\d+)", name)
        if m:
            j = int(m.group(2)) - 1
            st = self._strain(j, ScalarStrain, name)
            if m.group(1) == "alpha":
                if not isinstance(st.incidence, MichaelisMenten):
                    raise ModelValidationError(f"{name}: strain {j + 1} is not Michaelis-Menten")
                st = replace(st, incidence=MichaelisMenten(value))
            else:
                st = replace(st, **{m.group(1): value})
            return self._with_strain(j, st)
        m = re.fullmatch(r"(w|ell|vdiag)(\d+)_(\d+)", name)
        if m:
            j, k = int(m.group(2)) - 1, int(m.group(3)) - 1
            st = self._strain(j, RankOneBlock, name)
            arr = np.array(getattr(st, m.group(1)))
            arr[k] = value
            return self._with_strain(j, replace(st, **{m.group(1): arr}))
        raise ModelValidationError(f"unknown parameter name {name!r}")

    def _strain(self, j, cls, name):
        if not 0 <= j < self.n_strains or not isinstance(self.strains[j], cls):
            raise ModelValidationError(f"{name}: no {cls.__name__} at strain {j + 1}")
        return self.strains[j]

    def _with_strain(self, j, st):
        strains = list(self.strains)
        strains[j] = st
        return replace(self, strains=tuple(strains))


# ---------------------------------------------------------------------------
# vector field


def vector_field(model: MultiStrainModel, state) -> np.ndarray:
    x = np.asarray(state, dtype=float)
    s = x[..., 0]
    out = np.empty_like(x)
    ds = model.Lambda - model.mu * s
    for j, st in enumerate(model.strains):
        sl = model.slice(j)
        if isinstance(st, ScalarStrain):
            i = x[..., sl.start]
            inc = st.beta * s * st.incidence.f(i)
            ds = ds - inc
            out[..., sl.start] = inc - st.v * i
        else:
            z = x[..., sl]
            phi = z @ st.ell
            ds = ds - s * phi
            out[..., sl] = (s * phi)[..., None] * st.w - z * st.vdiag
    out[..., 0] = ds
    return out


def jacobian(model: MultiStrainModel, state) -> np.ndarray:
    x = np.asarray(state, dtype=float)
    d = model.dim
    J = np.zeros((d, d))
    s = x[0]
    J[0, 0] = -model.mu
    for j, st in enumerate(model.strains):
        sl = model.slice(j)
        if isinstance(st, ScalarStrain):
            k = sl.start
            i = x[k]
            fi = st.incidence.f(i)
            dfi = st.incidence.df(i)
            J[0, 0] -= st.beta * fi
            J[0, k] = -st.beta * s * dfi
            J[k, 0] = st.beta * fi
            J[k, k] = st.beta * s * dfi - st.v
        else:
            z = x[sl]
            phi = float(z @ st.ell)
            J[0, 0] -= phi
            J[0, sl] = -s * st.ell
            J[sl, 0] = st.w * phi
            J[sl, sl] = s * np.outer(st.w, st.ell) - np.diag(st.vdiag)
    return J


# ---------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    strain: int | None
    passed: bool
    witness: float | None = None
    note: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str, strain: int | None = None) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name and c.strain == strain:
                return c
        raise KeyError((name, strain))


def _check_incidence(inc: Incidence, j: int, upper: float) -> list:
    grid = np.logspace(math.log10(upper) - 6, math.log10(upper), 200)
    f = np.asarray(inc.f(grid), dtype=float)
    checks = []

    # (A1)
    h = 1e-7
    f0 = float(inc.f(0.0))
    slope0 = (float(inc.f(h)) - f0) / h
    a1 = abs(f0) == 0.0 and abs(slope0 - 1.0) < 1e-5 and bool(np.all(f > 0))
    wit = None
    note = ""
    if abs(f0) != 0.0:
        wit, note = 0.0, f"f(0) = {f0}"
    elif abs(slope0 - 1.0) >= 1e-5:
        wit, note = 0.0, f"forward-difference f'(0) = {slope0:.6g}"
    elif not np.all(f > 0):
        wit = float(grid[np.argmax(~(f > 0))])
        note = "f not positive"
    checks.append(AssumptionCheck("A1", j, a1, wit, note))

    # (A3)
    bad = f > grid * (1 + 1e-12)
    checks.append(
        AssumptionCheck("A3", j, not bad.any(), float(grid[np.argmax(bad)]) if bad.any() else None)
    )

    # (A4): increasing, and secant slopes nonincreasing
    df = np.diff(f)
    sec = df / np.diff(grid)
    inc_bad = df <= 0
    cc_bad = np.diff(sec) > 1e-9 * np.maximum(1.0, np.abs(sec[:-1]))
    wit = None
    note = ""
    if inc_bad.any():
        wit, note = float(grid[np.argmax(inc_bad)]), "not increasing"
    elif cc_bad.any():
        wit, note = float(grid[np.argmax(cc_bad) + 1]), "not concave"
    checks.append(AssumptionCheck("A4", j, not (inc_bad.any() or cc_bad.any()), wit, note))

    # g nonincreasing (strictly unless linear)
    g = np.asarray(inc.g(grid), dtype=float)
    dg = np.diff(g)
    g_bad = dg > 1e-12
    if inc.is_linear:
        note = "linear case: g == 1"
    elif np.any(dg >= 0):
        note = "g not strictly decreasing on the grid"
    else:
        note = "g strictly decreasing"
    checks.append(
        AssumptionCheck("g_monotone", j, not g_bad.any(), float(grid[np.argmax(g_bad)]) if g_bad.any() else None, note)
    )
    return checks


def validate_assumptions(model: MultiStrainModel) -> ValidationReport:
    checks = []
    rates = [r for st in model.strains for r in st.removal_rates]
    checks.append(
        AssumptionCheck(
            "A2",
            None,
            model.a2_holds,
            min(rates) if rates and not model.a2_holds else None,
            f"mu = {model.mu}, min removal = {min(rates) if rates else None}",
        )
    )
    upper = 10.0 * model.s0
    for j, st in enumerate(model.strains):
        if isinstance(st, ScalarStrain):
            checks.extend(_check_incidence(st.incidence, j, upper))
    return ValidationReport(tuple(checks))


# ---------------------------------------------------------------------------
# invariant region


@dataclass(frozen=True)
class InvariantRegion:
    """``{x >= 0 : sum(x) <= bound}`` or, when (A2) fails, a user box."""

    bound: float
    dim: int
    guaranteed: bool = True
    box: tuple | None = None

    def contains(self, state, tol: float = 0.0):
        x = np.asarray(state, dtype=float)
        if self.box is not None and not self.guaranteed:
            lo, hi = (np.asarray(b, dtype=float) for b in self.box)
            return np.all((x >= lo - tol) & (x <= hi + tol), axis=-1)
        return np.all(x >= -tol, axis=-1) & (x.sum(axis=-1) <= self.bound + tol)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.box is not None and not self.guaranteed:
            lo, hi = (np.asarray(b, dtype=float) for b in self.box)
            return lo + (hi - lo) * rng.random((n, self.dim))
        e = rng.standard_exponential((n, self.dim + 1))
        return self.bound * e[:, :-1] / e.sum(axis=1, keepdims=True)


def invariant_region(model: MultiStrainModel, box=None) -> InvariantRegion:
    if not model.a2_holds:
        warnings.warn("(A2) violated: the explicit invariant region is not guaranteed", stacklevel=2)
        if box is None:
            raise ModelValidationError("(A2) violated: a sampling box must be supplied")
        lo, hi = box
        box = (tuple(np.broadcast_to(lo, model.dim).tolist()), tuple(np.broadcast_to(hi, model.dim).tolist()))
        return InvariantRegion(model.s0, model.dim, guaranteed=False, box=box)
    return InvariantRegion(model.s0, model.dim)


# ---------------------------------------------------------------------------
# stoichiometric representation


@dataclass(frozen=True, eq=False)
class StoichiometricNetwork:
    species: tuple
    Gamma: np.ndarray
    supports: tuple
    labels: tuple = ()
    rate_fns: tuple = ()

    @property
    def n_reactions(self) -> int:
        return self.Gamma.shape[1]

    def producers(self, i: int) -> list:
        return [r for r in range(self.n_reactions) if self.Gamma[i, r] > 0]

    def chemical_condition(self) -> bool:
        for i, r in zip(*np.nonzero(self.Gamma < 0)):
            if i not in self.supports[r]:
                return False
        return True

    def rates(self, state) -> np.ndarray:
        return np.array([fn(state) for fn in self.rate_fns])


def to_stoichiometric(model: MultiStrainModel) -> StoichiometricNetwork:
    names = model.species_names()
    cols, supports, labels, fns = [], [], [], []

    def add(delta: dict, support, label, fn):
        col = np.zeros(len(names), dtype=int)
        for k, v in delta.items():
            col[k] += v
        cols.append(col)
        supports.append(frozenset(support))
        labels.append(label)
        fns.append(fn)

    lam, mu = model.Lambda, model.mu
    add({0: 1}, (), "0 -> s", lambda x: lam)
    add({0: -1}, (0,), "s -> 0", lambda x: mu * x[0])
    for j, st in enumerate(model.strains):
        idx = model.indices(j)
        if isinstance(st, ScalarStrain):
            k = idx[0]
            add({0: -1, k: 1}, (0, k), f"s + {names[k]} -> 2 {names[k]}",
                lambda x, st=st, k=k: st.beta * x[0] * st.incidence.f(x[k]))
            add({k: -1}, (k,), f"{names[k]} -> 0", lambda x, st=st, k=k: st.v * x[k])
        else:
            for a, kp in enumerate(idx):
                for b, km in enumerate(idx):
                    label = f"s + {names[km]} -> {names[km]} + {names[kp]}"
                    add({0: -1, kp: 1}, (0, km), label,
                        lambda x, st=st, a=a, b=b, km=km: st.w[a] * st.ell[b] * x[0] * x[km])
            for a, kp in enumerate(idx):
                add({kp: -1}, (kp,), f"{names[kp]} -> 0",
                    lambda x, st=st, a=a, kp=kp: st.vdiag[a] * x[kp])
    Gamma = np.array(cols, dtype=int).T if cols else np.zeros((len(names), 0), dtype=int)
    Gamma.setflags(write=False)
    return StoichiometricNetwork(tuple(names), Gamma, tuple(supports), tuple(labels), tuple(fns))


# ---------------------------------------------------------------------------
# model files

_RATIONAL = re.compile(r"^\s*([+-]?\d+(?:\.\d*)?)\s*/\s*(\d+(?:\.\d*)?)\s*$")


def parse_number(value, where: str = "value") -> float:
    """Accept ints, floats, decimal strings and ``"p/q"`` rationals."""
    if isinstance(value, bool):
        raise ModelValidationError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _RATIONAL.match(value)
        try:
            if m:
                return float(Fraction(m.group(1)) / Fraction(m.group(2)))
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ModelValidationError(f"{where}: cannot parse number {value!r}")


def _vector(value, where) -> list:
    if not isinstance(value, list):
        raise ModelValidationError(f"{where}: expected a list")
    return [parse_number(v, f"{where}[{k}]") for k, v in enumerate(value)]


def _incidence_from(d, where) -> Incidence:
    if d is None:
        return LinearIncidence()
    if not isinstance(d, dict) or "kind" not in d:
        raise ModelValidationError(f"{where}: expected an object with 'kind'")
    kind = str(d["kind"]).lower().replace("-", "_")
    if kind == "linear":
        return LinearIncidence()
    if kind in ("michaelis_menten", "mm", "michaelismenten"):
        return MichaelisMenten(parse_number(d.get("alpha", 1.0), f"{where}.alpha"))
    if kind in ("tabulated", "tabulated_concave"):
        pts = d.get("points")
        if not isinstance(pts, list):
            raise ModelValidationError(f"{where}.points: expected a list of [i, f] pairs")
        pairs = []
        for k, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != 2:
                raise ModelValidationError(f"{where}.points[{k}]: expected [i, f]")
            pairs.append((parse_number(p[0], f"{where}.points[{k}][0]"), parse_number(p[1], f"{where}.points[{k}][1]")))
        return TabulatedConcave(tuple(pairs))
    raise ModelValidationError(f"{where}.kind: unknown incidence kind {d['kind']!r}")


def model_from_dict(d) -> MultiStrainModel:
    if not isinstance(d, dict):
        raise ModelValidationError("model: expected a JSON object")
    for key in ("lambda", "mu"):
        if key not in d:
            raise ModelValidationError(f"model: missing field '{key}'")
    strains = []
    raw = d.get("strains", [])
    if not isinstance(raw, list):
        raise ModelValidationError("strains: expected a list")
    for k, st in enumerate(raw):
        where = f"strains[{k}]"
        if not isinstance(st, dict):
            raise ModelValidationError(f"{where}: expected an object")
        typ = st.get("type")
        try:
            if typ == "scalar":
                strains.append(
                    ScalarStrain(
                        parse_number(st.get("beta"), f"{where}.beta"),
                        parse_number(st.get("v"), f"{where}.v"),
                        _incidence_from(st.get("incidence"), f"{where}.incidence"),
                    )
                )
            elif typ == "rank1":
                strains.append(
                    RankOneBlock(
                        _vector(st.get("w"), f"{where}.w"),
                        _vector(st.get("ell"), f"{where}.ell"),
                        _vector(st.get("vdiag"), f"{where}.vdiag"),
                    )
                )
            else:
                raise ModelValidationError(f"{where}.type: expected 'scalar' or 'rank1', got {typ!r}")
        except ModelValidationError as exc:
            msg = str(exc)
            raise ModelValidationError(msg if msg.startswith(where) else f"{where}: {msg}") from None
    return MultiStrainModel(parse_number(d["lambda"], "lambda"), parse_number(d["mu"], "mu"), tuple(strains))


def model_to_dict(model: MultiStrainModel) -> dict:
    return {
        "lambda": model.Lambda,
        "mu": model.mu,
        "strains": [st.to_dict() for st in model.strains],
    }


def load_model(path) -> MultiStrainModel:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if 0 < exc.lineno <= len(text.splitlines()) else ""
        raise ModelValidationError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}"
        ) from None
    return model_from_dict(data)
