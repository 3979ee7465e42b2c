"""Face equilibria of multi-strain models.

A face is named by the strains *present* on it; every other strain's
infected block is exactly zero.  All one-dimensional equilibrium equations
are solved by bisection on functions whose strict monotonicity is known, so
each root returned is the unique one in its bracket.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from ._kernels_py import BRACKET_DOUBLINGS, bisect_decreasing
from .model import MultiStrainModel, RankOneBlock, ScalarStrain

__all__ = [
    "Inequality",
    "FaceEquilibrium",
    "BracketError",
    "IncidenceClassError",
    "THRESHOLD_BAND",
    "TIE_TOL",
    "dfe",
    "scalar_boundary",
    "block_boundary",
    "coexistence",
    "tie_continuum",
    "face_equilibrium",
    "inner_infected",
    "node_label",
]

THRESHOLD_BAND = 1e-9
TIE_TOL = 1e-9


class BracketError(RuntimeError):
    """Sign analysis of a monotone equation failed; the incidence is invalid."""


class IncidenceClassError(ValueError):
    """Incidence is neither linear nor has strictly decreasing ``g``."""


@dataclass(frozen=True)
class Inequality:
    """``quantity <direction> threshold`` evaluated at ``value``."""

    quantity: str
    value: float
    threshold: float = 1.0
    direction: str = ">"

    @property
    def margin(self) -> float:
        d = self.value - self.threshold
        return d if self.direction == ">" else -d

    @property
    def holds(self) -> bool:
        return self.margin > 0

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "value": self.value,
            "threshold": self.threshold,
            "direction": self.direction,
            "margin": self.margin,
        }


@dataclass(frozen=True, eq=False)
class FaceEquilibrium:
    present: tuple
    state: np.ndarray | None
    exists: bool
    conditions: tuple = ()
    near_nonhyperbolic: bool = False
    constructed: bool = True
    continuum: tuple | None = None
    note: str = ""

    def absent(self, n_strains: int) -> frozenset:
        return frozenset(range(n_strains)) - frozenset(self.present)

    @property
    def s(self) -> float:
        return float(self.state[0])

    @property
    def label(self) -> str:
        return node_label(self.present)


def node_label(present: Sequence[int]) -> str:
    present = sorted(present)
    if not present:
        return "DFE"
    return "E[" + ",".join(str(j + 1) for j in present) + "]"


def _near(conds) -> bool:
    return any(abs(c.value - c.threshold) < THRESHOLD_BAND for c in conds)


def _R(j: int) -> str:
    return f"R{j + 1}"


# ---------------------------------------------------------------------------
# single faces


def dfe(model: MultiStrainModel) -> FaceEquilibrium:
    x = np.zeros(model.dim)
    x[0] = model.s0
    near = any(abs(model.s0 * r - 1.0) < THRESHOLD_BAND for r in model.slopes())
    return FaceEquilibrium((), x, True, near_nonhyperbolic=bool(near))


def _strain(model, j, cls):
    st = model.strains[j]
    if not isinstance(st, cls):
        raise TypeError(f"strain {j + 1} is not a {cls.__name__}")
    return st


def _boundary_phi(model, st):
    lam, mu, beta, v = model.Lambda, model.mu, st.beta, st.v
    g = st.incidence.g
    return lambda i: beta * ((lam - v * i) / mu) * float(g(i)) - v


def scalar_boundary(model: MultiStrainModel, j: int) -> FaceEquilibrium:
    """Single-strain equilibrium ``(s_j, i_j^*)`` of a scalar strain."""
    st = _strain(model, j, ScalarStrain)
    R0j = model.s0 * st.slope
    cond = (Inequality(_R(j), R0j),)
    if R0j <= 1.0:
        return FaceEquilibrium((j,), None, False, cond, _near(cond))
    inc = st.incidence
    lam, mu, v = model.Lambda, model.mu, st.v
    if inc.is_linear:
        s = 1.0 / st.slope
        i = (lam - mu * s) / v
    else:
        phi = _boundary_phi(model, st)
        hi = lam / v
        if not (phi(0.0) > 0.0 > phi(hi)):
            raise BracketError(f"strain {j + 1}: no sign change of phi on [0, {hi}]")
        if inc.kernel_code is not None:
            i, _ = kernels.boundary_root(lam, mu, st.beta, v, inc.kernel_code, inc.kernel_param)
        else:
            i, _ = bisect_decreasing(phi, 0.0, hi)
        s = (lam - v * i) / mu
    x = np.zeros(model.dim)
    x[0] = s
    x[model.slice(j).start] = i
    return FaceEquilibrium((j,), x, True, cond, _near(cond))


def block_boundary(model: MultiStrainModel, j: int) -> FaceEquilibrium:
    """Closed-form rank-one block equilibrium ``(1/R_b, 0, xi V^{-1} w)``."""
    st = _strain(model, j, RankOneBlock)
    Rb = model.s0 * st.slope
    cond = (Inequality(_R(j), Rb),)
    if Rb <= 1.0:
        return FaceEquilibrium((j,), None, False, cond, _near(cond))
    s = 1.0 / st.slope
    xi = model.Lambda - model.mu * s
    x = np.zeros(model.dim)
    x[0] = s
    x[model.slice(j)] = xi * st.w / st.vdiag
    return FaceEquilibrium((j,), x, True, cond, _near(cond))


def _single(model, j) -> FaceEquilibrium:
    if isinstance(model.strains[j], ScalarStrain):
        return scalar_boundary(model, j)
    return block_boundary(model, j)


# ---------------------------------------------------------------------------
# inner solves


def _linear_like(st) -> bool:
    return isinstance(st, RankOneBlock) or st.incidence.is_linear


def inner_infected(st: ScalarStrain, s: float) -> float | None:
    """Unique ``i > 0`` with ``g(i) = 1/(R s)``; 0 when ``R s <= 1``.

    Returns ``None`` when the target lies below ``inf g`` (no solution).
    """
    inc = st.incidence
    Rs = st.slope * s
    if Rs <= 1.0:
        return 0.0
    if inc.is_linear:
        return None
    target = 1.0 / Rs
    if target <= inc.g_infimum:
        return None
    if inc.kernel_code is not None:
        return kernels.inner_root(st.slope, s, inc.kernel_code, inc.kernel_param)[0]
    lo, hi = 0.0, 1.0
    for _ in range(BRACKET_DOUBLINGS):
        if float(inc.g(hi)) < target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        return None
    return bisect_decreasing(lambda i: float(inc.g(i)) - target, lo, hi)[0]


def _require_monotone_class(st, j):
    if isinstance(st, RankOneBlock):
        return
    inc = st.incidence
    if not (inc.is_linear or inc.g_strictly_decreasing):
        raise IncidenceClassError(
            f"strain {j + 1}: incidence {inc.kind!r} has g neither strictly decreasing nor "
            "identically 1; coexistence is not classified for it"
        )


# ---------------------------------------------------------------------------
# two-strain faces


def coexistence(model: MultiStrainModel, pair: tuple = (0, 1)) -> FaceEquilibrium:
    """Equilibrium with exactly the two strains in ``pair`` present.

    Both scalar: the balance ``Lambda - mu s - v1 i1(s) - v2 i2(s)`` is
    bisected on ``(max 1/R_j, min s_j)``.  A linear-like member (linear
    scalar strain or rank-one block) pins ``s`` at ``1/R`` of that member
    and the other member is solved at that level.  Two linear-like members
    coexist only on a tie, where the equilibria form a continuum.
    """
    j, k = pair
    sj, sk = model.strains[j], model.strains[k]
    _require_monotone_class(sj, j)
    _require_monotone_class(sk, k)
    Ej, Ek = _single(model, j), _single(model, k)
    present = tuple(sorted(pair))
    conds = []
    if Ej.exists:
        conds.append(Inequality(f"{_R(k)}({Ej.label})", Ej.s * sk.slope))
    else:
        conds.append(Ej.conditions[0])
    if Ek.exists:
        conds.append(Inequality(f"{_R(j)}({Ek.label})", Ek.s * sj.slope))
    else:
        conds.append(Ek.conditions[0])
    conds = tuple(conds)
    near = _near(conds)
    lin_j, lin_k = _linear_like(sj), _linear_like(sk)
    tie = abs(sj.slope - sk.slope) <= TIE_TOL * max(sj.slope, sk.slope)
    if lin_j and lin_k and tie and Ej.exists and Ek.exists:
        return FaceEquilibrium(
            present, None, False, conds, True, continuum=present, note="tie surface: continuum of equilibria"
        )
    if not (Ej.exists and Ek.exists and all(c.holds for c in conds)):
        return FaceEquilibrium(present, None, False, conds, near)

    lam, mu = model.Lambda, model.mu
    if lin_j and lin_k:
        raise ArithmeticError(
            "mutual invasion between two linear-like strains is impossible; inconsistent thresholds"
        )

    x = np.zeros(model.dim)
    if lin_j or lin_k:
        lin, nl = (j, k) if lin_j else (k, j)
        s = 1.0 / model.strains[lin].slope
        i_nl = inner_infected(model.strains[nl], s)
        if i_nl is None or i_nl <= 0:
            raise ArithmeticError("mixed coexistence: nonlinear strain has no positive level")
        xi = lam - mu * s - model.strains[nl].v * i_nl
        if xi <= 0:
            raise ArithmeticError("mixed coexistence: balance leaves no mass for the linear-like strain")
        x[model.slice(nl).start] = i_nl
        st = model.strains[lin]
        if isinstance(st, RankOneBlock):
            x[model.slice(lin)] = xi * st.w / st.vdiag
        else:
            x[model.slice(lin).start] = xi / st.v
        x[0] = s
        return FaceEquilibrium(present, x, True, conds, near)

    s_lo = max(1.0 / sj.slope, 1.0 / sk.slope)
    s_hi = min(Ej.s, Ek.s)
    ij, ik = sj.incidence, sk.incidence
    if ij.kernel_code is not None and ik.kernel_code is not None:
        s, _ = kernels.coexist_root(
            lam, mu,
            sj.beta, sj.v, ij.kernel_code, ij.kernel_param,
            sk.beta, sk.v, ik.kernel_code, ik.kernel_param,
            s_lo, s_hi,
        )
    else:
        def balance(s):
            return lam - mu * s - sj.v * (inner_infected(sj, s) or 0.0) - sk.v * (inner_infected(sk, s) or 0.0)

        if not (balance(s_lo) > 0.0 > balance(s_hi)):
            raise BracketError("coexistence balance has no sign change on its bracket")
        s, _ = bisect_decreasing(balance, s_lo, s_hi)
    x[0] = s
    x[model.slice(j).start] = inner_infected(sj, s)
    x[model.slice(k).start] = inner_infected(sk, s)
    return FaceEquilibrium(present, x, True, conds, near)


def tie_continuum(model: MultiStrainModel, xi: float, scalar: int | None = None, block: int | None = None) -> np.ndarray:
    """Member ``E_*(xi)`` of the equilibrium continuum on the tie surface.

    Requires a linear scalar strain and a rank-one block with
    ``R_scalar = R_block > 1``; ``xi`` must lie in ``(0, Lambda - mu/R_b)``.
    """
    if scalar is None:
        scalar = next(j for j, st in enumerate(model.strains) if isinstance(st, ScalarStrain))
    if block is None:
        block = next(j for j, st in enumerate(model.strains) if isinstance(st, RankOneBlock))
    sc = _strain(model, scalar, ScalarStrain)
    bl = _strain(model, block, RankOneBlock)
    if not sc.incidence.is_linear:
        raise ValueError("tie continuum requires a linear scalar strain")
    R1, Rb = model.s0 * sc.slope, model.s0 * bl.slope
    if abs(R1 - Rb) > TIE_TOL * max(R1, Rb) or Rb <= 1.0:
        raise ValueError(f"not on the tie surface: R1 = {R1!r}, Rb = {Rb!r}")
    s = 1.0 / bl.slope
    top = model.Lambda - model.mu * s
    if not 0.0 < xi < top:
        raise ValueError(f"xi = {xi!r} outside (0, {top!r})")
    x = np.zeros(model.dim)
    x[0] = s
    x[model.slice(scalar).start] = (top - xi) / sc.v
    x[model.slice(block)] = xi * bl.w / bl.vdiag
    return x


def face_equilibrium(model: MultiStrainModel, present) -> FaceEquilibrium:
    present = tuple(sorted(set(present)))
    if not present:
        return dfe(model)
    if len(present) == 1:
        return _single(model, present[0])
    if len(present) == 2:
        return coexistence(model, present)
    return FaceEquilibrium(
        present, None, False, constructed=False,
        note="interior equilibria with three or more present strains are not constructed",
    )
