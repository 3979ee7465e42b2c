"""Reproduction functions, invasion numbers and transversal Jacobians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibria import FaceEquilibrium
from .linalg import MetzlerMatrix, ngm, spectral_abscissa
from .model import MultiStrainModel, ScalarStrain

__all__ = [
    "ReproductionData",
    "TransversalJacobian",
    "InvasionMismatch",
    "reproduction_numbers",
    "basic_reproduction_numbers",
    "invasion_numbers",
    "transversal_jacobian",
    "sign_equivalence_check",
    "strain_ngm",
]

CROSS_CHECK_RTOL = 1e-9
SIGN_TOL = 1e-12


class InvasionMismatch(ArithmeticError):
    """Reproduction-function and spectral invasion numbers disagree."""


@dataclass(frozen=True)
class ReproductionData:
    """Slopes ``R_j`` and values ``R_j(s) = s R_j`` at one susceptible level."""

    s: float
    per_strain: tuple
    at_state: tuple

    def __getitem__(self, j: int) -> float:
        return self.at_state[j]


@dataclass(frozen=True)
class TransversalJacobian:
    absent: tuple
    blocks: tuple
    abscissae: tuple

    @property
    def abscissa(self) -> float:
        return max(self.abscissae) if self.abscissae else -np.inf

    @property
    def hurwitz(self) -> bool:
        return self.abscissa < 0

    def matrix(self) -> np.ndarray:
        sizes = [b.dim for b in self.blocks]
        out = np.zeros((sum(sizes), sum(sizes)))
        k = 0
        for b in self.blocks:
            out[k:k + b.dim, k:k + b.dim] = b.entries
            k += b.dim
        return out


def strain_ngm(st, s: float):
    """NGM data of one strain's infected block with susceptibles held at ``s``."""
    if isinstance(st, ScalarStrain):
        return ngm(np.array([[st.beta * s]]), np.array([[st.v]]))
    return ngm(st.production(s), st.V)


def _transversal_block(st, s: float) -> np.ndarray:
    if isinstance(st, ScalarStrain):
        return np.array([[st.beta * s - st.v]])
    return st.production(s) - st.V


def reproduction_numbers(model: MultiStrainModel, E: FaceEquilibrium, cross_check: bool = True) -> ReproductionData:
    if not E.exists:
        raise ValueError(f"{E.label} does not exist")
    s = E.s
    slopes = tuple(float(x) for x in model.slopes())
    values = tuple(s * r for r in slopes)
    if cross_check:
        for j in sorted(E.absent(model.n_strains)):
            rho = strain_ngm(model.strains[j], s).rho
            if abs(rho - values[j]) > CROSS_CHECK_RTOL * max(1.0, abs(rho)):
                raise InvasionMismatch(
                    f"strain {j + 1} at {E.label}: R(s) = {values[j]!r} but rho(K) = {rho!r}"
                )
    return ReproductionData(s, slopes, values)


def basic_reproduction_numbers(model: MultiStrainModel) -> tuple:
    return tuple(model.s0 * float(r) for r in model.slopes())


def invasion_numbers(model: MultiStrainModel, E: FaceEquilibrium) -> dict:
    """``{j: R_j(s_E)}`` over strains absent at ``E``."""
    rd = reproduction_numbers(model, E)
    return {j: rd.at_state[j] for j in sorted(E.absent(model.n_strains))}


def transversal_jacobian(model: MultiStrainModel, E: FaceEquilibrium) -> TransversalJacobian:
    if not E.exists:
        raise ValueError(f"{E.label} does not exist")
    absent = tuple(sorted(E.absent(model.n_strains)))
    blocks = tuple(MetzlerMatrix(_transversal_block(model.strains[j], E.s)) for j in absent)
    return TransversalJacobian(absent, blocks, tuple(spectral_abscissa(b) for b in blocks))


def _sign(x: float, tol: float) -> int:
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def sign_equivalence_check(block, R: float, tol: float = SIGN_TOL) -> bool:
    """``sign(abscissa(block)) == sign(R - 1)`` up to ``tol``."""
    a = spectral_abscissa(block)
    scale = max(1.0, float(np.abs(np.asarray(block)).max()))
    return _sign(a, tol * scale) == _sign(R - 1.0, tol)
