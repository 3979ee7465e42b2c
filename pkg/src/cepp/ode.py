"""Orbit integration for attractor and monotonicity checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .equilibria import FaceEquilibrium
from .model import MultiStrainModel, RankOneBlock, jacobian, vector_field

__all__ = ["IntegrationError", "OrbitResult", "AttractorVerdict", "integrate", "attractor_check", "default_horizon"]

NEG_TOL = 1e-12
MONO_TOL = 1e-8


class IntegrationError(RuntimeError):
    def __init__(self, message, last_state=None, t=None):
        super().__init__(message)
        self.last_state = last_state
        self.t = t


@dataclass(frozen=True, eq=False)
class OrbitResult:
    times: np.ndarray
    states: np.ndarray
    converged: bool = False
    limit_candidate: np.ndarray | None = None
    distance_to_target: float = float("nan")
    max_step_lyapunov_increase: float = float("nan")
    lyapunov: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate(model: MultiStrainModel, initial, T: float, tol: float = 1e-9, atol: float = 1e-12,
              n_out: int = 500, candidate=None, target=None, radius: float = 1e-6) -> OrbitResult:
    x0 = np.asarray(initial, dtype=float)
    if x0.shape != (model.dim,):
        raise ValueError(f"initial state must have {model.dim} components")
    if np.any(x0 < 0):
        raise ValueError("initial state must be nonnegative")
    t_eval = np.linspace(0.0, float(T), max(int(n_out), 500) + 1)
    # f_i >= 0 on {x_i = 0}, so evaluating at max(x, 0) stops round-off
    # below zero from feeding back; stored states are not projected
    sol = solve_ivp(
        lambda t, x: vector_field(model, np.maximum(x, 0.0)),
        (0.0, float(T)),
        x0,
        method="RK45",
        t_eval=t_eval,
        rtol=tol,
        atol=atol,
    )
    if sol.status != 0:
        last = sol.y[:, -1] if sol.y.size else x0
        raise IntegrationError(f"integration failed: {sol.message}", last, sol.t[-1] if sol.t.size else 0.0)
    X = sol.y.T
    if X.min() < -NEG_TOL:
        k = int(np.argmin(X.min(axis=1)))
        raise IntegrationError(f"state left the orthant (min {X.min():.3e})", X[k], sol.t[k])
    X = np.maximum(X, 0.0)
    lyap = None
    mono = float("nan")
    if candidate is not None:
        floor = candidate.clamp_floor()
        lyap = candidate.V(np.maximum(X, floor))
        mono = float(np.max(np.diff(lyap))) if len(lyap) > 1 else 0.0
    dist = float("nan")
    conv = False
    if target is not None:
        dist = float(np.linalg.norm(X[-1] - np.asarray(target, dtype=float), ord=np.inf))
        conv = dist < radius
    return OrbitResult(sol.t, X, conv, X[-1], dist, mono, lyap)


def default_horizon(model: MultiStrainModel, E: FaceEquilibrium) -> float:
    """``50 / |Re lambda_max|`` of the linearization at ``E``, else ``1e4``."""
    ev = np.linalg.eigvals(jacobian(model, E.state))
    a = float(np.max(ev.real))
    if not np.isfinite(a) or a >= -1e-12:
        return 1e4
    return min(50.0 / abs(a), 1e4)


@dataclass(frozen=True)
class AttractorVerdict:
    initial: tuple
    converged: bool
    distance: float
    lyapunov_monotone: bool | None
    max_step_increase: float | None
    continuum_xi: float | None = None


def _tie_xi(model: MultiStrainModel, E: FaceEquilibrium, x: np.ndarray) -> float | None:
    if E.continuum is None:
        return None
    blocks = [j for j in E.continuum if isinstance(model.strains[j], RankOneBlock)]
    if not blocks:
        return None
    st = model.strains[blocks[0]]
    return float(x[model.slice(blocks[0])] @ st.vdiag)


def attractor_check(model: MultiStrainModel, predicted: FaceEquilibrium, initials, T: float | None = None,
                    radius: float = 1e-6, candidate=None, tol: float = 1e-9) -> list:
    """Integrate from each initial and report convergence to ``predicted``.

    On a tie surface (``predicted.continuum`` set) the verdict reports the
    limit's position ``xi = 1^T V z`` along the continuum instead.
    """
    verdicts = []
    if predicted.continuum is not None:
        for x0 in initials:
            res = integrate(model, x0, T if T is not None else 1e4, tol=tol, candidate=candidate)
            xi = _tie_xi(model, predicted, res.final)
            speed = float(np.abs(vector_field(model, res.final)).max())
            verdicts.append(AttractorVerdict(tuple(map(float, x0)), speed < radius, speed, None, None, xi))
        return verdicts
    if not predicted.exists:
        raise ValueError(f"{predicted.label} does not exist")
    T = T if T is not None else default_horizon(model, predicted)
    for x0 in initials:
        res = integrate(model, x0, T, tol=tol, candidate=candidate, target=predicted.state, radius=radius)
        mono = None if candidate is None else bool(res.max_step_lyapunov_increase <= MONO_TOL)
        inc = None if candidate is None else res.max_step_lyapunov_increase
        verdicts.append(AttractorVerdict(tuple(map(float, x0)), res.converged, res.distance_to_target, mono, inc))
    return verdicts
