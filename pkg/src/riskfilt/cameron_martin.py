"""Conditional Laplace transform of quadratic functionals and the LEG optimal risk.

For an estimate path h and a terminal value g the conditional expectation

    I_T = E[ mu exp{ mu/2 (X_T, g) M (X_T, g)' + mu/2 int (X, h) L (X, h)' } | Y_T ]

equals a product of a deterministic prefactor, a quadratic form in the
auxiliary filter Z^h, and a stochastic exponential of (Z^h - pi(X))
against the innovation. Everything is accumulated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConditionViolated, NonFinite
from .filters import kalman_filter, open_loop_z
from .model import SymMat2, ValidatedModel
from .riccati import MARGIN, solve_backward_Gamma, solve_forward_gamma


def trapz(y: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid rule along the last axis on a uniform grid."""
    y = np.asarray(y)
    return dt * (y[..., 1:-1].sum(axis=-1) + 0.5 * (y[..., 0] + y[..., -1]))


@dataclass(frozen=True)
class GMatrix:
    value: SymMat2
    prefactor: float  # (1 - mu M11 gamma)^(-1/2)


def gain_matrix_G(M: SymMat2, mu: float, gammaT: float) -> GMatrix:
    """Effective terminal matrix after conditioning on the observations."""
    s = 1.0 - mu * M.l11 * gammaT
    if not s > 0:
        raise ConditionViolated(f"1 - mu M11 gamma = {s:.3g} is not positive")
    value = SymMat2(M.l11 / s, M.l12 / s, (M.l22 - mu * gammaT * M.det) / s)
    return GMatrix(value, s ** -0.5)


def conditional_laplace_log(model: ValidatedModel, M: SymMat2, h: np.ndarray, g,
                            dY: np.ndarray, upTo: Optional[float] = None,
                            gammaXX: Optional[np.ndarray] = None):
    """log(I_T / mu) for each path; ``h`` and ``dY`` may carry leading path axes.

    Time integrals use the trapezoid rule; the innovation integral is the
    left-point sum over the same increments the Kalman filter produces.
    """
    model = model.horizon(upTo)
    n = model.grid.N
    h = np.asarray(h, dtype=float)[..., : n + 1]
    dY = np.asarray(dY, dtype=float)[..., :n]
    dt = model.grid.dt
    if gammaXX is None:
        try:
            gammaXX = solve_forward_gamma(model).gammaXX
        except ConditionViolated as exc:
            raise ConditionViolated(f"(C_mu) fails: {exc}") from exc
    gam = gammaXX[: n + 1]
    G = gain_matrix_G(M, model.mu, gam[-1])
    if np.any(gam < -MARGIN):
        raise ConditionViolated("(C_mu) fails: negative gamma(t,t)")

    mu = model.mu
    Z = open_loop_z(model, h, dY, gam)
    kal = kalman_filter(model, dY)
    err = model.A * (Z - kal.piX)
    quad = model.l11 * Z * Z + 2.0 * model.l12 * Z * h + model.l22 * h * h

    log = (math.log(G.prefactor)
           + 0.5 * mu * trapz(gam * model.l11, dt)
           + 0.5 * mu * G.value.quad(Z[..., -1], g)
           + 0.5 * mu * trapz(quad, dt)
           + np.sum(err[..., :-1] * kal.nu, axis=-1)
           - 0.5 * trapz(err * err, dt))
    if not np.all(np.isfinite(log)):
        raise NonFinite("conditional Laplace exponent is not finite")
    return log


def conditional_laplace_rhs(model: ValidatedModel, M: SymMat2, h: np.ndarray, g,
                            dY: np.ndarray, upTo: Optional[float] = None,
                            gammaXX: Optional[np.ndarray] = None):
    """I_T path by path."""
    return model.mu * np.exp(conditional_laplace_log(model, M, h, g, dY, upTo, gammaXX))


def optimal_risk(model: ValidatedModel, T: Optional[float] = None,
                 gammaXX: Optional[np.ndarray] = None) -> float:
    """Optimal LEG risk mu exp{mu/2 int gXX L11 + mu/2 int Gamma A^2 gXX^2}."""
    model = model.horizon(T)
    try:
        g = solve_forward_gamma(model).gammaXX if gammaXX is None else gammaXX[: model.grid.N + 1]
        G = solve_backward_Gamma(model, g).Gamma
    except ConditionViolated as exc:
        raise ConditionViolated(f"(C_mu*) fails: {exc}") from exc
    if np.any(g < -MARGIN) or np.any(G < -MARGIN):
        raise ConditionViolated("(C_mu*) fails: negative Riccati solution")
    dt = model.grid.dt
    expo = 0.5 * model.mu * (trapz(g * model.l11, dt) + trapz(G * model.A ** 2 * g ** 2, dt))
    return float(model.mu * math.exp(expo))
