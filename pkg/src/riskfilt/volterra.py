"""Riccati-Volterra and Ito-Volterra equations for a general Gaussian signal.

    gamma(t, s) = K(t, s) - int_0^s gamma(t, r) q(r) gamma(s, r) dr,   s <= t
    q = A^2 - mu L11

The memory integral uses the trapezoid rule. Sweeping s (the column index)
upwards, the only unknowns in column j are gamma(i, j) for i >= j; they
enter through the endpoint weight dt/2 only, linearly off the diagonal and
quadratically on it, and are solved in closed form. Each column is a single
matrix-vector product over the rows already known, so the whole solve is
O(N^3 / 6) flops with O(N^2) storage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeDiagonal, NonFinite
from .filters import rs_closed_loop_factor, rs_feedback
from .model import CovarianceSpec, TriKernel, ValidatedModel

NEG_TOL = 1e-10


@dataclass(frozen=True)
class VolterraSolution:
    gamma: TriKernel
    diag: np.ndarray


def _check_grid(cov: CovarianceSpec, model: ValidatedModel):
    if cov.grid != model.grid:
        raise ValueError("covariance and model live on different grids")


def solve_riccati_volterra(cov: CovarianceSpec, model: ValidatedModel) -> VolterraSolution:
    """Solve for gamma(t, s) on the lower triangle of the grid.

    Only K[i, j] with j <= i is read.

    Raises:
        NegativeDiagonal: if gamma(t, t) < -1e-10 or the diagonal quadratic
            has no real root (the (C_mu) condition fails).
        NonFinite: if the solution overflows.
    """
    _check_grid(cov, model)
    n = model.grid.N + 1
    dt = model.grid.dt
    q = model.A ** 2 - model.mu * model.l11
    K = cov.K
    G = np.zeros((n, n))
    w = np.full(n, dt)
    w[0] = 0.5 * dt
    for j in range(n):
        if j == 0:
            rhs = K[0:, 0].copy()
            beta = 0.0
        else:
            # sum_{k<j} w_k q_k gamma(i,k) gamma(j,k); endpoint k=j handled below
            v = w[:j] * q[:j] * G[j, :j]
            rhs = K[j:, j] - G[j:, :j] @ v
            beta = 0.5 * dt * q[j]
        R = rhs[0]
        disc = 1.0 + 4.0 * beta * R
        if disc < 0:
            raise NegativeDiagonal(f"no real gamma(t,t) at t = {model.t[j]:.6g}")
        d = 2.0 * R / (1.0 + np.sqrt(disc))
        if d < -NEG_TOL:
            raise NegativeDiagonal(f"gamma(t,t) = {d:.3g} < 0 at t = {model.t[j]:.6g}")
        G[j, j] = d
        G[j + 1:, j] = rhs[1:] / (1.0 + beta * d)
    if not np.all(np.isfinite(G)):
        raise NonFinite("Riccati-Volterra solution overflowed")
    return VolterraSolution(TriKernel(model.grid, G), np.diag(G).copy())


def _volterra_z(sol: VolterraSolution, m: np.ndarray, A: np.ndarray,
                drift: np.ndarray, dY: np.ndarray, forcing=None) -> np.ndarray:
    """Z_i = m_i + sum_{k<i} gamma(i,k) [(drift_k Z_k + forcing_k) dt + A_k dY_k].

    Left-point sums; ``dY`` may carry leading path axes.
    """
    G = sol.gamma.values
    n = G.shape[0]
    dt = sol.gamma.grid.dt
    dY = np.asarray(dY, dtype=float)
    if dY.shape[-1] != n - 1:
        raise ValueError(f"expected {n - 1} increments, got {dY.shape[-1]}")
    Z = np.empty(dY.shape[:-1] + (n,))
    inc = np.empty(dY.shape[:-1] + (n - 1,))  # per-step integrand, filled as Z grows
    base = A[:-1] * dY
    if forcing is not None:
        base = base + np.asarray(forcing)[..., : n - 1] * dt
    Z[..., 0] = m[0]
    for i in range(1, n):
        k = i - 1
        inc[..., k] = base[..., k] + drift[k] * Z[..., k] * dt
        Z[..., i] = m[i] + inc[..., :i] @ G[i, :i]
    if not np.all(np.isfinite(Z)):
        raise NonFinite("Ito-Volterra solution overflowed")
    return Z


def solve_Z_volterra(sol: VolterraSolution, cov: CovarianceSpec, model: ValidatedModel,
                     h: np.ndarray, dY: np.ndarray) -> np.ndarray:
    """Z^h for an arbitrary estimate path h (open loop)."""
    _check_grid(cov, model)
    drift = model.mu * model.l11 - model.A ** 2
    forcing = model.mu * model.l12[:-1] * np.asarray(h, dtype=float)[..., :-1]
    return _volterra_z(sol, cov.m, model.A, drift, dY, forcing)


def rs_filter_general(cov: CovarianceSpec, model: ValidatedModel, dY: np.ndarray,
                      sol: VolterraSolution | None = None, form: str = "substituted"):
    """RS filter for a general Gaussian signal; returns (h, Z).

    The RS feedback h = c Z is substituted into the Ito-Volterra equation, so
    the memory term carries the closed-loop coefficient from
    :func:`rs_closed_loop_factor` (``form`` selects one of the printed
    variants for comparison).
    """
    _check_grid(cov, model)
    if sol is None:
        sol = solve_riccati_volterra(cov, model)
    g = sol.diag
    c = rs_feedback(model, g)
    k = rs_closed_loop_factor(model.mu, g, model.l11, model.l22, model.det, form)
    Z = _volterra_z(sol, cov.m, model.A, k - model.A ** 2, dY)
    return c * Z, Z
