"""Forward and backward Riccati equations and the solvability conditions.

Forward (filtering-error variance, risk-modified):

    d/dt gXX = 2 a gXX + 1 - gXX^2 (A^2 - mu L11),          gXX(0) = 0

Backward, on [0, T] with Gamma(T, T) = 0:

    d/dt Gamma = q + 2 p Gamma + r Gamma^2
    q = -det L / L22,  p = -(a + mu gXX det L / L22),
    r = -mu gXX^2 (A^2 - mu L12^2 / L22)

Linearisation: Gamma = phi2 / phi1 with

    d/dt phi1 = -p phi1 - r phi2,   d/dt phi2 = q phi1 + p phi2,
    phi1(T) = 1, phi2(T) = 0.

All integrations are classical fixed-step RK4 on the model grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import Blowup, NonFinite, SingularPhi1
from .model import SymMat2, ValidatedModel, midpoints

BLOWUP_CAP = 1e8
MARGIN = 1e-10


def rk4_scalar(f: Callable, y0, dt: float, c_nodes, c_mids, reverse: bool = False,
               cap: Optional[float] = None, t: Optional[np.ndarray] = None):
    """Fixed-step RK4 driven by coefficients sampled at nodes and half-steps.

    ``f(y, c)`` is the right-hand side given the coefficient value(s) ``c``
    at the stage time. ``c_nodes[i]`` / ``c_mids[i]`` hold the coefficients
    at t_i and t_i + dt/2. With ``reverse`` the integration starts from the
    last node and runs towards t_0. Returns the array of node values
    (shape (N+1,) + shape of y0).

    If ``cap`` is given, stepping stops with :class:`Blowup` as soon as a
    value exceeds it in magnitude or becomes non-finite.
    """
    n = len(c_mids)
    y = np.asarray(y0, dtype=float)
    out = np.empty((n + 1,) + y.shape)
    if reverse:
        order = range(n - 1, -1, -1)
        out[n] = y
        h = -dt
    else:
        order = range(n)
        out[0] = y
        h = dt
    for i in order:
        c0, cm, c1 = (c_nodes[i + 1], c_mids[i], c_nodes[i]) if reverse else (
            c_nodes[i], c_mids[i], c_nodes[i + 1])
        k1 = f(y, c0)
        k2 = f(y + 0.5 * h * k1, cm)
        k3 = f(y + 0.5 * h * k2, cm)
        k4 = f(y + h * k3, c1)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nxt = i if reverse else i + 1
        bad = not np.all(np.isfinite(y)) or (cap is not None and np.any(np.abs(y) > cap))
        if bad:
            when = None if t is None else float(t[nxt])
            partial = out[nxt + 1:] if reverse else out[:nxt]
            raise Blowup(f"solution exceeded {cap} at t = {when}", time=when, partial=partial)
        out[nxt] = y
    return out


@dataclass(frozen=True)
class RiccatiSolution:
    gammaXX: np.ndarray
    blowup: Optional[float] = None


@dataclass(frozen=True)
class BackwardSolution:
    Gamma: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray


@dataclass(frozen=True)
class ConditionReport:
    condition: str  # "Cmu" | "CmuStar" | "CmuStarStar"
    satisfied: bool
    witness: Optional[str] = None


def _forward_rhs(y, c):
    a, q = c
    return 2.0 * a * y + 1.0 - q * y * y


def _forward_coeffs(model: ValidatedModel):
    q = model.A ** 2 - model.mu * model.l11
    nodes = np.column_stack([model.a, q])
    return nodes, midpoints(nodes)


def solve_forward_gamma(model: ValidatedModel) -> RiccatiSolution:
    """Filtering-error variance gXX on the model grid.

    Raises Blowup (a condition failure for this mu) if the solution leaves
    [-1e8, 1e8].
    """
    nodes, mids = _forward_coeffs(model)
    g = rk4_scalar(_forward_rhs, 0.0, model.grid.dt, nodes, mids, cap=BLOWUP_CAP, t=model.t)
    return RiccatiSolution(g)


def gamma_midpoints(model: ValidatedModel, gammaXX: np.ndarray) -> np.ndarray:
    """gXX at half-steps by cubic Hermite interpolation.

    Slopes come from the forward equation itself, so the interpolant is
    fourth-order accurate and keeps the backward RK4 at full order.
    """
    q = model.A ** 2 - model.mu * model.l11
    slope = 2.0 * model.a * gammaXX + 1.0 - q * gammaXX ** 2
    dt = model.grid.dt
    return 0.5 * (gammaXX[:-1] + gammaXX[1:]) + dt / 8.0 * (slope[:-1] - slope[1:])


def backward_coefficients(model: ValidatedModel, gammaXX: np.ndarray):
    """(q, p, r) of the backward Riccati equation at nodes and half-steps."""
    mu = model.mu

    def qpr(a, A, l11, l12, l22, g):
        det = np.maximum(l11 * l22 - l12 * l12, 0.0)
        q = -det / l22
        p = -(a + mu * g * det / l22)
        r = -mu * g * g * (A * A - mu * l12 * l12 / l22)
        return np.column_stack([q, p, r])

    cols = (model.a, model.A, model.l11, model.l12, model.l22)
    nodes = qpr(*cols, gammaXX)
    mids = qpr(*(midpoints(c) for c in cols), gamma_midpoints(model, gammaXX))
    return nodes, mids


def _check_gamma(model: ValidatedModel, gammaXX: np.ndarray):
    if gammaXX.shape != model.t.shape:
        raise ValueError("gammaXX does not live on the model grid")


def solve_backward_linearized(model: ValidatedModel, gammaXX: np.ndarray) -> BackwardSolution:
    """Gamma(T, .) = phi2 / phi1 from the linear 2x2 system.

    Raises SingularPhi1 if phi1 reaches zero (a conjugate point).
    """
    _check_gamma(model, gammaXX)
    nodes, mids = backward_coefficients(model, gammaXX)

    def rhs(y, c):
        q, p, r = c
        return np.array([-p * y[0] - r * y[1], q * y[0] + p * y[1]])

    phi = rk4_scalar(rhs, [1.0, 0.0], model.grid.dt, nodes, mids, reverse=True)
    phi1, phi2 = phi[:, 0], phi[:, 1]
    bad = np.flatnonzero(phi1 <= 0)
    if bad.size:
        i = bad[-1]
        raise SingularPhi1(f"phi1 = {phi1[i]:.3g} <= 0 at t = {model.t[i]:.6g}")
    Gamma = phi2 / phi1
    if not np.all(np.isfinite(Gamma)):
        raise NonFinite("linearised Gamma is not finite")
    return BackwardSolution(Gamma, phi1, phi2)


def solve_backward_Gamma(model: ValidatedModel, gammaXX: np.ndarray) -> BackwardSolution:
    """Integrate the backward Riccati equation directly from Gamma(T,T) = 0.

    ``phi1``/``phi2`` are filled from the linearised system for diagnostics
    (NaN if that system hits a conjugate point).
    """
    _check_gamma(model, gammaXX)
    nodes, mids = backward_coefficients(model, gammaXX)

    def rhs(y, c):
        q, p, r = c
        return q + 2.0 * p * y + r * y * y

    Gamma = rk4_scalar(rhs, 0.0, model.grid.dt, nodes, mids, reverse=True,
                       cap=BLOWUP_CAP, t=model.t)
    try:
        lin = solve_backward_linearized(model, gammaXX)
        phi1, phi2 = lin.phi1, lin.phi2
    except (SingularPhi1, NonFinite):
        phi1 = phi2 = np.full_like(Gamma, np.nan)
    return BackwardSolution(Gamma, phi1, phi2)


def check_conditions(model: ValidatedModel, M: SymMat2 | None = None, cov=None) -> list:
    """Evaluate (C_mu), (C_mu*) and (C_mu**) numerically; never raises.

    (C_mu) uses the Riccati-Volterra diagonal when a CovarianceSpec ``cov``
    is supplied and the Markov forward solution otherwise.
    """
    M = M or SymMat2.zero()
    t = model.t
    reports = []

    try:
        gXX = solve_forward_gamma(model).gammaXX
        fwd_err = None
    except Blowup as exc:
        gXX, fwd_err = None, f"forward Riccati blow-up at t = {exc.time:.6g}"

    # C_mu
    if cov is not None:
        from .volterra import solve_riccati_volterra
        try:
            diag = solve_riccati_volterra(cov, model).diag
            err = None
        except Exception as exc:  # any solver failure is a condition failure here
            diag, err = None, f"Riccati-Volterra solve failed: {exc}"
    else:
        diag, err = gXX, fwd_err
    if diag is not None:
        neg = np.flatnonzero(diag < -MARGIN)
        term = 1.0 - model.mu * M.l11 * diag[-1]
        if neg.size:
            err = f"gamma(t,t) = {diag[neg[0]]:.3g} < 0 at t = {t[neg[0]]:.6g}"
        elif not term > MARGIN:
            err = f"1 - mu M11 gamma(T,T) = {term:.3g} is not positive"
    reports.append(ConditionReport("Cmu", err is None, err))

    # C_mu*
    err = fwd_err
    if gXX is not None:
        neg = np.flatnonzero(gXX < -MARGIN)
        if neg.size:
            err = f"gammaXX = {gXX[neg[0]]:.3g} < 0 at t = {t[neg[0]]:.6g}"
        else:
            try:
                G = solve_backward_Gamma(model, gXX).Gamma
                neg = np.flatnonzero(G < -MARGIN)
                if neg.size:
                    err = f"Gamma(T,t) = {G[neg[-1]]:.3g} < 0 at t = {t[neg[-1]]:.6g}"
            except Blowup as exc:
                err = f"backward Riccati blow-up at t = {exc.time:.6g}"
    reports.append(ConditionReport("CmuStar", err is None, err))

    # C_mu**
    err = fwd_err
    if gXX is not None:
        neg = np.flatnonzero(gXX < -MARGIN)
        slack = 1.0 - model.mu * gXX * model.l11
        bad = np.flatnonzero(slack <= MARGIN)
        if neg.size:
            err = f"gammaXX = {gXX[neg[0]]:.3g} < 0 at t = {t[neg[0]]:.6g}"
        elif bad.size:
            i = bad[0]
            err = f"1 - mu gammaXX L11 = {slack[i]:.3g} at t = {t[i]:.6g}"
    reports.append(ConditionReport("CmuStarStar", err is None, err))
    return reports
