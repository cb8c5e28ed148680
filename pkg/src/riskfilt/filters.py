"""Linear filters h_t = c(t) Z_t for the risk-neutral, LEG and RS problems.

Every filter here has the closed-loop form

    dZ = zdrift(t) Z dt + obsgain(t) dY,   Z_0 = 0,   h = c(t) Z

and is discretised as an exponential Euler step

    Z_{i+1} = exp(int_{t_i}^{t_{i+1}} zdrift) * (Z_i + obsgain_i dY_i)

with the drift integral by the trapezoid rule. The observation increment is
taken at the left node (Ito), and the impulse response of the recursion is
exactly c(t_i) exp(int_{t_j}^{t_i} zdrift) obsgain(t_j), which is what
:func:`extract_kernel` returns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConditionViolated, NonFinite
from .model import TimeGrid, TriKernel, ValidatedModel
from .riccati import MARGIN, solve_backward_Gamma, solve_forward_gamma


@dataclass(frozen=True)
class FilterGains:
    kind: str  # "RiskNeutral" | "LEG" | "RS"
    grid: TimeGrid
    c: np.ndarray
    zdrift: np.ndarray
    obsgain: np.ndarray

    def step_factors(self) -> np.ndarray:
        """exp of the trapezoid-integrated drift over each step."""
        return np.exp(np.diff(self.log_transition()))

    def log_transition(self) -> np.ndarray:
        """Cumulative trapezoid integral of zdrift from 0 to each node."""
        dt = self.grid.dt
        inc = 0.5 * dt * (self.zdrift[:-1] + self.zdrift[1:])
        return np.concatenate([[0.0], np.cumsum(inc)])


@dataclass(frozen=True)
class KalmanOutput:
    piX: np.ndarray
    nu: np.ndarray  # innovation increments, one per step


def _gamma(model: ValidatedModel, gammaXX: Optional[np.ndarray]) -> np.ndarray:
    if gammaXX is None:
        return solve_forward_gamma(model).gammaXX
    return gammaXX[: model.grid.N + 1]


def risk_neutral_gains(model: ValidatedModel) -> FilterGains:
    """Kalman-Bucy filter with h = -(L12/L22) pi(X)."""
    g0 = solve_forward_gamma(model.with_mu(0.0)).gammaXX
    return FilterGains("RiskNeutral", model.grid, -model.l12 / model.l22,
                       model.a - model.A ** 2 * g0, model.A * g0)


def leg_gains(model: ValidatedModel, T: Optional[float] = None,
              gammaXX: Optional[np.ndarray] = None) -> FilterGains:
    """Gains of the LEG-optimal filter for horizon ``T`` (default: model horizon).

    ``gammaXX`` may be passed to share one forward solve across several
    horizons; it is truncated to [0, T].
    """
    model = model.horizon(T)
    g = _gamma(model, gammaXX)
    try:
        G = solve_backward_Gamma(model, g).Gamma
    except ConditionViolated as exc:
        raise ConditionViolated(f"(C_mu*) fails: {exc}") from exc
    if np.any(g < -MARGIN) or np.any(G < -MARGIN):
        raise ConditionViolated("(C_mu*) fails: negative Riccati solution")
    mu, l12, l22, det, A = model.mu, model.l12, model.l22, model.det, model.A
    c = -(l12 / l22) * (1.0 + mu * g * G)
    zdrift = model.a + mu * (g / l22) * (det - mu * l12 ** 2 * g * G) - A ** 2 * g
    return FilterGains("LEG", model.grid, c, zdrift, A * g)


def rs_closed_loop_factor(mu, g, l11, l22, det, form: str = "substituted"):
    """mu (L11 + L12 c) for the RS feedback c, i.e. the closed-loop memory coefficient.

    The Markov closed-loop drift is a + g k - A^2 g. ``form`` selects the
    expression: "substituted" (obtained by inserting the RS feedback into
    the open-loop equation; the default) or one of the two printed variants.
    "printed-markov" differs from it only when det Lambda != 1;
    "printed-general" has no mu inside the bracket and also differs when mu != 1.
    """
    denom = l22 - mu * g * det
    if form == "substituted":
        return mu * det * (1.0 - mu * g * l11) / denom
    if form == "printed-markov":
        return mu * det * (1.0 - mu * g * l11 * det) / denom
    if form == "printed-general":
        return mu * det * (1.0 - l11 * g * det) / denom
    raise ValueError(f"unknown drift form {form!r}")


def rs_feedback(model: ValidatedModel, g: np.ndarray) -> np.ndarray:
    """RS gain c(t) = -(L12/L22) [1 - mu g det/L22]^-1, with condition checks."""
    slack = 1.0 - model.mu * g * model.l11
    bad = np.flatnonzero(slack <= MARGIN)
    if bad.size:
        i = bad[0]
        raise ConditionViolated(f"(C_mu**) fails: 1 - mu g L11 = {slack[i]:.3g} at t = {model.t[i]:.6g}")
    denom = model.l22 - model.mu * g * model.det
    bad = np.flatnonzero(denom <= MARGIN)
    if bad.size:
        i = bad[0]
        raise ConditionViolated(f"L22 - mu g det L = {denom[i]:.3g} at t = {model.t[i]:.6g}")
    return -model.l12 / denom


def rs_gains(model: ValidatedModel, gammaXX: Optional[np.ndarray] = None,
             form: str = "substituted") -> FilterGains:
    """Gains of the RS-optimal filter. They depend only on t, never on T."""
    g = _gamma(model, gammaXX)
    if np.any(g < -MARGIN):
        raise ConditionViolated("(C_mu**) fails: negative gammaXX")
    c = rs_feedback(model, g)
    k = rs_closed_loop_factor(model.mu, g, model.l11, model.l22, model.det, form)
    return FilterGains("RS", model.grid, c, model.a + g * k - model.A ** 2 * g, model.A * g)


def apply_filter(gains: FilterGains, dY: np.ndarray, forcing: Optional[np.ndarray] = None):
    """Run the filter on observation increments.

    ``dY`` has N entries along its last axis; leading axes index independent
    paths. ``forcing`` (same shape, one value per step) adds an extra
    left-point drift term forcing_i * dt before propagation. Returns (h, Z),
    each with N+1 nodes along the last axis.
    """
    dY = np.asarray(dY, dtype=float)
    N = gains.grid.N
    if dY.shape[-1] != N:
        raise ValueError(f"expected {N} increments, got {dY.shape[-1]}")
    f = gains.step_factors()
    inj = gains.obsgain[:-1] * dY
    if forcing is not None:
        inj = inj + np.asarray(forcing)[..., :N] * gains.grid.dt
    Z = np.empty(dY.shape[:-1] + (N + 1,))
    Z[..., 0] = 0.0
    z = np.zeros(dY.shape[:-1])
    for i in range(N):
        z = f[i] * (z + inj[..., i])
        Z[..., i + 1] = z
    if not np.all(np.isfinite(Z)):
        raise NonFinite("filter state overflowed")
    return gains.c * Z, Z


def extract_kernel(gains: FilterGains) -> TriKernel:
    """Impulse-response kernel H(t_i, s_j) = c_i exp(S_i - S_j) obsgain_j, j <= i.

    The filter output at node i is sum_{j < i} H[i, j] dY_j; the diagonal
    holds the continuous-time limit c(t) obsgain(t).
    """
    S = gains.log_transition()
    expo = S[:, None] - S[None, :]
    tri = np.tril(np.ones(expo.shape, dtype=bool))
    expo = np.where(tri, expo, -np.inf)
    H = gains.c[:, None] * np.exp(expo) * gains.obsgain[None, :]
    if not np.all(np.isfinite(H)):
        raise NonFinite("kernel overflowed")
    return TriKernel(gains.grid, H)


def convolve_kernel(kernel: TriKernel, dY: np.ndarray) -> np.ndarray:
    """h_i = sum_{j<i} H[i, j] dY_j (strictly causal, matching apply_filter)."""
    H = np.tril(kernel.values, k=-1)[:, :-1]
    return np.asarray(dY) @ H.T


def kalman_filter(model: ValidatedModel, dY: np.ndarray) -> KalmanOutput:
    """Conditional mean pi_t(X) and innovation increments dnu_i = dY_i - A_i pi_i dt."""
    gains = risk_neutral_gains(model)
    _, pi = apply_filter(gains, dY)
    nu = np.asarray(dY) - model.A[:-1] * pi[..., :-1] * model.grid.dt
    return KalmanOutput(pi, nu)


def risk_neutral_h(model: ValidatedModel, kal: KalmanOutput) -> np.ndarray:
    return -(model.l12 / model.l22) * kal.piX


def open_loop_gains(model: ValidatedModel, gammaXX: Optional[np.ndarray] = None) -> FilterGains:
    """Dynamics of Z^h for an arbitrary (open-loop) h.

    dZ = [a - g (A^2 - mu L11)] Z dt + mu g L12 h dt + g A dY. The h-term
    enters :func:`apply_filter` as a forcing via :func:`open_loop_z`.
    """
    g = _gamma(model, gammaXX)
    q = model.A ** 2 - model.mu * model.l11
    return FilterGains("OpenLoop", model.grid, np.ones_like(g), model.a - g * q, model.A * g)


def open_loop_z(model: ValidatedModel, h: np.ndarray, dY: np.ndarray,
                gammaXX: Optional[np.ndarray] = None) -> np.ndarray:
    g = _gamma(model, gammaXX)
    gains = open_loop_gains(model, g)
    forcing = model.mu * g[:-1] * model.l12[:-1] * np.asarray(h)[..., :-1]
    return apply_filter(gains, dY, forcing)[1]
