"""Model description, time grid and validation shared by every solver.

The signal and observation are

    dX_t = a(t) X_t dt + dB_t,          X_0 = 0
    dY_t = A(t) X_t dt + dB~_t,         Y_0 = 0

and the criterion weights the pair (X_t, h_t) with a symmetric nonnegative
definite 2x2 matrix Lambda(t). Coefficients may be given as numbers,
callables of time, or arrays sampled on the grid; after validation every
coefficient is a numpy array with one value per grid node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import NonFinite, NonPositiveDefinite, ValidationError, ZeroLambda22

PSD_TOL = 1e-12

Coefficient = Union[float, int, Callable, np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class SymMat2:
    """Symmetric 2x2 matrix ((l11, l12), (l12, l22))."""

    l11: float
    l12: float
    l22: float

    @property
    def det(self) -> float:
        return self.l11 * self.l22 - self.l12 * self.l12

    def as_array(self) -> np.ndarray:
        return np.array([[self.l11, self.l12], [self.l12, self.l22]])

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return self.l11 >= -tol and self.l22 >= -tol and self.det >= -tol

    def quad(self, x, y):
        """Quadratic form (x, y) M (x, y)^T, broadcasting over arrays."""
        return self.l11 * x * x + 2.0 * self.l12 * x * y + self.l22 * y * y

    @classmethod
    def zero(cls) -> "SymMat2":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i*dt, i = 0..N on [0, T]."""

    T: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValidationError(f"horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"step count N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    def index(self, time: float, tol: float = 1e-9) -> int:
        """Index of the node at ``time``; raises if ``time`` is not a node."""
        i = int(round(time / self.dt))
        if i < 0 or i > self.N or abs(i * self.dt - time) > tol * max(1.0, abs(time)):
            raise ValidationError(f"time {time} is not a node of {self}")
        return i

    def truncate(self, n_steps: int) -> "TimeGrid":
        """Sub-grid holding the first ``n_steps`` steps, with identical nodes."""
        if not 1 <= n_steps <= self.N:
            raise ValidationError(f"cannot truncate {self} to {n_steps} steps")
        return TimeGrid(n_steps * self.dt, n_steps)


@dataclass(frozen=True)
class TriKernel:
    """Function of two grid times defined on t_i >= s_j.

    ``values`` is a dense (N+1, N+1) array; entries above the diagonal are
    zero and never read.
    """

    grid: TimeGrid
    values: np.ndarray

    def at(self, t: float, s: float) -> float:
        i, j = self.grid.index(t), self.grid.index(s)
        if j > i:
            raise ValueError(f"kernel is defined for s <= t only, got t={t}, s={s}")
        return float(self.values[i, j])

    def rows(self):
        """Yield (t, s, value) in row-major triangular order."""
        t = self.grid.t
        for i in range(self.grid.N + 1):
            for j in range(i + 1):
                yield t[i], t[j], self.values[i, j]


@dataclass(frozen=True)
class CovarianceSpec:
    """Gaussian signal law sampled on a grid: mean m_i and covariance K[i, j]."""

    grid: TimeGrid
    m: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        n = self.grid.N + 1
        if self.m.shape != (n,) or self.K.shape != (n, n):
            raise ValidationError("covariance samples do not match the grid")
        if not (np.all(np.isfinite(self.m)) and np.all(np.isfinite(np.tril(self.K)))):
            raise NonFinite("covariance samples contain non-finite values")
        if np.any(np.diag(self.K) < -PSD_TOL):
            raise ValidationError("covariance has a negative diagonal entry")


@dataclass(frozen=True)
class ModelSpec:
    """User-facing model description.

    ``Lambda`` is a SymMat2, a callable returning one, or a triple
    ``(l11, l12, l22)`` of coefficients.
    """

    a: Coefficient
    A: Coefficient
    Lambda: object
    mu: float
    T: float


@dataclass(frozen=True)
class ValidatedModel:
    """Model sampled on its grid, with all invariants checked."""

    grid: TimeGrid
    a: np.ndarray
    A: np.ndarray
    l11: np.ndarray
    l12: np.ndarray
    l22: np.ndarray
    mu: float
    det: np.ndarray = field(repr=False)

    @property
    def T(self) -> float:
        return self.grid.T

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def Lambda(self, i: int) -> SymMat2:
        return SymMat2(float(self.l11[i]), float(self.l12[i]), float(self.l22[i]))

    def truncate(self, n_steps: int) -> "ValidatedModel":
        k = n_steps + 1
        return ValidatedModel(
            self.grid.truncate(n_steps), self.a[:k], self.A[:k], self.l11[:k],
            self.l12[:k], self.l22[:k], self.mu, self.det[:k],
        )

    def horizon(self, T: float | None) -> "ValidatedModel":
        """The model restricted to [0, T]; T must be a grid node."""
        if T is None or T == self.T:
            return self
        return self.truncate(self.grid.index(T))

    def with_mu(self, mu: float) -> "ValidatedModel":
        return ValidatedModel(self.grid, self.a, self.A, self.l11, self.l12,
                              self.l22, float(mu), self.det)


def sample(coef: Coefficient, grid: TimeGrid, name: str = "coefficient") -> np.ndarray:
    """Sample a coefficient at the grid nodes."""
    t = grid.t
    if callable(coef):
        try:
            out = np.asarray(coef(t), dtype=float)
        except (TypeError, ValueError):
            out = np.array([float(coef(ti)) for ti in t])
        if out.ndim == 0:
            out = np.full_like(t, float(out))
    elif np.ndim(coef) == 0:
        out = np.full_like(t, float(coef))
    else:
        out = np.asarray(coef, dtype=float)
    if out.shape != t.shape:
        raise ValidationError(f"{name}: expected {t.size} samples, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"{name} is not finite at every grid node")
    return out


def _sample_lambda(Lam, grid: TimeGrid):
    if isinstance(Lam, SymMat2):
        return tuple(sample(v, grid) for v in (Lam.l11, Lam.l12, Lam.l22))
    if callable(Lam):
        mats = [Lam(ti) for ti in grid.t]
        cols = np.array([[m.l11, m.l12, m.l22] for m in mats], dtype=float)
        return tuple(sample(cols[:, k], grid, f"Lambda[{k}]") for k in range(3))
    if isinstance(Lam, (tuple, list)) and len(Lam) == 3:
        return tuple(sample(v, grid, n) for v, n in zip(Lam, ("l11", "l12", "l22")))
    raise ValidationError(f"cannot interpret Lambda of type {type(Lam).__name__}")


def validate_model(spec, grid: TimeGrid | None = None) -> ValidatedModel:
    """Sample ``spec`` on ``grid`` and check every invariant at every node.

    Validating an already validated model returns it unchanged. Small
    negative values (down to -1e-12) from float drift are clamped onto the
    nonnegative-definite cone.

    Raises:
        ZeroLambda22: if Lambda_22(t_i) <= 0 at some node.
        NonPositiveDefinite: if Lambda_11(t_i) < 0 or det Lambda(t_i) < 0.
        NonFinite: if any coefficient is NaN or infinite.
    """
    if isinstance(spec, ValidatedModel):
        return spec
    if grid is None:
        grid = TimeGrid(spec.T, 2000)
    if abs(grid.T - spec.T) > 1e-12 * max(1.0, spec.T):
        raise ValidationError(f"grid horizon {grid.T} differs from model horizon {spec.T}")
    if not np.isfinite(spec.mu):
        raise NonFinite("mu is not finite")

    a = sample(spec.a, grid, "a")
    A = sample(spec.A, grid, "A")
    l11, l12, l22 = _sample_lambda(spec.Lambda, grid)

    bad = np.flatnonzero(l22 <= 0)
    if bad.size:
        i = bad[0]
        raise ZeroLambda22(f"Lambda_22 = {l22[i]} <= 0 at t = {grid.t[i]:.6g}")
    det = l11 * l22 - l12 * l12
    bad = np.flatnonzero((l11 < -PSD_TOL) | (det < -PSD_TOL))
    if bad.size:
        i = bad[0]
        raise NonPositiveDefinite(
            f"Lambda(t={grid.t[i]:.6g}) = ((%g, %g), (%g, %g)) is not nonnegative definite"
            % (l11[i], l12[i], l12[i], l22[i])
        )
    l11 = np.maximum(l11, 0.0)
    det = np.maximum(det, 0.0)
    return ValidatedModel(grid, a, A, l11, l12, l22, float(spec.mu), det)


def midpoints(values: np.ndarray) -> np.ndarray:
    """Linear interpolation of node samples at the half-step times."""
    return 0.5 * (values[:-1] + values[1:])


def transition_Pi(model: ValidatedModel) -> np.ndarray:
    """Solve dPi/dt = a(t) Pi, Pi(0) = 1 on the model grid (RK4)."""
    from .riccati import rk4_scalar

    a = model.a
    Pi = rk4_scalar(lambda y, c: c * y, 1.0, model.grid.dt, a, midpoints(a))
    if not np.all(np.isfinite(Pi)):
        raise NonFinite("transition Pi overflowed")
    return Pi


def ou_covariance(model: ValidatedModel) -> CovarianceSpec:
    """Mean and covariance of the signal X (X_0 = 0) sampled on the grid.

    K(t, s) = Pi_t Pi_s int_0^min(t,s) Pi_r^-2 dr, with the integral by the
    trapezoid rule.
    """
    Pi = transition_Pi(model)
    dt = model.grid.dt
    inv2 = Pi ** -2.0
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (inv2[:-1] + inv2[1:]))])
    n = Pi.size
    idx = np.minimum.outer(np.arange(n), np.arange(n))
    K = np.outer(Pi, Pi) * cum[idx]
    if not np.all(np.isfinite(K)):
        raise NonFinite("OU covariance overflowed")
    return CovarianceSpec(model.grid, np.zeros(n), K)
