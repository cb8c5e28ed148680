"""Seeded Monte Carlo simulation of (X, Y) and evaluation of exponential costs.

Reproducibility contract: path k of a run with master seed ``seed`` is drawn
from its own Philox-4x64 stream keyed by the 128-bit value (k << 64) | seed,
so its increments depend on (seed, k) only. Paths are processed in blocks of
fixed size; block summaries are merged in block order, which makes every
estimate bit-identical whatever the number of worker threads.

Gaussian increments come from 53-bit uniforms mapped through the inverse
normal CDF.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .cameron_martin import conditional_laplace_log, trapz
from .errors import NonFinite
from .filters import FilterGains, apply_filter, kalman_filter, risk_neutral_gains
from .model import SymMat2, ValidatedModel

BLOCK = 1000
MASK64 = (1 << 64) - 1


def path_key(seed: int, k: int) -> int:
    return ((k & MASK64) << 64) | (seed & MASK64)


def path_normals(seed: int, k: int, size: int) -> np.ndarray:
    """Standard normals for path k (inverse-CDF of Philox uniforms)."""
    rng = np.random.Generator(np.random.Philox(key=path_key(seed, k)))
    u = rng.random(size) + 2.0 ** -54
    return ndtri(u)


@dataclass(frozen=True)
class PathBundle:
    seed: int  # 128-bit Philox key of this path
    dB: np.ndarray
    dBt: np.ndarray
    X: np.ndarray
    Y: np.ndarray


@dataclass(frozen=True)
class CostSample:
    value: np.ndarray
    logmag: np.ndarray


@dataclass
class McEstimate:
    mean: float
    stderr: float
    n: int
    tail_weight: float = float("nan")

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n,
                "tail_weight": self.tail_weight}


class RunningStats:
    """Mergeable mean/variance accumulator (pairwise Chan-Golub-LeVeque update)."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.sq_sum = 0.0
        self.sq_max = 0.0

    def add_block(self, x: np.ndarray):
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            return
        other = RunningStats()
        other.n = x.size
        other.mean = float(np.mean(x))
        other.m2 = float(np.sum((x - other.mean) ** 2))
        sq = x * x
        other.sq_sum = float(np.sum(sq))
        other.sq_max = float(np.max(sq))
        self.merge(other)

    def merge(self, other: "RunningStats"):
        if other.n == 0:
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n
        self.sq_sum += other.sq_sum
        self.sq_max = max(self.sq_max, other.sq_max)

    def estimate(self) -> McEstimate:
        if self.n == 0:
            return McEstimate(float("nan"), float("nan"), 0)
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        tail = self.sq_max / self.sq_sum if self.sq_sum > 0 else 0.0
        return McEstimate(self.mean, math.sqrt(var / self.n), self.n, tail)


def simulate_block(model: ValidatedModel, seed: int, start: int, count: int,
                   zero: bool = False):
    """Euler-Maruyama paths start..start+count-1; returns (dB, dBt, X, Y)."""
    N = model.grid.N
    dt = model.grid.dt
    if zero:
        dB = np.zeros((count, N))
        dBt = np.zeros((count, N))
    else:
        sd = math.sqrt(dt)
        draws = np.stack([path_normals(seed, k, 2 * N) for k in range(start, start + count)])
        dB = draws[:, :N] * sd
        dBt = draws[:, N:] * sd
    X = np.empty((count, N + 1))
    X[:, 0] = 0.0
    growth = 1.0 + model.a[:-1] * dt
    x = np.zeros(count)
    for i in range(N):
        x = growth[i] * x + dB[:, i]
        X[:, i + 1] = x
    dY = model.A[:-1] * X[:, :-1] * dt + dBt
    Y = np.concatenate([np.zeros((count, 1)), np.cumsum(dY, axis=1)], axis=1)
    return dB, dBt, X, Y


def simulate_paths(model: ValidatedModel, n: int, seed: int,
                   zero: bool = False) -> Iterator[PathBundle]:
    """Stream of n simulated paths, one PathBundle each."""
    if n < 1:
        raise ValueError("n must be at least 1")
    for start in range(0, n, BLOCK):
        count = min(BLOCK, n - start)
        dB, dBt, X, Y = simulate_block(model, seed, start, count, zero)
        for r in range(count):
            yield PathBundle(path_key(seed, start + r), dB[r], dBt[r], X[r], Y[r])


def path_cost(model: ValidatedModel, X: np.ndarray, h: np.ndarray) -> CostSample:
    """mu exp{mu/2 int (X, h) L (X, h)' ds}, trapezoid in time, per path."""
    with np.errstate(over="ignore", invalid="ignore"):
        quad = model.l11 * X * X + 2.0 * model.l12 * X * h + model.l22 * h * h
        logmag = 0.5 * model.mu * trapz(quad, model.grid.dt)
    if not np.all(np.isfinite(logmag)):
        raise NonFinite("path cost exponent is not finite")
    return CostSample(model.mu * np.exp(logmag), logmag)


def _observations(Y: np.ndarray) -> np.ndarray:
    return np.diff(Y, axis=-1)


def _run_blocks(n: int, threads: int, fn):
    blocks = [(s, min(BLOCK, n - s)) for s in range(0, n, BLOCK)]
    if threads <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


@dataclass
class CompareResult:
    seed: int
    estimates: dict
    paired: dict  # (name_a, name_b) -> McEstimate of cost_a - cost_b
    per_path: Optional[dict] = field(default=None, repr=False)


def mc_compare(model: ValidatedModel, strategies: Sequence, n: int, seed: int,
               threads: int = 1, keep_paths: bool = False) -> CompareResult:
    """Estimate the signed criterion for each strategy with common random numbers.

    ``strategies`` is a sequence of (name, FilterGains); the string
    "risk-neutral" in place of gains selects the Kalman-Bucy estimate.
    """
    resolved = []
    for name, gains in strategies:
        if isinstance(gains, str):
            if gains != "risk-neutral":
                raise ValueError(f"unknown strategy {gains!r}")
            gains = risk_neutral_gains(model)
        if not isinstance(gains, FilterGains) or gains.grid != model.grid:
            raise ValueError(f"strategy {name!r} is not a filter on the model grid")
        resolved.append((name, gains))
    names = [nm for nm, _ in resolved]
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]

    def block(spec):
        start, count = spec
        _, _, X, Y = simulate_block(model, seed, start, count)
        dY = _observations(Y)
        costs = {nm: path_cost(model, X, apply_filter(g, dY)[0]).value for nm, g in resolved}
        return costs

    results = _run_blocks(n, threads, block)
    stats = {nm: RunningStats() for nm in names}
    pstats = {p: RunningStats() for p in pairs}
    for costs in results:
        for nm in names:
            stats[nm].add_block(costs[nm])
        for a, b in pairs:
            pstats[(a, b)].add_block(costs[a] - costs[b])
    per_path = None
    if keep_paths:
        per_path = {nm: np.concatenate([c[nm] for c in results]) for nm in names}
    return CompareResult(seed, {nm: s.estimate() for nm, s in stats.items()},
                         {p: s.estimate() for p, s in pstats.items()}, per_path)


@dataclass
class CameronMartinCheck:
    lhs: McEstimate
    rhs: McEstimate
    diff: McEstimate

    @property
    def pooled_stderr(self) -> float:
        return math.hypot(self.lhs.stderr, self.rhs.stderr)

    @property
    def gap(self) -> float:
        return abs(self.lhs.mean - self.rhs.mean)


def mc_cameron_martin(model: ValidatedModel, n: int, seed: int, M: SymMat2 | None = None,
                      threads: int = 1) -> CameronMartinCheck:
    """Compare E[path criterion] with E[conditional Laplace right-hand side].

    The estimate h is the risk-neutral filter and the terminal value g is
    h_T; both sides are evaluated on the same simulated paths.
    """
    M = M or SymMat2.zero()
    rn = risk_neutral_gains(model)

    def block(spec):
        start, count = spec
        _, _, X, Y = simulate_block(model, seed, start, count)
        dY = _observations(Y)
        h = apply_filter(rn, dY)[0]
        g = h[:, -1]
        lhs_log = 0.5 * model.mu * M.quad(X[:, -1], g) + path_cost(model, X, h).logmag
        rhs_log = conditional_laplace_log(model, M, h, g, dY)
        return model.mu * np.exp(lhs_log), model.mu * np.exp(rhs_log)

    lhs, rhs, diff = RunningStats(), RunningStats(), RunningStats()
    for lv, rv in _run_blocks(n, threads, block):
        lhs.add_block(lv)
        rhs.add_block(rv)
        diff.add_block(lv - rv)
    return CameronMartinCheck(lhs.estimate(), rhs.estimate(), diff.estimate())
