"""Cramer transform of the path-weight law and branching random walk growth.

Edge weights are ``W = log|theta(L)|`` with ``L`` drawn from the observed
label law. Weights are finitely supported, so the log-MGF is a log-sum-exp
and the Legendre transform reduces to a one-dimensional root search on the
tilted mean. Labels with theta = 0 give weight ``-inf``; their mass is kept
apart and the MGF is then only defined for ``y >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .model import ModelParams, derive_label_quantities, observed_label_dist

BISECT_ITERS = 200
MERGE_TOL = 1e-12


@dataclass(frozen=True)
class WeightDistribution:
    values: tuple[float, ...]
    probs: tuple[float, ...]
    neg_inf_mass: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        ps = np.asarray(self.probs, dtype=float)
        if vals.shape != ps.shape:
            raise ValueError("values and probs differ in length")
        if np.any(~np.isfinite(vals)):
            raise ValueError("finite atoms only; put -inf mass in neg_inf_mass")
        if np.any(ps <= 0) or self.neg_inf_mass < 0:
            raise ValueError("atom probabilities must be positive")
        if abs(ps.sum() + self.neg_inf_mass - 1) > 1e-9:
            raise ValueError(f"probabilities sum to {ps.sum() + self.neg_inf_mass}")
        if len(vals) == 0:
            raise ValueError("weight law has no finite atoms")
        # sort ascending and merge atoms equal up to round-off
        order = np.argsort(vals, kind="stable")
        vals, ps = vals[order], ps[order]
        gap = np.diff(vals) > MERGE_TOL * np.maximum(1.0, np.abs(vals[1:]))
        group = np.concatenate([[0], np.cumsum(gap)])
        merged = np.bincount(group, weights=ps)
        uniq = vals[np.concatenate([[0], np.flatnonzero(gap) + 1])]
        object.__setattr__(self, "values", tuple(float(v) for v in uniq))
        object.__setattr__(self, "probs", tuple(float(p) for p in merged))

    @classmethod
    def from_params(cls, params: ModelParams) -> "WeightDistribution":
        q = derive_label_quantities(params)
        m = observed_label_dist(params).as_array()
        w = q.weight
        fin = np.isfinite(w) & (m > 0)
        ninf = float(m[np.isneginf(w) & (m > 0)].sum())
        return cls(tuple(w[fin]), tuple(m[fin]), ninf)

    @property
    def w(self) -> np.ndarray:
        return np.array(self.values)

    @property
    def p(self) -> np.ndarray:
        return np.array(self.probs)

    @property
    def w_min(self) -> float:
        return self.values[0]

    @property
    def w_max(self) -> float:
        return self.values[-1]

    @property
    def mean(self) -> float:
        """Mean weight; ``-inf`` when theta = 0 labels carry mass."""
        if self.neg_inf_mass > 0:
            return -math.inf
        return float(np.dot(self.p, self.w))

    def sample(self, rng, size) -> np.ndarray:
        vals = np.append(self.w, -np.inf)
        ps = np.append(self.p, self.neg_inf_mass)
        return vals[rng.choice(len(vals), size=size, p=ps / ps.sum())]


def log_mgf(dist: WeightDistribution, y: float) -> float:
    """``log E[exp(y W)]``."""
    if y == 0:
        return 0.0
    if dist.neg_inf_mass > 0 and y < 0:
        raise ValueError("MGF is infinite for y < 0 when weight -inf has mass")
    return float(logsumexp(y * dist.w, b=dist.p))


def _tilted_mean(dist: WeightDistribution, y: np.ndarray) -> np.ndarray:
    z = np.log(dist.p)[None, :] + y[:, None] * dist.w[None, :]
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return (e @ dist.w) / e.sum(axis=1)


def _objective(dist: WeightDistribution, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # x*y - log phi(y), written as -log sum p exp(y (w - x)) to avoid cancellation
    z = np.log(dist.p)[None, :] + y[:, None] * (dist.w[None, :] - x[:, None])
    return -logsumexp(z, axis=1)


def _solve_tilt(dist: WeightDistribution, x: np.ndarray) -> np.ndarray:
    """y with tilted mean equal to x, for x strictly inside the support hull."""
    lo = -np.ones_like(x)
    hi = np.ones_like(x)
    for _ in range(BISECT_ITERS):
        bad = _tilted_mean(dist, lo) > x
        if not bad.any():
            break
        lo[bad] *= 2
    for _ in range(BISECT_ITERS):
        bad = _tilted_mean(dist, hi) < x
        if not bad.any():
            break
        hi[bad] *= 2
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        below = _tilted_mean(dist, mid) < x
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def cramer_transform(dist: WeightDistribution, x):
    """``h0(x) = sup_y (x y - log E[exp(y W)])``; accepts scalars or arrays.

    Infinite outside ``[w_min, w_max]``; equal to ``-log p`` at a support
    endpoint. With ``-inf`` weight mass the supremum runs over ``y >= 0``
    only, since the MGF diverges for negative ``y``.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full(x.shape, np.inf)
    w, p = dist.w, dist.p
    if len(w) == 1:
        out[x == w[0]] = -math.log(p[0])
    else:
        at_hi = x == w[-1]
        at_lo = x == w[0]
        out[at_hi] = -math.log(p[-1])
        out[at_lo] = -math.log(p[0])
        inside = (x > w[0]) & (x < w[-1])
        if inside.any():
            xi = x[inside]
            y = _solve_tilt(dist, xi)
            out[inside] = _objective(dist, xi, y)
    if dist.neg_inf_mass > 0:
        # restrict to y >= 0: the y = 0 term gives 0, below the finite mean the
        # optimum sits at y -> 0+, i.e. -log(1 - p_-inf)
        finite_mean = float(np.dot(p, w) / p.sum())
        below = x <= finite_mean
        out[below] = -math.log(p.sum())
        out[x < w[0]] = -math.log(p.sum())
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def rate_window(dist: WeightDistribution, lam: float) -> tuple[float, float]:
    """Points around the mean where ``h0`` first reaches ``log(lam)``.

    If ``h0`` stays below ``log(lam)`` on one side, that side's bound is
    the support endpoint.
    """
    if not lam > 1:
        raise ValueError(f"lambda must exceed 1, got {lam}")
    target = math.log(lam)
    mean = dist.mean

    def crossing(a, b):
        # h0 - target changes sign between a (below) and b (at or above)
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (a + b)
            if cramer_transform(dist, mid) < target:
                a = mid
            else:
                b = mid
            if abs(b - a) <= 1e-12:
                break
        return 0.5 * (a + b)

    if dist.neg_inf_mass > 0:
        # h0 is non-decreasing here and never below -log(1 - p_-inf)
        w_minus = -math.inf
        start = dist.w_min
        if cramer_transform(dist, start) >= target:
            w_plus = -math.inf
        elif cramer_transform(dist, dist.w_max) < target:
            w_plus = dist.w_max
        else:
            w_plus = crossing(start, dist.w_max)
        return w_minus, w_plus
    if cramer_transform(dist, dist.w_max) < target:
        w_plus = dist.w_max
    else:
        w_plus = crossing(mean, dist.w_max)
    if cramer_transform(dist, dist.w_min) < target:
        w_minus = dist.w_min
    else:
        w_minus = _crossing_down(dist, mean, target)
    return w_minus, w_plus


def _crossing_down(dist: WeightDistribution, mean: float, target: float) -> float:
    a, b = dist.w_min, mean  # h0(a) >= target > h0(b)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (a + b)
        if cramer_transform(dist, mid) < target:
            b = mid
        else:
            a = mid
        if abs(b - a) <= 1e-12:
            break
    return 0.5 * (a + b)


def rate_h(dist: WeightDistribution, lam: float, x):
    """``h0`` restricted to the window ``[w-, w+]``, ``+inf`` outside."""
    w_minus, w_plus = rate_window(dist, lam)
    h0 = cramer_transform(dist, x)
    xa = np.asarray(x, dtype=float)
    out = np.where((xa >= w_minus) & (xa <= w_plus), h0, np.inf)
    return float(out) if np.ndim(x) == 0 else out


def growth_prediction(dist: WeightDistribution, lam: float, x):
    """Almost-sure growth rate ``lam * exp(-h(x))`` of the count of paths above ``x d``."""
    return lam * np.exp(-rate_h(dist, lam, x))


def sup_linear_minus_rate(dist: WeightDistribution, slope: float = 2.0,
                          points: int = 20001, truncate_lam: float | None = None
                          ) -> tuple[float, float]:
    """``max_x (slope * x - h0(x))`` by grid search plus local refinement.

    With ``truncate_lam`` the truncated rate ``h`` replaces ``h0``.
    Returns ``(value, argmax)``.
    """
    lo, hi = dist.w_min, dist.w_max
    if lo == hi:
        return slope * lo - cramer_transform(dist, lo), lo

    def f(x):
        h = rate_h(dist, truncate_lam, x) if truncate_lam else cramer_transform(dist, x)
        return slope * np.asarray(x) - h

    grid = np.linspace(lo, hi, points)
    vals = f(grid)
    k = int(np.argmax(vals))
    best, arg = float(vals[k]), float(grid[k])
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    res = minimize_scalar(lambda t: -float(f(t)), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    if res.success and -res.fun > best:
        best, arg = float(-res.fun), float(res.x)
    return best, arg


def chi_growth_rate(params: ModelParams) -> float:
    """``log lam + sup_x (2x - h(x))``, the exponential growth rate of chi(d)."""
    dist = WeightDistribution.from_params(params)
    lam = params.mean_degree
    value, _ = sup_linear_minus_rate(dist, 2.0, truncate_lam=lam if lam > 1 else None)
    return math.log(lam) + value


@dataclass(frozen=True)
class GrowthRow:
    d: int
    mean_root: float
    geo_mean_root: float
    surviving: int
    zero_fraction: float


def empirical_growth(params: ModelParams, x: float, d_max: int, trials: int, seed,
                     max_attempts: int | None = None) -> list[GrowthRow]:
    """Monte Carlo ``N+(d, x)^(1/d)`` on Poi(lambda) trees with i.i.d. weights.

    ``N+(d, x)`` counts generation-``d`` nodes whose root-path weight sum is
    at least ``x d``. Extinct trials are discarded and redrawn until
    ``trials`` trees survive to ``d_max``. Per ``d`` the rows report the
    arithmetic mean of ``N+^(1/d)`` over those trees and the geometric mean
    over trees with ``N+ >= 1``; ``zero_fraction`` is the share with
    ``N+ = 0``, which the geometric mean leaves out.
    """
    lam = params.mean_degree
    if not lam > 1:
        raise ValueError(f"need lambda > 1, got {lam}")
    if d_max > 14:
        raise ValueError("d_max above 14 is not supported (lambda^d nodes)")
    dist = WeightDistribution.from_params(params)
    rng = np.random.default_rng(seed)
    max_attempts = max_attempts or 50 * trials
    counts = []
    attempts = 0
    while len(counts) < trials:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(f"only {len(counts)} of {trials} trials survived")
        sums = np.zeros(1)
        row = []
        for d in range(1, d_max + 1):
            kids = rng.poisson(lam, size=len(sums))
            sums = np.repeat(sums, kids) + dist.sample(rng, int(kids.sum()))
            if len(sums) == 0:
                break
            row.append(int(np.count_nonzero(sums >= x * d)))
        if len(row) == d_max:
            counts.append(row)
    c = np.array(counts, dtype=float)
    rows = []
    for d in range(1, d_max + 1):
        col = c[:, d - 1]
        root = col ** (1.0 / d)
        pos = col[col > 0]
        geo = float(np.exp(np.mean(np.log(pos)) / d)) if len(pos) else 0.0
        rows.append(GrowthRow(d, float(root.mean()), geo, len(col), float(np.mean(col == 0))))
    return rows


def tabulate_rate(dist: WeightDistribution, lam: float, xs) -> list[tuple[float, float, float, float]]:
    """Rows ``(x, h0, h, prediction)`` for plotting."""
    xs = np.asarray(xs, dtype=float)
    h0 = cramer_transform(dist, xs)
    h = rate_h(dist, lam, xs)
    pred = lam * np.exp(-h)
    return [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(xs, h0, h, pred)]
