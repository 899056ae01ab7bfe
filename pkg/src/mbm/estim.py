"""
Quadratic-variation statistics and the two Hurst estimators.

Global: the ratio S_n = V(B;1)^n / V(B;2)^n of quadratic variations at lags
1 and 2 and the estimate -ln(S_n) / (2 ln 2) of min h.

Local: the mean of psi(x, y) = |x + y| / (|x| + |y|) over consecutive
filtered increments in a window around t, mapped back through the inverse
of Lambda(H) = E[psi] under fBm with index H.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegeneratePath, DomainError, EmptyWindow, OutOfRange, ParameterDomainError
from .synth import PathSample

__all__ = [
    "FilterSpec",
    "A1",
    "A2",
    "get_filter",
    "LocalEstimateConfig",
    "HminEstimate",
    "LocalEstimate",
    "filter_increment",
    "filter_increments",
    "quad_variation",
    "ratio_stat",
    "hmin_from_ratio",
    "hmin_estimate",
    "psi",
    "rho_filter",
    "lambda_of_rho",
    "lambda_of_H",
    "LambdaTable",
    "lambda_table",
    "lambda_inverse",
    "local_window",
    "local_estimate",
]

HMIN_CLAMP = 1e-6
LAMBDA_EPS = 1e-4
TABLE_SIZE = 512
QUAD_NODES = 64


@dataclass(frozen=True, init=False)
class FilterSpec:
    """Filter coefficients a_0..a_q of order m.

    The order is the smallest m with sum_j j^m a_j != 0; every lower moment
    must vanish and m >= 1. Passing ``order`` asserts it.
    """

    coeffs: tuple[float, ...]
    order: int = 0

    def __init__(self, coeffs: Sequence[float], order: int | None = None):
        a = tuple(float(c) for c in coeffs)
        if len(a) < 2:
            raise ParameterDomainError("filter", "needs at least two coefficients")
        found = _filter_order(a)
        if found < 1:
            raise ParameterDomainError("filter", f"coefficients {a} do not sum to zero")
        if order is not None and order != found:
            raise ParameterDomainError(
                "filter", f"coefficients {a} have order {found}, not {order}"
            )
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "order", found)

    @property
    def q(self) -> int:
        return len(self.coeffs) - 1


def _filter_order(a) -> int:
    j = np.arange(len(a), dtype=float)
    arr = np.asarray(a)
    tol = 1e-12 * float(np.sum(np.abs(arr)))
    for m in range(len(a) + 1):
        moment = float(np.sum(j**m * arr))
        if abs(moment) > tol * max(1.0, float(len(a)) ** m):
            return m
    # a nonzero vector always has a nonvanishing moment of order <= q
    raise ParameterDomainError("filter", f"coefficients {tuple(a)} are all zero")


A1 = FilterSpec((-1.0, 1.0), order=1)
A2 = FilterSpec((1.0, -2.0, 1.0), order=2)
_NAMED = {"a1": A1, "a2": A2}


def get_filter(name: str) -> FilterSpec:
    try:
        return _NAMED[name.lower()]
    except KeyError:
        raise ParameterDomainError("filter", f"unknown filter {name!r}; use a1 or a2") from None


@dataclass(frozen=True)
class LocalEstimateConfig:
    t: float
    alpha: float
    filter: FilterSpec = A2

    def __post_init__(self):
        if not (0.0 < self.t < 1.0):
            raise ParameterDomainError("t", f"must lie in (0, 1), got {self.t!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ParameterDomainError("alpha", f"must lie in (0, 1), got {self.alpha!r}")


class HminEstimate(NamedTuple):
    ratio: float
    raw: float
    clamped: float


class LocalEstimate(NamedTuple):
    h_hat: float
    window_count: int
    flagged: bool


def filter_increments(path: PathSample, a: FilterSpec) -> np.ndarray:
    """All generalized increments sum_j a_j B_{(i+j)/n}, i = 0..n-q."""
    if path.n < a.q:
        raise DomainError(f"path with n={path.n} too short for filter of length {a.q + 1}")
    v = path.values
    m = path.n - a.q + 1
    out = np.zeros(m)
    for j, aj in enumerate(a.coeffs):
        out += aj * v[j : j + m]
    return out


def filter_increment(path: PathSample, a: FilterSpec, i: int) -> float:
    if not (0 <= i <= path.n - a.q):
        raise DomainError(f"index {i!r} outside [0, {path.n - a.q}]")
    return math.fsum(aj * path.values[i + j] for j, aj in enumerate(a.coeffs))


def quad_variation(path: PathSample, k: int) -> float:
    """V(B;k)^n = sum_{i=0}^{n-k} (B_{(i+k)/n} - B_{i/n})^2."""
    if int(k) != k or k < 1 or path.n < k:
        raise DomainError(f"need 1 <= k <= n, got k={k!r}, n={path.n}")
    d = path.values[k:] - path.values[:-k]
    return float(np.dot(d, d))


def ratio_stat(path: PathSample) -> float:
    v2 = quad_variation(path, 2)
    if v2 == 0.0:
        raise DegeneratePath("lag-2 quadratic variation is zero")
    return quad_variation(path, 1) / v2


def hmin_from_ratio(s: float) -> HminEstimate:
    if not (s > 0.0):
        raise DegeneratePath(f"ratio statistic must be positive, got {s!r}")
    raw = -math.log(s) / (2.0 * math.log(2.0))
    clamped = min(max(raw, HMIN_CLAMP), 1.0 - HMIN_CLAMP)
    return HminEstimate(s, raw, clamped)


def hmin_estimate(path: PathSample) -> HminEstimate:
    """Global regularity estimate -ln(S_n) / (2 ln 2), raw and clamped to (0, 1)."""
    return hmin_from_ratio(ratio_stat(path))


def psi(x, y):
    """|x + y| / (|x| + |y|); scalar or elementwise on arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    den = np.abs(x) + np.abs(y)
    if np.any(den == 0.0):
        raise DomainError("psi is undefined at (0, 0)")
    out = np.abs(x + y) / den
    return float(out) if out.ndim == 0 else out


def _gamma_filter(H: float, a: FilterSpec, lag: int) -> float:
    c = np.asarray(a.coeffs)
    j = np.arange(len(c))
    dist = np.abs(lag + j[None, :] - j[:, None]).astype(float)
    return -0.5 * float(np.sum(np.outer(c, c) * dist ** (2.0 * H)))


def rho_filter(H: float, a: FilterSpec, lag: int) -> float:
    """Correlation of filtered fBm increments ``lag`` steps apart.

    Does not depend on the grid resolution, by self-similarity.
    """
    if not (0.0 < H < 1.0):
        raise DomainError(f"H must lie in (0, 1), got {H!r}")
    if int(lag) != lag or lag < 0:
        raise DomainError(f"lag must be a non-negative integer, got {lag!r}")
    if lag == 0:
        return 1.0
    return _gamma_filter(H, a, int(lag)) / _gamma_filter(H, a, 0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(QUAD_NODES)


def lambda_of_rho(rho: float) -> float:
    """E[psi(X, Y)] for a standard bivariate normal pair with correlation rho.

    psi is homogeneous of degree 0, so writing (X, Y) = A (cos th, sin th) R
    the radius integrates out and E[psi] = (1/pi) int_0^pi psi(A u(th)) dth.
    The integrand is smooth between the angles where X, Y or X + Y vanish;
    each piece is integrated with 64-node Gauss-Legendre.
    """
    if rho >= 1.0:
        return 1.0
    if rho <= -1.0:
        return 0.0
    s = math.sqrt(1.0 - rho * rho)
    cuts = {0.0, math.pi, 0.5 * math.pi}
    # Y = rho cos + s sin = 0 and X + Y = (1 + rho) cos + s sin = 0
    for c0 in (rho, 1.0 + rho):
        cuts.add(math.atan2(-c0, s) % math.pi)
    edges = sorted(cuts)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 0.0:
            continue
        th = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
        x = np.cos(th)
        y = rho * x + s * np.sin(th)
        total += 0.5 * (hi - lo) * float(np.dot(_GL_WEIGHTS, np.abs(x + y) / (np.abs(x) + np.abs(y))))
    return total / math.pi


def lambda_of_H(H: float, a: FilterSpec = A2) -> float:
    """Lambda(H) = E[psi(D_0, D_1)] for consecutive filtered fBm increments."""
    return lambda_of_rho(rho_filter(H, a, 1))


@dataclass(frozen=True, eq=False)
class LambdaTable:
    """Monotone table H -> Lambda(H) used to bracket the inversion."""

    filter: FilterSpec
    H: np.ndarray
    values: np.ndarray

    @property
    def lo(self) -> float:
        return float(self.values[0])

    @property
    def hi(self) -> float:
        return float(self.values[-1])


@lru_cache(maxsize=8)
def lambda_table(a: FilterSpec = A2, size: int = TABLE_SIZE) -> LambdaTable:
    H = np.linspace(LAMBDA_EPS, 1.0 - LAMBDA_EPS, size)
    vals = np.array([lambda_of_H(h, a) for h in H])
    if not np.all(np.diff(vals) > 0.0):
        raise ArithmeticError(f"Lambda is not strictly increasing for filter {a.coeffs}")
    H.setflags(write=False)
    vals.setflags(write=False)
    return LambdaTable(a, H, vals)


def lambda_inverse(v: float, a: FilterSpec = A2, table: LambdaTable | None = None,
                   tol: float = 1e-9) -> float:
    """H in (0, 1) with Lambda(H) = v, by bisection bracketed from the table.

    Raises :class:`OutOfRange` when v is outside (Lambda(1e-4), Lambda(1 - 1e-4)).
    """
    tab = table if table is not None else lambda_table(a)
    if not (tab.lo < v < tab.hi):
        raise OutOfRange(v, tab.lo, tab.hi)
    k = int(np.searchsorted(tab.values, v))
    lo, hi = float(tab.H[k - 1]), float(tab.H[k])
    # Lambda is Lipschitz on the table range, so a 1e-13 bracket is far inside tol
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        val = lambda_of_H(mid, tab.filter)
        if val == v:
            return mid
        if val < v:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    if abs(lambda_of_H(mid, tab.filter) - v) > tol:
        raise ArithmeticError(f"Lambda inversion did not reach tolerance {tol} at v={v!r}")
    return mid


def local_window(n: int, t: float, alpha: float, q: int) -> np.ndarray:
    """Indices i in [0, n-q-1] with |i/n - t| <= n^-alpha (ties included)."""
    i = np.arange(0, n - q)
    return i[np.abs(i / n - t) <= n ** (-alpha)]


def local_estimate(path: PathSample, cfg: LocalEstimateConfig,
                   table: LambdaTable | None = None) -> LocalEstimate:
    """Ratio-type estimate of h(t) from psi over consecutive filtered increments.

    When the window mean lies outside the attainable range of Lambda the
    estimate is clamped to the nearest end of the table and flagged.
    """
    a = cfg.filter
    idx = local_window(path.n, cfg.t, cfg.alpha, a.q)
    if idx.size == 0:
        raise EmptyWindow(
            f"no index i in [0, {path.n - a.q - 1}] with |i/n - {cfg.t}| <= "
            f"{path.n}^-{cfg.alpha} = {path.n ** (-cfg.alpha):.6g}"
        )
    d = filter_increments(path, a)
    mean = float(np.mean(psi(d[idx], d[idx + 1])))
    tab = table if table is not None else lambda_table(a)
    try:
        return LocalEstimate(lambda_inverse(mean, a, tab), int(idx.size), False)
    except OutOfRange:
        end = tab.H[0] if mean <= tab.lo else tab.H[-1]
        return LocalEstimate(float(end), int(idx.size), True)
