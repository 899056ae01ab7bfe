"""
Exact Gaussian synthesis of mBm paths on the grid {i/n}.

The covariance matrix on t = 1/n, ..., 1 is factorized once by Cholesky
and reused across replicates. Standard normals come from a Philox
counter-based generator keyed by ``(master_seed, replicate)``, so each
replicate is an independent stream and any replicate can be regenerated
without drawing the others.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .errors import DomainError, NotPositiveSemidefinite
from .hurst import HurstFunction
from .kernel import _grid, log_c

__all__ = [
    "PathSample",
    "build_cov_matrix",
    "cholesky_factor",
    "cached_factor",
    "normal_stream",
    "sample_path",
]

logger = logging.getLogger(__name__)

JITTER_START = 1e-12
JITTER_ESCALATIONS = 3
_U64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class PathSample:
    """One realized trajectory: ``values[i]`` is B at t = i/n, values[0] = 0."""

    n: int
    values: np.ndarray
    hurst_spec: str
    seed: int | None = None
    replicate: int | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.shape[0] != self.n + 1:
            raise DomainError(f"expected {self.n + 1} values, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def scaled(self, factor: float) -> "PathSample":
        return PathSample(self.n, self.values * factor, self.hurst_spec, self.seed, self.replicate)


def build_cov_matrix(f: HurstFunction, n: int) -> np.ndarray:
    """Covariance matrix M[i-1, j-1] = R(i/n, j/n) for i, j = 1..n.

    Entries are computed for j >= i and mirrored, so M is exactly symmetric.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    g = _grid(f, n)
    idx = np.arange(1, n + 1)
    I, J = idx[:, None], idx[None, :]
    hi, hj = g.h[I], g.h[J]
    hij = 0.5 * (hi + hj)
    if g.constant:
        factor = 0.5
    else:
        factor = 0.5 * np.exp(2.0 * log_c(hij) - g.lc[I] - g.lc[J])
    e = 2.0 * hij
    M = factor * (np.exp(e * g.logt[I]) + np.exp(e * g.logt[J]) - (np.abs(I - J) / n) ** e)
    upper = np.triu(M)
    return upper + np.triu(upper, 1).T


def cholesky_factor(M: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = M.

    On failure a diagonal jitter of 1e-12 * max(diag M) is added and
    escalated tenfold up to three times before giving up.
    """
    M = np.asarray(M, dtype=float)
    try:
        return linalg.cholesky(M, lower=True, check_finite=True)
    except linalg.LinAlgError:
        pass
    scale = float(np.max(np.diag(M)))
    jitter = JITTER_START * scale
    eye = np.eye(M.shape[0])
    for attempt in range(JITTER_ESCALATIONS + 1):
        try:
            L = linalg.cholesky(M + jitter * eye, lower=True)
        except linalg.LinAlgError:
            jitter *= 10.0
            continue
        logger.warning("cholesky needed diagonal jitter %.3e (attempt %d)", jitter, attempt)
        return L
    raise NotPositiveSemidefinite(
        f"covariance matrix of size {M.shape[0]} is not positive definite "
        f"even with jitter {jitter / 10.0:.3e}"
    )


@lru_cache(maxsize=4)
def cached_factor(f: HurstFunction, n: int) -> np.ndarray:
    """Cholesky factor of :func:`build_cov_matrix`, computed once per (f, n)."""
    L = cholesky_factor(build_cov_matrix(f, n))
    L.setflags(write=False)
    return L


def normal_stream(master_seed: int, replicate: int) -> np.random.Generator:
    """Independent Philox stream for one replicate."""
    if not (0 <= master_seed <= _U64):
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {master_seed!r}")
    if not (0 <= replicate <= _U64):
        raise DomainError(f"replicate must be a non-negative integer, got {replicate!r}")
    return np.random.Generator(np.random.Philox(key=np.array([master_seed, replicate], dtype=np.uint64)))


def sample_path(f: HurstFunction, n: int, master_seed: int, replicate: int = 0) -> PathSample:
    """Draw one exact mBm path on {0, 1/n, ..., 1}."""
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    L = cached_factor(f, n)
    z = normal_stream(master_seed, replicate).standard_normal(n)
    values = np.empty(n + 1)
    values[0] = 0.0
    values[1:] = L @ z
    return PathSample(n, values, f.spec, int(master_seed), int(replicate))
