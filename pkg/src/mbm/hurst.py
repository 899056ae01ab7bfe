"""
Parametric Hurst functions with analytically known minima.

Every family carries its exact minimum ``h_min``, maximum ``h_max`` and the
structure of the level set ``{t : h(t) = h_min}`` so that estimators can be
checked against ground truth rather than against a numerical search.

Families
--------
const    h(t) = H
plateau  h_min on [a, b], quintic-smoothstep rise to h_max outside
cusp     h_min + c |t - x|^p, capped at ``cap`` (C2 gluing when p >= 3)
sine     base - amp cos(2 pi freq t), minima at j / freq

Spec strings
------------
``const:H=0.5``, ``plateau:hmin=0.3,hmax=0.7,a=0.4,b=0.6``,
``cusp:hmin=0.3,x=0.5,p=2,c=1.5,cap=0.8``, ``sine:base=0.5,amp=0.2,freq=1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError, HurstSpecError, ParameterDomainError

__all__ = [
    "Family",
    "Smoothness",
    "MinSet",
    "HurstFunction",
    "smoothstep",
    "make_constant",
    "make_plateau",
    "make_cusp",
    "make_sine",
    "eval_h",
    "parse_hurst_spec",
]

PLATEAU_BAND = 0.1
CUSP_CAP_BAND = 0.1


class Family(str, Enum):
    CONSTANT = "const"
    PLATEAU = "plateau"
    CUSP = "cusp"
    SINE = "sine"


class Smoothness(str, Enum):
    # C0 is only used for raw min-capped cusps with p in {1, 2}
    C0 = "C0"
    CTWO = "C2"
    CINFINITY = "Cinf"


@dataclass(frozen=True)
class MinSet:
    """Level set of the minimum: disjoint closed intervals or isolated points.

    ``points`` holds ``(x_j, p_j)`` pairs where ``p_j`` is the order of the
    first non-vanishing one-sided derivative at ``x_j``.
    """

    intervals: tuple[tuple[float, float], ...] = ()
    points: tuple[tuple[float, int], ...] = ()

    @property
    def q(self) -> int:
        return len(self.intervals)

    def distance(self, t):
        """Distance from ``t`` (scalar or array) to the set."""
        t = np.asarray(t, dtype=float)
        d = np.full(t.shape, np.inf)
        for lo, hi in self.intervals:
            d = np.minimum(d, np.maximum(0.0, np.maximum(lo - t, t - hi)))
        for x, _ in self.points:
            d = np.minimum(d, np.abs(t - x))
        return d


@dataclass(frozen=True)
class HurstFunction:
    """A Hurst function h: [0, 1] -> (0, 1) with analytic metadata.

    Calling the object evaluates ``h`` elementwise without domain checks;
    use :func:`eval_h` for a checked scalar evaluation.
    """

    family: Family
    params: tuple[tuple[str, float], ...]
    h_min: float
    h_max: float
    min_set: MinSet
    smoothness: Smoothness
    _fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = self._fn(arr)
        if arr.ndim == 0:
            return float(out)
        return out

    @property
    def is_constant(self) -> bool:
        return self.family is Family.CONSTANT

    @property
    def spec(self) -> str:
        body = ",".join(f"{k}={_fmt(v)}" for k, v in self.params)
        return f"{self.family.value}:{body}"

    def __str__(self) -> str:
        return self.spec


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def smoothstep(u):
    """Quintic smoothstep 6u^5 - 15u^4 + 10u^3 with u clipped to [0, 1].

    First and second derivatives vanish at both ends.
    """
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def _check_open_unit(key, value):
    if not (0.0 < value < 1.0) or not math.isfinite(value):
        raise ParameterDomainError(key, f"must lie in (0, 1), got {value!r}")


def make_constant(H: float) -> HurstFunction:
    """Constant Hurst function; the resulting process is fBm."""
    H = float(H)
    _check_open_unit("H", H)

    def fn(t):
        return np.full(t.shape, H)

    return HurstFunction(
        family=Family.CONSTANT,
        params=(("H", H),),
        h_min=H,
        h_max=H,
        min_set=MinSet(intervals=((0.0, 1.0),)),
        smoothness=Smoothness.CINFINITY,
        _fn=fn,
    )


def make_plateau(h_min: float, h_max: float, a: float, b: float) -> HurstFunction:
    """Minimum ``h_min`` on ``[a, b]``, rising to ``h_max`` outside.

    The rise uses a quintic smoothstep on bands of width
    ``w = min(a, 1 - b, 0.1)`` on each side, so the function is C2 and
    equals ``h_max`` on ``[0, a - w]`` and ``[b + w, 1]``.
    """
    h_min, h_max, a, b = float(h_min), float(h_max), float(a), float(b)
    _check_open_unit("hmin", h_min)
    _check_open_unit("hmax", h_max)
    if not h_min < h_max:
        raise ParameterDomainError("hmax", f"must exceed hmin={h_min!r}, got {h_max!r}")
    _check_open_unit("a", a)
    _check_open_unit("b", b)
    if not a < b:
        raise ParameterDomainError("b", f"must exceed a={a!r}, got {b!r}")

    w = min(a, 1.0 - b, PLATEAU_BAND)
    rise = h_max - h_min

    def fn(t):
        return h_min + rise * (smoothstep((a - t) / w) + smoothstep((t - b) / w))

    return HurstFunction(
        family=Family.PLATEAU,
        params=(("hmin", h_min), ("hmax", h_max), ("a", a), ("b", b)),
        h_min=h_min,
        h_max=h_max,
        min_set=MinSet(intervals=((a, b),)),
        smoothness=Smoothness.CTWO,
        _fn=fn,
    )


def make_cusp(h_min: float, x: float, p: int, c: float, h_cap: float) -> HurstFunction:
    """Isolated minimum of order ``p`` at ``x``: ``h_min + c |t - x|^p``.

    The raw power is capped at ``h_cap``. For ``p >= 3`` the cap is glued in
    with a smoothstep on the band ``[d* - w, d*]`` in the distance ``|t - x|``,
    where ``d*`` is the distance at which the raw power reaches the cap and
    ``w = min(0.1, d*/2)``; the result is C2. For ``p`` in {1, 2} the cap is
    a plain minimum and the declared class is C0 whenever the kink (or the
    cap) is actually present on [0, 1].
    """
    h_min, x, c, h_cap = float(h_min), float(x), float(c), float(h_cap)
    if isinstance(p, float) and p.is_integer():
        p = int(p)
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool) or p < 1:
        raise ParameterDomainError("p", f"must be a positive integer, got {p!r}")
    p = int(p)
    _check_open_unit("hmin", h_min)
    _check_open_unit("cap", h_cap)
    if not h_min < h_cap:
        raise ParameterDomainError("cap", f"must exceed hmin={h_min!r}, got {h_cap!r}")
    _check_open_unit("x", x)
    if not (c > 0.0) or not math.isfinite(c):
        raise ParameterDomainError("c", f"must be positive, got {c!r}")

    d_cap = ((h_cap - h_min) / c) ** (1.0 / p)
    capped = d_cap < max(x, 1.0 - x)

    if p >= 3:
        w = min(CUSP_CAP_BAND, d_cap / 2.0)
        start = d_cap - w

        def fn(t):
            d = np.abs(t - x)
            raw = h_min + c * d**p
            glued = raw + (h_cap - raw) * smoothstep((d - start) / w)
            return np.where(d >= d_cap, h_cap, glued)

        smooth = Smoothness.CTWO
    else:

        def fn(t):
            return np.minimum(h_min + c * np.abs(t - x) ** p, h_cap)

        smooth = Smoothness.C0 if (p == 1 or capped) else Smoothness.CINFINITY

    h_max = float(max(fn(np.asarray(0.0)), fn(np.asarray(1.0))))
    return HurstFunction(
        family=Family.CUSP,
        params=(("hmin", h_min), ("x", x), ("p", p), ("c", c), ("cap", h_cap)),
        h_min=h_min,
        h_max=h_max,
        min_set=MinSet(points=((x, p),)),
        smoothness=smooth,
        _fn=fn,
    )


def make_sine(base: float, amp: float, freq: int) -> HurstFunction:
    """``h(t) = base + amp sin(2 pi freq t - pi/2)``; minima at ``j / freq``."""
    base, amp = float(base), float(amp)
    if isinstance(freq, float) and freq.is_integer():
        freq = int(freq)
    if not isinstance(freq, (int, np.integer)) or isinstance(freq, bool) or freq < 1:
        raise ParameterDomainError("freq", f"must be a positive integer, got {freq!r}")
    freq = int(freq)
    if not (amp > 0.0) or not math.isfinite(amp):
        raise ParameterDomainError("amp", f"must be positive, got {amp!r}")
    if not (0.0 < base - amp):
        raise ParameterDomainError("base", f"base - amp must be positive, got {base - amp!r}")
    if not (base + amp < 1.0):
        raise ParameterDomainError("base", f"base + amp must be below 1, got {base + amp!r}")

    def fn(t):
        # identical to base + amp*sin(2 pi f t - pi/2), but exact at the minima
        return base - amp * np.cos(2.0 * np.pi * freq * t)

    points = tuple((j / freq, 2) for j in range(freq + 1))
    return HurstFunction(
        family=Family.SINE,
        params=(("base", base), ("amp", amp), ("freq", freq)),
        h_min=base - amp,
        h_max=base + amp,
        min_set=MinSet(points=points),
        smoothness=Smoothness.CINFINITY,
        _fn=fn,
    )


def eval_h(f: HurstFunction, t: float) -> float:
    """Evaluate ``f`` at a single time ``t`` in [0, 1]."""
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"t must lie in [0, 1], got {t!r}")
    return f(t)


_GRAMMAR = {
    "const": (make_constant, (("H", float),)),
    "plateau": (make_plateau, (("hmin", float), ("hmax", float), ("a", float), ("b", float))),
    "cusp": (make_cusp, (("hmin", float), ("x", float), ("p", int), ("c", float), ("cap", float))),
    "sine": (make_sine, (("base", float), ("amp", float), ("freq", int))),
}


def parse_hurst_spec(text: str) -> HurstFunction:
    """Parse a spec string such as ``plateau:hmin=0.3,hmax=0.7,a=0.4,b=0.6``.

    Keys may appear in any order. Errors name the offending key.
    """
    family, sep, body = text.strip().partition(":")
    family = family.strip().lower()
    if family not in _GRAMMAR:
        raise HurstSpecError("family", f"unknown Hurst family {family!r} in {text!r}")
    if not sep:
        raise HurstSpecError("family", f"missing ':' after family in {text!r}")
    ctor, keys = _GRAMMAR[family]
    types = dict(keys)

    values = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, eq, raw = item.partition("=")
        key = key.strip()
        if not eq:
            raise HurstSpecError(key, f"expected key=value, got {item!r}")
        if key not in types:
            raise HurstSpecError(key, f"unknown key for family {family!r}")
        if key in values:
            raise HurstSpecError(key, "duplicate key")
        try:
            if types[key] is int:
                values[key] = int(raw.strip())
            else:
                values[key] = float(raw.strip())
        except ValueError:
            raise HurstSpecError(key, f"cannot parse value {raw.strip()!r}") from None

    missing = [k for k, _ in keys if k not in values]
    if missing:
        raise HurstSpecError(missing[0], f"missing key(s) {', '.join(missing)}")
    try:
        return ctor(*(values[k] for k, _ in keys))
    except HurstSpecError:
        raise
    except ParameterDomainError as exc:
        raise HurstSpecError(exc.key, str(exc).split(": ", 1)[-1]) from None
