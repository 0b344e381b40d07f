"""Convex generating functions of f-divergences.

A generating function ``f`` is convex on ``[0, inf)``, normalized so that
``f(1) = 0``, and carries two limits that fix the value of the undefined
expressions appearing in an f-divergence::

    0 * f(0/0) = 0
    0 * f(a/0) = a * fstar0,   fstar0 = lim_{t -> inf} f(t) / t

Infinite values are represented by ``numpy.inf`` with sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

#: density ratios below this are treated as exactly zero
RATIO_FLOOR = 1e-300


class DivergenceError(ValueError):
    """Raised for unknown divergence names or invalid arguments."""


@dataclass(frozen=True)
class GeneratingFunction:
    """A normalized convex function ``f`` together with its limits.

    ``func`` is evaluated only on strictly positive, finite arguments; the
    boundary cases ``t = 0`` and ``t = inf`` are resolved with ``f0`` and
    ``fstar0`` by :func:`eval_f`.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    f0: float
    fstar0: float
    is_metric: bool = False
    param: float | None = None

    def __call__(self, t):
        return eval_f(self, t)


def eval_f(gf: GeneratingFunction, t):
    """Evaluate ``gf`` at ``t >= 0`` with the boundary conventions applied.

    ``t`` may be a scalar or an array. Values below :data:`RATIO_FLOOR` map to
    ``gf.f0``; ``t = inf`` maps to the sign of ``gf.fstar0`` times infinity
    (or to the limit of ``f`` itself when ``fstar0 == 0``).
    """
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)):
        raise DivergenceError("density ratio is NaN")
    if np.any(arr < 0):
        raise DivergenceError("generating function evaluated at a negative ratio")
    out = np.empty_like(arr)
    small = arr < RATIO_FLOOR
    big = np.isinf(arr)
    mid = ~(small | big)
    out[small] = gf.f0
    if np.any(big):
        out[big] = _limit_at_infinity(gf)
    if np.any(mid):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out[mid] = gf.func(arr[mid])
    if out.ndim == 0:
        return float(out)
    return out


def _limit_at_infinity(gf: GeneratingFunction) -> float:
    if gf.fstar0 > 0:
        return math.inf
    if gf.fstar0 < 0:
        return -math.inf
    # sublinear growth: try the function at infinity itself, then a huge argument
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        val = float(gf.func(np.array([math.inf]))[0])
        if not math.isnan(val):
            return val
        val = float(gf.func(np.array([1e300]))[0])
    if abs(val) > 1e250:
        return math.copysign(math.inf, val)
    return val


def conjugate(gf: GeneratingFunction) -> GeneratingFunction:
    """Return the *-conjugate ``t -> t f(1/t)``.

    The limits swap: ``f*(0) = lim f(t)/t`` and ``f**(0) = f(0)``.
    """
    base = gf.func

    def func(t):
        return t * base(1.0 / t)

    if gf.name.startswith("conj(") and gf.name.endswith(")"):
        name = gf.name[5:-1]
    else:
        name = f"conj({gf.name})"
    return GeneratingFunction(
        name=name, func=func, f0=gf.fstar0, fstar0=gf.f0,
        is_metric=gf.is_metric, param=gf.param,
    )


def range_upper_bound(gf: GeneratingFunction) -> float:
    """Upper end ``f(0) + f*(0)`` of the range of the sensitivity index."""
    if math.isinf(gf.f0) or math.isinf(gf.fstar0):
        return math.inf
    return gf.f0 + gf.fstar0


def divergence(gf: GeneratingFunction, p, q) -> float:
    """``sum_i q_i f(p_i / q_i)`` for discrete measures with the zero conventions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    total = 0.0
    pos = q > 0
    if np.any(pos):
        total += float(np.sum(q[pos] * eval_f(gf, p[pos] / q[pos])))
    # 0 f(a/0) = a fstar0, with 0 f(0/0) = 0
    lost = p[~pos]
    lost = lost[lost > 0]
    if lost.size:
        total += float(np.sum(lost)) * gf.fstar0
    return total


# catalog --------------------------------------------------------------------

def _kl(t):
    return t * np.log(t)


def _rkl(t):
    return -np.log(t)


def _tv(t):
    return np.abs(t - 1.0)


def _hellinger(t):
    return (np.sqrt(t) - 1.0) ** 2


def _pearson(t):
    return t * t - 1.0


def _neyman(t):
    return (1.0 - t * t) / t


def _jeffreys(t):
    return (t - 1.0) * np.log(t)


def _triangular(t):
    return (t - 1.0) ** 2 / (t + 1.0)


def forward_kl() -> GeneratingFunction:
    return GeneratingFunction("kl", _kl, f0=0.0, fstar0=math.inf)


def reversed_kl() -> GeneratingFunction:
    return GeneratingFunction("rkl", _rkl, f0=math.inf, fstar0=0.0)


def total_variation() -> GeneratingFunction:
    return GeneratingFunction("tv", _tv, f0=1.0, fstar0=1.0, is_metric=True)


def hellinger() -> GeneratingFunction:
    # (sqrt(t)-1)^2 gives the squared distance; it is not itself a metric
    return GeneratingFunction("hellinger", _hellinger, f0=1.0, fstar0=1.0)


def pearson() -> GeneratingFunction:
    return GeneratingFunction("pearson", _pearson, f0=-1.0, fstar0=math.inf)


def neyman() -> GeneratingFunction:
    return GeneratingFunction("neyman", _neyman, f0=math.inf, fstar0=-1.0)


def jeffreys() -> GeneratingFunction:
    return GeneratingFunction("jeffreys", _jeffreys, f0=math.inf, fstar0=math.inf)


def triangular() -> GeneratingFunction:
    return GeneratingFunction("triangular", _triangular, f0=1.0, fstar0=1.0)


def alpha_divergence(alpha: float = 0.5) -> GeneratingFunction:
    """``4 (1 - t^((1-alpha)/2)) / (1 - alpha^2)`` for ``alpha != +-1``."""
    alpha = float(alpha)
    if abs(abs(alpha) - 1.0) < 1e-15:
        raise DivergenceError("alpha-divergence requires alpha != +-1")
    c = 4.0 / (1.0 - alpha * alpha)
    p = (1.0 - alpha) / 2.0

    def func(t):
        return c * (1.0 - t ** p)

    # t^p -> 0 for p > 0; otherwise the term blows up with the sign of -c
    f0 = c if p > 0 else math.copysign(math.inf, -c)
    # f(t)/t = c/t - c t^(p-1)
    fstar0 = 0.0 if p < 1 else math.copysign(math.inf, -c)
    return GeneratingFunction(f"alpha:{_fmt(alpha)}", func, f0=f0, fstar0=fstar0, param=alpha)


def vajda(alpha: float = 2.0) -> GeneratingFunction:
    """Vajda ``|t - 1|^alpha`` for ``alpha >= 1``; ``alpha = 1`` is total variation."""
    alpha = float(alpha)
    if alpha < 1.0:
        raise DivergenceError("Vajda divergence requires alpha >= 1")

    def func(t):
        return np.abs(t - 1.0) ** alpha

    fstar0 = 1.0 if alpha == 1.0 else math.inf
    return GeneratingFunction(
        f"vajda:{_fmt(alpha)}", func, f0=1.0, fstar0=fstar0,
        is_metric=alpha == 1.0, param=alpha,
    )


def _fmt(x: float) -> str:
    return f"{x:g}"


_SIMPLE = {
    "kl": forward_kl,
    "rkl": reversed_kl,
    "tv": total_variation,
    "hellinger": hellinger,
    "pearson": pearson,
    "neyman": neyman,
    "jeffreys": jeffreys,
    "triangular": triangular,
}

_PARAMETRIC = {"alpha": alpha_divergence, "vajda": vajda}

CATALOG_NAMES = tuple(_SIMPLE) + tuple(_PARAMETRIC)

#: entries whose integrand f(t) is non-negative everywhere
NONNEGATIVE_INTEGRAND = frozenset({"tv", "hellinger", "vajda", "jeffreys", "triangular"})


def get(name: str) -> GeneratingFunction:
    """Look up a generating function by config name (``tv``, ``alpha:0.3``, ...)."""
    key = name.strip().lower()
    if key in _SIMPLE:
        return _SIMPLE[key]()
    base, sep, arg = key.partition(":")
    if base in _PARAMETRIC:
        if not sep:
            return _PARAMETRIC[base]()
        try:
            value = float(arg)
        except ValueError:
            raise DivergenceError(f"bad parameter in divergence name {name!r}") from None
        return _PARAMETRIC[base](value)
    raise DivergenceError(f"unknown divergence {name!r}")


def catalog() -> list[GeneratingFunction]:
    """The ten named generating functions with default parameters."""
    return [get(n) for n in CATALOG_NAMES]
