"""Probability laws of the random input vector.

Two laws are supported: a product of independent marginals (gaussian,
uniform, lognormal) and a correlated multivariate Gaussian. Sampling uses
numpy's ``PCG64`` bit generator seeded through ``SeedSequence``; worker
substreams are ``SeedSequence(seed, spawn_key=(stream,))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import linalg, special, stats

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"

#: standard normal 95th percentile, used for the lognormal error factor
Z95 = float(stats.norm.ppf(0.95))

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class InputModelError(ValueError):
    pass


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic generator for ``(seed, stream)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


# marginals ------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    std: float = 1.0

    kind = "gaussian"
    basis = "hermite"

    def __post_init__(self):
        if not self.std > 0:
            raise InputModelError("gaussian std must be positive")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.std
        return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.std)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.std)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal(size)

    def to_standard(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def from_standard(self, z):
        return self.mean + self.std * np.asarray(z, dtype=float)

    def support(self) -> tuple[float, float]:
        return -math.inf, math.inf

    def params(self) -> dict:
        return {"kind": self.kind, "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class Uniform:
    lower: float = -1.0
    upper: float = 1.0

    kind = "uniform"
    basis = "legendre"

    def __post_init__(self):
        if not self.upper > self.lower:
            raise InputModelError("uniform requires upper > lower")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        return np.where(inside, -math.log(self.width), -np.inf)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lower) / self.width, 0.0, 1.0)

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size)

    def to_standard(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.lower) / self.width - 1.0

    def from_standard(self, z):
        return self.lower + 0.5 * (np.asarray(z, dtype=float) + 1.0) * self.width

    def support(self):
        return self.lower, self.upper

    def params(self):
        return {"kind": self.kind, "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Lognormal:
    """Lognormal law with ``ln X ~ N(mu, sigma)``.

    The alternate constructors cover the risk-assessment convention of a mean
    (or median) plus an error factor ``EF = x95 / x50 = exp(z95 * sigma)``.
    """

    mu: float = 0.0
    sigma: float = 1.0

    kind = "lognormal"
    basis = "hermite"

    def __post_init__(self):
        if not self.sigma > 0:
            raise InputModelError("lognormal sigma must be positive")

    @classmethod
    def from_mean_error_factor(cls, mean: float, error_factor: float) -> "Lognormal":
        if not (mean > 0 and error_factor > 1):
            raise InputModelError("lognormal needs mean > 0 and error factor > 1")
        sigma = math.log(error_factor) / Z95
        return cls(math.log(mean) - 0.5 * sigma * sigma, sigma)

    @classmethod
    def from_median_error_factor(cls, median: float, error_factor: float) -> "Lognormal":
        if not (median > 0 and error_factor > 1):
            raise InputModelError("lognormal needs median > 0 and error factor > 1")
        return cls(math.log(median), math.log(error_factor) / Z95)

    @classmethod
    def from_mean_std(cls, mean: float, std: float) -> "Lognormal":
        if not (mean > 0 and std > 0):
            raise InputModelError("lognormal needs positive mean and std")
        s2 = math.log1p((std / mean) ** 2)
        return cls(math.log(mean) - 0.5 * s2, math.sqrt(s2))

    @property
    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma ** 2)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
            z = (lx - self.mu) / self.sigma
            out = -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.sigma) - lx
        return np.where(x > 0, out, -np.inf)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, special.ndtr((np.log(np.maximum(x, 1e-300)) - self.mu) / self.sigma), 0.0)

    def ppf(self, q):
        return np.exp(self.mu + self.sigma * special.ndtri(np.asarray(q, dtype=float)))

    def sample(self, rng, size):
        return np.exp(self.mu + self.sigma * rng.standard_normal(size))

    def to_standard(self, x):
        return (np.log(np.asarray(x, dtype=float)) - self.mu) / self.sigma

    def from_standard(self, z):
        return np.exp(self.mu + self.sigma * np.asarray(z, dtype=float))

    def support(self):
        return 0.0, math.inf

    def params(self):
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}


Marginal = Union[Gaussian, Uniform, Lognormal]


def marginal_from_dict(spec: dict) -> Marginal:
    """Build a marginal from a config entry such as ``{"kind": "uniform", ...}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "gaussian":
            return Gaussian(float(spec.pop("mean", 0.0)), float(spec.pop("std", 1.0)))
        if kind == "uniform":
            return Uniform(float(spec.pop("lower")), float(spec.pop("upper")))
        if kind == "lognormal":
            keys = frozenset(spec)
            if keys == {"mu", "sigma"}:
                return Lognormal(float(spec["mu"]), float(spec["sigma"]))
            if keys == {"mean", "error_factor"}:
                return Lognormal.from_mean_error_factor(float(spec["mean"]), float(spec["error_factor"]))
            if keys == {"median", "error_factor"}:
                return Lognormal.from_median_error_factor(float(spec["median"]), float(spec["error_factor"]))
            if keys == {"mean", "std"}:
                return Lognormal.from_mean_std(float(spec["mean"]), float(spec["std"]))
            raise InputModelError(f"lognormal parameters {sorted(keys)} not understood")
    except KeyError as exc:
        raise InputModelError(f"{kind} marginal missing parameter {exc.args[0]!r}") from None
    if kind in ("gaussian", "uniform") and spec:
        raise InputModelError(f"unknown {kind} parameters {sorted(spec)}")
    raise InputModelError(f"unknown marginal kind {kind!r}")


# subsets --------------------------------------------------------------------

def subset(indices: Sequence[int], dim: int | None = None) -> tuple[int, ...]:
    """Validate a one-based variable subset and return it as a sorted tuple."""
    u = tuple(int(i) for i in indices)
    if not u:
        raise InputModelError("variable subset must be non-empty")
    if len(set(u)) != len(u):
        raise InputModelError(f"duplicate index in subset {list(u)}")
    if min(u) < 1 or (dim is not None and max(u) > dim):
        raise InputModelError(f"subset {list(u)} out of range 1..{dim}")
    return tuple(sorted(u))


def _zero_based(u) -> list[int]:
    return [i - 1 for i in u]


# laws -----------------------------------------------------------------------

class InputModel:
    """Common interface; see :class:`IndependentInputs` and :class:`CorrelatedGaussian`."""

    dim: int

    def sample(self, size: int, seed: int, stream: int = 0) -> np.ndarray:
        if size < 1:
            raise InputModelError("sample size must be at least 1")
        return self._sample(rng_for(seed, stream), int(size))

    def marginal_pdf(self, u, x_u) -> np.ndarray:
        return np.exp(self.marginal_logpdf(u, x_u))

    def _sample(self, rng, size):
        raise NotImplementedError

    def marginal_logpdf(self, u, x_u) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class IndependentInputs(InputModel):
    def __init__(self, marginals: Sequence[Marginal]):
        if not marginals:
            raise InputModelError("at least one marginal is required")
        self.marginals = tuple(marginals)
        self.dim = len(self.marginals)

    def __repr__(self):
        return f"IndependentInputs({list(self.marginals)!r})"

    def _sample(self, rng, size):
        out = np.empty((size, self.dim))
        for k, m in enumerate(self.marginals):
            out[:, k] = m.sample(rng, size)
        return out

    def marginal_logpdf(self, u, x_u):
        u = subset(u, self.dim)
        x_u = np.atleast_2d(np.asarray(x_u, dtype=float))
        if x_u.shape[-1] != len(u):
            x_u = x_u.reshape(-1, len(u))
        total = np.zeros(x_u.shape[0])
        for col, i in enumerate(u):
            total = total + self.marginals[i - 1].logpdf(x_u[:, col])
        return total

    def joint_logpdf(self, x) -> np.ndarray:
        return self.marginal_logpdf(range(1, self.dim + 1), x)

    def to_standard_space(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for k, m in enumerate(self.marginals):
            out[..., k] = m.to_standard(x[..., k])
        return out

    def from_standard_space(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        for k, m in enumerate(self.marginals):
            out[..., k] = m.from_standard(z[..., k])
        return out

    def bases(self) -> list[str]:
        return [m.basis for m in self.marginals]

    def mean(self) -> np.ndarray:
        out = []
        for m in self.marginals:
            if isinstance(m, Gaussian):
                out.append(m.mean)
            elif isinstance(m, Uniform):
                out.append(0.5 * (m.lower + m.upper))
            else:
                out.append(m.mean)
        return np.array(out)

    def to_dict(self):
        return {"kind": "independent", "marginals": [m.params() for m in self.marginals]}


class CorrelatedGaussian(InputModel):
    def __init__(self, mean, cov):
        mean = np.asarray(mean, dtype=float).ravel()
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise InputModelError("covariance shape does not match mean length")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise InputModelError("covariance matrix is not symmetric")
        try:
            self.chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError:
            raise InputModelError("covariance matrix is not positive definite") from None
        self.mean_vec = mean
        self.cov = cov
        self.dim = mean.size

    @classmethod
    def exponential(cls, dim: int, c: float = 1.0) -> "CorrelatedGaussian":
        """Zero mean, ``cov[i, j] = exp(-c |i - j|)``."""
        idx = np.arange(dim)
        return cls(np.zeros(dim), np.exp(-c * np.abs(idx[:, None] - idx[None, :])))

    def __repr__(self):
        return f"CorrelatedGaussian(dim={self.dim})"

    def _sample(self, rng, size):
        z = rng.standard_normal((size, self.dim))
        return self.mean_vec + z @ self.chol.T

    def marginal_logpdf(self, u, x_u):
        u = subset(u, self.dim)
        idx = _zero_based(u)
        x_u = np.atleast_2d(np.asarray(x_u, dtype=float)).reshape(-1, len(u))
        return gaussian_logpdf(x_u, self.mean_vec[idx], self.cov[np.ix_(idx, idx)])

    def mean(self) -> np.ndarray:
        return self.mean_vec.copy()

    def to_standard_space(self, x):
        raise InputModelError("isoprobabilistic transform is unsupported for correlated inputs")

    def to_dict(self):
        return {"kind": "correlated_gaussian", "mean": self.mean_vec.tolist(), "cov": self.cov.tolist()}


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Row-wise multivariate normal log density; ``x`` has shape ``(M, d)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[1]
    chol = linalg.cholesky(np.asarray(cov, dtype=float), lower=True)
    sol = linalg.solve_triangular(chol, (x - mean).T, lower=True)
    maha = np.sum(sol * sol, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * maha - 0.5 * logdet - d * _LOG_SQRT_2PI


def from_config(spec) -> InputModel:
    """Input law from the ``inputs`` config entry."""
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "correlated_gaussian":
            keys = set(spec) - {"kind"}
            if keys == {"mean", "cov"}:
                return CorrelatedGaussian(spec["mean"], spec["cov"])
            if keys == {"dim", "decay"}:
                # zero-mean, unit-variance Gaussian with cov[i, j] = exp(-decay |i - j|)
                return CorrelatedGaussian.exponential(int(spec["dim"]), float(spec["decay"]))
            raise InputModelError(f"correlated_gaussian needs (mean, cov) or (dim, decay), got {sorted(keys)}")
        if kind == "independent":
            return IndependentInputs([marginal_from_dict(m) for m in spec["marginals"]])
        raise InputModelError(f"unknown input law {kind!r}")
    return IndependentInputs([marginal_from_dict(m) for m in spec])
