"""Polynomial dimensional decomposition (PDD) surrogates.

The response is expanded in orthonormal polynomials of the standardized
inputs, grouped by variable subset::

    y(z) ~ y0 + sum_{1 <= |u| <= S} sum_{j in [1, m]^|u|} C[u, j] prod_{i in u} psi_{j_i}(z_i)

Coefficients are computed with S-variate dimension-reduction integration:
the response is replaced by its referential (anchored) decomposition at the
input mean, whose terms are at most S-dimensional, and each resulting
integral is evaluated with a tensor Gauss rule of ``n`` points per axis.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .functions import ModelFunction
from .inputs import IndependentInputs, InputModel

FAMILIES = ("hermite", "legendre")


class PddError(ValueError):
    pass


def recurrence(family: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Recurrence coefficients of the monic orthogonal polynomials.

    Returns ``(alpha, beta)`` of length ``n`` with
    ``p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x)``; ``beta_0`` is the
    total mass of the weight (1 for both probability measures).
    """
    k = np.arange(n, dtype=float)
    alpha = np.zeros(n)
    if family == "hermite":
        beta = k.copy()
    elif family == "legendre":
        beta = k * k / (4.0 * k * k - 1.0)
    else:
        raise PddError(f"unsupported polynomial family {family!r}")
    beta[0] = 1.0
    return alpha, beta


def gauss_rule(family: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and probability weights (summing to one) by Golub-Welsch.

    ``hermite`` integrates against the standard normal density and
    ``legendre`` against the uniform density on ``[-1, 1]``.
    """
    if not 1 <= n <= 64:
        raise PddError("number of Gauss points must be in 1..64")
    alpha, beta = recurrence(family, n)
    if n == 1:
        return alpha.copy(), np.ones(1)
    nodes, vecs = eigh_tridiagonal(alpha, np.sqrt(beta[1:]))
    weights = beta[0] * vecs[0, :] ** 2
    # symmetric weights: clean up the node that should sit exactly at zero
    nodes[np.abs(nodes) < 1e-14] = 0.0
    return nodes, weights / weights.sum()


def basis_values(family: str, degree: int, x) -> np.ndarray:
    """Orthonormal polynomials ``psi_0 .. psi_degree`` at ``x``; shape ``x.shape + (degree+1,)``."""
    x = np.asarray(x, dtype=float)
    _, beta = recurrence(family, degree + 2)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = x / math.sqrt(beta[1])
    for k in range(1, degree):
        out[..., k + 1] = (x * out[..., k] - math.sqrt(beta[k]) * out[..., k - 1]) / math.sqrt(beta[k + 1])
    return out


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Subset ``u`` (one-based, increasing) with a degree ``>= 1`` per member."""

    u: tuple[int, ...]
    j: tuple[int, ...]

    def __post_init__(self):
        if len(self.u) != len(self.j) or not self.u:
            raise PddError("multi-index needs matching non-empty subset and degrees")
        if any(d < 1 for d in self.j):
            raise PddError("multi-index degrees must be at least 1")
        if list(self.u) != sorted(set(self.u)):
            raise PddError("multi-index subset must be strictly increasing")


def count_terms(N: int, S: int, m: int) -> int:
    return sum(math.comb(N, s) * m ** s for s in range(1, S + 1))


def enumerate_terms(N: int, S: int, m: int) -> list[MultiIndex]:
    """All ``(u, j)`` with ``1 <= |u| <= S`` and each degree in ``1..m``."""
    if not (1 <= S <= N) or m < 1:
        raise PddError("need 1 <= S <= N and m >= 1")
    terms = []
    for s in range(1, S + 1):
        for u in itertools.combinations(range(1, N + 1), s):
            for j in itertools.product(range(1, m + 1), repeat=s):
                terms.append(MultiIndex(u, j))
    return terms


def _comb(n: int, k: int) -> int:
    if k == 0:
        return 1
    if n < 0 or k < 0:
        return 0
    return math.comb(n, k)


def reduction_weights(N: int, S: int) -> dict[int, int]:
    """Signed weight of every ``|v|``-variate anchored component in the S-variate reduction."""
    return {S - i: (-1) ** i * _comb(N - S + i - 1, i) for i in range(S + 1)}


@dataclass
class PddSurrogate:
    y_mean: float
    coefficients: dict[MultiIndex, float]
    S: int
    m: int
    families: list[str]
    input_model: IndependentInputs | None = field(default=None, repr=False)
    n: int | None = None
    model_evals: int = 0

    @property
    def dim(self) -> int:
        return len(self.families)

    def __call__(self, x) -> np.ndarray | float:
        return eval_surrogate(self, x)

    def variance(self) -> float:
        return float(sum(c * c for c in self.coefficients.values()))

    def to_dict(self) -> dict:
        return {
            "y_mean": self.y_mean,
            "S": self.S,
            "m": self.m,
            "n": self.n,
            "families": list(self.families),
            "model_evals": self.model_evals,
            "inputs": self.input_model.to_dict() if self.input_model is not None else None,
            "terms": [{"u": list(k.u), "j": list(k.j), "c": c} for k, c in sorted(self.coefficients.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict, input_model: IndependentInputs | None = None) -> "PddSurrogate":
        if input_model is None and data.get("inputs"):
            from .inputs import from_config
            input_model = from_config(data["inputs"])
        coeffs = {MultiIndex(tuple(t["u"]), tuple(t["j"])): float(t["c"]) for t in data["terms"]}
        return cls(float(data["y_mean"]), coeffs, int(data["S"]), int(data["m"]),
                   list(data["families"]), input_model, data.get("n"), int(data.get("model_evals", 0)))


def _reference_point(model: IndependentInputs) -> np.ndarray:
    # both standard measures are centred at zero
    return np.zeros(model.dim)


def compute_coefficients(y: ModelFunction, model: InputModel, S: int, m: int,
                         n: int | None = None) -> PddSurrogate:
    """Build an ``S``-variate, order-``m`` PDD of ``y`` over ``model``.

    ``n`` is the number of Gauss points per axis (default ``m + 1``). Model
    evaluations are de-duplicated by input vector; for even ``n`` the total is
    ``N n + 1`` (``S = 1``) or ``N (N-1) n^2 / 2 + N n + 1`` (``S = 2``).
    """
    if not isinstance(model, IndependentInputs):
        raise PddError("PDD coefficients require independent inputs")
    if S not in (1, 2):
        raise PddError("only S = 1 or S = 2 is supported")
    N = model.dim
    if S > N:
        raise PddError("S cannot exceed the input dimension")
    if m < 1:
        raise PddError("polynomial order m must be at least 1")
    n = m + 1 if n is None else int(n)
    families = model.bases()
    rules = {fam: gauss_rule(fam, n) for fam in set(families)}
    ref = _reference_point(model)
    weights_by_size = reduction_weights(N, S)

    # anchored grids: for every v with |v| <= S, tensor nodes on v, reference elsewhere
    grids = []
    points: dict[tuple, int] = {}
    for size, w in weights_by_size.items():
        if w == 0:
            continue
        for v in itertools.combinations(range(N), size):
            axes = [rules[families[i]] for i in v]
            node_sets = [a[0] for a in axes]
            weight_sets = [a[1] for a in axes]
            mesh = np.array(list(itertools.product(*node_sets))) if v else np.zeros((1, 0))
            wts = np.array([math.prod(c) for c in itertools.product(*weight_sets)]) if v else np.ones(1)
            z = np.tile(ref, (mesh.shape[0], 1))
            if v:
                z[:, list(v)] = mesh
            keys = []
            for row in z:
                key = tuple(row.tolist())
                if key not in points:
                    points[key] = len(points)
                keys.append(points[key])
            grids.append((v, w, mesh, wts, np.array(keys, dtype=int)))

    unique_z = np.array(list(points.keys()))
    before = y.eval_count
    values = np.asarray(y(model.from_standard_space(unique_z)), dtype=float).reshape(-1)
    n_evals = y.eval_count - before

    y0 = 0.0
    coeffs: dict[MultiIndex, float] = {}
    terms = enumerate_terms(N, S, m)
    for v, w, mesh, wts, keys in grids:
        yv = values[keys]
        y0 += w * float(wts @ yv)
        if not v:
            continue
        # psi values of every member of v at its nodes
        psi = {i: basis_values(families[i], m, mesh[:, col]) for col, i in enumerate(v)}
        vset = {i + 1 for i in v}
        for term in terms:
            if not set(term.u) <= vset:
                # integrating psi (degree >= 1) over an un-anchored axis gives zero
                continue
            prod = wts * yv
            for i, d in zip(term.u, term.j):
                prod = prod * psi[i - 1][:, d]
            coeffs[term] = coeffs.get(term, 0.0) + w * float(prod.sum())
    for term in terms:
        coeffs.setdefault(term, 0.0)
    return PddSurrogate(y0, coeffs, S, m, families, model, n, n_evals)


def eval_surrogate(pdd: PddSurrogate, x) -> np.ndarray | float:
    """Evaluate the surrogate at physical inputs ``x`` (vector or ``(L, N)`` array)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if pdd.input_model is not None:
        z = pdd.input_model.to_standard_space(x2)
    else:
        z = x2
    psi = [basis_values(fam, pdd.m, z[:, k]) for k, fam in enumerate(pdd.families)]
    out = np.full(z.shape[0], pdd.y_mean)
    # a fixed summation order keeps reloaded surrogates bitwise identical
    for term, c in sorted(pdd.coefficients.items()):
        if c == 0.0:
            continue
        prod = np.full(z.shape[0], c)
        for i, d in zip(term.u, term.j):
            prod = prod * psi[i - 1][:, d]
        out += prod
    return float(out[0]) if single else out


@dataclass
class SobolReport:
    variance: float
    partial: dict[tuple[int, ...], float]
    first_order: np.ndarray
    total: np.ndarray

    def index(self, u: Iterable[int]) -> float:
        return self.partial.get(tuple(sorted(u)), 0.0) / self.variance


def sobol_from_pdd(pdd: PddSurrogate) -> SobolReport:
    """Partial variances, first-order and total Sobol indices from PDD coefficients."""
    partial: dict[tuple[int, ...], float] = {}
    for term, c in pdd.coefficients.items():
        partial[term.u] = partial.get(term.u, 0.0) + c * c
    var = sum(partial.values())
    if not var > 0:
        raise PddError("surrogate has zero variance; Sobol indices undefined")
    N = pdd.dim
    first = np.array([partial.get((i,), 0.0) / var for i in range(1, N + 1)])
    total = np.array([sum(s for u, s in partial.items() if i in u) / var for i in range(1, N + 1)])
    return SobolReport(var, partial, first, total)
