"""Reference values for Gaussian-linear responses.

For ``Y = a^T X + b`` with Gaussian ``X`` every density entering an
f-sensitivity index is Gaussian, so indices can be evaluated by direct
quadrature of the joint-density form and checked against closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from . import divergences as dv
from .estimators import ExactDensityProvider
from .inputs import CorrelatedGaussian, IndependentInputs, InputModel, gaussian_logpdf, subset
from .inputs import Gaussian as GaussianMarginal


class OracleError(RuntimeError):
    pass


class GaussianLinearOracle:
    """Exact second moments of ``(X, Y)`` for ``Y = a^T X + intercept``."""

    def __init__(self, coeffs, mean=None, cov=None, intercept: float = 0.0):
        a = np.asarray(coeffs, dtype=float).ravel()
        n = a.size
        self.coeffs = a
        self.mean_x = np.zeros(n) if mean is None else np.asarray(mean, dtype=float).ravel()
        self.cov_x = np.eye(n) if cov is None else np.asarray(cov, dtype=float)
        self.intercept = float(intercept)
        self.var_y = float(a @ self.cov_x @ a)
        if not self.var_y > 0:
            raise OracleError("output variance must be positive")
        self.mean_y = float(a @ self.mean_x) + self.intercept
        self.cov_xy = self.cov_x @ a

    @classmethod
    def from_inputs(cls, coeffs, model: InputModel, intercept: float = 0.0) -> "GaussianLinearOracle":
        if isinstance(model, CorrelatedGaussian):
            return cls(coeffs, model.mean_vec, model.cov, intercept)
        if isinstance(model, IndependentInputs) and all(isinstance(m, GaussianMarginal) for m in model.marginals):
            mean = [m.mean for m in model.marginals]
            cov = np.diag([m.std ** 2 for m in model.marginals])
            return cls(coeffs, mean, cov, intercept)
        raise OracleError("the Gaussian oracle needs Gaussian inputs")

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def correlation(self, i: int) -> float:
        """corr(X_i, Y), one-based ``i``."""
        return float(self.cov_xy[i - 1] / math.sqrt(self.cov_x[i - 1, i - 1] * self.var_y))

    def joint_moments(self, u) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of ``(X_u, Y)``."""
        idx = [i - 1 for i in subset(u, self.dim)]
        k = len(idx)
        cov = np.empty((k + 1, k + 1))
        cov[:k, :k] = self.cov_x[np.ix_(idx, idx)]
        cov[:k, k] = cov[k, :k] = self.cov_xy[idx]
        cov[k, k] = self.var_y
        mean = np.append(self.mean_x[idx], self.mean_y)
        if np.linalg.eigvalsh(cov)[0] <= 1e-14 * np.abs(cov).max():
            raise OracleError(f"joint covariance of (X_u, Y) is singular for u={list(idx)}")
        return mean, cov

    def exact_densities(self, u=None) -> "GaussianDensities":
        if u is not None:
            self.joint_moments(u)
        return GaussianDensities(self)


class GaussianDensities(ExactDensityProvider):
    def __init__(self, oracle: GaussianLinearOracle):
        self.oracle = oracle
        self._cache: dict[tuple, tuple] = {}

    def supports(self, u) -> bool:
        return len(tuple(u)) <= 2

    def _moments(self, u):
        u = subset(u, self.oracle.dim)
        if u not in self._cache:
            self._cache[u] = self.oracle.joint_moments(u)
        return self._cache[u]

    def logpdf_y(self, y):
        o = self.oracle
        z = (np.asarray(y, dtype=float) - o.mean_y) / math.sqrt(o.var_y)
        return -0.5 * z * z - 0.5 * math.log(2 * math.pi * o.var_y)

    def pdf_y(self, y):
        return np.exp(self.logpdf_y(y))

    def logpdf_xu(self, u, x_u):
        mean, cov = self._moments(u)
        k = len(mean) - 1
        x_u = np.asarray(x_u, dtype=float).reshape(-1, k)
        return gaussian_logpdf(x_u, mean[:k], cov[:k, :k])

    def logpdf_joint(self, u, x_u, y):
        mean, cov = self._moments(u)
        k = len(mean) - 1
        pts = np.column_stack([np.asarray(x_u, dtype=float).reshape(-1, k), np.asarray(y, dtype=float).ravel()])
        return gaussian_logpdf(pts, mean, cov)

    def centre(self, u):
        return self._moments(u)[0]

    def scale(self, u):
        return np.sqrt(np.diag(self._moments(u)[1]))


# quadrature ------------------------------------------------------------------

@dataclass
class GridConfig:
    half_width: float = 8.0      # box half-width in standard deviations
    points: int = 6              # Gauss-Legendre points per panel
    panels: int = 8              # initial panels per axis
    rtol: float = 1e-4
    atol: float = 1e-9
    max_doublings: int = 12
    max_nodes: int = 40_000_000  # guard for tensor grids in three dimensions


def _axis_rule(lo: float, hi: float, panels: int, points: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def tensor_quadrature(integrand: Callable[[np.ndarray], np.ndarray], lo, hi, cfg: GridConfig,
                      chunk: int = 1_000_000) -> float:
    """Composite tensor Gauss-Legendre over a box, doubling panels until converged.

    ``integrand`` maps an ``(M, d)`` array of points to ``M`` values.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    previous = None
    panels = cfg.panels
    for _ in range(cfg.max_doublings + 1):
        if (panels * cfg.points) ** d > cfg.max_nodes:
            break
        rules = [_axis_rule(lo[k], hi[k], panels, cfg.points) for k in range(d)]
        value = _tensor_sum(integrand, rules, chunk)
        if previous is not None and abs(value - previous) <= max(cfg.rtol * abs(value), cfg.atol):
            return value
        previous = value
        panels *= 2
    raise OracleError("quadrature did not converge within the refinement budget")


def _tensor_sum(integrand, rules, chunk) -> float:
    d = len(rules)
    first_nodes, first_w = rules[0]
    if d == 1:
        return float(first_w @ integrand(first_nodes[:, None]))
    rest = np.stack(np.meshgrid(*[r[0] for r in rules[1:]], indexing="ij"), axis=-1).reshape(-1, d - 1)
    rest_w = np.prod(np.stack(np.meshgrid(*[r[1] for r in rules[1:]], indexing="ij"), axis=-1), axis=-1).ravel()
    total = 0.0
    step = max(1, chunk // rest.shape[0])
    for start in range(0, first_nodes.size, step):
        xs = first_nodes[start:start + step]
        ws = first_w[start:start + step]
        pts = np.empty((xs.size, rest.shape[0], d))
        pts[:, :, 0] = xs[:, None]
        pts[:, :, 1:] = rest[None, :, :]
        vals = integrand(pts.reshape(-1, d)).reshape(xs.size, rest.shape[0])
        total += float(ws @ (vals @ rest_w))
    return total


def _integrand_values(gf: dv.GeneratingFunction, log_num: np.ndarray, log_den: np.ndarray) -> np.ndarray:
    # q f(p/q) evaluated from log densities, using 0 f(0/0) = 0 where both vanish
    with np.errstate(over="ignore", invalid="ignore"):
        t = np.exp(log_num - log_den)
    den = np.exp(log_den)
    out = np.zeros_like(den)
    pos = den > 0
    vals = dv.eval_f(gf, t[pos])
    out[pos] = den[pos] * vals
    lost = (~pos) & (log_num > -np.inf)
    if np.any(lost):
        out[lost] = np.exp(log_num[lost]) * gf.fstar0
    return out


def index_by_quadrature(dens: ExactDensityProvider, model: InputModel, u, gf,
                        grid_config: GridConfig | None = None) -> float:
    """f-sensitivity index by tensor quadrature of the joint-density form.

    The box covers ``half_width`` standard deviations about the mean on every
    axis of ``(X_u, Y)``.
    """
    cfg = grid_config or GridConfig()
    if isinstance(gf, str):
        gf = dv.get(gf)
    u = subset(u, getattr(model, "dim", None))
    if len(u) > 2:
        raise OracleError("quadrature oracle supports at most two input variables")
    centre = np.asarray(dens.centre(u), dtype=float)
    scale = np.asarray(dens.scale(u), dtype=float)
    lo = centre - cfg.half_width * scale
    hi = centre + cfg.half_width * scale
    k = len(u)

    def integrand(pts):
        x_u, y = pts[:, :k], pts[:, k]
        log_joint = dens.logpdf_joint(u, x_u, y)
        log_prod = dens.logpdf_y(y) + model.marginal_logpdf(u, x_u)
        return _integrand_values(gf, log_prod, log_joint)

    return tensor_quadrature(integrand, lo, hi, cfg)


def divergence_by_quadrature(gf, logpdf_p: Callable, logpdf_q: Callable, centre: float, scale: float,
                             grid_config: GridConfig | None = None) -> float:
    """``D_f(P || Q) = int q f(p / q)`` for univariate densities."""
    cfg = grid_config or GridConfig()
    if isinstance(gf, str):
        gf = dv.get(gf)

    def integrand(pts):
        x = pts[:, 0]
        return _integrand_values(gf, logpdf_p(x), logpdf_q(x))

    return tensor_quadrature(integrand, [centre - cfg.half_width * scale], [centre + cfg.half_width * scale], cfg)


def gaussian_divergence_closed_form(gf, mean1: float, var1: float, mean2: float, var2: float) -> float:
    """``D_f(N(mean1, var1) || N(mean2, var2))`` for ``tv``, ``kl``, ``rkl`` and ``hellinger``."""
    name = gf if isinstance(gf, str) else gf.name
    if not (var1 > 0 and var2 > 0):
        raise OracleError("variances must be positive")
    if name == "kl":
        return _kl_gauss(mean1, var1, mean2, var2)
    if name == "rkl":
        return _kl_gauss(mean2, var2, mean1, var1)
    if name == "hellinger":
        s1, s2 = math.sqrt(var1), math.sqrt(var2)
        bc = math.sqrt(2 * s1 * s2 / (var1 + var2)) * math.exp(-((mean1 - mean2) ** 2) / (4 * (var1 + var2)))
        return 2.0 * (1.0 - bc)
    if name == "tv":
        return _tv_gauss(mean1, var1, mean2, var2)
    raise OracleError(f"no closed form for divergence {name!r}")


def _kl_gauss(m1, v1, m2, v2):
    return 0.5 * (math.log(v2 / v1) + v1 / v2 + (m1 - m2) ** 2 / v2 - 1.0)


def _tv_gauss(m1, v1, m2, v2):
    s1, s2 = math.sqrt(v1), math.sqrt(v2)
    if math.isclose(v1, v2, rel_tol=1e-14):
        return 2.0 * (2.0 * special.ndtr(abs(m1 - m2) / (2.0 * s1)) - 1.0)
    # p = q where a x^2 + b x + c = 0
    a = 1.0 / v2 - 1.0 / v1
    b = 2.0 * (m1 / v1 - m2 / v2)
    c = m2 ** 2 / v2 - m1 ** 2 / v1 + 2.0 * math.log(s2 / s1)
    disc = math.sqrt(b * b - 4 * a * c)
    r1, r2 = sorted(((-b - disc) / (2 * a), (-b + disc) / (2 * a)))

    def mass(m, s):
        return special.ndtr((r2 - m) / s) - special.ndtr((r1 - m) / s)

    # the narrower density dominates between the roots
    inner = mass(m1, s1) - mass(m2, s2)
    return 2.0 * abs(inner)


def mutual_information_gaussian(rho: float) -> float:
    """Mutual information of a bivariate normal pair with correlation ``rho``."""
    return -0.5 * math.log1p(-rho * rho)
