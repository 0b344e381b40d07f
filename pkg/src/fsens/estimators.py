"""Single-loop estimators of f-sensitivity indices.

All three estimators average ``f(t)`` over ``L`` input-output samples, with
the density ratio::

    t = f_Y(y) f_Xu(x_u) / f_{Xu,Y}(x_u, y)

``estimate_mc`` uses exact densities, ``estimate_kde_mc`` replaces ``f_Y``
and ``f_{Xu,Y}`` with kernel density estimates fitted to the same samples,
and ``estimate_pdd_kde_mc`` does the same on samples of a PDD surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import divergences as dv
from . import kde as kde_mod
from .divergences import GeneratingFunction
from .inputs import IndependentInputs, InputModel, subset
from .pdd import PddSurrogate

#: fraction of infinite summands above which an estimate is declared unreliable
INF_TOLERANCE = 1e-4


class EstimationError(RuntimeError):
    pass


@dataclass
class SampleSet:
    x: np.ndarray
    y: np.ndarray
    model_id: str = ""
    seed: int | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.size:
            raise EstimationError("inputs must be (L, N) and outputs length L")

    @property
    def size(self) -> int:
        return self.y.size


def draw_samples(model_fn, inputs: InputModel, L: int, seed: int, stream: int = 0) -> SampleSet:
    """Sample ``L`` inputs and evaluate the response on them."""
    x = inputs.sample(L, seed, stream)
    y = np.asarray(model_fn(x), dtype=float).reshape(-1)
    return SampleSet(x, y, getattr(model_fn, "id", ""), seed)


class ExactDensityProvider:
    """Exact output and joint densities, in log form.

    Subclasses implement :meth:`logpdf_y` and :meth:`logpdf_joint`. The box
    hints (:meth:`centre` / :meth:`scale`) are used by quadrature oracles.
    """

    def supports(self, u) -> bool:
        return True

    def logpdf_y(self, y) -> np.ndarray:
        raise NotImplementedError

    def logpdf_xu(self, u, x_u) -> np.ndarray:
        raise NotImplementedError

    def logpdf_joint(self, u, x_u, y) -> np.ndarray:
        raise NotImplementedError

    def log_ratio(self, u, x_u, y, logpdf_xu=None) -> np.ndarray:
        """``log(f_Y f_Xu / f_{Xu,Y})`` at the given points."""
        lx = self.logpdf_xu(u, x_u) if logpdf_xu is None else logpdf_xu
        return self.logpdf_y(y) + lx - self.logpdf_joint(u, x_u, y)

    def centre(self, u) -> np.ndarray:
        raise NotImplementedError

    def scale(self, u) -> np.ndarray:
        raise NotImplementedError


class AffineOutput(ExactDensityProvider):
    """Densities of ``Y' = a Y + b`` built from the densities of ``Y``."""

    def __init__(self, base: ExactDensityProvider, a: float, b: float = 0.0):
        if a == 0:
            raise EstimationError("affine map needs a != 0")
        self.base, self.a, self.b = base, float(a), float(b)
        self._logjac = math.log(abs(self.a))

    def _back(self, y):
        return (np.asarray(y, dtype=float) - self.b) / self.a

    def logpdf_y(self, y):
        return self.base.logpdf_y(self._back(y)) - self._logjac

    def logpdf_xu(self, u, x_u):
        return self.base.logpdf_xu(u, x_u)

    def logpdf_joint(self, u, x_u, y):
        return self.base.logpdf_joint(u, x_u, self._back(y)) - self._logjac

    def log_ratio(self, u, x_u, y, logpdf_xu=None):
        # the Jacobians cancel analytically
        return self.base.log_ratio(u, x_u, self._back(y), logpdf_xu)


@dataclass
class SensitivityEstimate:
    subset: tuple[int, ...]
    divergence: str
    method: str
    value: float
    L: int | None = None
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def reliable(self) -> bool:
        return bool(self.metadata.get("reliable", True))


def _as_list(gf) -> tuple[list[GeneratingFunction], bool]:
    if isinstance(gf, GeneratingFunction):
        return [gf], True
    if isinstance(gf, str):
        return [dv.get(gf)], True
    return [dv.get(g) if isinstance(g, str) else g for g in gf], False


def average_summands(gf: GeneratingFunction, log_t: np.ndarray) -> tuple[float, dict]:
    """Mean of ``f(exp(log_t))`` with infinite-term accounting."""
    with np.errstate(over="ignore"):
        t = np.exp(log_t)
    terms = dv.eval_f(gf, t)
    finite = np.isfinite(terms)
    n_inf = int(terms.size - finite.sum())
    meta = {"inf_term_count": n_inf}
    if n_inf > INF_TOLERANCE * terms.size:
        meta["reliable"] = False
        return math.nan, meta
    good = terms[finite]
    meta["reliable"] = True
    meta["std_error"] = float(np.std(good, ddof=1) / math.sqrt(good.size)) if good.size > 1 else math.nan
    return float(np.mean(good)), meta


def _finish(gfs, log_t, u, method, samples_or_L, seed, extra, single):
    out = []
    L = samples_or_L
    for gf in gfs:
        value, meta = average_summands(gf, log_t)
        meta.update(extra)
        out.append(SensitivityEstimate(u, gf.name, method, value, L, seed, meta))
    return out[0] if single else out


def estimate_mc(samples: SampleSet, dens: ExactDensityProvider, model: InputModel, u, gf):
    """Monte Carlo estimate with exact densities.

    ``gf`` may be one generating function (or name), returning one estimate,
    or a sequence, returning a list that shares the density evaluations.
    """
    u = subset(u, samples.x.shape[1])
    if not dens.supports(u):
        raise EstimationError(f"density provider does not support subset {list(u)}")
    gfs, single = _as_list(gf)
    x_u = samples.x[:, [i - 1 for i in u]]
    log_t = dens.log_ratio(u, x_u, samples.y, model.marginal_logpdf(u, x_u))
    return _finish(gfs, log_t, u, "mc", samples.size, samples.seed, {}, single)


BANDWIDTH_RULES = ("diffusion", "lcv", "silverman")


@dataclass
class KdeConfig:
    bandwidth: str | Sequence[float] = "diffusion"
    cutoff: float = kde_mod.DEFAULT_CUTOFF
    mode: str = "truncated"
    split: bool = False

    @classmethod
    def from_dict(cls, data: dict | None) -> "KdeConfig":
        data = dict(data or {})
        bw = data.pop("bandwidth", "diffusion")
        if isinstance(bw, dict):
            if set(bw) != {"fixed"}:
                raise EstimationError("kde.bandwidth must be a rule name or {fixed: [...]}")
            bw = [float(v) for v in bw["fixed"]]
        elif bw not in BANDWIDTH_RULES:
            raise EstimationError(f"unknown bandwidth rule {bw!r}")
        out = cls(bw, float(data.pop("cutoff", kde_mod.DEFAULT_CUTOFF)),
                  str(data.pop("mode", "truncated")), bool(data.pop("split", False)))
        if data:
            raise EstimationError(f"unknown kde keys {sorted(data)}")
        if out.mode not in ("exact", "truncated"):
            raise EstimationError(f"unknown kde mode {out.mode!r}")
        return out


def kde_log_ratio(samples: SampleSet, model: InputModel, u, cfg: KdeConfig | None = None):
    """Log density ratio at the evaluation samples using KDE for ``f_Y`` and ``f_{Xu,Y}``.

    Returns ``(log_t, metadata)``. With ``cfg.split`` the first half of the
    samples is used for fitting and the second half for evaluation.
    ``cfg.bandwidth`` fixed values are indexed ``[h_x1, ..., h_xN, h_y]``.
    """
    cfg = cfg or KdeConfig()
    N = samples.x.shape[1]
    u = subset(u, N)
    if len(u) > 2:
        raise EstimationError("KDE estimators support subsets of at most two variables")
    if not np.std(samples.y) > 0:
        raise EstimationError("degenerate output sample: zero variance")
    cols = [i - 1 for i in u]
    joint = np.column_stack([samples.x[:, cols], samples.y])
    if cfg.split:
        half = samples.size // 2
        fit_pts, eval_pts = joint[:half], joint[half:]
    else:
        fit_pts = eval_pts = joint
    if isinstance(cfg.bandwidth, str):
        k_j = kde_mod.fit(fit_pts, cfg.bandwidth, cfg.cutoff)
        # the output density reuses the joint output bandwidth so that it is
        # exactly the x-marginal of the joint estimate
        k_y = kde_mod.fit(fit_pts[:, -1:], k_j.bandwidths[-1:], cfg.cutoff)
    else:
        fixed = np.asarray(cfg.bandwidth, dtype=float)
        if fixed.size != N + 1:
            raise EstimationError(f"fixed bandwidths need {N + 1} values (one per input plus output)")
        k_y = kde_mod.fit(fit_pts[:, -1:], fixed[-1:], cfg.cutoff)
        k_j = kde_mod.fit(fit_pts, np.append(fixed[cols], fixed[-1]), cfg.cutoff)
    with np.errstate(divide="ignore"):
        log_fy = np.log(k_y.eval(eval_pts[:, -1:], cfg.mode))
        log_fj = np.log(k_j.eval(eval_pts, cfg.mode))
    log_fx = model.marginal_logpdf(u, eval_pts[:, :-1])
    with np.errstate(invalid="ignore"):
        log_t = log_fy + log_fx - log_fj
    # both KDEs vanish only by underflow: treat 0/0 as a unit ratio
    both = np.isneginf(log_fj) & np.isneginf(log_fy)
    log_t[both] = 0.0
    meta = {
        "bandwidths_y": k_y.bandwidths.tolist(),
        "bandwidths_joint": k_j.bandwidths.tolist(),
        "kde_mode": cfg.mode,
        "cutoff": cfg.cutoff,
        "split": cfg.split,
    }
    return log_t, meta


def estimate_kde_mc(samples: SampleSet, model: InputModel, u, gf, kde_config: KdeConfig | None = None):
    """KDE-MC estimate; ``gf`` may be a single generating function or a sequence."""
    gfs, single = _as_list(gf)
    u = subset(u, samples.x.shape[1])
    log_t, meta = kde_log_ratio(samples, model, u, kde_config)
    return _finish_kde(gfs, log_t, u, "kde_mc", samples, meta, single)


def _finish_kde(gfs, log_t, u, method, samples, meta, single):
    out = _finish(gfs, log_t, u, method, samples.size, samples.seed, meta, single)
    # no variance formula for the KDE estimators
    for est in ([out] if single else out):
        est.metadata.pop("std_error", None)
    return out


def estimate_pdd_kde_mc(pdd: PddSurrogate, model: InputModel, u, gf, L: int, seed: int,
                        kde_config: KdeConfig | None = None, stream: int = 0):
    """PDD-KDE-MC: KDE-MC on ``L`` fresh samples of the surrogate.

    The original response is never called here; the surrogate build cost is
    carried in the metadata as ``model_evals``.
    """
    if not isinstance(model, IndependentInputs):
        raise EstimationError("PDD-KDE-MC requires independent inputs")
    gfs, single = _as_list(gf)
    x = model.sample(L, seed, stream)
    samples = SampleSet(x, pdd(x), "pdd", seed)
    u = subset(u, model.dim)
    log_t, meta = kde_log_ratio(samples, model, u, kde_config)
    meta.update({"S": pdd.S, "m": pdd.m, "n": pdd.n, "model_evals": pdd.model_evals})
    return _finish_kde(gfs, log_t, u, "pdd_kde_mc", samples, meta, single)


def scale_index(est: SensitivityEstimate | float, gf: GeneratingFunction | str | None = None) -> float:
    """Map an index to ``[0, 1]`` by dividing by ``f(0) + f*(0)``.

    For total variation this halves the index, giving the delta importance measure.
    """
    if isinstance(est, SensitivityEstimate):
        value = est.value
        gf = gf or est.divergence
    else:
        value = float(est)
    if gf is None:
        raise EstimationError("a generating function is needed to scale a bare value")
    if isinstance(gf, str):
        gf = dv.get(gf)
    bound = dv.range_upper_bound(gf)
    if not math.isfinite(bound):
        raise EstimationError(f"divergence {gf.name} has an unbounded range; no scaling possible")
    return value / bound
