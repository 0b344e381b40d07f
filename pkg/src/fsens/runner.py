"""Run pipeline: samples, optional surrogate, estimates, reports and sweeps."""

from __future__ import annotations

import hashlib
import json
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import estimators as est
from . import oracle as orc
from . import pdd as pdd_mod
from .config import ConfigError, RunConfig, config_hash, subset_key
from .functions import LINEAR6_COEFFS, ModelFunction
from .inputs import RNG_ALGORITHM
from .report import ReportRow, SensitivityReport, write_table


def thread_count(tasks: int) -> int:
    """Worker count: ``FSENS_THREADS`` if set, else the CPU count, never above ``tasks``."""
    env = os.environ.get("FSENS_THREADS")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        cap = 1
    return max(1, min(cap, tasks))


class SampleCache:
    """Input-output samples keyed by (model id, input law, L, seed, stream).

    Held in memory for one invocation and, when a directory is given, stored
    as ``<key>.npz`` with a JSON sidecar describing the key.
    """

    def __init__(self, directory: Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._mem: dict[str, est.SampleSet] = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(model_id: str, inputs: dict, L: int, seed: int, stream: int) -> tuple[str, dict]:
        desc = {"model": model_id, "inputs": inputs, "L": L, "seed": seed, "stream": stream,
                "rng": RNG_ALGORITHM}
        text = json.dumps(desc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:20], desc

    def get(self, model: ModelFunction, cfg: RunConfig, L: int, seed: int, stream: int = 0) -> est.SampleSet:
        k, desc = self.key(cfg.model_id, cfg.input_model.to_dict(), L, seed, stream)
        if k in self._mem:
            self.hits += 1
            return self._mem[k]
        if self.directory is not None:
            path = self.directory / f"{k}.npz"
            if path.exists():
                with np.load(path) as data:
                    s = est.SampleSet(data["x"], data["y"], cfg.model_id, seed)
                self._mem[k] = s
                self.hits += 1
                return s
        self.misses += 1
        s = est.draw_samples(model, cfg.input_model, L, seed, stream)
        self._mem[k] = s
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            np.savez(self.directory / f"{k}.npz", x=s.x, y=s.y)
            (self.directory / f"{k}.json").write_text(json.dumps(desc, indent=1, sort_keys=True) + "\n")
        return s


def _linear_densities(cfg: RunConfig):
    oracle = orc.GaussianLinearOracle.from_inputs(LINEAR6_COEFFS, cfg.input_model)
    return oracle.exact_densities()


def build_surrogate(cfg: RunConfig, model: ModelFunction | None = None) -> pdd_mod.PddSurrogate:
    if "surrogate" in cfg.pdd:
        try:
            data = json.loads(Path(cfg.pdd["surrogate"]).read_text())
        except OSError as exc:
            raise ConfigError("pdd.surrogate", f"cannot read surrogate: {exc.strerror}") from None
        surrogate = pdd_mod.PddSurrogate.from_dict(data, cfg.input_model)
        if surrogate.dim != cfg.dim:
            raise ConfigError("pdd.surrogate", "surrogate dimension does not match the inputs")
        return surrogate
    if not {"S", "m"} <= set(cfg.pdd):
        raise ConfigError("pdd", "needs S and m, or a surrogate file")
    model = model or cfg.make_model()
    return pdd_mod.compute_coefficients(model, cfg.input_model, int(cfg.pdd["S"]), int(cfg.pdd["m"]), cfg.pdd_n())


def _estimate_subset(cfg: RunConfig, u, gfs, *, samples=None, dens=None, surrogate=None,
                     L=None, seed=None, stream=0):
    method = cfg.method
    if method == "mc":
        return est.estimate_mc(samples, dens, cfg.input_model, u, gfs)
    if method == "kde_mc":
        return est.estimate_kde_mc(samples, cfg.input_model, u, gfs, cfg.kde)
    if method == "pdd_kde_mc":
        return est.estimate_pdd_kde_mc(surrogate, cfg.input_model, u, gfs, L, seed, cfg.kde, stream)
    if method == "oracle":
        out = []
        for gf in gfs:
            value = orc.index_by_quadrature(dens, cfg.input_model, u, gf)
            out.append(est.SensitivityEstimate(u, gf.name, "oracle", float(value), None, None, {}))
        return out
    raise ConfigError("estimate.method", f"unknown method {method!r}")


def estimate_all(cfg: RunConfig, L: int | None, seed: int, stream: int = 0, *,
                 cache: SampleCache | None = None, model: ModelFunction | None = None,
                 surrogate=None) -> tuple[list[ReportRow], dict]:
    """Every (subset, divergence) estimate for one sample size and seed."""
    from . import divergences as dv

    gfs = [dv.get(name) for name in cfg.divergences]
    model = model or cfg.make_model()
    cache = cache or SampleCache()
    samples = dens = None
    evals_per_estimate = None
    calls_before = model.eval_count
    if cfg.method in ("mc", "oracle"):
        dens = _linear_densities(cfg)
    if cfg.method in ("mc", "kde_mc"):
        samples = cache.get(model, cfg, L, seed, stream)
        evals_per_estimate = L
    if cfg.method == "pdd_kde_mc":
        surrogate = surrogate or build_surrogate(cfg, model)
        evals_per_estimate = surrogate.model_evals

    def work(u):
        t0 = time.perf_counter()
        res = _estimate_subset(cfg, u, gfs, samples=samples, dens=dens, surrogate=surrogate,
                               L=L, seed=seed, stream=stream)
        return res, time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=thread_count(len(cfg.subsets))) as pool:
        results = list(pool.map(work, cfg.subsets))

    rows = []
    for (res, seconds) in results:
        for name, e in zip(cfg.divergences, res):
            rows.append(ReportRow(e, name, evals_per_estimate, round(seconds, 3) if cfg.timings else None))
    info = {"model_calls": model.eval_count - calls_before}
    return rows, info


def run(cfg: RunConfig, write: bool = True) -> SensitivityReport:
    """Execute sample, surrogate, estimate and report for one configuration."""
    if cfg.method != "oracle" and cfg.L is None:
        raise ConfigError("estimate.L", f"method {cfg.method} needs a sample size")
    t0 = time.perf_counter()
    cache = SampleCache(cfg.out_dir / "cache" if cfg.cache else None)
    model = cfg.make_model()
    rows, info = estimate_all(cfg, cfg.L, cfg.seed, cache=cache, model=model)
    provenance = {
        "config_hash": config_hash(cfg.raw),
        "code_version": __version__,
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "method": cfg.method,
        "L": cfg.L,
        "model": cfg.model_id,
        "eval_counts": {"model_calls": info["model_calls"], "cache_hits": cache.hits,
                        "cache_misses": cache.misses},
        "unreliable": [
            {"subset": list(r.estimate.subset), "divergence": r.divergence}
            for r in rows if not r.estimate.reliable
        ],
        "wall_time_seconds": round(time.perf_counter() - t0, 3),
        "config": cfg.raw,
    }
    report = SensitivityReport(rows, provenance)
    if write:
        report.write(cfg.out_dir)
    return report


SWEEP_COLUMNS = ("subset", "divergence", "method", "L", "replicate", "value", "reference",
                 "abs_error", "rel_error")
SUMMARY_COLUMNS = ("subset", "divergence", "method", "L", "replicates", "mean_value",
                   "mean_abs_error", "mean_rel_error", "std_rel_error", "min_rel_error", "max_rel_error")


def references(cfg: RunConfig) -> dict[tuple[str, tuple[int, ...]], float]:
    """Reference values per (divergence, subset): pinned in the config, else the oracle."""
    pinned = cfg.sweep.get("reference", {})
    out = {}
    dens = None
    for name in cfg.divergences:
        for u in cfg.subsets:
            table = pinned.get(name, {})
            if subset_key(u) in table:
                out[(name, u)] = float(table[subset_key(u)])
                continue
            if cfg.model_spec.get("builtin") != "linear6" or cfg.method == "oracle":
                raise ConfigError("sweep.reference",
                                  f"no reference value for divergence {name!r}, subset {subset_key(u)}")
            try:
                dens = dens or _linear_densities(cfg)
            except orc.OracleError:
                raise ConfigError("sweep.reference", "no oracle for these inputs; pin reference values") from None
            out[(name, u)] = float(orc.index_by_quadrature(dens, cfg.input_model, u, name))
    return out


def sweep(cfg: RunConfig, L_list=None, replicates: int | None = None, write: bool = True) -> dict:
    """Convergence sweep over sample sizes with seed-substream replicates."""
    if cfg.method == "oracle":
        raise ConfigError("estimate.method", "a sweep needs a sampling method, not oracle")
    L_list = [int(v) for v in (L_list or cfg.sweep.get("L") or ([cfg.L] if cfg.L else []))]
    if not L_list:
        raise ConfigError("sweep.L", "no sample sizes given")
    R = int(replicates or cfg.sweep.get("replicates", 1))
    ref = references(cfg)
    cache = SampleCache(cfg.out_dir / "cache" if cfg.cache else None)
    model = cfg.make_model()
    surrogate = build_surrogate(cfg, model) if cfg.method == "pdd_kde_mc" else None

    detail = []
    for L in L_list:
        for r in range(R):
            rows, _ = estimate_all(cfg, L, cfg.seed, stream=r, cache=cache, model=model, surrogate=surrogate)
            for row in rows:
                e = row.estimate
                h = ref[(row.divergence, e.subset)]
                abs_err = abs(e.value - h)
                rel = abs_err / abs(h) if h != 0 else math.inf
                detail.append((subset_key(e.subset), row.divergence, e.method, L, r, float(e.value), h, abs_err, rel))

    summary = []
    plot = []
    keys = []
    for d in detail:
        k = (d[0], d[1], d[2], d[3])
        if k not in keys:
            keys.append(k)
    for k in keys:
        cell = [d for d in detail if (d[0], d[1], d[2], d[3]) == k]
        rel = [d[8] for d in cell]
        summary.append((*k, len(cell), statistics.fmean(d[5] for d in cell),
                        statistics.fmean(d[7] for d in cell), statistics.fmean(rel),
                        statistics.stdev(rel) if len(rel) > 1 else 0.0, min(rel), max(rel)))
        plot.append((f"{k[2]}:{k[1]}:X{k[0]}", k[3], statistics.fmean(rel)))

    if write:
        write_table(cfg.out_dir / "sweep.csv", SWEEP_COLUMNS, detail)
        write_table(cfg.out_dir / "summary.csv", SUMMARY_COLUMNS, summary)
        write_table(cfg.out_dir / "plot_data.csv", ("curve", "x", "y"), plot)
    return {"detail": detail, "summary": summary, "plot": plot}
