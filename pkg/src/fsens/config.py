"""Run configuration: JSON schema, semantic checks and object construction.

Every error raised here is a :class:`ConfigError` carrying the dotted path of
the offending key, e.g. ``estimate.divergences[1]``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

from . import divergences as dv
from . import functions as fn
from . import inputs as inp
from .estimators import BANDWIDTH_RULES, EstimationError, KdeConfig

METHODS = ("mc", "kde_mc", "pdd_kde_mc", "oracle")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}

_MARGINAL = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["gaussian", "uniform", "lognormal"]},
        "mean": _NUM, "std": _NUM, "lower": _NUM, "upper": _NUM,
        "mu": _NUM, "sigma": _NUM, "median": _NUM, "error_factor": _NUM,
    },
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "inputs", "estimate"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "oneOf": [{"required": ["builtin"]}, {"required": ["external"]}],
            "properties": {
                "builtin": {"enum": sorted(fn.BUILTINS)},
                "external": {
                    "type": "object",
                    "required": ["cmd", "dim"],
                    "properties": {
                        "cmd": {"type": "string", "minLength": 1},
                        "dim": _POS_INT,
                        "batch_size": _POS_INT,
                        "mode": {"enum": ["stdin", "file"]},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "inputs": {
            "oneOf": [
                {"type": "array", "minItems": 1, "items": _MARGINAL},
                {
                    "type": "object",
                    "required": ["kind", "marginals"],
                    "properties": {"kind": {"const": "independent"},
                                   "marginals": {"type": "array", "minItems": 1, "items": _MARGINAL}},
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"const": "correlated_gaussian"},
                        "mean": {"type": "array", "items": _NUM, "minItems": 1},
                        "cov": {"type": "array", "items": {"type": "array", "items": _NUM}},
                        "dim": _POS_INT,
                        "decay": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "estimate": {
            "type": "object",
            "required": ["method", "subsets", "divergences"],
            "properties": {
                "method": {"enum": list(METHODS)},
                "subsets": {"type": "array", "minItems": 1,
                            "items": {"type": "array", "minItems": 1, "items": _POS_INT}},
                "divergences": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                "L": {"type": "number", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "kde": {
            "type": "object",
            "properties": {
                "bandwidth": {"oneOf": [
                    {"enum": list(BANDWIDTH_RULES)},
                    {"type": "object", "required": ["fixed"], "additionalProperties": False,
                     "properties": {"fixed": {"type": "array", "minItems": 1,
                                              "items": {"type": "number", "exclusiveMinimum": 0}}}},
                ]},
                "cutoff": {"type": "number", "exclusiveMinimum": 0},
                "mode": {"enum": ["exact", "truncated"]},
                "split": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "pdd": {
            "type": "object",
            "properties": {
                "S": {"enum": [1, 2]},
                "m": _POS_INT,
                "n": {"oneOf": [{"const": "m+1"}, {"const": "m"}, {"type": "integer", "minimum": 1, "maximum": 64}]},
                "surrogate": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "L": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 2}},
                "replicates": _POS_INT,
                "reference": {
                    "type": "object",
                    "additionalProperties": {"type": "object", "additionalProperties": _NUM},
                },
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "cache": {"type": "boolean"},
                "timings": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def subset_key(u) -> str:
    """Canonical text form of a subset, e.g. ``"1"`` or ``"1+2"``."""
    return "+".join(str(i) for i in u)


@dataclass
class RunConfig:
    raw: dict
    model_spec: dict
    input_model: inp.InputModel
    method: str
    subsets: list[tuple[int, ...]]
    divergences: list[str]
    L: int | None
    seed: int
    kde: KdeConfig
    pdd: dict
    sweep: dict
    out_dir: Path
    cache: bool
    timings: bool

    @property
    def dim(self) -> int:
        return self.input_model.dim

    def make_model(self) -> fn.ModelFunction:
        if "builtin" in self.model_spec:
            return fn.builtin(self.model_spec["builtin"])
        ext = self.model_spec["external"]
        return fn.external(ext["cmd"], int(ext["dim"]), batch_size=int(ext.get("batch_size", 10_000)),
                           mode=ext.get("mode", "stdin"))

    @property
    def model_id(self) -> str:
        if "builtin" in self.model_spec:
            return self.model_spec["builtin"]
        return "external:" + self.model_spec["external"]["cmd"]

    def pdd_n(self) -> int:
        m = int(self.pdd["m"])
        n = self.pdd.get("n", "m+1")
        return m + 1 if n == "m+1" else (m if n == "m" else int(n))


def config_hash(raw: dict) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON text."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode()).hexdigest()


def load(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from None


def validate_schema(raw: dict) -> None:
    errors = sorted(_VALIDATOR.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        # oneOf failures are more useful reported through their deepest cause
        while err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise ConfigError(_path(err.absolute_path), err.message)


def parse(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate ``raw`` (schema, then semantics) and build a :class:`RunConfig`."""
    validate_schema(raw)
    base_dir = Path(base_dir or ".")
    try:
        model = inp.from_config(raw["inputs"])
    except (inp.InputModelError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("inputs", str(exc)) from None

    spec = raw["model"]
    model_dim = fn.BUILTINS[spec["builtin"]][0] if "builtin" in spec else spec["external"]["dim"]
    if model_dim != model.dim:
        raise ConfigError("inputs", f"model takes {model_dim} inputs but {model.dim} are specified")

    est = raw["estimate"]
    method = est["method"]
    subsets = []
    for k, u in enumerate(est["subsets"]):
        try:
            u = inp.subset(u, model.dim)
        except inp.InputModelError as exc:
            raise ConfigError(f"estimate.subsets[{k}]", str(exc)) from None
        if len(u) > 2:
            raise ConfigError(f"estimate.subsets[{k}]", "subsets of more than two variables are not supported")
        subsets.append(u)
    for k, name in enumerate(est["divergences"]):
        try:
            dv.get(name)
        except dv.DivergenceError as exc:
            raise ConfigError(f"estimate.divergences[{k}]", str(exc)) from None

    is_linear_gaussian = spec.get("builtin") == "linear6" and _gaussian(model)
    if method in ("mc", "oracle") and not is_linear_gaussian:
        raise ConfigError("estimate.method", f"{method} needs exact densities: use builtin linear6 with Gaussian inputs")
    if method == "pdd_kde_mc":
        if "pdd" not in raw:
            raise ConfigError("pdd", "method pdd_kde_mc requires a pdd section")
        if not isinstance(model, inp.IndependentInputs):
            raise ConfigError("inputs", "pdd_kde_mc requires independent inputs")
        pdd_cfg = raw["pdd"]
        if "surrogate" not in pdd_cfg and not {"S", "m"} <= set(pdd_cfg):
            raise ConfigError("pdd", "needs S and m, or a surrogate file")
        if pdd_cfg.get("S", 1) > model.dim:
            raise ConfigError("pdd.S", "S cannot exceed the number of inputs")
    L = est.get("L")
    if L is not None:
        if L != int(L):
            raise ConfigError("estimate.L", "sample size must be an integer")
        L = int(L)

    kde_raw = raw.get("kde", {})
    try:
        kde_cfg = KdeConfig.from_dict(kde_raw)
    except EstimationError as exc:
        raise ConfigError("kde", str(exc)) from None
    if not isinstance(kde_cfg.bandwidth, str) and len(kde_cfg.bandwidth) != model.dim + 1:
        raise ConfigError("kde.bandwidth.fixed", f"needs {model.dim + 1} values (one per input plus the output)")

    pdd_cfg = dict(raw.get("pdd", {}))
    if "surrogate" in pdd_cfg:
        pdd_cfg["surrogate"] = str((base_dir / pdd_cfg["surrogate"]).resolve())

    sweep = raw.get("sweep", {})
    for k, Lk in enumerate(sweep.get("L", [])):
        if Lk != int(Lk):
            raise ConfigError(f"sweep.L[{k}]", "sample size must be an integer")
    for div, table in sweep.get("reference", {}).items():
        try:
            dv.get(div)
        except dv.DivergenceError as exc:
            raise ConfigError(f"sweep.reference.{div}", str(exc)) from None

    output = raw.get("output", {})
    return RunConfig(
        raw=raw,
        model_spec=spec,
        input_model=model,
        method=method,
        subsets=subsets,
        divergences=list(est["divergences"]),
        L=L,
        seed=int(est.get("seed", 0)),
        kde=kde_cfg,
        pdd=pdd_cfg,
        sweep=sweep,
        out_dir=base_dir / output.get("dir", "fsens_out"),
        cache=bool(output.get("cache", True)),
        timings=bool(output.get("timings", False)),
    )


def _gaussian(model: inp.InputModel) -> bool:
    if isinstance(model, inp.CorrelatedGaussian):
        return True
    return isinstance(model, inp.IndependentInputs) and all(isinstance(m, inp.Gaussian) for m in model.marginals)
