"""Response functions: built-in benchmarks and an external-process adapter."""

from __future__ import annotations

import io
import math
import os
import subprocess
import tempfile
from typing import Callable

import numpy as np

LINEAR6_COEFFS = np.array([1.0, 1.1, 1.2, 1.3, 1.4, 1.5])

# (i, j, k) one-based triples of the risk-assessment model
IMAN_TERMS = (
    (1, 3, 5), (1, 3, 6), (1, 4, 5), (1, 4, 6), (2, 3, 4),
    (2, 3, 5), (2, 4, 5), (2, 5, 6), (2, 4, 7), (2, 6, 7),
)


class ModelError(RuntimeError):
    pass


def _check(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ModelError(f"expected input of length {n}, got {x.shape[-1]}")
    return x


def linear6(x):
    x = _check(x, 6)
    return x @ LINEAR6_COEFFS


def iman_risk(x):
    x = _check(x, 7)
    out = 0.0
    for i, j, k in IMAN_TERMS:
        out = out + x[..., i - 1] * x[..., j - 1] * x[..., k - 1]
    return out


def ishigami(x, a: float = 7.0, b: float = 0.1):
    x = _check(x, 3)
    s1 = np.sin(x[..., 0])
    return s1 + a * np.sin(x[..., 1]) ** 2 + b * x[..., 2] ** 4 * s1


class ModelFunction:
    """A response ``y(x)`` that counts how many input rows it has evaluated.

    Calling with a vector returns a float; calling with an ``(L, N)`` array
    returns a length-``L`` vector. Every evaluated row adds one to
    :attr:`eval_count`.
    """

    def __init__(self, id: str, dim: int, evaluator: Callable[[np.ndarray], np.ndarray]):
        self.id = id
        self.dim = dim
        self._evaluator = evaluator
        self.eval_count = 0

    def __repr__(self):
        return f"ModelFunction({self.id!r}, dim={self.dim}, evals={self.eval_count})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ModelError(f"{self.id}: expected {self.dim} inputs, got {x.shape[-1]}")
        batch = np.atleast_2d(x)
        y = np.asarray(self._evaluator(batch), dtype=float).reshape(-1)
        self.eval_count += batch.shape[0]
        if x.ndim == 1:
            return float(y[0])
        return y

    def reset(self) -> None:
        self.eval_count = 0


BUILTINS = {
    "linear6": (6, linear6),
    "iman": (7, iman_risk),
    "ishigami": (3, ishigami),
}


def builtin(name: str) -> ModelFunction:
    if name not in BUILTINS:
        raise ModelError(f"unknown builtin model {name!r}; choose from {sorted(BUILTINS)}")
    dim, fn = BUILTINS[name]
    return ModelFunction(name, dim, fn)


# external processes ----------------------------------------------------------

def _to_csv(batch: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(f"x{k + 1}" for k in range(batch.shape[1])) + "\n")
    for row in batch:
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def _parse_output(text: str, expected: int, offset: int) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) != expected:
        raise ModelError(f"external model returned {len(lines)} values for {expected} rows")
    out = np.empty(expected)
    for k, ln in enumerate(lines):
        try:
            v = float(ln.split(",")[0])
        except ValueError:
            raise ModelError(f"row {offset + k + 1}: cannot parse output {ln!r}") from None
        if not math.isfinite(v):
            raise ModelError(f"row {offset + k + 1}: non-finite output {ln!r}")
        out[k] = v
    return out


def run_external(command: str, batch, *, mode: str = "stdin", offset: int = 0,
                 timeout: float | None = None) -> np.ndarray:
    """Evaluate one batch through an external executable.

    The inputs are written as CSV with header ``x1,...,xN``. In ``stdin`` mode
    the CSV is piped to the process; in ``file`` mode it is written to a
    temporary file whose path is appended to the command line. The process must
    print one value per input row to standard output, in order.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if not np.all(np.isfinite(batch)):
        bad = int(np.argwhere(~np.isfinite(batch))[0, 0])
        raise ModelError(f"row {offset + bad + 1}: non-finite input")
    text = _to_csv(batch)
    if mode == "stdin":
        proc = subprocess.run(command, shell=True, input=text, capture_output=True,
                              text=True, timeout=timeout)
    elif mode == "file":
        fd, path = tempfile.mkstemp(suffix=".csv")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            proc = subprocess.run(f"{command} {path}", shell=True, capture_output=True,
                                  text=True, timeout=timeout)
        finally:
            os.unlink(path)
    else:
        raise ModelError(f"unknown external mode {mode!r}")
    if proc.returncode != 0:
        raise ModelError(
            f"external model exited with status {proc.returncode} on rows "
            f"{offset + 1}..{offset + batch.shape[0]}: {proc.stderr.strip()[:500]}"
        )
    return _parse_output(proc.stdout, batch.shape[0], offset)


def external(command: str, dim: int, *, batch_size: int = 10_000, mode: str = "stdin",
             id: str | None = None) -> ModelFunction:
    """A :class:`ModelFunction` backed by an external command, batched."""
    if batch_size < 1:
        raise ModelError("batch_size must be positive")

    def evaluator(x):
        parts = []
        for start in range(0, x.shape[0], batch_size):
            parts.append(run_external(command, x[start:start + batch_size], mode=mode, offset=start))
        return np.concatenate(parts) if parts else np.empty(0)

    return ModelFunction(id or f"external:{command}", dim, evaluator)
