"""Sensitivity reports: rankings, provenance and CSV/JSON emission."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import divergences as dv
from .estimators import SensitivityEstimate

CSV_COLUMNS = ("subset", "divergence", "method", "L", "S", "m", "n", "value", "scaled_value",
               "rank", "inf_term_count", "model_evals", "seconds")


@dataclass
class ReportRow:
    estimate: SensitivityEstimate
    divergence: str          # config name, e.g. "alpha:0.5"
    model_evals: int | None
    seconds: float | None = None
    rank: int | None = None

    @property
    def scaled_value(self) -> float | None:
        bound = dv.range_upper_bound(dv.get(self.divergence))
        if not math.isfinite(bound):
            return None
        return self.estimate.value / bound


def rank_rows(rows: list[ReportRow]) -> dict[str, list[tuple[int, ...]]]:
    """Assign descending-value ranks per divergence; ties and NaNs resolve by subset order.

    Returns the ranked subset order for every divergence.
    """
    order: dict[str, list[tuple[int, ...]]] = {}
    groups: dict[str, list[ReportRow]] = {}
    for row in rows:
        groups.setdefault(row.divergence, []).append(row)
    for div, members in groups.items():
        def key(r: ReportRow):
            v = r.estimate.value
            return (math.isnan(v), -v if not math.isnan(v) else 0.0, r.estimate.subset)
        ranked = sorted(members, key=key)
        for k, r in enumerate(ranked, start=1):
            r.rank = k
        order[div] = [r.estimate.subset for r in ranked]
    return order


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


@dataclass
class SensitivityReport:
    rows: list[ReportRow]
    provenance: dict = field(default_factory=dict)
    rankings: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rankings:
            self.rankings = rank_rows(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            e = r.estimate
            meta = e.metadata
            w.writerow([
                "+".join(map(str, e.subset)), r.divergence, e.method, _fmt(e.L),
                _fmt(meta.get("S")), _fmt(meta.get("m")), _fmt(meta.get("n")),
                _fmt(float(e.value)), _fmt(r.scaled_value), _fmt(r.rank),
                _fmt(meta.get("inf_term_count")), _fmt(r.model_evals), _fmt(r.seconds),
            ])
        return buf.getvalue()

    def to_dict(self) -> dict:
        estimates = []
        for r in self.rows:
            e = r.estimate
            estimates.append({
                "subset": list(e.subset),
                "divergence": r.divergence,
                "method": e.method,
                "L": e.L,
                "seed": e.seed,
                "value": _json_float(e.value),
                "scaled_value": _json_float(r.scaled_value),
                "rank": r.rank,
                "reliable": e.reliable,
                "model_evals": r.model_evals,
                "seconds": r.seconds,
                "metadata": {k: _json_float(v) for k, v in e.metadata.items()},
            })
        return {
            "provenance": self.provenance,
            "estimates": estimates,
            "rankings": {d: [list(u) for u in us] for d, us in self.rankings.items()},
        }

    def write(self, out_dir: Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "report.csv"
        json_path = out_dir / "report.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_table(path: Path, columns, rows) -> Path:
    """Write rows (sequences aligned with ``columns``) as CSV with repr-formatted floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path
