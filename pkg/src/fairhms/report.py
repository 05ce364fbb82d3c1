"""Run reports and their JSON / CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

SCHEMA = "fairhms.run/1"
TIMING_FIELDS = ("wall_ms",)


def sig9(x):
    """Round a float to 9 significant digits; other values pass through."""
    if isinstance(x, bool) or not isinstance(x, float):
        return x
    if not math.isfinite(x) or x == 0.0:
        return x
    return float(f"{x:.9g}")


def quantize(obj):
    if isinstance(obj, float):
        return sig9(obj)
    if isinstance(obj, dict):
        return {str(k): quantize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [quantize(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalar
        return quantize(obj.item())
    return obj


@dataclass(frozen=True)
class DatasetInfo:
    source: str
    n: int
    d: int
    C: int
    group_names: tuple[str, ...]
    skyline_sizes: tuple[int, ...]


@dataclass(frozen=True)
class SpecInfo:
    k: int
    kind: str
    alpha: float | None
    lower: tuple[int, ...]
    upper: tuple[int, ...]


@dataclass(frozen=True)
class Params:
    m: int | None = None
    delta: float | None = None
    epsilon: float | None = None
    lam: float | None = None
    m0: int | None = None
    M: int | None = None
    seed: int = 0
    feasible_mode: bool | None = None
    normalize: str = "minmax"


@dataclass(frozen=True)
class SolutionInfo:
    ids: tuple[str, ...]
    group_counts: tuple[int, ...]


@dataclass(frozen=True)
class Metrics:
    mhr: float
    eval_method: str
    err: int
    size: int
    wall_ms: float


@dataclass(frozen=True)
class RunReport:
    algorithm: str
    dataset: DatasetInfo
    spec: SpecInfo
    params: Params
    solution: SolutionInfo
    metrics: Metrics
    diagnostics: dict = field(default_factory=dict)
    schema: str = SCHEMA

    def __post_init__(self):
        # quantize once so serialization round-trips exactly
        for part in ("params", "metrics", "spec"):
            obj = getattr(self, part)
            vals = {f.name: sig9(getattr(obj, f.name)) for f in fields(obj)}
            object.__setattr__(self, part, type(obj)(**vals))
        object.__setattr__(self, "diagnostics", quantize(self.diagnostics))

    def to_dict(self) -> dict:
        out = {"schema": self.schema, "algorithm": self.algorithm}
        for name in ("dataset", "spec", "params", "solution", "metrics"):
            out[name] = quantize(asdict(getattr(self, name)))
        out["diagnostics"] = self.diagnostics
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        def tupled(kind, raw):
            vals = {}
            for f in fields(kind):
                v = raw.get(f.name)
                vals[f.name] = tuple(v) if isinstance(v, list) else v
            return kind(**vals)

        return cls(
            algorithm=data["algorithm"],
            dataset=tupled(DatasetInfo, data["dataset"]),
            spec=tupled(SpecInfo, data["spec"]),
            params=tupled(Params, data["params"]),
            solution=tupled(SolutionInfo, data["solution"]),
            metrics=tupled(Metrics, data["metrics"]),
            diagnostics=data.get("diagnostics", {}),
            schema=data.get("schema", SCHEMA),
        )

    def to_json(self, timing: bool = True) -> str:
        data = self.to_dict()
        if not timing:
            for key in TIMING_FIELDS:
                data["metrics"].pop(key, None)
        return json.dumps(data, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


CSV_COLUMNS = (
    "algorithm", "source", "n", "d", "C", "k", "bounds", "alpha", "lower", "upper",
    "m", "delta", "epsilon", "lambda", "m0", "M", "seed", "feasible_mode",
    "mhr", "eval_method", "err", "size", "group_counts", "wall_ms", "ids",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def flatten(report: RunReport) -> dict[str, Any]:
    """One CSV row for a report."""
    ds, sp, pr, sol, met = report.dataset, report.spec, report.params, report.solution, report.metrics
    return {
        "algorithm": report.algorithm, "source": ds.source, "n": ds.n, "d": ds.d, "C": ds.C,
        "k": sp.k, "bounds": sp.kind, "alpha": sp.alpha, "lower": sp.lower, "upper": sp.upper,
        "m": pr.m, "delta": pr.delta, "epsilon": pr.epsilon, "lambda": pr.lam, "m0": pr.m0,
        "M": pr.M, "seed": pr.seed, "feasible_mode": pr.feasible_mode,
        "mhr": met.mhr, "eval_method": met.eval_method, "err": met.err, "size": met.size,
        "group_counts": sol.group_counts, "wall_ms": met.wall_ms, "ids": sol.ids,
    }


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def pivot(rows: Sequence[dict], index: str, series: str = "algorithm", value: str = "mhr") -> list[dict]:
    """Wide table: one row per ``index`` value, one ``<series>_<value>`` column per series."""
    table: dict = {}
    order: list[str] = []
    for row in rows:
        col = f"{row[series]}_{value}"
        if col not in order:
            order.append(col)
        table.setdefault(row[index], {index: row[index]})[col] = row.get(value)
    out = []
    for key in table:
        out.append({index: key, **{c: table[key].get(c) for c in order}})
    return out


def emit(
    reports: RunReport | Iterable[RunReport] | Sequence[dict],
    fmt: str = "json",
    path: str | Path | None = None,
    timing: bool = True,
) -> str:
    """Serialize one report, several reports, or ready-made sweep rows.

    JSON gives one object for a single report and an array otherwise; CSV
    gives a header plus one row per run. Writes to ``path`` when given and
    always returns the text.
    """
    single = isinstance(reports, RunReport)
    items = [reports] if single else list(reports)
    if fmt == "json":
        dicts = [r.to_dict() if isinstance(r, RunReport) else quantize(r) for r in items]
        if not timing:
            for d in dicts:
                for key in TIMING_FIELDS:
                    d.get("metrics", d).pop(key, None)
        text = json.dumps(dicts[0] if single else dicts, indent=2) + "\n"
    elif fmt == "csv":
        if items and isinstance(items[0], RunReport):
            rows = [flatten(r) for r in items]
            text = rows_to_csv(rows, CSV_COLUMNS)
        else:
            text = rows_to_csv(items)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_reports(path: str | Path) -> list[RunReport]:
    """Read reports written by ``emit`` (single object or array)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    return [RunReport.from_dict(d) for d in data]
