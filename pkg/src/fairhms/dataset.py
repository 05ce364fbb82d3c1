"""Data model, ingestion, skylines, fairness bounds and the fairness matroid."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Malformed or unusable input data."""


class InfeasibleSpecError(ValueError):
    """Fairness bounds that admit no size-k solution."""


@dataclass(frozen=True)
class Point:
    id: str
    coords: tuple[float, ...]
    group: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable point collection partitioned into disjoint groups.

    Selections throughout the package are arrays of row positions into
    ``coords``; ``ids`` maps positions back to user-facing identifiers.
    """

    ids: tuple[str, ...]
    coords: np.ndarray
    groups: np.ndarray
    group_names: tuple[str, ...]
    columns: tuple[str, ...] = ()
    source: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float, copy=True)
        groups = np.array(self.groups, dtype=np.int64, copy=True)
        if coords.ndim != 2:
            raise DataError("coords must be a 2-d array")
        n, d = coords.shape
        if n < 1:
            raise DataError("dataset is empty")
        if d < 2:
            raise DataError(f"need at least 2 numeric attributes, got {d}")
        if groups.shape != (n,) or len(self.ids) != n:
            raise DataError("ids, coords and groups disagree on the number of points")
        C = len(self.group_names)
        if C < 1 or groups.min() < 0 or groups.max() >= C:
            raise DataError("group index out of range")
        if not np.all(np.isfinite(coords)):
            raise DataError("non-finite coordinate")
        coords.setflags(write=False)
        groups.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        columns = tuple(self.columns) or tuple(f"a{i + 1}" for i in range(d))
        object.__setattr__(self, "columns", columns)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def C(self) -> int:
        return len(self.group_names)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.groups, minlength=self.C)

    def group_members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.groups == c)

    def point(self, i: int) -> Point:
        return Point(self.ids[i], tuple(float(x) for x in self.coords[i]), int(self.groups[i]))

    @property
    def points(self) -> list[Point]:
        return [self.point(i) for i in range(self.n)]

    def index_of(self, ids: Iterable[str]) -> np.ndarray:
        lookup = self._cache.get("id_index")
        if lookup is None:
            lookup = {pid: i for i, pid in enumerate(self.ids)}
            self._cache["id_index"] = lookup
        try:
            return np.array([lookup[str(pid)] for pid in ids], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"unknown point id {exc.args[0]!r}") from None

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            ids=tuple(self.ids[i] for i in rows),
            coords=self.coords[rows],
            groups=self.groups[rows],
            group_names=self.group_names,
            columns=self.columns,
            source=self.source,
        )

    @property
    def skyline_flags(self) -> np.ndarray:
        """Per-point marker: not dominated by another point of its own group."""
        flags = self._cache.get("skyline")
        if flags is None:
            flags = np.zeros(self.n, dtype=bool)
            for c in range(self.C):
                members = self.group_members(c)
                if members.size:
                    flags[members[skyline_mask(self.coords[members])]] = True
            flags.setflags(write=False)
            self._cache["skyline"] = flags
        return flags

    def skyline_indices(self) -> np.ndarray:
        return np.flatnonzero(self.skyline_flags)

    def skyline_sizes(self) -> np.ndarray:
        return np.bincount(self.groups[self.skyline_flags], minlength=self.C)


@dataclass(frozen=True)
class Solution:
    """Selected rows of a dataset plus solver diagnostics."""

    indices: tuple[int, ...]
    info: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def ids(self, ds: Dataset) -> list[str]:
        return [ds.ids[i] for i in self.indices]


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


def load_csv(
    path: str | Path,
    numeric_columns: Sequence[str] | None = None,
    group_column: str | None = None,
    id_column: str | None = None,
) -> Dataset:
    """Read a header-first, comma-separated UTF-8 file into a raw Dataset.

    When ``numeric_columns`` is omitted every column other than the id and
    group columns whose cells all parse as reals is used. Without a group
    column all rows form a single group. Group indices follow the order in
    which category values first appear.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    col = {name: j for j, name in enumerate(header)}
    for name in [group_column, id_column, *(numeric_columns or [])]:
        if name is not None and name not in col:
            raise DataError(f"{path}: missing column {name!r}")
    if id_column is None and "id" in col and group_column != "id":
        id_column = "id"
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: row {lineno}: expected {len(header)} cells, got {len(r)}")

    if numeric_columns is None:
        numeric_columns = []
        for name in header:
            if name in (group_column, id_column):
                continue
            try:
                for r in rows:
                    _parse_float(r[col[name]])
            except ValueError:
                continue
            numeric_columns.append(name)
        if len(numeric_columns) < 2:
            raise DataError(f"{path}: found {len(numeric_columns)} numeric columns, need at least 2")

    coords = np.empty((len(rows), len(numeric_columns)))
    for i, r in enumerate(rows):
        for j, name in enumerate(numeric_columns):
            cell = r[col[name]].strip()
            try:
                coords[i, j] = _parse_float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {i + 2}, column {name!r}: cannot parse {cell!r} as a number"
                ) from None

    names: dict[str, int] = {}
    groups = np.zeros(len(rows), dtype=np.int64)
    if group_column is not None:
        for i, r in enumerate(rows):
            groups[i] = names.setdefault(r[col[group_column]].strip(), len(names))
    else:
        names["all"] = 0
    if id_column is not None:
        ids = tuple(r[col[id_column]].strip() for r in rows)
        if len(set(ids)) != len(ids):
            raise DataError(f"{path}: duplicate values in id column {id_column!r}")
    else:
        ids = tuple(str(i) for i in range(len(rows)))
    return Dataset(ids, coords, groups, tuple(names), tuple(numeric_columns), source=str(path))


def write_csv(ds: Dataset, path: str | Path, group_column: str = "group") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *ds.columns, group_column])
        for i in range(ds.n):
            w.writerow([ds.ids[i], *(repr(float(x)) for x in ds.coords[i]), ds.group_names[ds.groups[i]]])


def join_columns(values: Sequence[Sequence[str]], sep: str = "+") -> list[str]:
    """Combine several categorical columns row-wise into one group label."""
    return [sep.join(parts) for parts in zip(*values)]


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def normalize(raw: Dataset, method: str = "minmax") -> Dataset:
    """Scale every attribute into [0, 1].

    ``minmax`` maps each column's minimum to 0 and maximum to 1; a constant
    column becomes all 1.0. ``max`` divides each column by its maximum,
    which leaves every happiness ratio unchanged (requires nonnegative data).
    """
    X = raw.coords
    if method == "minmax":
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = hi - lo
        flat = span <= 0
        out = (X - lo) / np.where(flat, 1.0, span)
        out[:, flat] = 1.0
    elif method == "max":
        if X.min() < 0:
            raise DataError("max-scaling needs nonnegative attributes")
        hi = X.max(axis=0)
        flat = hi <= 0
        out = X / np.where(flat, 1.0, hi)
        out[:, flat] = 1.0
    else:
        raise ValueError(f"unknown normalization {method!r}")
    np.clip(out, 0.0, 1.0, out=out)
    return Dataset(raw.ids, out, raw.groups, raw.group_names, raw.columns, raw.source)


def skyline_mask(X: np.ndarray) -> np.ndarray:
    """Mask of rows not dominated by any other row.

    Of several identical rows only the first survives.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    keep = np.zeros(n, dtype=bool)
    if d == 2:
        # sweep by x descending; a point survives iff its y beats every earlier y
        order = np.lexsort((np.arange(n), -X[:, 1], -X[:, 0]))
        ys = X[order, 1]
        prev_best = np.maximum.accumulate(np.concatenate(([-np.inf], ys[:-1])))
        keep[order[ys > prev_best]] = True
        return keep
    # a dominator always has a strictly larger coordinate sum, or is an
    # earlier duplicate, so scanning in (sum desc, index asc) order suffices
    order = np.lexsort((np.arange(n), -X.sum(axis=1)))
    sky = np.empty_like(X)
    size = 0
    for i in order:
        p = X[i]
        if size and np.any(np.all(sky[:size] >= p, axis=1)):
            continue
        sky[size] = p
        size += 1
        keep[i] = True
    return keep


def group_skyline(ds: Dataset) -> Dataset:
    return ds.subset(ds.skyline_indices())


# ---------------------------------------------------------------------------
# fairness bounds and the matroid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FairnessSpec:
    """Solution size ``k`` with per-group bounds ``lower[c] <= |S & D_c| <= upper[c]``."""

    k: int
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    kind: str = "custom"
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(int(x) for x in self.lower))
        object.__setattr__(self, "upper", tuple(int(x) for x in self.upper))
        if self.k < 1:
            raise InfeasibleSpecError(f"k must be positive, got {self.k}")
        if len(self.lower) != len(self.upper) or not self.lower:
            raise InfeasibleSpecError("lower and upper bounds must have one entry per group")
        for c, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo < 0 or hi < lo:
                raise InfeasibleSpecError(f"group {c}: need 0 <= l_c <= h_c, got l={lo}, h={hi}")
        if sum(self.lower) > self.k:
            raise InfeasibleSpecError(f"sum of lower bounds {sum(self.lower)} exceeds k={self.k}")
        if sum(self.upper) < self.k:
            raise InfeasibleSpecError(f"sum of upper bounds {sum(self.upper)} is below k={self.k}")

    @property
    def C(self) -> int:
        return len(self.lower)

    def check(self, ds: Dataset) -> "FairnessSpec":
        """Validate against a dataset's groups; returns self for chaining."""
        if self.C != ds.C:
            raise InfeasibleSpecError(f"spec has {self.C} groups, dataset has {ds.C}")
        sizes = ds.group_sizes
        for c in range(self.C):
            if self.lower[c] > sizes[c]:
                raise InfeasibleSpecError(
                    f"group {ds.group_names[c]!r} has {sizes[c]} points, lower bound is {self.lower[c]}"
                )
        if sum(min(h, int(s)) for h, s in zip(self.upper, sizes)) < self.k:
            raise InfeasibleSpecError(f"groups cannot supply k={self.k} points within the upper bounds")
        return self

    def independent_counts(self, counts: Sequence[int]) -> bool:
        if any(x > h for x, h in zip(counts, self.upper)):
            return False
        return sum(max(x, lo) for x, lo in zip(counts, self.lower)) <= self.k

    def addable_groups(self, counts: np.ndarray) -> np.ndarray:
        """Groups that can take one more point without leaving the matroid."""
        counts = np.asarray(counts)
        lower = np.asarray(self.lower)
        slack = self.k - np.maximum(counts, lower).sum()
        ok = counts + 1 <= np.asarray(self.upper)
        # growing a group already at or above its lower bound consumes slack
        return ok & ((counts < lower) | (slack >= 1))


def exact_bounds(k: int, quotas: Sequence[int]) -> FairnessSpec:
    return FairnessSpec(k, tuple(quotas), tuple(quotas), kind="exact")


def free_bounds(ds: Dataset, k: int) -> FairnessSpec:
    """No fairness constraint: any size-k subset is feasible."""
    return FairnessSpec(k, (0,) * ds.C, (k,) * ds.C, kind="free")


def _clamped_bounds(k, C, shares, alpha, kind):
    a = Fraction(str(alpha))
    if not 0 < a < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if k < C:
        raise InfeasibleSpecError(f"k={k} is smaller than the number of groups C={C}")
    lower, upper = [], []
    for share in shares:
        lower.append(max(1, math.floor((1 - a) * k * share)))
        upper.append(min(k - C + 1, math.ceil((1 + a) * k * share)))
    return FairnessSpec(k, tuple(lower), tuple(upper), kind=kind, alpha=float(alpha))


def proportional_bounds(ds: Dataset, k: int, alpha: float) -> FairnessSpec:
    sizes = ds.group_sizes
    shares = [Fraction(int(s), ds.n) for s in sizes]
    return _clamped_bounds(k, ds.C, shares, alpha, "prop").check(ds)


def balanced_bounds(ds: Dataset, k: int, alpha: float) -> FairnessSpec:
    shares = [Fraction(1, ds.C)] * ds.C
    return _clamped_bounds(k, ds.C, shares, alpha, "bal").check(ds)


def group_counts(S: Iterable[int], ds: Dataset) -> np.ndarray:
    S = np.asarray(list(S), dtype=np.int64)
    return np.bincount(ds.groups[S], minlength=ds.C) if S.size else np.zeros(ds.C, dtype=np.int64)


def is_independent(S: Iterable[int], ds: Dataset, spec: FairnessSpec) -> bool:
    return spec.independent_counts(group_counts(S, ds))


def err(S: Iterable[int], ds: Dataset, spec: FairnessSpec) -> int:
    """Number of fairness violations: excess over h_c plus deficit below l_c."""
    counts = group_counts(S, ds)
    return int(
        sum(max(x - h, lo - x, 0) for x, lo, h in zip(counts, spec.lower, spec.upper))
    )


def complete_selection(
    selected: Sequence[int],
    ds: Dataset,
    spec: FairnessSpec,
    order: Sequence[int] | None = None,
) -> list[int]:
    """Extend an independent selection to size k, keeping it independent.

    Candidates are tried in ``order`` (default: skyline rows first, then the
    rest, each by position). Adding points never lowers any happiness ratio.
    """
    chosen = list(dict.fromkeys(int(i) for i in selected))
    counts = group_counts(chosen, ds)
    if not spec.independent_counts(counts):
        raise InfeasibleSpecError("selection to complete is not independent")
    if order is None:
        flags = ds.skyline_flags
        order = np.concatenate([np.flatnonzero(flags), np.flatnonzero(~flags)])
    taken = set(chosen)
    for i in order:
        if len(chosen) >= spec.k:
            break
        i = int(i)
        if i in taken:
            continue
        c = ds.groups[i]
        if spec.addable_groups(counts)[c]:
            chosen.append(i)
            taken.add(i)
            counts[c] += 1
    return chosen


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


def _anticorrelated_batch(rng: np.random.Generator, size: int, d: int) -> np.ndarray:
    # plane offset: mean of 12 uniforms stretched over [0.25, 0.75]
    v = rng.random((size, 12)).mean(axis=1) * 0.5 + 0.25
    half = np.where(v <= 0.5, v, 1.0 - v)
    X = np.repeat(v[:, None], d, axis=1)
    for j in range(d):
        h = rng.uniform(-half, half)
        X[:, j] += h
        X[:, (j + 1) % d] -= h
    ok = np.all((X >= 0.0) & (X <= 1.0), axis=1)
    return X[ok]


def generate_anticorrelated(n: int, d: int, C: int, seed: int = 0) -> Dataset:
    """Anti-correlated points split into C equal groups by coordinate sum.

    Each point starts on the plane sum(x) = d*v, v concentrated around 0.5,
    and is perturbed by pairwise transfers that preserve the sum; points
    leaving the unit cube are redrawn. Group 0 holds the smallest sums.
    """
    if not (n >= C >= 1) or d < 2:
        raise ValueError(f"need n >= C >= 1 and d >= 2, got n={n}, d={d}, C={C}")
    rng = np.random.default_rng(seed)
    parts, have = [], 0
    while have < n:
        batch = _anticorrelated_batch(rng, max(64, int((n - have) * 1.3)), d)
        parts.append(batch)
        have += len(batch)
    X = np.concatenate(parts)[:n]
    X = X[np.argsort(X.sum(axis=1), kind="stable")]
    groups = np.concatenate([np.full(len(chunk), c) for c, chunk in enumerate(np.array_split(np.arange(n), C))])
    ids = tuple(f"p{i}" for i in range(n))
    return Dataset(ids, X, groups, tuple(f"g{c}" for c in range(C)),
                   tuple(f"a{j + 1}" for j in range(d)), source=f"anticor:n={n},d={d},C={C},seed={seed}")
