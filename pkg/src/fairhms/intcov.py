"""Exact fair happiness maximization in two dimensions via fair interval cover."""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, FairnessSpec, InfeasibleSpecError, Solution, complete_selection
from .geometry import Envelope, score_lines, upper_envelope
from .utility import dataset_envelope, mhr_exact_2d

__all__ = [
    "TauInterval",
    "build_candidates",
    "upper_envelope",
    "interval_for",
    "tau_intervals",
    "dynprog_cover",
    "intcov",
]

DEDUP_TOL = 1e-12
ENVELOPE_TOL = 1e-12
CHAIN_TOL = 1e-9


@dataclass(frozen=True)
class TauInterval:
    """Range of lam on which one point reaches tau times the envelope; lo > hi means empty."""

    point: int
    lo: float
    hi: float
    group: int = 0

    @property
    def empty(self) -> bool:
        return not self.lo <= self.hi


def _require_2d(ds: Dataset):
    if ds.d != 2:
        raise ValueError(f"this operation needs d=2, got d={ds.d}")


def build_candidates(ds: Dataset) -> np.ndarray:
    """Every value the optimal MHR can take, sorted and deduplicated.

    These are the ratios at lam = 0 and lam = 1 for each point, plus the
    ratio at the lam where two points score equally, for every pair.
    """
    _require_2d(ds)
    X = ds.coords
    env = dataset_envelope(ds)
    top0, top1 = env.value(0.0), env.value(1.0)
    values = [X[:, 1] / top0, X[:, 0] / top1]
    a, b = score_lines(X)
    i, j = np.triu_indices(len(X), k=1)
    db = b[i] - b[j]
    ok = db != 0
    lam = np.full(len(i), -1.0)
    lam[ok] = (a[j[ok]] - a[i[ok]]) / db[ok]
    inside = ok & (lam >= 0.0) & (lam <= 1.0)
    lam, i = lam[inside], i[inside]
    values.append((a[i] + b[i] * lam) / env.value(lam))
    H = np.minimum(np.sort(np.concatenate(values)), 1.0)
    keep = np.concatenate(([True], np.diff(H) > DEDUP_TOL))
    return H[keep]


def tau_intervals(X: np.ndarray, tau: float, env: Envelope) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized interval_for over the rows of X; empty rows get lo=1, hi=0.

    g(lam) = f_lam(p) - tau * env(lam) is concave and piecewise linear with
    kinks only at envelope breakpoints, so its superlevel set {g >= 0} is an
    interval whose ends are found by linear interpolation.
    """
    a, b = score_lines(X)
    bp = env.breakpoints
    G = a[:, None] + np.outer(b, bp) - tau * env.value(bp)[None, :]
    ok = G >= -ENVELOPE_TOL
    n = len(X)
    lo = np.ones(n)
    hi = np.zeros(n)
    has = ok.any(axis=1)
    rows = np.flatnonzero(has)
    if rows.size == 0:
        return lo, hi
    first = ok[rows].argmax(axis=1)
    last = ok.shape[1] - 1 - ok[rows, ::-1].argmax(axis=1)
    for r, i0, i1 in zip(rows, first, last):
        g = G[r]
        if i0 == 0 or g[i0] <= 0:
            lo[r] = bp[i0]
        else:
            lo[r] = bp[i0 - 1] + (0 - g[i0 - 1]) * (bp[i0] - bp[i0 - 1]) / (g[i0] - g[i0 - 1])
        if i1 == len(bp) - 1 or g[i1] <= 0:
            hi[r] = bp[i1]
        else:
            hi[r] = bp[i1] + (0 - g[i1]) * (bp[i1 + 1] - bp[i1]) / (g[i1 + 1] - g[i1])
    return lo, hi


def interval_for(p, tau: float, env: Envelope, point: int = 0, group: int = 0) -> TauInterval:
    """{lam : f_lam(p) >= tau * env(lam)} for a single point."""
    if not 0 < tau <= 1:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    coords = np.asarray(getattr(p, "coords", p), dtype=float).reshape(1, 2)
    lo, hi = tau_intervals(coords, tau, env)
    return TauInterval(point, float(lo[0]), float(hi[0]), group)


class _GroupReach:
    """Best right end among one group's intervals whose left end is within reach."""

    def __init__(self, intervals: Sequence[TauInterval]):
        ivs = sorted((iv for iv in intervals if not iv.empty), key=lambda iv: (iv.lo, iv.point))
        self.los = [iv.lo for iv in ivs]
        self.best_hi, self.best_pt = [], []
        hi, pt = -np.inf, None
        for iv in ivs:
            if iv.hi > hi:
                hi, pt = iv.hi, iv.point
            self.best_hi.append(hi)
            self.best_pt.append(pt)

    def __len__(self):
        return len(self.los)

    def reach(self, value: float):
        j = bisect_right(self.los, value + CHAIN_TOL) - 1
        if j < 0:
            return value, None
        return self.best_hi[j], self.best_pt[j]


def dynprog_cover(
    intervals: Sequence[Sequence[TauInterval]],
    spec: FairnessSpec,
    stats: dict | None = None,
) -> list[int] | None:
    """Points whose intervals cover [0, 1] under the group bounds, or None.

    ``intervals[c]`` lists one interval per point of group c (empty ones
    included). The result holds between l_c and h_c points of each group and
    at most k in total; groups are topped up to l_c after the cover is found.

    State (k_1, ..., k_C) holds the rightmost point reachable from 0 by
    chaining k_c intervals of each group c. The transition from the state
    with one fewer group-c interval extends to the largest right end among
    group-c intervals starting within reach. States where
    sum(max(l_c, k_c)) > k are pruned since they cannot be completed.
    """
    C = spec.C
    if len(intervals) != C:
        raise ValueError(f"expected intervals for {C} groups, got {len(intervals)}")
    if any(len(intervals[c]) < spec.lower[c] for c in range(C)):
        if stats is not None:
            stats["states"] = 0
        return None
    reach = [_GroupReach(ivs) for ivs in intervals]
    caps = [min(spec.upper[c], len(reach[c])) for c in range(C)]
    lower = spec.lower
    value: dict[tuple, float] = {}
    back: dict[tuple, tuple] = {}
    visited = 0
    found = None
    # lexicographic order lists every predecessor (one coordinate lower) first
    for state in itertools.product(*(range(cap + 1) for cap in caps)):
        if sum(max(lo, x) for lo, x in zip(lower, state)) > spec.k:
            continue
        visited += 1
        if not any(state):
            value[state] = 0.0
            continue
        best, arg = -1.0, None
        for c in range(C):
            if state[c] == 0:
                continue
            prev = state[:c] + (state[c] - 1,) + state[c + 1:]
            pv = value[prev]
            hi, pt = reach[c].reach(pv)
            v = max(pv, hi)
            if v > best:
                best, arg = v, (prev, pt)
        value[state] = best
        back[state] = arg
        if best >= 1.0 - CHAIN_TOL:
            found = state
            break
    if stats is not None:
        stats["states"] = visited
    if found is None:
        return None
    chosen, state = [], found
    while any(state):
        prev, pt = back[state]
        if pt is not None and pt not in chosen:
            chosen.append(pt)
        state = prev
    # top up groups below their lower bound; this cannot break the size budget
    taken = set(chosen)
    for c in range(C):
        have = sum(1 for iv in intervals[c] if iv.point in taken)
        for iv in sorted(intervals[c], key=lambda iv: (iv.empty, iv.point)):
            if have >= lower[c]:
                break
            if iv.point not in taken:
                chosen.append(iv.point)
                taken.add(iv.point)
                have += 1
    return sorted(chosen)


def intcov(ds: Dataset, spec: FairnessSpec, stats: dict | None = None) -> Solution:
    """Optimal fair size-k subset for 2D data.

    Binary search over the candidate MHR values for the largest tau at which
    the fair interval cover exists. Works on the per-group skyline and pads
    the cover to exactly k points.
    """
    _require_2d(ds)
    spec.check(ds)
    sky_rows = ds.skyline_indices()
    env = dataset_envelope(ds)
    H = build_candidates(ds.subset(sky_rows))
    # a group whose skyline is shorter than its lower bound borrows dominated members
    rows = [sky_rows]
    sky_sizes = ds.skyline_sizes()
    for c in range(ds.C):
        short = spec.lower[c] - int(sky_sizes[c])
        if short > 0:
            extra = np.setdiff1d(ds.group_members(c), sky_rows)
            rows.append(extra[:short])
    rows = np.concatenate(rows)
    X, groups = ds.coords[rows], ds.groups[rows]

    def probe(tau: float):
        lo, hi = tau_intervals(X, tau, env)
        by_group = [[] for _ in range(ds.C)]
        for r in range(len(rows)):
            by_group[groups[r]].append(TauInterval(int(rows[r]), float(lo[r]), float(hi[r]), int(groups[r])))
        st: dict = {}
        cover = dynprog_cover(by_group, spec, st)
        probes.append({"tau": float(tau), "ok": cover is not None, "states": st["states"]})
        return cover

    probes: list[dict] = []
    best_rows, best_tau = None, None
    left, right = 0, len(H) - 1
    while left <= right:
        mid = (left + right) // 2
        cover = probe(H[mid])
        if cover is not None:
            best_rows, best_tau = cover, H[mid]
            left = mid + 1
        else:
            right = mid - 1
    flags = []
    if best_rows is None:
        flags.append("no_cover_found")
        best_rows = []
    chosen = complete_selection(best_rows, ds, spec)
    if len(chosen) != spec.k:
        raise InfeasibleSpecError("could not extend the cover to a fair size-k set")
    info = {
        "tau": None if best_tau is None else float(best_tau),
        "candidates": int(len(H)),
        "probes": len(probes),
        "cover_size": len(best_rows),
        "max_states": max((p["states"] for p in probes), default=0),
        "mhr": mhr_exact_2d(chosen, ds),
        "eval_method": "exact-2d",
        "flags": flags,
    }
    if stats is not None:
        stats.update(info, probe_log=probes)
    return Solution(tuple(sorted(chosen)), info)
