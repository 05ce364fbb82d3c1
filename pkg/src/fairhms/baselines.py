"""Comparison algorithms: unfair greedy, per-group adaptation and fair matroid greedy."""

from __future__ import annotations

import enum
from typing import Callable

import numpy as np

from .dataset import Dataset, FairnessSpec, InfeasibleSpecError, Solution, complete_selection
from .utility import UtilityNet, happiness_matrix

TIE_TOL = 1e-12


class BaselineKind(enum.Enum):
    GREEDY_UNFAIR = "greedy"
    G_GREEDY = "g-greedy"
    F_GREEDY = "fgreedy"


# names kept for merging externally computed results; not runnable here
RESERVED = ("dmm", "sphere", "hs")


def _greedy_min_ratio(ds: Dataset, k: int, net: UtilityNet, spec: FairnessSpec | None) -> list[int]:
    """Add, k times, the skyline point that most raises the net MHR.

    Ties go to the larger average ratio, then to the lower row. With a
    spec, only points keeping the selection independent are considered.
    """
    rows = ds.skyline_indices()
    H = happiness_matrix(ds, rows, net.vectors)
    groups = ds.groups[rows]
    taken = np.zeros(len(rows), dtype=bool)
    cur = np.zeros(net.m)
    counts = np.zeros(ds.C, dtype=np.int64)
    chosen: list[int] = []
    while len(chosen) < k:
        allowed = ~taken
        if spec is not None:
            allowed &= spec.addable_groups(counts)[groups]
        cand = np.flatnonzero(allowed)
        if cand.size == 0:
            break
        merged = np.maximum(H[cand], cur)
        worst = merged.min(axis=1)
        mean = merged.mean(axis=1)
        top = worst >= worst.max() - TIE_TOL
        mean_top = np.where(top, mean, -np.inf)
        pick = int(cand[np.flatnonzero(mean_top >= mean_top.max() - TIE_TOL)[0]])
        chosen.append(pick)
        taken[pick] = True
        counts[groups[pick]] += 1
        np.maximum(cur, H[pick], out=cur)
    return [int(rows[j]) for j in chosen]


def greedy_unfair(ds: Dataset, k: int, net: UtilityNet) -> Solution:
    """Greedy net-MHR maximization with no fairness constraint."""
    sky = int(ds.skyline_flags.sum())
    if not 1 <= k <= sky:
        raise ValueError(f"k={k} must lie between 1 and the skyline size {sky}")
    S = _greedy_min_ratio(ds, k, net, None)
    return Solution(tuple(sorted(S)), {"m": net.m})


def f_greedy(ds: Dataset, spec: FairnessSpec, net: UtilityNet) -> Solution:
    """Greedy net-MHR maximization restricted to the fairness matroid, until k points."""
    spec.check(ds)
    S = _greedy_min_ratio(ds, spec.k, net, spec)
    flags = []
    if len(S) < spec.k:
        flags.append("padded_beyond_skyline")
        S = complete_selection(S, ds, spec)
    return Solution(tuple(sorted(S)), {"m": net.m, "flags": flags})


def allocate_group_sizes(ds: Dataset, spec: FairnessSpec) -> list[int]:
    """Per-group sizes k_c: start at l_c, then repeatedly serve the group furthest below its share.

    A group's share is k*|D_c|/|D|; sizes never exceed min(h_c, |D_c|).
    """
    spec.check(ds)
    sizes = ds.group_sizes
    share = spec.k * sizes / ds.n
    alloc = list(spec.lower)
    caps = [min(h, int(s)) for h, s in zip(spec.upper, sizes)]
    while sum(alloc) < spec.k:
        open_ = [c for c in range(ds.C) if alloc[c] < caps[c]]
        if not open_:
            raise InfeasibleSpecError("groups cannot absorb k points within their caps")
        c = max(open_, key=lambda c: (share[c] - alloc[c], -c))
        alloc[c] += 1
    return alloc


def per_group_adapt(
    ds: Dataset,
    spec: FairnessSpec,
    net: UtilityNet,
    inner: BaselineKind | Callable = BaselineKind.GREEDY_UNFAIR,
) -> Solution:
    """Run an unconstrained algorithm separately inside each group and union the results.

    ``inner`` is GREEDY_UNFAIR or any callable (ds, k, net) -> rows. Each
    group is treated as its own database, so its happiness ratios use the
    group's own best scores.
    """
    if inner is BaselineKind.GREEDY_UNFAIR:
        run = lambda sub, k, n: list(greedy_unfair(sub, k, n).indices)  # noqa: E731
    elif callable(inner):
        run = inner
    else:
        raise ValueError(f"unsupported inner algorithm {inner!r}")
    alloc = allocate_group_sizes(ds, spec)
    chosen: list[int] = []
    for c, k_c in enumerate(alloc):
        if k_c == 0:
            continue
        members = ds.group_members(c)
        sub = ds.subset(members)
        sky = np.flatnonzero(sub.skyline_flags)
        if k_c >= sky.size:
            local = list(sky) + [j for j in range(sub.n) if not sub.skyline_flags[j]][: k_c - sky.size]
        else:
            local = run(sub, k_c, net)
        chosen.extend(int(members[j]) for j in local)
    return Solution(tuple(sorted(chosen)), {"m": net.m, "allocation": alloc})
