"""Bicriteria greedy solvers for any dimension: capped-value search over multi-round matroid greedy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .dataset import Dataset, FairnessSpec, Solution, complete_selection
from .utility import UtilityNet, default_evaluator, happiness_matrix, net_size_for, sample_net

TIE_TOL = 1e-12
SUCCESS_TOL = 1e-9
BATCH = 32


def gamma_for(m: int, epsilon: float) -> int:
    """Round budget ceil(log2(2m / epsilon)), computed without float round-off."""
    ratio = Fraction(2 * m) / Fraction(str(epsilon))
    g = max(0, ratio.numerator.bit_length() - ratio.denominator.bit_length() - 1)
    while Fraction(2) ** g < ratio:
        g += 1
    return max(1, g)


def effective_k(k: int, m: int, epsilon: float) -> int:
    """Per-round size k' = floor(k / gamma), at least 1."""
    if k < 1:
        raise ValueError("k must be positive")
    return max(1, k // gamma_for(m, epsilon))


def cap_schedule(m: int, epsilon: float) -> list[float]:
    """Capped values 1, q, q^2, ... with q = 1 - epsilon/2, down to the last one >= 1/m."""
    q = 1.0 - epsilon / 2.0
    taus, i = [], 0
    while True:
        tau = q ** i
        if tau < 1.0 / m:
            return taus
        taus.append(tau)
        i += 1


@dataclass(frozen=True)
class GreedyConfig:
    """Settings for the capped-value search.

    The net size is ``m`` if given, else derived from ``delta``, else 10*k*d.
    ``feasible`` caps every round at k' points and keeps the union inside
    the fairness matroid, then tops the answer up to exactly k points.
    """

    epsilon: float = 0.02
    m: int | None = None
    delta: float | None = None
    feasible: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.m is not None and self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    def net_size(self, k: int, d: int) -> int:
        if self.m is not None:
            return self.m
        if self.delta is not None:
            return net_size_for(self.delta, d)
        return 10 * k * d

    def gamma_cap(self, m: int) -> int:
        return gamma_for(m, self.epsilon)


@dataclass(frozen=True)
class AdaptiveConfig(GreedyConfig):
    """Net-size doubling from m0 up to M, stopping when the capped value stalls."""

    lam: float = 0.04
    M: int | None = None
    m0: int | None = None

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.M is not None and self.M < 1:
            raise ValueError(f"M must be positive, got {self.M}")
        if self.m0 is not None and self.M is not None and not 1 <= self.m0 <= self.M:
            raise ValueError(f"need 1 <= m0 <= M, got m0={self.m0}, M={self.M}")

    def limits(self, k: int, d: int) -> tuple[int, int]:
        M = self.M if self.M is not None else (
            net_size_for(self.delta, d) if self.delta is not None else 10 * k * d)
        m0 = self.m0 if self.m0 is not None else max(1, math.ceil(0.05 * M))
        if not 1 <= m0 <= M:
            raise ValueError(f"need 1 <= m0 <= M, got m0={m0}, M={M}")
        return m0, M


class GainMemo:
    """Gain bounds keyed by the selected set, handed from one cap to the next.

    For a fixed selection, the capped gain of every point can only shrink
    when the cap shrinks, so bounds recorded at one cap stay valid at every
    smaller cap.
    """

    def __init__(self):
        self.prev: dict = {}
        self.next: dict = {}

    def advance(self) -> None:
        self.prev, self.next = self.next, {}

    def tighten(self, key, ub: np.ndarray) -> None:
        old = self.prev.get(key)
        if old is not None:
            np.minimum(ub, old, out=ub)

    def record(self, key, ub: np.ndarray) -> None:
        old = self.next.get(key)
        self.next[key] = ub.copy() if old is None else np.minimum(old, ub)


class CappedTable:
    """Per-point happiness ratios on one net, restricted to the group skylines.

    Runs the greedy rounds for the capped objective and counts how many
    individual hr values were computed or consulted.
    """

    def __init__(self, ds: Dataset, net: UtilityNet):
        if net.d != ds.d:
            raise ValueError(f"net has d={net.d}, data has d={ds.d}")
        self.ds = ds
        self.rows = ds.skyline_indices()
        self.H = happiness_matrix(ds, self.rows, net.vectors)
        self.groups = ds.groups[self.rows]
        self.m = net.m
        self.hr_evals = self.H.size

    def gains(self, idx: np.ndarray, capped: np.ndarray, tau: float) -> np.ndarray:
        self.hr_evals += idx.size * self.m
        return np.maximum(np.minimum(self.H[idx], tau) - capped, 0.0).sum(axis=1) / self.m

    def _round(self, tau, spec, taken, union, union_counts, cur, ub, limit, within_union, memo=None):
        """One greedy pass; mutates taken/union/union_counts/cur/ub and returns chosen positions."""
        round_counts = np.zeros(spec.C, dtype=np.int64)
        chosen: list[int] = []
        capped = np.minimum(cur, tau)
        fresh = np.zeros(len(self.rows), dtype=bool)
        while limit is None or len(chosen) < limit:
            counts = union_counts if within_union else round_counts
            allowed = ~taken & spec.addable_groups(counts)[self.groups]
            cand = np.flatnonzero(allowed)
            if cand.size == 0:
                break
            if capped.min() >= tau:
                pick = int(cand[0])  # every gain is zero now
            else:
                key = frozenset(union)
                if memo is not None:
                    memo.tighten(key, ub)
                pick = self._lazy_argmax(cand, capped, tau, ub, fresh)
                if memo is not None:
                    memo.record(key, ub)
            chosen.append(pick)
            union.append(pick)
            taken[pick] = True
            g = self.groups[pick]
            union_counts[g] += 1
            round_counts[g] += 1
            np.maximum(cur, self.H[pick], out=cur)
            capped = np.minimum(cur, tau)
            fresh[:] = False
        return chosen

    def _lazy_argmax(self, cand, capped, tau, ub, fresh) -> int:
        """Smallest index among the candidates whose gain is within TIE_TOL of the best.

        Stale bounds are valid because gains only shrink as the selection
        grows; a stale candidate is evaluated only while it could still beat
        the current best or win the tie on index.
        """
        ceiling = (tau - capped).sum() / self.m + 1e-15
        np.minimum(ub, ceiling, out=ub)
        best, pick = -np.inf, -1
        while True:
            stale = cand[~fresh[cand]]
            if pick >= 0:
                b = ub[stale]
                stale = stale[(b > best + TIE_TOL) | ((stale < pick) & (b >= best - TIE_TOL))]
                if stale.size == 0:
                    return pick
            elif stale.size > BATCH:
                stale = stale[np.lexsort((stale, -ub[stale]))[:BATCH]]
            ub[stale] = self.gains(stale, capped, tau)
            fresh[stale] = True
            done = cand[fresh[cand]]
            best = ub[done].max()
            pick = int(done[ub[done] >= best - TIE_TOL].min())

    def mr_greedy(
        self,
        tau: float,
        gamma: int,
        spec: FairnessSpec,
        epsilon: float,
        k_round: int | None = None,
        memo: GainMemo | None = None,
        stats: dict | None = None,
    ) -> list[int] | None:
        """Up to gamma greedy rounds over the remaining points; see ``mr_greedy``."""
        n = len(self.rows)
        taken = np.zeros(n, dtype=bool)
        union: list[int] = []
        union_counts = np.zeros(spec.C, dtype=np.int64)
        cur = np.zeros(self.m)
        ub = np.full(n, np.inf)
        target = (1.0 - epsilon / (2 * self.m)) * tau - SUCCESS_TOL
        sizes: list[int] = []
        ok = False
        for _ in range(gamma):
            chosen = self._round(tau, spec, taken, union, union_counts, cur, ub,
                                 limit=k_round, within_union=k_round is not None, memo=memo)
            if not chosen:
                break
            sizes.append(len(chosen))
            if np.minimum(cur, tau).mean() >= target:
                ok = True
                break
        if stats is not None:
            stats.update(rounds=len(sizes), round_sizes=sizes, success=ok)
        if not ok:
            return None
        return [int(self.rows[j]) for j in union]

    def fill(self, selected, tau: float, spec: FairnessSpec, memo: GainMemo | None = None) -> list[int]:
        """Grow an independent selection to size k by capped greedy, then by position."""
        pos = {int(r): j for j, r in enumerate(self.rows)}
        taken = np.zeros(len(self.rows), dtype=bool)
        union: list[int] = []
        cur = np.zeros(self.m)
        for r in selected:
            j = pos.get(int(r))
            if j is not None:
                taken[j] = True
                union.append(j)
                np.maximum(cur, self.H[j], out=cur)
        counts = np.bincount(self.ds.groups[list(selected)], minlength=spec.C).astype(np.int64) \
            if len(selected) else np.zeros(spec.C, dtype=np.int64)
        ub = np.full(len(self.rows), np.inf)
        extra = self._round(tau, spec, taken, union, counts, cur, ub,
                            limit=spec.k - len(selected), within_union=True, memo=memo)
        grown = list(selected) + [int(self.rows[j]) for j in extra]
        return complete_selection(grown, self.ds, spec)


def mr_greedy(
    tau: float,
    gamma: int,
    net: UtilityNet,
    ds: Dataset,
    spec: FairnessSpec,
    epsilon: float = 0.02,
    k_round: int | None = None,
    stats: dict | None = None,
) -> list[int] | None:
    """Union of up to gamma greedy rounds once it reaches (1 - eps/(2m)) * tau, else None.

    Each round greedily builds a maximal independent set of the fairness
    matroid from points not chosen in earlier rounds, maximizing the gain
    of the capped objective relative to everything chosen so far. With
    ``k_round`` set, rounds stop at k_round points and the union itself must
    stay independent.
    """
    table = CappedTable(ds, net)
    out = table.mr_greedy(tau, gamma, spec, epsilon, k_round, stats=stats)
    if stats is not None:
        stats["hr_evals"] = table.hr_evals
    return out


def bigreedy(
    ds: Dataset,
    spec: FairnessSpec,
    cfg: GreedyConfig = GreedyConfig(),
    *,
    net: UtilityNet | None = None,
    evaluator: Callable | None = None,
) -> Solution:
    """Try every capped value and keep the best greedy union found.

    Capped values run from 1 down to 1/m by the factor 1 - epsilon/2; each
    nonempty multi-round greedy result is scored with ``evaluator`` (exact
    in 2D, else a separate larger net) and the best is returned.
    """
    spec.check(ds)
    if net is None:
        m = cfg.net_size(spec.k, ds.d)
        net = sample_net(ds.d, m, [cfg.seed, 0])
    m = net.m
    if evaluator is None:
        evaluator = default_evaluator(ds, m, cfg.seed)
    gamma = gamma_for(m, cfg.epsilon)
    k_round = effective_k(spec.k, m, cfg.epsilon) if cfg.feasible else None
    table = CappedTable(ds, net)
    memo = GainMemo()
    taus = cap_schedule(m, cfg.epsilon)
    found = []
    for tau in taus:
        memo.advance()
        st: dict = {}
        S = table.mr_greedy(tau, gamma, spec, cfg.epsilon, k_round, memo, st)
        if S is None:
            continue
        if cfg.feasible:
            S = table.fill(S, tau, spec, memo)
        found.append((tau, S, st))
    flags = []
    if not found:
        flags.append("no_cap_succeeded")
        tau = taus[-1]
        st = {"rounds": 1}
        S = table.fill([], tau, spec)
        st["round_sizes"] = [len(S)]
        found.append((tau, S, st))
    best, best_val = None, -np.inf
    for item in found:
        val = evaluator(item[1])
        if val > best_val:
            best, best_val = item, val
    tau, S, st = best
    info = {
        "tau": float(tau),
        "mhr": float(best_val),
        "eval_method": getattr(evaluator, "tag", "custom"),
        "m": m,
        "gamma": gamma,
        "k_round": k_round,
        "caps_tried": len(taus),
        "successes": len(found) - (1 if flags else 0),
        "rounds": st["rounds"],
        "round_sizes": st["round_sizes"],
        "hr_evals": table.hr_evals,
        "flags": flags,
    }
    return Solution(tuple(sorted(S)), info)


def bigreedy_plus(
    ds: Dataset,
    spec: FairnessSpec,
    cfg: AdaptiveConfig = AdaptiveConfig(),
    *,
    evaluator: Callable | None = None,
) -> Solution:
    """Run bigreedy on nets of size m0, 2*m0, ... up to M.

    Stops once the capped value drops by less than ``lam`` between two
    consecutive sizes and returns the best solution over all sizes tried.
    """
    spec.check(ds)
    m0, M = cfg.limits(spec.k, ds.d)
    if evaluator is None:
        evaluator = default_evaluator(ds, M, cfg.seed)
    extra = math.ceil(math.log2(M / m0)) if M > m0 else 0
    log, results = [], []
    m = m0
    for i in range(extra + 1):
        if i:
            m = min(2 * m, M)
        net = sample_net(ds.d, m, [cfg.seed, i])
        sol = bigreedy(ds, spec, GreedyConfig(cfg.epsilon, m, None, cfg.feasible, cfg.seed),
                       net=net, evaluator=evaluator)
        results.append(sol)
        log.append({"m": m, "tau": sol.info["tau"], "mhr": sol.info["mhr"], "hr_evals": sol.info["hr_evals"]})
        if i and log[-2]["tau"] - log[-1]["tau"] < cfg.lam:
            break
    best = max(range(len(results)), key=lambda j: (results[j].info["mhr"], -j))
    chosen = results[best]
    info = dict(chosen.info)
    info.update(
        round=best,
        net_sizes=[r["m"] for r in log],
        taus=[r["tau"] for r in log],
        round_mhr=[r["mhr"] for r in log],
        hr_evals=sum(r["hr_evals"] for r in log),
        m0=m0,
        M=M,
    )
    return Solution(chosen.indices, info)
