"""Utility vectors, random nets on the sphere and happiness-ratio evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import Dataset, Point
from .geometry import Envelope, upper_envelope

TOL = 1e-9
MAX_NET_SIZE = 50_000_000
NET_CONSTANT = 8.0


class DegenerateUtilityError(ValueError):
    """A utility vector under which every point scores zero."""


@dataclass(frozen=True)
class UtilityVector:
    weights: tuple[float, ...]
    norm_kind: str = "l2"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("utility weights must be nonnegative")
        norm = w.sum() if self.norm_kind == "l1" else np.sqrt(w @ w)
        if self.norm_kind not in ("l1", "l2") or abs(norm - 1.0) > TOL:
            raise ValueError(f"weights do not have unit {self.norm_kind} norm")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @classmethod
    def normalized(cls, weights, norm_kind: str = "l2") -> "UtilityVector":
        w = np.asarray(weights, dtype=float)
        norm = w.sum() if norm_kind == "l1" else np.sqrt(w @ w)
        if norm <= 0:
            raise ValueError("zero utility vector")
        return cls(tuple(w / norm), norm_kind)

    @classmethod
    def from_lambda(cls, lam: float) -> "UtilityVector":
        """2D utility u = (lam, 1 - lam)."""
        return cls((lam, 1.0 - lam), "l1")


@dataclass(frozen=True, eq=False)
class UtilityNet:
    """m unit vectors on the nonnegative part of the sphere, one per row."""

    vectors: np.ndarray
    nominal_delta: float | None = None
    seed: object = None

    def __post_init__(self):
        V = np.array(self.vectors, dtype=float, copy=True)
        if V.ndim != 2 or len(V) < 1:
            raise ValueError("a net needs at least one vector")
        if np.any(V < 0) or np.any(np.abs(np.linalg.norm(V, axis=1) - 1.0) > TOL):
            raise ValueError("net vectors must be nonnegative with unit l2 norm")
        V.setflags(write=False)
        object.__setattr__(self, "vectors", V)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


def _as_weights(u) -> np.ndarray:
    return np.asarray(u.weights if isinstance(u, UtilityVector) else u, dtype=float)


def _as_coords(p) -> np.ndarray:
    return np.asarray(p.coords if isinstance(p, Point) else p, dtype=float)


def _rows(S: Iterable[int]) -> np.ndarray:
    rows = np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("S must be nonempty")
    return rows


def score(u, p) -> float:
    w, x = _as_weights(u), _as_coords(p)
    if w.shape != x.shape:
        raise ValueError(f"dimension mismatch: utility has {w.size} weights, point has {x.size}")
    return float(w @ x)


def scores(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """f_u(p) for every row p of X and row u of V.

    Summed one coordinate at a time so each entry rounds the same way no
    matter which other rows are present; a BLAS product can differ in the
    last bit between a subset and the full data, turning a ratio of 1 into
    1 - 2e-16.
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    out = np.multiply.outer(X[:, 0], V[:, 0])
    for j in range(1, X.shape[1]):
        out += np.multiply.outer(X[:, j], V[:, j])
    return out


def best_scores(ds: Dataset, V: np.ndarray) -> np.ndarray:
    """max_{p in D} f_u(p) for each row u of V; computed over the skyline."""
    sky = ds.coords[ds.skyline_indices()]
    top = np.max(scores(sky, V), axis=0)
    if np.any(top <= 0):
        raise DegenerateUtilityError("every point scores 0 under some utility vector")
    return top


def hr(u, S: Iterable[int], ds: Dataset) -> float:
    """Happiness ratio of rows S: best score in S over best score in D."""
    w = _as_weights(u)
    if w.size != ds.d:
        raise ValueError(f"dimension mismatch: utility has {w.size} weights, data has d={ds.d}")
    rows = _rows(S)
    top = best_scores(ds, w[None, :])[0]
    return float(min(1.0, np.max(scores(ds.coords[rows], w[None, :])) / top))


def happiness_matrix(ds: Dataset, rows: np.ndarray, V: np.ndarray) -> np.ndarray:
    """hr(u_j, {row_i}) for every listed row and net vector, clipped to [0, 1]."""
    H = scores(ds.coords[rows], V)
    H /= best_scores(ds, V)
    np.clip(H, 0.0, 1.0, out=H)
    return H


def mhr_on_net(S: Iterable[int], ds: Dataset, net: UtilityNet) -> float:
    rows = _rows(S)
    return float(happiness_matrix(ds, rows, net.vectors).max(axis=0).min())


def mhr_truncated(S: Iterable[int], ds: Dataset, net: UtilityNet, tau: float) -> float:
    """Average over the net of hr capped at tau; the empty set scores 0."""
    rows = np.asarray(list(S), dtype=np.int64)
    if rows.size == 0:
        return 0.0
    best = happiness_matrix(ds, rows, net.vectors).max(axis=0)
    return float(np.minimum(best, tau).mean())


def marginal_gain(p: int, S: Iterable[int], ds: Dataset, net: UtilityNet, tau: float) -> float:
    S = list(S)
    return mhr_truncated(S + [p], ds, net, tau) - mhr_truncated(S, ds, net, tau)


# ---------------------------------------------------------------------------
# nets
# ---------------------------------------------------------------------------


def sample_net(d: int, m: int, seed=0, nominal_delta: float | None = None) -> UtilityNet:
    """m i.i.d. directions, uniform on the nonnegative orthant of the unit sphere."""
    if d < 2 or m < 1:
        raise ValueError(f"need d >= 2 and m >= 1, got d={d}, m={m}")
    rng = np.random.default_rng(seed)
    V = np.abs(rng.standard_normal((m, d)))
    norms = np.linalg.norm(V, axis=1)
    while np.any(norms == 0):  # practically unreachable
        bad = norms == 0
        V[bad] = np.abs(rng.standard_normal((int(bad.sum()), d)))
        norms = np.linalg.norm(V, axis=1)
    return UtilityNet(V / norms[:, None], nominal_delta, seed)


def net_size_for(delta: float, d: int, c: float = NET_CONSTANT) -> int:
    """Sample count m = ceil(c * delta^-(d-1) * ln(1/delta))."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    m = c * delta ** (-(d - 1)) * math.log(1.0 / delta)
    if not math.isfinite(m) or m > MAX_NET_SIZE:
        raise OverflowError(f"net for delta={delta}, d={d} needs {m:.3g} vectors (limit {MAX_NET_SIZE})")
    return max(1, math.ceil(m))


def verify_net_coverage(net: UtilityNet, delta: float, trials: int = 10_000, seed=0) -> bool:
    """Monte Carlo check that every sampled direction is within angle delta of the net."""
    if trials < 1:
        raise ValueError("trials must be positive")
    probe = sample_net(net.d, trials, seed).vectors
    threshold = math.cos(delta) - 1e-12
    for start in range(0, trials, 4096):
        best = (probe[start:start + 4096] @ net.vectors.T).max(axis=1)
        if np.any(best < threshold):
            return False
    return True


def coverage_radius_2d(net: UtilityNet) -> float:
    """Exact largest angular distance from a 2D direction to its nearest net vector."""
    if net.d != 2:
        raise ValueError("coverage_radius_2d needs a 2D net")
    ang = np.sort(np.arctan2(net.vectors[:, 1], net.vectors[:, 0]))
    gaps = np.diff(ang) / 2 if len(ang) > 1 else np.zeros(0)
    return float(max(ang[0], math.pi / 2 - ang[-1], gaps.max(initial=0.0)))


def angular_grid_2d(count: int) -> UtilityNet:
    """Evenly spaced 2D directions from angle 0 to pi/2 inclusive."""
    theta = np.linspace(0.0, math.pi / 2, count) if count > 1 else np.array([math.pi / 4])
    return UtilityNet(np.column_stack((np.cos(theta), np.sin(theta))))


def save_net(net: UtilityNet, path: str | Path) -> None:
    header = f"seed={net.seed!r} nominal_delta={net.nominal_delta!r}"
    np.savetxt(path, net.vectors, delimiter=",", header=header, fmt="%.17g")


def load_net(path: str | Path) -> UtilityNet:
    V = np.loadtxt(path, delimiter=",", ndmin=2)
    return UtilityNet(V / np.linalg.norm(V, axis=1)[:, None])


# ---------------------------------------------------------------------------
# exact evaluation in two dimensions
# ---------------------------------------------------------------------------


def dataset_envelope(ds: Dataset) -> Envelope:
    env = ds._cache.get("envelope")
    if env is None:
        if ds.d != 2:
            raise ValueError(f"exact evaluation needs d=2, got d={ds.d}")
        env = upper_envelope(ds.coords[ds.skyline_indices()])
        ds._cache["envelope"] = env
    return env


def mhr_exact_2d(S: Iterable[int], ds: Dataset) -> float:
    """Exact minimum happiness ratio of rows S over all nonnegative 2D utilities.

    The ratio of the two envelopes is minimized at lam in {0, 1} or at a
    breakpoint of S's own envelope: between those breakpoints the numerator
    is linear and the denominator convex, so the ratio is quasi-concave.
    """
    if ds.d != 2:
        raise ValueError(f"exact evaluation needs d=2, got d={ds.d}")
    rows = _rows(S)
    full = dataset_envelope(ds)
    lam = upper_envelope(ds.coords[rows]).breakpoints
    den = full.value(lam)
    if np.any(den <= 0):
        raise DegenerateUtilityError("every point scores 0 at some 2D utility")
    X = ds.coords[rows]
    num = np.max(np.outer(X[:, 0], lam) + np.outer(X[:, 1], 1.0 - lam), axis=0)
    return float(min(1.0, np.min(num / den)))


# ---------------------------------------------------------------------------
# evaluators used to pick and report solutions
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Exact2DEvaluator:
    ds: Dataset
    tag: str = "exact-2d"
    _memo: dict = field(default_factory=dict, repr=False)

    def __call__(self, S: Sequence[int]) -> float:
        key = frozenset(int(i) for i in S)
        if key not in self._memo:
            self._memo[key] = mhr_exact_2d(sorted(key), self.ds)
        return self._memo[key]


@dataclass(eq=False)
class NetEvaluator:
    """MHR on a fixed net, with denominators precomputed once."""

    ds: Dataset
    net: UtilityNet
    tag: str = ""
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._top = best_scores(self.ds, self.net.vectors)
        if not self.tag:
            self.tag = f"validation-net:m={self.net.m},seed={_seed_text(self.net.seed)}"

    def __call__(self, S: Sequence[int]) -> float:
        key = frozenset(int(i) for i in S)
        if key not in self._memo:
            rows = _rows(sorted(key))
            best = scores(self.ds.coords[rows], self.net.vectors).max(axis=0) / self._top
            self._memo[key] = float(min(1.0, best.min()))
        return self._memo[key]


def _seed_text(seed) -> str:
    if isinstance(seed, (list, tuple)):
        return "/".join(str(s) for s in seed)
    return str(seed)


VALIDATION_TAG = 104729


def default_evaluator(ds: Dataset, m: int, seed: int):
    """Exact evaluation in 2D, otherwise a 4m-vector net drawn independently of the solver's."""
    if ds.d == 2:
        return Exact2DEvaluator(ds)
    return NetEvaluator(ds, sample_net(ds.d, 4 * m, [seed, VALIDATION_TAG]))
