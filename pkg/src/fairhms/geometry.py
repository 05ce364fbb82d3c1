"""Upper envelope of the 2D score lines f_lam(p) = p[2] + (p[1] - p[2]) * lam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Envelope:
    """Convex piecewise-linear maximum of score lines over lam in [0, 1].

    Piece ``j`` spans ``[breakpoints[j], breakpoints[j + 1]]`` and equals
    ``intercepts[j] + slopes[j] * lam``; ``owners[j]`` is the row that
    attains it.
    """

    breakpoints: np.ndarray
    intercepts: np.ndarray
    slopes: np.ndarray
    owners: np.ndarray

    @property
    def pieces(self) -> int:
        return len(self.owners)

    def piece_at(self, lam) -> np.ndarray:
        j = np.searchsorted(self.breakpoints[1:-1], lam, side="right")
        return j

    def value(self, lam):
        lam = np.asarray(lam, dtype=float)
        j = self.piece_at(lam)
        return self.intercepts[j] + self.slopes[j] * lam


def score_lines(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Intercept and slope of each row's score as a function of lam."""
    X = np.asarray(X, dtype=float)
    return X[:, 1].copy(), X[:, 0] - X[:, 1]


def upper_envelope(points) -> Envelope:
    """Upper envelope over [0, 1] of the score lines of an (n, 2) array or Dataset.

    Lines are swept by increasing slope while a stack keeps the hull
    (O(n log n)). Among identical lines the lowest row wins.
    """
    X = getattr(points, "coords", points)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2 or len(X) == 0:
        raise ValueError("upper envelope needs a nonempty (n, 2) array")
    a, b = score_lines(X)
    order = np.lexsort((np.arange(len(X)), -a, b))
    hull: list[int] = []
    for i in order:
        if hull and b[hull[-1]] == b[i]:
            continue  # parallel and not higher
        while len(hull) >= 2:
            i1, i2 = hull[-2], hull[-1]
            # i2 is useless when i1 and i meet no later than i1 and i2 do
            if (a[i1] - a[i]) * (b[i2] - b[i1]) <= (a[i1] - a[i2]) * (b[i] - b[i1]):
                hull.pop()
            else:
                break
        hull.append(int(i))
    hull_arr = np.array(hull, dtype=np.int64)
    a_h, b_h = a[hull_arr], b[hull_arr]
    cross = (a_h[:-1] - a_h[1:]) / (b_h[1:] - b_h[:-1])
    lo = np.concatenate(([-np.inf], cross))
    hi = np.concatenate((cross, [np.inf]))
    keep = (np.minimum(hi, 1.0) > np.maximum(lo, 0.0))
    if not keep.any():  # all crossings coincide outside the range; take the max at lam=0.5
        keep[np.argmax(a_h + 0.5 * b_h)] = True
    idx = np.flatnonzero(keep)
    inner = np.clip(hi[idx[:-1]], 0.0, 1.0)
    breakpoints = np.concatenate(([0.0], inner, [1.0]))
    return Envelope(breakpoints, a_h[idx], b_h[idx], hull_arr[idx])
