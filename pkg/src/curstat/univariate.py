"""Univariate current status MLE via the greatest convex minorant.

The MLE at the ordered observation times is the vector of left derivatives of
the greatest convex minorant of the cumulative sum diagram
``{(i, sum_{j<=i} delta_(j))}``.  Equivalently it is the isotonic regression of
the ordered indicators, computed here with pool-adjacent-violators.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import DistributionRepr


def _split(observations) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(observations, tuple) and len(observations) == 2:
        t, delta = observations
        t = np.asarray(t, dtype=float).ravel()
        delta = np.asarray(delta).ravel()
    else:
        pairs = list(observations)
        t = np.array([float(p[0]) for p in pairs])
        delta = np.array([p[1] for p in pairs])
    if t.size == 0:
        raise InvalidInputError("need at least one observation")
    if t.shape != delta.shape:
        raise InvalidInputError("t and delta lengths differ")
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("observation times must be finite")
    if not np.all((delta == 0) | (delta == 1)):
        raise InvalidInputError("delta entries must be 0 or 1")
    return t, delta.astype(np.int64)


def sort_order(t: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Stable order by time; within tied times delta=1 precedes delta=0.

    Putting the ones first inside a tie forces pool-adjacent-violators to pool
    the whole tie, so tied times receive a common fitted value.
    """
    return np.lexsort((-delta, t))


@dataclass(frozen=True)
class CusumDiagram:
    x: np.ndarray  # 0..n
    y: np.ndarray  # cumulative counts of delta, starting at 0
    t: np.ndarray  # ordered times T_(1..n)
    delta: np.ndarray  # ordered indicators

    @property
    def points(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(self.x, self.y)]


def cumulative_diagram(observations) -> CusumDiagram:
    t, delta = _split(observations)
    order = sort_order(t, delta)
    t, delta = t[order], delta[order]
    y = np.concatenate([[0], np.cumsum(delta)])
    return CusumDiagram(np.arange(t.size + 1), y, t, delta)


def pava(y: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """Weighted least squares nondecreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    means, weights, sizes = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), weights.pop(), sizes.pop()
            m1, w1, s1 = means.pop(), weights.pop(), sizes.pop()
            wt = w1 + w2
            means.append((w1 * m1 + w2 * m2) / wt)
            weights.append(wt)
            sizes.append(s1 + s2)
    return np.repeat(means, sizes)


def convex_minorant(diagram: CusumDiagram) -> np.ndarray:
    """Values of the greatest convex minorant at x = 0..n."""
    slopes = pava(diagram.delta.astype(float))
    return np.concatenate([[0.0], np.cumsum(slopes)])


@dataclass(frozen=True)
class StepDistribution:
    """Right-continuous step function with value ``values[i]`` on ``[knots[i], knots[i+1])``."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="right") - 1
        vals = np.concatenate([[0.0], self.values])
        return vals[idx + 1]

    def to_distribution(self) -> DistributionRepr:
        """Masses at the knots (upper-corner convention) plus the leftover at infinity."""
        knots = np.unique(self.knots)
        level = self(knots)
        mass = np.diff(np.concatenate([[0.0], level, [1.0]]))
        lower = np.concatenate([[0.0], knots])
        upper = np.concatenate([knots, [np.inf]])
        mass = np.clip(mass, 0.0, None)
        mass /= mass.sum()
        return DistributionRepr(lower[:, None], upper[:, None], mass)


def gcm_mle(observations) -> StepDistribution:
    """Current status MLE of ``F`` at the ordered observation times.

    Parameters
    ----------
    observations : iterable of (t, delta) pairs, or a ``(t, delta)`` tuple of arrays

    Returns
    -------
    StepDistribution
        ``values[i]`` is the left derivative of the convex minorant at
        ``i + 1``, i.e. a block mean of the ordered indicators.
    """
    diagram = cumulative_diagram(observations)
    values = pava(diagram.delta.astype(float))
    return StepDistribution(diagram.t, np.clip(values, 0.0, 1.0))


def log_likelihood_1d(values, delta) -> float:
    """Binomial log-likelihood with ``0 log 0 = 0``."""
    F = np.asarray(values, dtype=float)
    delta = np.asarray(delta)
    with np.errstate(divide="ignore"):
        a = np.where(delta == 1, np.log(F), 0.0)
        b = np.where(delta == 0, np.log1p(-F), 0.0)
    return float(np.sum(a + b))
