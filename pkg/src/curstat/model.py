"""Observations, orthant regions and cell probabilities for current status data.

A d-variate current status observation is a pair (t, delta) where
``delta[j] = 1`` iff the hidden event time ``Y[j] <= t[j]``.  Conditionally on
``t`` the pattern ``delta`` is multinomial over the 2^d orthants of
``[0, inf)^d`` cut at ``t``; the orthant probabilities are what every estimator
and metric in this package works with.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

MAX_DIMENSION = 6


@dataclass(frozen=True)
class Observation:
    t: tuple[float, ...]
    delta: tuple[int, ...]

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        delta = tuple(self.delta)
        if len(t) == 0 or len(t) != len(delta):
            raise InvalidInputError("t and delta must have the same length >= 1")
        if any(not math.isfinite(v) or v < 0 for v in t):
            raise InvalidInputError(f"observation times must be finite and >= 0, got {t}")
        if any(v not in (0, 1) for v in delta):
            raise InvalidInputError(f"delta entries must be 0 or 1, got {delta}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "delta", tuple(int(v) for v in delta))

    @property
    def d(self) -> int:
        return len(self.t)


def as_arrays(observations) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(T, D)`` arrays of shape (n, d) from observations.

    Accepts a sequence of :class:`Observation` or an already split ``(T, D)``
    pair (1-d inputs are read as d = 1).
    """
    if isinstance(observations, tuple) and len(observations) == 2 and not isinstance(
        observations[0], Observation
    ):
        T = np.asarray(observations[0], dtype=float)
        D = np.asarray(observations[1])
        if T.ndim == 1:
            T = T[:, None]
        if D.ndim == 1:
            D = D[:, None]
        if T.shape != D.shape:
            raise InvalidInputError(f"shape mismatch between times {T.shape} and indicators {D.shape}")
        if T.size and (not np.all(np.isfinite(T)) or np.any(T < 0)):
            raise InvalidInputError("observation times must be finite and >= 0")
        if D.size and not np.all((D == 0) | (D == 1)):
            raise InvalidInputError("delta entries must be 0 or 1")
        return T, D.astype(np.int8)
    obs = list(observations)
    if not obs:
        return np.zeros((0, 0)), np.zeros((0, 0), dtype=np.int8)
    d = obs[0].d
    if any(o.d != d for o in obs):
        raise InvalidInputError("observations have inconsistent dimension")
    T = np.array([o.t for o in obs], dtype=float)
    D = np.array([o.delta for o in obs], dtype=np.int8)
    return T, D


def to_observations(T, D) -> list[Observation]:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    D = np.atleast_2d(np.asarray(D))
    return [Observation(tuple(t), tuple(int(v) for v in dl)) for t, dl in zip(T, D)]


def orthant_index(delta: Sequence[int]) -> int:
    """1-based orthant label ``1 + sum_j (1 - delta_j) 2^(j-1)``.

    >>> orthant_index((1, 1)), orthant_index((0, 0)), orthant_index((0, 1, 1))
    (1, 4, 2)
    """
    if len(delta) == 0:
        raise InvalidInputError("delta must be non-empty")
    k = 1
    for j, v in enumerate(delta):
        if v not in (0, 1):
            raise InvalidInputError(f"delta entries must be 0 or 1, got {v!r}")
        k += (1 - int(v)) << j
    return k


def orthant_indices(D: np.ndarray) -> np.ndarray:
    """Vectorised :func:`orthant_index` over the rows of ``D``."""
    D = np.asarray(D, dtype=np.int64)
    weights = 1 << np.arange(D.shape[1])
    return 1 + (1 - D) @ weights


def orthant_delta(k: int, d: int) -> tuple[int, ...]:
    """Inverse of :func:`orthant_index`."""
    if not 1 <= k <= 2**d:
        raise InvalidInputError(f"orthant index {k} outside 1..{2**d}")
    return tuple(1 - (((k - 1) >> j) & 1) for j in range(d))


@dataclass(frozen=True)
class OrthantRegion:
    """Product of per-axis intervals ``[0, t_j]`` (low) or ``(t_j, inf)`` (high)."""

    t: tuple[float, ...]
    low: tuple[bool, ...]

    @property
    def d(self) -> int:
        return len(self.t)

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        t = np.asarray(self.t)
        low = np.asarray(self.low)
        inside = np.where(low, (y >= 0) & (y <= t), y > t)
        return bool(np.all(inside))

    def bounds(self) -> list[tuple[float, float]]:
        return [(0.0, tj) if lo else (tj, math.inf) for tj, lo in zip(self.t, self.low)]

    def __str__(self):
        parts = [f"[0, {tj:g}]" if lo else f"({tj:g}, inf)" for tj, lo in zip(self.t, self.low)]
        return " x ".join(parts)


def orthant_region(k: int, t: Sequence[float]) -> OrthantRegion:
    t = tuple(float(v) for v in t)
    if any(not math.isfinite(v) or v < 0 for v in t):
        raise InvalidInputError(f"t must be finite and >= 0, got {t}")
    delta = orthant_delta(k, len(t))
    return OrthantRegion(t, tuple(bool(v) for v in delta))


# --------------------------------------------------------------------------
# distributions


def _interval_overlap(a1, b1, a2, b2) -> np.ndarray:
    # intervals are (a, b]; a == b denotes the single point {b}
    proper = np.maximum(a1, a2) < np.minimum(b1, b2)
    p1 = a1 == b1
    p2 = a2 == b2
    point_in_2 = p1 & (a2 < b1) & (b1 <= b2)
    point_in_1 = p2 & (a1 < b2) & (b2 <= b1)
    both_points = p1 & p2 & (b1 == b2)
    return proper | point_in_2 | point_in_1 | both_points


@dataclass(frozen=True)
class DistributionRepr:
    """Finite mixture of masses on disjoint rectangles of ``[0, inf]^d``.

    Each rectangle is ``prod_j (lower_j, upper_j]`` (a zero-width side is the
    point ``upper_j``).  With ``placement="corner"`` the mass of a rectangle
    sits at its upper corner, so ``F(x)`` is the total weight of rectangles
    contained in ``[0, x]``; this is the convention of the NPMLE output.  With
    ``placement="uniform"`` mass is spread uniformly over each (finite)
    rectangle.
    """

    lower: np.ndarray
    upper: np.ndarray
    weights: np.ndarray
    placement: str = "corner"
    _grid: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        lower = np.atleast_2d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_2d(np.asarray(self.upper, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if lower.shape != upper.shape or lower.shape[0] != w.size:
            raise InvalidInputError("lower, upper and weights must describe the same rectangles")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})")
        if np.any(lower < 0) or np.any(upper < lower) or np.any(np.isnan(upper)):
            raise InvalidInputError("rectangles must satisfy 0 <= lower <= upper")
        if self.placement not in ("corner", "uniform"):
            raise InvalidInputError(f"unknown placement {self.placement!r}")
        if self.placement == "uniform" and not np.all(np.isfinite(upper)):
            raise InvalidInputError("uniform placement needs bounded rectangles")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.lower.shape[1]

    def is_disjoint(self) -> bool:
        m = self.weights.size
        for i in range(m - 1):
            ov = _interval_overlap(
                self.lower[i], self.upper[i], self.lower[i + 1 :], self.upper[i + 1 :]
            )
            if np.any(np.all(ov, axis=1)):
                return False
        return True

    def breakpoints(self, axis: int) -> np.ndarray:
        """Finite coordinates where ``F`` may be discontinuous or kinked along ``axis``."""
        pts = self.upper[:, axis]
        if self.placement == "uniform":
            pts = np.concatenate([pts, self.lower[:, axis]])
        return np.unique(pts[np.isfinite(pts)])

    def _corner_grid(self):
        if self._grid is None:
            keep = self.weights > 0
            up = self.upper[keep]
            coords = [np.unique(up[:, j]) for j in range(self.d)]
            idx = tuple(np.searchsorted(coords[j], up[:, j]) + 1 for j in range(self.d))
            mass = np.zeros([len(c) + 1 for c in coords])
            np.add.at(mass, idx, self.weights[keep])
            for j in range(self.d):
                mass = np.cumsum(mass, axis=j)
            object.__setattr__(self, "_grid", (coords, mass))
        return self._grid

    def cdf(self, x) -> np.ndarray:
        """Evaluate ``F`` at the rows of ``x`` (coordinates may be ``inf``)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.placement == "corner":
            coords, cum = self._corner_grid()
            idx = tuple(np.searchsorted(coords[j], x[:, j], side="right") for j in range(self.d))
            return cum[idx]
        out = np.zeros(x.shape[0])
        width = self.upper - self.lower
        for lo, w_, wt in zip(self.lower, width, self.weights):
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(w_ > 0, (x - lo) / np.where(w_ > 0, w_, 1.0), (x >= lo).astype(float))
            out += wt * np.prod(np.clip(frac, 0.0, 1.0), axis=1)
        return out

    def grid_cdf(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """``F`` on the tensor grid spanned by ``axes`` (entries may be ``inf``)."""
        if self.placement == "corner":
            coords, cum = self._corner_grid()
            idx = [np.searchsorted(coords[j], np.asarray(a, float), side="right") for j, a in enumerate(axes)]
            return cum[np.ix_(*idx)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return self.cdf(pts).reshape(mesh[0].shape)

    @classmethod
    def point_mass(cls, y) -> "DistributionRepr":
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return cls(y, y, np.ones(1))


@dataclass(frozen=True)
class LinearDensity:
    """Density on ``[0, M]`` proportional to ``a + 2 (1 - a) y / M``.

    ``a = 1`` is the uniform law; smaller ``a`` tilts mass to the right while
    keeping the density between ``a / M`` and ``(2 - a) / M``.
    """

    a: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        if not 0 < self.a <= 1 or self.M <= 0:
            raise InvalidInputError(f"need 0 < a <= 1 and M > 0, got a={self.a}, M={self.M}")

    def cdf(self, y):
        u = np.clip(np.asarray(y, dtype=float) / self.M, 0.0, 1.0)
        return self.a * u + (1 - self.a) * u * u

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        u = y / self.M
        inside = (u >= 0) & (u <= 1)
        return np.where(inside, (self.a + 2 * (1 - self.a) * u) / self.M, 0.0)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        a = self.a
        return self.M * 2 * p / (a + np.sqrt(a * a + 4 * (1 - a) * p))


@dataclass(frozen=True)
class ProductLaw:
    """Product of independent one-dimensional laws on ``[0, M]^d``."""

    marginals: tuple[LinearDensity, ...]

    @classmethod
    def uniform(cls, d: int, M: float = 1.0) -> "ProductLaw":
        return cls(tuple(LinearDensity(1.0, M) for _ in range(d)))

    @classmethod
    def tilted(cls, d: int, c: float, M: float = 1.0) -> "ProductLaw":
        """Product law whose joint density on the unit cube lies in ``[1/c, c]``.

        Each marginal has floor ``c^(-1/d)`` so the joint floor is exactly
        ``1/c``; the joint ceiling ``(2 - c^(-1/d))^d`` never exceeds ``c``.
        """
        if c < 1:
            raise InvalidInputError("tilt constant must be >= 1")
        return cls(tuple(LinearDensity(c ** (-1.0 / d), M) for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.marginals)

    @property
    def M(self) -> float:
        return max(m.M for m in self.marginals)

    def density_bounds(self) -> tuple[float, float]:
        lo = math.prod(m.a / m.M for m in self.marginals)
        hi = math.prod((2 - m.a) / m.M for m in self.marginals)
        return lo, hi

    def cdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for j, m in enumerate(self.marginals):
            out *= m.cdf(x[:, j])
        return out

    def grid_cdf(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        out = np.ones([len(a) for a in axes])
        for j, (m, a) in enumerate(zip(self.marginals, axes)):
            shape = [1] * len(axes)
            shape[j] = len(a)
            out = out * m.cdf(np.asarray(a, float)).reshape(shape)
        return out

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for j, m in enumerate(self.marginals):
            out *= m.pdf(x[:, j])
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, self.d))
        return np.column_stack([m.ppf(u[:, j]) for j, m in enumerate(self.marginals)])

    def breakpoints(self, axis: int) -> np.ndarray:
        return np.empty(0)


# --------------------------------------------------------------------------
# cell probabilities


def _orthant_from_corner_values(G: np.ndarray, d: int) -> np.ndarray:
    """Moebius inversion from corner values to orthant masses.

    ``G[..., S]`` is ``F`` at the point whose coordinate j is ``t_j`` when bit j
    of ``S`` is set and ``inf`` otherwise.  Returns ``p[..., k-1]``.
    """
    full = (1 << d) - 1
    out = np.zeros(G.shape[:-1] + (1 << d,))
    for k0 in range(1 << d):
        low = full & ~k0  # axes where the orthant is [0, t_j]
        acc = 0.0
        # sum over S with low subset of S: S = low | sub, sub subset of high
        high = k0
        sub = high
        while True:
            S = low | sub
            sign = -1.0 if bin(sub).count("1") % 2 else 1.0
            acc = acc + sign * G[..., S]
            if sub == 0:
                break
            sub = (sub - 1) & high
        out[..., k0] = acc
    return np.clip(out, 0.0, 1.0)


def _corner_points(T: np.ndarray) -> np.ndarray:
    n, d = T.shape
    pts = np.full((1 << d, n, d), np.inf)
    for S in range(1 << d):
        for j in range(d):
            if (S >> j) & 1:
                pts[S, :, j] = T[:, j]
    return pts


def cell_probabilities_many(F, T) -> np.ndarray:
    """Orthant probabilities ``p_k(t; F)`` for each row ``t`` of ``T``.

    ``F`` is anything with a vectorised ``cdf`` accepting infinite
    coordinates.  Returns an (n, 2^d) array whose column k-1 is the mass of
    ``orthant_region(k, t)``.
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    n, d = T.shape
    if d > MAX_DIMENSION:
        raise InvalidInputError(f"dimension {d} exceeds the cap {MAX_DIMENSION}")
    pts = _corner_points(T)
    G = np.stack([F.cdf(pts[S]) for S in range(1 << d)], axis=-1)
    return _orthant_from_corner_values(G, d)


def cell_probabilities(F, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidInputError("t must be a finite nonnegative vector")
    return cell_probabilities_many(F, t[None, :])[0]


def grid_cell_probabilities(F, axes: Sequence[np.ndarray]) -> np.ndarray:
    """Orthant probabilities on a tensor grid; shape ``grid + (2^d,)``.

    Uses ``F.grid_cdf`` so step distributions are evaluated by index lookups
    rather than per point.
    """
    d = len(axes)
    G = np.empty([len(a) for a in axes] + [1 << d])
    for S in range(1 << d):
        sub = [np.asarray(a, float) if (S >> j) & 1 else np.array([np.inf]) for j, a in enumerate(axes)]
        G[..., S] = F.grid_cdf(sub)  # broadcasts along inf axes
    return _orthant_from_corner_values(G, d)


# --------------------------------------------------------------------------
# CSV


def write_observations_csv(path, observations) -> None:
    """Write observations to ``path`` (a filename or an open text stream)."""
    T, D = as_arrays(observations)
    d = T.shape[1]

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"t_{j + 1}" for j in range(d)] + [f"delta_{j + 1}" for j in range(d)])
        for t, dl in zip(T, D):
            w.writerow([repr(float(v)) for v in t] + [int(v) for v in dl])

    if hasattr(path, "write"):
        emit(path)
    else:
        with open(path, "w", newline="") as fh:
            emit(fh)


def read_observations_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``t_1..t_d, delta_1..delta_d`` columns; d is inferred from the header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    tcols = sorted((h for h in header if h.startswith("t_")), key=lambda h: int(h[2:]) if h[2:].isdigit() else -1)
    d = len(tcols)
    want_t = [f"t_{j + 1}" for j in range(d)]
    want_d = [f"delta_{j + 1}" for j in range(d)]
    if d == 0 or tcols != want_t or any(c not in header for c in want_d):
        raise InvalidInputError(f"{path}: header must contain t_1..t_d and delta_1..delta_d, got {header}")
    extra = set(header) - set(want_t) - set(want_d)
    if extra:
        raise InvalidInputError(f"{path}: unexpected columns {sorted(extra)}")
    ti = [header.index(c) for c in want_t]
    di = [header.index(c) for c in want_d]
    T, D = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InvalidInputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            T.append([float(row[i]) for i in ti])
            D.append([int(row[i]) for i in di])
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    if not T:
        raise InvalidInputError(f"{path}: no observations")
    return as_arrays((np.array(T), np.array(D)))


__all__ = [
    "MAX_DIMENSION",
    "Observation",
    "OrthantRegion",
    "DistributionRepr",
    "LinearDensity",
    "ProductLaw",
    "as_arrays",
    "to_observations",
    "orthant_index",
    "orthant_indices",
    "orthant_delta",
    "orthant_region",
    "cell_probabilities",
    "cell_probabilities_many",
    "grid_cell_probabilities",
    "read_observations_csv",
    "write_observations_csv",
]
