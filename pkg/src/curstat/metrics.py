"""Hellinger and L2(G0) discrepancies for the current status model.

For a distribution ``F`` on ``[0, inf)^d`` the observed-data density is
``prod_k p_k(t; F)^{gamma_k} g0(t)`` over the 2^d orthant indicators, so

    h^2(F, F0) = 1/2 int sum_k (sqrt p_k(t; F) - sqrt p_k(t; F0))^2 g0(t) dt.

Integrals over ``t`` use tensor Gauss-Legendre rules, split at the jump
points of step distributions so every piece is smooth, or Monte Carlo
draws from ``G0`` with a reported standard error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import ProductLaw, cell_probabilities_many, grid_cell_probabilities


@dataclass(frozen=True)
class TruthSpec:
    """True event-time law ``F0`` and observation-time law ``G0`` on ``[0, M]^d``."""

    F0: ProductLaw
    G0: ProductLaw
    c1: float = 1.0
    c2: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        if self.F0.d != self.G0.d:
            raise InvalidInputError("F0 and G0 dimensions differ")
        if self.c1 < 1 or self.c2 < 1:
            raise InvalidInputError("c1 and c2 must be >= 1")
        for name, law, c in (("f0", self.F0, self.c1), ("g0", self.G0, self.c2)):
            lo, hi = law.density_bounds()
            if lo < 1 / c - 1e-12 or hi > c + 1e-12:
                raise InvalidInputError(f"{name} density range [{lo:g}, {hi:g}] violates [1/{c:g}, {c:g}]")
            if abs(law.M - self.M) > 1e-12:
                raise InvalidInputError(f"{name} support edge {law.M} differs from M={self.M}")

    @property
    def d(self) -> int:
        return self.F0.d

    @classmethod
    def uniform(cls, d: int, M: float = 1.0) -> "TruthSpec":
        return cls(ProductLaw.uniform(d, M), ProductLaw.uniform(d, M), 1.0, 1.0, M)

    @classmethod
    def tilted(cls, d: int, c1: float = 2.0, c2: float = 1.0) -> "TruthSpec":
        G0 = ProductLaw.uniform(d) if c2 == 1 else ProductLaw.tilted(d, c2)
        return cls(ProductLaw.tilted(d, c1), G0, c1, c2, 1.0)


@dataclass(frozen=True)
class Integrator:
    """How to integrate over observation times.

    ``kind="gauss"``: tensor Gauss-Legendre with ``nodes`` points per axis,
    made composite at the jump points of the distributions involved
    (``piece_nodes`` at least per piece).  ``kind="mc"``: ``draws`` samples
    from ``G0`` using ``seed``.
    """

    kind: str = "gauss"
    nodes: int = 64
    piece_nodes: int = 3
    draws: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.kind == "gauss":
            if self.nodes < 16 or self.piece_nodes < 1:
                raise InvalidInputError("Gauss-Legendre needs >= 16 nodes per axis")
        elif self.kind == "mc":
            if self.draws < 100_000:
                raise InvalidInputError("Monte Carlo needs >= 1e5 draws")
        else:
            raise InvalidInputError(f"unknown integrator kind {self.kind!r}")


def default_integrator(d: int, seed: int = 0) -> Integrator:
    if d <= 2:
        return Integrator("gauss", nodes=64)
    return Integrator("mc", draws=200_000, seed=seed)


def axis_rule(a: float, b: float, knots, nodes: int, piece_nodes: int):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]`` split at ``knots``."""
    knots = np.asarray(knots, dtype=float)
    knots = knots[(knots > a) & (knots < b)]
    edges = np.unique(np.concatenate([[a, b], knots]))
    xs, ws = [], []
    cache = {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(piece_nodes, math.ceil(nodes * (hi - lo) / (b - a)))
        if k not in cache:
            cache[k] = np.polynomial.legendre.leggauss(k)
        x, w = cache[k]
        xs.append(lo + (hi - lo) * (x + 1) / 2)
        ws.append(w * (hi - lo) / 2)
    return np.concatenate(xs), np.concatenate(ws)


def _knots(dist, axis):
    fn = getattr(dist, "breakpoints", None)
    return fn(axis) if fn is not None else np.empty(0)


def _integrate(integrand, F, F0, g0: ProductLaw, integrator: Integrator):
    """Integrate ``integrand(P, P0)`` against ``g0``; returns (value, standard error).

    ``P`` and ``P0`` hold orthant probabilities in the last axis.  The
    integrand may return trailing axes, which are integrated componentwise.
    """
    d = g0.d
    M = g0.M
    if integrator.kind == "gauss":
        axes, weights = [], []
        for j in range(d):
            knots = np.concatenate([_knots(F, j), _knots(F0, j)])
            x, w = axis_rule(0.0, M, knots, integrator.nodes, integrator.piece_nodes)
            axes.append(x)
            weights.append(w * g0.marginals[j].pdf(x))
        P = grid_cell_probabilities(F, axes)
        P0 = grid_cell_probabilities(F0, axes)
        vals = integrand(P, P0)
        W = weights[0]
        for w in weights[1:]:
            W = np.multiply.outer(W, w)
        W = W.reshape(W.shape + (1,) * (vals.ndim - d))
        value = np.sum(vals * W, axis=tuple(range(d)))
        return value, np.zeros_like(value)
    rng = np.random.default_rng(integrator.seed)
    T = g0.sample(rng, integrator.draws)
    vals = integrand(cell_probabilities_many(F, T), cell_probabilities_many(F0, T))
    return vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])


def _h2_integrand(P, P0):
    return 0.5 * np.sum((np.sqrt(P) - np.sqrt(P0)) ** 2, axis=-1)


def _l2_integrand(P, P0):
    # column 0 is the all-low orthant, i.e. F(t)
    return (P[..., 0] - P0[..., 0]) ** 2


def squared_hellinger(F, F0, g0: ProductLaw, integrator: Integrator | None = None):
    """(h^2, standard error) between the models generated by ``F`` and ``F0``."""
    integrator = integrator or default_integrator(g0.d)
    v, se = _integrate(_h2_integrand, F, F0, g0, integrator)
    return float(v), float(se)


def hellinger_distance(F, F0, g0: ProductLaw, integrator: Integrator | None = None) -> float:
    h2, _ = squared_hellinger(F, F0, g0, integrator)
    return float(np.sqrt(np.clip(h2, 0.0, 1.0)))


def hellinger(F, truth: TruthSpec, integrator: Integrator | None = None) -> float:
    """Hellinger distance between the fitted and true observation laws."""
    return hellinger_distance(F, truth.F0, truth.G0, integrator)


def l2_distance(F, F0, g0: ProductLaw, integrator: Integrator | None = None) -> float:
    integrator = integrator or default_integrator(g0.d)
    v, _ = _integrate(_l2_integrand, F, F0, g0, integrator)
    return float(np.sqrt(max(float(v), 0.0)))


def l2_g0(F, truth: TruthSpec, integrator: Integrator | None = None) -> float:
    """``sqrt(int (F - F0)^2 dG0)`` over ``[0, M]^d``."""
    return l2_distance(F, truth.F0, truth.G0, integrator)


def check_hellinger_l2_bound(F, truth: TruthSpec, integrator: Integrator | None = None, d: int | None = None):
    """Check ``h^2 >= c int (F - F0)^2 dG0`` with c = 1/4 (d = 1) or 1/8 (d >= 2).

    Both sides use the same nodes or draws, so the discretised inequality
    inherits the pointwise one.  Returns ``(h2, lower_bound, satisfied)``.
    """
    d = truth.d if d is None else d
    integrator = integrator or default_integrator(truth.d)

    def both(P, P0):
        return np.stack([_h2_integrand(P, P0), _l2_integrand(P, P0)], axis=-1)

    (h2, l2sq), _ = _integrate(both, F, truth.F0, truth.G0, integrator)
    const = 0.25 if d == 1 else 0.125
    lower = float(const * l2sq)
    return float(h2), lower, bool(h2 >= lower - 1e-9)


def discrepancies(F, truth: TruthSpec, integrator: Integrator | None = None) -> tuple[float, float]:
    """(Hellinger, L2(G0)) from one shared evaluation of the orthant probabilities."""
    integrator = integrator or default_integrator(truth.d)

    def both(P, P0):
        return np.stack([_h2_integrand(P, P0), _l2_integrand(P, P0)], axis=-1)

    (h2, l2sq), _ = _integrate(both, F, truth.F0, truth.G0, integrator)
    return float(np.sqrt(np.clip(h2, 0.0, 1.0))), float(np.sqrt(max(l2sq, 0.0)))
