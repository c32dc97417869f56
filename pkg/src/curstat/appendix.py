"""Numerical checks of the measure computations behind the global rate proof.

Covers the envelope bounds on the true cell probabilities, the small-mass
bound and the total mass of ``Q_sigma``, the auxiliary densities ``c_d`` and
``r_{d,sigma}`` on the unit cube, the logarithmic change of variables that
links them, and the shapes of the bracketing entropy bounds.

Monte Carlo checks pass when the estimate is within three standard errors of
the target (or below a bound plus three standard errors).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError
from .model import ProductLaw, cell_probabilities_many, orthant_delta
from .rates import check_bookkeeping, theoretical_rates

DEFAULT_DRAWS = 1_000_000
DEFAULT_EPS0 = 0.1


@dataclass(frozen=True)
class SigmaSpec:
    """Truncation level ``sigma`` with the density bounds it is paired with."""

    sigma: float
    d: int = 2
    c1: float = 1.0
    c2: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError("d must be >= 1")
        if self.c1 < 1 or self.c2 < 1:
            raise InvalidInputError("c1 and c2 must be >= 1")
        if not 0 < self.sigma < self.c1 * self.c2:
            raise InvalidInputError("sigma must lie in (0, c1 c2)")
        if self.delta is not None and not math.isclose(self.sigma, sigma_of_delta(self.delta, self.d, self.c1, self.c2), rel_tol=1e-12):
            raise InvalidInputError("sigma inconsistent with delta")

    @classmethod
    def from_delta(cls, delta: float, d: int = 2, c1: float = 1.0, c2: float = 1.0) -> "SigmaSpec":
        return cls(sigma_of_delta(delta, d, c1, c2), d, c1, c2, delta)

    @property
    def bound(self) -> float:
        """``2^d (c1 c2)^2 sigma``, which equals ``delta^2`` at ``sigma(delta)``."""
        return 2**self.d * (self.c1 * self.c2) ** 2 * self.sigma


def sigma_of_delta(delta: float, d: int, c1: float = 1.0, c2: float = 1.0) -> float:
    if delta <= 0:
        raise InvalidInputError("delta must be positive")
    return delta**2 / (2**d * (c1 * c2) ** 2)


@dataclass(frozen=True)
class McEstimate:
    value: float
    se: float

    @classmethod
    def of(cls, samples: np.ndarray) -> "McEstimate":
        return cls(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size)))

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.se + 1e-15

    def below(self, bound: float, k: float = 3.0) -> bool:
        return self.value - k * self.se <= bound


# --------------------------------------------------------------------------
# envelopes and small-mass bounds


def _check_cube(t: np.ndarray):
    if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
        raise InvalidInputError("t must lie in [0, 1]^d")


def envelope_bounds(t, delta, c1: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``(Pi / c1, c1 Pi)`` with ``Pi = prod_j t_j^delta_j (1 - t_j)^(1 - delta_j)``.

    Broadcasts over leading axes of ``t`` and ``delta``.
    """
    t = np.asarray(t, dtype=float)
    delta = np.asarray(delta)
    _check_cube(t)
    if np.any((delta != 0) & (delta != 1)):
        raise InvalidInputError("delta entries must be 0 or 1")
    vol = np.prod(np.where(delta == 1, t, 1.0 - t), axis=-1)
    return vol / c1, c1 * vol


def true_cell_probabilities(law: ProductLaw, T: np.ndarray) -> np.ndarray:
    """``p_{0,k}(t; F0)`` for each row of ``T`` and each orthant ``k``."""
    return cell_probabilities_many(law, T)


def _orthant_pattern(d: int) -> np.ndarray:
    return np.array([orthant_delta(k, d) for k in range(1, 2**d + 1)])


def envelope_sweep(law: ProductLaw, c1: float, draws: int = 10_000, seed: int = 0) -> tuple[int, float]:
    """Count violations of the envelope bounds at random ``(t, delta)``.

    Returns ``(violations, smallest slack)``; slack is the absolute distance
    to the nearer bound.
    """
    rng = np.random.default_rng(seed)
    T = rng.random((draws, law.d))
    P = true_cell_probabilities(law, T)
    pattern = _orthant_pattern(law.d)
    lo, hi = envelope_bounds(T[:, None, :], pattern[None, :, :], c1)
    tol = 1e-12
    bad = (P < lo - tol) | (P > hi + tol)
    slack = np.minimum(P - lo, hi - P)
    return int(bad.sum()), float(slack.min())


def _observed_density(F0: ProductLaw, G0: ProductLaw, T: np.ndarray) -> np.ndarray:
    """``p_0(k, t) = p_{0,k}(t; F0) g0(t)`` at each row of ``T``, shape (N, 2^d)."""
    return true_cell_probabilities(F0, T) * G0.pdf(T)[:, None]


def _laws(spec: SigmaSpec) -> tuple[ProductLaw, ProductLaw]:
    F0 = ProductLaw.uniform(spec.d) if spec.c1 == 1 else ProductLaw.tilted(spec.d, spec.c1)
    G0 = ProductLaw.uniform(spec.d) if spec.c2 == 1 else ProductLaw.tilted(spec.d, spec.c2)
    return F0, G0


def _draws_in_chunks(d: int, draws: int, seed: int, fn: Callable[[np.ndarray], np.ndarray], chunk: int = 250_000) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = []
    left = draws
    while left > 0:
        k = min(chunk, left)
        out.append(fn(rng.random((k, d))))
        left -= k
    return np.concatenate(out)


@dataclass(frozen=True)
class SmallMassResult:
    estimate: McEstimate
    bound: float
    satisfied: bool


def small_mass_check(spec: SigmaSpec, budget: int = DEFAULT_DRAWS, seed: int = 0, laws=None) -> SmallMassResult:
    """Monte Carlo estimate of ``int_{[p0 <= sigma]} p0 dmu`` against ``2^d (c1 c2)^2 sigma``.

    ``t`` is drawn uniformly on the cube and the 2^d cells are summed.  By
    default ``F0`` and ``G0`` are tilted products attaining ``c1`` and
    ``c2`` (uniform when the constant is 1); pass ``laws=(F0, G0)`` to override.
    """
    if budget < 100_000:
        raise InvalidInputError("budget must be >= 1e5 draws")
    F0, G0 = laws if laws is not None else _laws(spec)

    def integrand(T):
        p = _observed_density(F0, G0, T)
        return np.sum(np.where(p <= spec.sigma, p, 0.0), axis=1)

    est = McEstimate.of(_draws_in_chunks(spec.d, budget, seed, integrand))
    return SmallMassResult(est, spec.bound, est.below(spec.bound))


# --------------------------------------------------------------------------
# total mass of Q_sigma


def product_tail_integral(d: int, b: float) -> float:
    """``int_{[prod t > b]} 1/prod t dt = (log(1/b))^d / d!`` on the unit cube."""
    if not 0 < b <= 1:
        raise InvalidInputError("b must lie in (0, 1]")
    return math.log(1 / b) ** d / math.factorial(d)


def product_tail_mc(d: int, b: float, draws: int = DEFAULT_DRAWS, seed: int = 0) -> McEstimate:
    if not 0 < b <= 1:
        raise InvalidInputError("b must lie in (0, 1]")

    def integrand(T):
        prod = np.prod(T, axis=1)
        return np.where(prod > b, 1.0 / np.maximum(prod, b), 0.0)

    return McEstimate.of(_draws_in_chunks(d, draws, seed, integrand))


@dataclass(frozen=True)
class QSigmaResult:
    closed_form: float
    estimate: McEstimate
    satisfied: bool


def qsigma_mass(spec: SigmaSpec, draws: int = DEFAULT_DRAWS, seed: int = 0, laws=None) -> QSigmaResult:
    """Total mass of ``dQ_sigma = p0^{-1} 1{p0 > sigma} dmu``.

    ``closed_form`` is ``(2^d c1 c2 / d!) (log(c1 c2 / sigma))^d``, an upper
    bound that is attained at uniform ``F0`` and ``G0``.
    """
    c = spec.c1 * spec.c2
    b = spec.sigma / c
    if b > 1:
        raise InvalidInputError("sigma / (c1 c2) must be <= 1")
    closed = 2**spec.d * c * product_tail_integral(spec.d, b)
    F0, G0 = laws if laws is not None else _laws(spec)

    def integrand(T):
        p = _observed_density(F0, G0, T)
        return np.sum(np.where(p > spec.sigma, 1.0 / np.maximum(p, spec.sigma), 0.0), axis=1)

    est = McEstimate.of(_draws_in_chunks(spec.d, draws, seed, integrand))
    return QSigmaResult(closed, est, est.below(closed))


# --------------------------------------------------------------------------
# auxiliary densities and the change of variables


def _check_sigma(sigma: float):
    if not 0 < sigma < 1:
        raise InvalidInputError("sigma must lie in (0, 1)")


def cd_density(u, d: int) -> np.ndarray:
    """``c_d(u) = (d!/d^d) prod u_j^{-(1 - 1/d)} 1{sum u_j^{1/d} > d - 1}`` on ``[0,1]^d``."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != d:
        raise InvalidInputError("u must have d coordinates")
    _check_cube(u)
    x = u ** (1.0 / d)
    inside = np.sum(x, axis=-1) > d - 1
    with np.errstate(divide="ignore"):
        dens = math.factorial(d) / d**d * np.prod(u ** (-(1.0 - 1.0 / d)), axis=-1)
    return np.where(inside, dens, 0.0)


def rds_density(t, d: int, sigma: float) -> np.ndarray:
    """``r_{d,sigma}(t) = d! / (log(1/sigma))^d / prod t_j 1{prod t_j > sigma}`` on ``(0,1]^d``."""
    _check_sigma(sigma)
    t = np.asarray(t, dtype=float)
    if t.shape[-1] != d:
        raise InvalidInputError("t must have d coordinates")
    _check_cube(t)
    prod = np.prod(t, axis=-1)
    inside = prod > sigma
    dens = math.factorial(d) / math.log(1 / sigma) ** d / np.where(inside, prod, 1.0)
    return np.where(inside, dens, 0.0)


@dataclass(frozen=True)
class ChangeOfVariables:
    """``u(t) = (log(t/sigma)/log(1/sigma))^d`` on ``[sigma, 1]`` and its inverse on ``[0, 1]``."""

    sigma: float
    d: int

    def __post_init__(self):
        _check_sigma(self.sigma)
        if self.d < 1:
            raise InvalidInputError("d must be >= 1")

    @property
    def L(self) -> float:
        return math.log(1 / self.sigma)

    def u_of_t(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < self.sigma * (1 - 1e-15)) or np.any(t > 1):
            raise InvalidInputError("t must lie in [sigma, 1]")
        return np.clip(np.log(t / self.sigma) / self.L, 0.0, 1.0) ** self.d

    def t_of_u(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(u > 1):
            raise InvalidInputError("u must lie in [0, 1]")
        return np.clip(self.sigma * np.exp(u ** (1.0 / self.d) * self.L), self.sigma, 1.0)

    def jacobian(self, u) -> np.ndarray:
        """``prod_j dt_j/du_j = (L/d)^d prod t_j prod u_j^{1/d - 1}``."""
        u = np.asarray(u, dtype=float)
        t = self.t_of_u(u)
        return np.prod(t * self.L / self.d * u ** (1.0 / self.d - 1.0), axis=-1)


def change_of_variables(sigma: float, d: int) -> tuple[Callable, Callable]:
    cov = ChangeOfVariables(sigma, d)
    return cov.u_of_t, cov.t_of_u


def round_trip_error(sigma: float, d: int, points: int = 2001) -> float:
    cov = ChangeOfVariables(sigma, d)
    t = np.linspace(sigma, 1.0, points)
    u = np.linspace(0.0, 1.0, points)
    return float(max(np.max(np.abs(cov.t_of_u(cov.u_of_t(t)) - t)), np.max(np.abs(cov.u_of_t(cov.t_of_u(u)) - u))))


def tail_region_rule(d: int, lo: float, hi: float, s: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Iterated Gauss-Legendre rule on ``{y in [lo, hi]^d : sum y > s}``.

    Each coordinate's limits depend on the earlier ones, so the rule is exact
    for polynomials of modest degree on this polytope.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    pts = np.zeros((1, 0))
    wts = np.ones(1)
    for j in range(d):
        rest = d - j - 1
        done = pts.sum(axis=1)
        a = np.maximum(lo, s - done - rest * hi)
        a = np.minimum(a, hi)
        half = (hi - a) / 2
        y = a[:, None] + half[:, None] * (x[None, :] + 1)
        pts = np.concatenate([np.repeat(pts, nodes, axis=0), y.reshape(-1, 1)], axis=1)
        wts = (wts[:, None] * half[:, None] * w[None, :]).ravel()
    return pts, wts


@dataclass(frozen=True)
class IsometryResult:
    lhs: float
    rhs: float
    rel_error: float
    lhs_se: float = 0.0
    rhs_se: float = 0.0


def isometry_check(g: Callable, h: Callable, sigma: float, d: int, kind: str = "quadrature",
                   nodes: int = 128, draws: int = DEFAULT_DRAWS, seed: int = 0) -> IsometryResult:
    """Compare ``int (h~ - g~)^2 r_{d,sigma} dt`` with ``int (h - g)^2 c_d du``.

    ``g`` and ``h`` map an (N, d) array of points in the unit cube to N values;
    ``g~ = g o u`` with the coordinatewise change of variables.

    ``kind="quadrature"``: the left side is integrated in ``y = log t`` and the
    right side in ``x = u^{1/d}``, each with an iterated Gauss rule on the
    support and the matching Jacobian.  ``kind="mc"``: uniform draws on the
    cube for the left side and draws from ``C_d`` for the right side.
    """
    cov = ChangeOfVariables(sigma, d)
    L = cov.L

    def diff2(U):
        return (np.asarray(h(U), dtype=float) - np.asarray(g(U), dtype=float)) ** 2

    if kind == "quadrature":
        # t in (sigma, 1]^d with prod t > sigma  <=>  y = log t in (-L, 0]^d, sum y > -L
        Y, wy = tail_region_rule(d, -L, 0.0, -L, nodes)
        T = np.exp(Y)
        lhs = float(np.sum(wy * diff2(cov.u_of_t(T)) * rds_density(np.clip(T, 0, 1), d, sigma) * np.prod(T, axis=1)))
        # u in [0,1]^d with sum u^{1/d} > d - 1  <=>  x = u^{1/d} in [0,1]^d, sum x > d - 1
        X, wx = tail_region_rule(d, 0.0, 1.0, d - 1.0, nodes)
        U = X**d
        jac = np.prod(d * X ** (d - 1), axis=1)
        rhs = float(np.sum(wx * diff2(U) * cd_density(U, d) * jac))
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-300) if rhs != 0 or lhs != 0 else 0.0
        return IsometryResult(lhs, rhs, rel)
    if kind != "mc":
        raise InvalidInputError(f"unknown integrator kind {kind!r}")
    rng = np.random.default_rng(seed)
    T = rng.random((draws, d))
    r = rds_density(T, d, sigma)
    inside = r > 0
    vals = np.zeros(draws)
    vals[inside] = diff2(cov.u_of_t(T[inside])) * r[inside]
    lhs = McEstimate.of(vals)
    X = _sample_tail_simplex(rng, d, draws)
    rhs = McEstimate.of(diff2(X**d))
    rel = abs(lhs.value - rhs.value) / max(abs(rhs.value), 1e-300) if rhs.value or lhs.value else 0.0
    return IsometryResult(lhs.value, rhs.value, rel, lhs.se, rhs.se)


def _sample_tail_simplex(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    """Uniform draws on ``{x in [0,1]^d : sum x > d - 1}``, i.e. ``u = x^d ~ C_d``."""
    # 1 - x is uniform on the corner simplex {z >= 0, sum z < 1}
    E = rng.exponential(size=(n, d + 1))
    Z = E[:, :d] / E.sum(axis=1, keepdims=True)
    return 1.0 - Z


def normalization_mc(d: int, sigma: float, draws: int = DEFAULT_DRAWS, seed: int = 0) -> tuple[McEstimate, McEstimate]:
    """Uniform-cube Monte Carlo of the total masses of ``C_d`` and ``R_{d,sigma}``."""
    rng = np.random.default_rng(seed)
    U = rng.random((draws, d))
    c = McEstimate.of(cd_density(U, d))
    r = McEstimate.of(rds_density(U, d, sigma))
    return c, r


# --------------------------------------------------------------------------
# entropy bound shapes


@dataclass(frozen=True)
class EntropyCurves:
    eps: np.ndarray
    d: int
    gao: np.ndarray
    crux: np.ndarray

    @property
    def ratio_power(self) -> float:
        return (2.5 * self.d - 2) - 2 * (self.d - 1)

    def ratio_error(self) -> float:
        """Largest relative deviation of ``crux/gao`` from ``(log 1/eps)^{d/2}``."""
        expect = np.log(1 / self.eps) ** (self.d / 2)
        return float(np.max(np.abs(self.crux / self.gao / expect - 1)))


def entropy_curves(eps, d: int, eps0: float = DEFAULT_EPS0) -> EntropyCurves:
    """Bound shapes with unit constants: ``eps^{-1} (log 1/eps)^{2(d-1)}`` and ``(log 1/eps)^{5d/2-2} / eps``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if d < 2:
        raise InvalidInputError("d must be >= 2")
    if np.any(eps <= 0) or np.any(eps >= eps0):
        raise InvalidInputError(f"eps must lie in (0, {eps0})")
    lg = np.log(1 / eps)
    return EntropyCurves(eps, d, lg ** (2 * (d - 1)) / eps, lg ** (2.5 * d - 2) / eps)


# --------------------------------------------------------------------------
# suite


@dataclass
class CheckResult:
    name: str
    value: float
    target: str
    passed: bool
    gating: bool = True

    def line(self) -> str:
        status = "pass" if self.passed else "fail"
        if not self.gating:
            status += " (diagnostic)"
        return f"{self.name}\t{self.value:.10g}\t{self.target}\t{status}"


@dataclass
class SuiteConfig:
    seed: int = 0
    draws: int = DEFAULT_DRAWS
    nodes: int = 128
    eps0: float = DEFAULT_EPS0
    sigmas: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    dims: tuple[int, ...] = (2, 3)
    bookkeeping_dims: tuple[int, ...] = (2, 3, 4)


def run_suite(config: SuiteConfig | None = None) -> list[CheckResult]:
    """Every check, one result per line; failures of gating checks fail the suite."""
    cfg = config or SuiteConfig()
    out: list[CheckResult] = []
    seeds = iter(np.random.SeedSequence(cfg.seed).generate_state(64))

    def nxt() -> int:
        return int(next(seeds))

    # envelope bounds
    for d in cfg.dims:
        for c1 in (1.0, 2.0):
            law = ProductLaw.uniform(d) if c1 == 1 else ProductLaw.tilted(d, c1)
            bad, _ = envelope_sweep(law, c1, 10_000, nxt())
            out.append(CheckResult(f"envelope d={d} c1={c1:g}", bad, "violations == 0", bad == 0))

    # small-mass bound and the sigma(delta) form
    for d in cfg.dims:
        for c1 in (1.0, 2.0):
            for s in cfg.sigmas:
                spec = SigmaSpec(s, d, c1, 1.0)
                res = small_mass_check(spec, cfg.draws, nxt())
                out.append(CheckResult(
                    f"small-mass d={d} c1={c1:g} sigma={s:g}", res.estimate.value,
                    f"<= {res.bound:.6g} + 3se ({res.estimate.se:.2g})", res.satisfied))
            delta = 0.1
            spec = SigmaSpec.from_delta(delta, d, c1, 1.0)
            res = small_mass_check(spec, cfg.draws, nxt())
            out.append(CheckResult(
                f"small-mass sigma(delta) d={d} c1={c1:g} delta={delta:g}", res.estimate.value,
                f"<= {delta**2:.6g} + 3se ({res.estimate.se:.2g})", res.satisfied))

    # product-tail identity and Q_sigma mass
    exact = product_tail_integral(2, math.exp(-1))
    out.append(CheckResult("tail identity closed form d=2 b=1/e", exact, "0.5 +- 1e-12", abs(exact - 0.5) <= 1e-12))
    for d, b in ((1, 0.1), (2, math.exp(-1)), (3, 0.05)):
        est = product_tail_mc(d, b, cfg.draws, nxt())
        target = product_tail_integral(d, b)
        out.append(CheckResult(f"tail identity MC d={d} b={b:.6g}", est.value,
                               f"{target:.8g} +- 3se ({est.se:.2g})", est.within(target)))
    for d in cfg.dims:
        for s in cfg.sigmas:
            res = qsigma_mass(SigmaSpec(s, d), cfg.draws, nxt())
            out.append(CheckResult(f"Q_sigma mass uniform d={d} sigma={s:g}", res.estimate.value,
                                   f"== {res.closed_form:.8g} +- 3se ({res.estimate.se:.2g})",
                                   res.estimate.within(res.closed_form)))
        res = qsigma_mass(SigmaSpec(1e-2, d, 2.0, 1.0), cfg.draws, nxt())
        out.append(CheckResult(f"Q_sigma mass c1=2 d={d} sigma=0.01", res.estimate.value,
                               f"<= {res.closed_form:.8g} + 3se", res.satisfied))

    # densities, change of variables and isometry
    for d in cfg.dims:
        for s in (0.1, 0.01):
            c, r = normalization_mc(d, s, cfg.draws, nxt())
            out.append(CheckResult(f"c_{d} mass", c.value, f"1 +- 3se ({c.se:.2g})", c.within(1.0)))
            out.append(CheckResult(f"r_{d},sigma={s:g} mass", r.value, f"1 +- 3se ({r.se:.2g})", r.within(1.0)))
            err = round_trip_error(s, d)
            out.append(CheckResult(f"change of variables round trip d={d} sigma={s:g}", err, "<= 1e-12", err <= 1e-12))

    def zero(U):
        return np.zeros(len(U))

    def first(U):
        return U[:, 0]

    for s in (0.1, 0.01):
        res = isometry_check(zero, first, s, 2, nodes=cfg.nodes)
        out.append(CheckResult(f"isometry g=u1 h=0 d=2 sigma={s:g}", res.rel_error,
                               f"rel <= 1e-4 (lhs {res.lhs:.10g}, rhs {res.rhs:.10g})", res.rel_error <= 1e-4))
    res = isometry_check(zero, lambda U: np.ones(len(U)), 0.1, 2, nodes=cfg.nodes)
    out.append(CheckResult("isometry g=0 h=1 d=2 sigma=0.1", res.lhs, "lhs == rhs == 1",
                           abs(res.lhs - 1) <= 1e-10 and abs(res.rhs - 1) <= 1e-10))

    # entropy bound shapes
    for d in (2, 3, 4):
        eps = np.geomspace(1e-8, cfg.eps0 * 0.999, 50)
        err = entropy_curves(eps, d, cfg.eps0).ratio_error()
        out.append(CheckResult(f"entropy ratio power d={d}", err, f"(log 1/eps)^{d / 2:g} rel <= 1e-12", err <= 1e-12))

    # rate bookkeeping
    for d, gamma in ((2, 1.0), (3, 11 / 6)):
        r = theoretical_rates(d)
        ok = r.gamma_exact == gamma if d == 2 else float(r.gamma_exact) == gamma
        out.append(CheckResult(f"gamma_{d}", r.gamma, f"{gamma:.10g}; beta = 2 gamma",
                               ok and r.beta_exact == 2 * r.gamma_exact))
    for d in cfg.bookkeeping_dims:
        r = theoretical_rates(d)
        grid = np.logspace(10, 12, 201)
        direct = r.bookkeeping_ratio(grid)
        closed = r.closed_form_ratio(grid)
        finite = np.isfinite(direct)
        err = float(np.max(np.abs(direct[finite] / closed[finite] - 1))) if finite.any() else 0.0
        out.append(CheckResult(f"bookkeeping closed form d={d}", err, "2 (log r_n / log n)^{3 gamma/2}, rel <= 1e-12",
                               err <= 1e-12))
        chk = check_bookkeeping(d)
        out.append(CheckResult(f"bookkeeping flat on [1e10, 1e12] d={d}", chk.spread, "max/min <= 1.05",
                               chk.passed, gating=False))
    return out


def suite_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results if r.gating)


def results_to_dicts(results: list[CheckResult]) -> list[dict]:
    return [asdict(r) for r in results]
