"""Simulation ladder for the global Hellinger rate of the current status MLE.

For each sample size ``n`` on a ladder and each replication, draw data from a
known truth, fit the MLE, and record its Hellinger and L2(G0) distance to the
truth.  Medians over replications are then regressed on ``log n``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError
from .metrics import Integrator, TruthSpec, default_integrator, discrepancies
from .model import write_observations_csv
from .npmle import DEFAULT_MAX_ITER, DEFAULT_TOL, fit_npmle
from .univariate import gcm_mle

TABLE_COLUMNS = ("n", "rep", "seed", "hellinger", "l2", "iters", "gap", "converged", "wall_ms")
DEFAULT_LADDERS = {
    1: (100, 200, 400, 800, 1600, 3200),
    2: (50, 100, 200, 400, 800),
    3: (25, 50, 100, 200),
}
DEFAULT_REPLICATIONS = {1: 40, 2: 20, 3: 10}


@dataclass(frozen=True)
class BenchConfig:
    """Settings for one rate ladder.

    ``truth`` is ``"uniform"`` (F0 = G0 = uniform on the unit cube) or
    ``"tilted"`` (product of linear densities with bound ``c1``; G0 tilted
    with ``c2`` when ``c2 > 1``).  ``integrator`` is ``"auto"``, ``"gauss"``
    or ``"mc"``.  ``timing`` controls whether wall times enter the table.
    """

    d: int = 1
    ladder: tuple[int, ...] = DEFAULT_LADDERS[1]
    replications: int = 40
    seed: int = 20240101
    truth: str = "uniform"
    c1: float = 2.0
    c2: float = 1.0
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    integrator: str = "auto"
    nodes: int = 64
    draws: int = 200_000
    timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(int(n) for n in self.ladder))
        if not 1 <= self.d <= 6:
            raise InvalidInputError("d must lie in 1..6")
        if len(self.ladder) == 0 or any(n < 1 for n in self.ladder):
            raise InvalidInputError("ladder entries must be >= 1")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise InvalidInputError("ladder must be strictly increasing")
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")
        if self.truth not in ("uniform", "tilted"):
            raise InvalidInputError(f"unknown truth {self.truth!r}")
        if self.integrator not in ("auto", "gauss", "mc"):
            raise InvalidInputError(f"unknown integrator {self.integrator!r}")
        if self.tol <= 0 or self.max_iter < 1:
            raise InvalidInputError("tol must be positive and max_iter >= 1")

    @classmethod
    def defaults(cls, d: int, **overrides) -> "BenchConfig":
        kw = dict(d=d, ladder=DEFAULT_LADDERS.get(d, DEFAULT_LADDERS[3]), replications=DEFAULT_REPLICATIONS.get(d, 10))
        kw.update(overrides)
        return cls(**kw)

    def truth_spec(self) -> TruthSpec:
        if self.truth == "uniform":
            return TruthSpec.uniform(self.d)
        return TruthSpec.tilted(self.d, self.c1, self.c2)

    def make_integrator(self, seed: int) -> Integrator:
        if self.integrator == "auto":
            base = default_integrator(self.d)
            return Integrator(base.kind, nodes=self.nodes, draws=self.draws, seed=seed)
        return Integrator(self.integrator, nodes=self.nodes, draws=self.draws, seed=seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ladder"] = list(self.ladder)
        return out


def replication_seed(master: int, n: int, rep: int) -> int:
    """Seed for one (n, replication) cell, independent of evaluation order."""
    return int(np.random.SeedSequence([master, n, rep]).generate_state(1, dtype=np.uint32)[0])


def sample_dataset(truth: TruthSpec, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``Y ~ F0`` and ``T ~ G0`` independently; return ``(T, Delta)``."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    Y = truth.F0.sample(rng, n)
    T = truth.G0.sample(rng, n)
    return T, (Y <= T).astype(np.int8)


def dataset_csv(truth: TruthSpec, n: int, seed: int) -> str:
    buf = io.StringIO()
    write_observations_csv(buf, sample_dataset(truth, n, seed))
    return buf.getvalue()


@dataclass(frozen=True)
class RateRecord:
    n: int
    rep: int
    seed: int
    hellinger: float
    l2: float
    iters: int
    gap: float
    converged: bool
    wall_ms: float | None = None


@dataclass
class RateTable:
    records: list[RateRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def ns(self) -> list[int]:
        return sorted({r.n for r in self.records})

    def medians(self, column: str = "hellinger") -> dict[int, float]:
        return {n: float(np.median([getattr(r, column) for r in self.records if r.n == n])) for n in self.ns()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for r in self.records:
            w.writerow([
                r.n, r.rep, r.seed, repr(r.hellinger), repr(r.l2), r.iters, repr(r.gap),
                int(r.converged), "" if r.wall_ms is None else f"{r.wall_ms:.1f}",
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RateTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and tuple(rows[0].keys()) != TABLE_COLUMNS:
            raise InvalidInputError("unexpected rate table header")
        recs = [
            RateRecord(
                int(r["n"]), int(r["rep"]), int(r["seed"]), float(r["hellinger"]), float(r["l2"]),
                int(r["iters"]), float(r["gap"]), bool(int(r["converged"])),
                float(r["wall_ms"]) if r["wall_ms"] else None,
            )
            for r in rows
        ]
        return cls(recs)


def run_one(config: BenchConfig, truth: TruthSpec, n: int, rep: int) -> RateRecord:
    seed = replication_seed(config.seed, n, rep)
    T, D = sample_dataset(truth, n, seed)
    start = time.perf_counter()
    if config.d == 1:
        # the univariate MLE is exact, so there is no iteration or gap to report
        F = gcm_mle((T[:, 0], D[:, 0])).to_distribution()
        iters, gap, converged = 0, 0.0, True
    else:
        res = fit_npmle((T, D), tol=config.tol, max_iter=config.max_iter)
        F = res.distribution
        iters, gap, converged = res.fit.iterations, res.fit.optimality_gap, res.fit.converged
    h, l2 = discrepancies(F, truth, config.make_integrator(seed))
    wall = (time.perf_counter() - start) * 1e3 if config.timing else None
    return RateRecord(n, rep, seed, h, l2, int(iters), float(gap), bool(converged), wall)


def run_ladder(config: BenchConfig, threads: int = 1, progress=None) -> RateTable:
    """Run every (n, replication) cell; records are ordered by (n, rep)."""
    truth = config.truth_spec()
    jobs = [(n, rep) for n in config.ladder for rep in range(config.replications)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            records = list(ex.map(lambda job: run_one(config, truth, *job), jobs))
    else:
        records = []
        for n, rep in jobs:
            records.append(run_one(config, truth, n, rep))
            if progress is not None:
                progress(records[-1])
    return RateTable(records)


# --------------------------------------------------------------------------
# rate fits

RATE_MODELS = ("pure-power", "fixed-log", "fixed-power")


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ``log median h`` against ``log n``.

    ``pure-power``: ``h = C n^slope``, both fitted.
    ``fixed-log``: ``h = C n^{-1/3} (log n)^gamma_d``, only ``C`` fitted.
    ``fixed-power``: ``h = C n^{-1/3}``, only ``C`` fitted.
    """

    model: str
    d: int
    slope: float
    log_power: float
    constant: float
    rse: float
    rss: float
    ns: list[int]
    medians: list[float]

    def predict(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return self.constant * n**self.slope * np.log(n) ** self.log_power

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def fit_rate_points(ns, medians, model: str, d: int = 1) -> RateFit:
    if model not in RATE_MODELS:
        raise InvalidInputError(f"unknown rate model {model!r}")
    ns = np.asarray(ns, dtype=float)
    y = np.log(np.asarray(medians, dtype=float))
    if ns.size < 3 or np.unique(ns).size < 3:
        raise InvalidInputError("need at least 3 distinct sample sizes")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("medians must be positive")
    x = np.log(ns)
    if model == "pure-power":
        slope, logc = np.polyfit(x, y, 1)
        power, dof = 0.0, ns.size - 2
    else:
        slope = -1.0 / 3.0
        power = theoretical_rates(d).gamma if model == "fixed-log" else 0.0
        offset = slope * x + power * np.log(x)
        logc = float(np.mean(y - offset))
        dof = ns.size - 1
    resid = y - (logc + slope * x + power * np.log(x))
    rss = float(resid @ resid)
    return RateFit(
        model, d, float(slope), float(power), float(np.exp(logc)), float(math.sqrt(rss / dof)), rss,
        [int(n) for n in ns], [float(m) for m in np.exp(y)],
    )


def fit_rate(table: RateTable, model: str = "pure-power", d: int = 1, column: str = "hellinger") -> RateFit:
    """Fit a rate model to the per-n medians of ``column``."""
    med = table.medians(column)
    return fit_rate_points(list(med), list(med.values()), model, d)


# --------------------------------------------------------------------------
# closed-form rate bookkeeping


@dataclass(frozen=True)
class TheoreticalRates:
    """Log powers of the Hellinger (``gamma``) and squared L2 (``beta``) rates.

    ``r_n(n) = n^{1/3} / (log n)^gamma`` is the rate normaliser used with the
    modulus ``phi_n(delta) = 2 K delta^{1/2} (log(1/delta))^{3 gamma / 2}``.
    """

    d: int
    gamma_exact: Fraction

    @property
    def gamma(self) -> float:
        return float(self.gamma_exact)

    @property
    def beta_exact(self) -> Fraction:
        return 2 * self.gamma_exact

    @property
    def beta(self) -> float:
        return float(self.beta_exact)

    def r_n(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return n ** (1 / 3) / np.log(n) ** self.gamma

    def phi_n(self, delta, K: float = 1.0) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        return 2 * K * np.sqrt(delta) * np.log(1 / delta) ** (1.5 * self.gamma)

    def bookkeeping_ratio(self, n) -> np.ndarray:
        """``r_n^2 phi_n(1/r_n) / sqrt(n)``, evaluated in log space."""
        n = np.asarray(n, dtype=float)
        log_n = np.log(n)
        log_r = log_n / 3 - self.gamma * np.log(log_n)
        if np.any(log_r <= 0):
            return np.where(log_r > 0, np.exp(self._log_ratio(log_n, np.maximum(log_r, 1e-300))), np.nan)
        return np.exp(self._log_ratio(log_n, log_r))

    def _log_ratio(self, log_n, log_r):
        # log(r^2) + log 2 - log(r)/2 + (3 gamma / 2) log log r - log(n) / 2
        return 1.5 * log_r + math.log(2) + 1.5 * self.gamma * np.log(log_r) - 0.5 * log_n

    def closed_form_ratio(self, n) -> np.ndarray:
        """The same quantity simplified: ``2 (log r_n / log n)^{3 gamma / 2}``."""
        log_n = np.log(np.asarray(n, dtype=float))
        log_r = log_n / 3 - self.gamma * np.log(log_n)
        return 2 * (log_r / log_n) ** (1.5 * self.gamma)

    def limit_ratio(self) -> float:
        return 2 * 3 ** (-1.5 * self.gamma)


def theoretical_rates(d: int) -> TheoreticalRates:
    """``gamma_d = (5d - 4)/6`` for d >= 2; d = 1 has no log factor."""
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise InvalidInputError("d must be a positive integer")
    gamma = Fraction(0) if d == 1 else Fraction(5 * int(d) - 4, 6)
    return TheoreticalRates(int(d), gamma)


@dataclass(frozen=True)
class BookkeepingCheck:
    d: int
    n_grid: list[float]
    ratios: list[float]
    spread: float  # max/min over the grid
    tolerance: float
    passed: bool


def check_bookkeeping(d: int, n_lo: float = 1e10, n_hi: float = 1e12, points: int = 201, tolerance: float = 0.05) -> BookkeepingCheck:
    """Is ``r_n^2 phi_n(1/r_n) / sqrt(n)`` flat to within ``tolerance`` on ``[n_lo, n_hi]``?"""
    rates = theoretical_rates(d)
    grid = np.logspace(math.log10(n_lo), math.log10(n_hi), points)
    ratio = rates.bookkeeping_ratio(grid)
    if np.any(~np.isfinite(ratio)) or np.any(ratio <= 0):
        spread = math.inf
    else:
        spread = float(ratio.max() / ratio.min())
    return BookkeepingCheck(d, grid.tolist(), ratio.tolist(), spread, tolerance, bool(spread <= 1 + tolerance))
