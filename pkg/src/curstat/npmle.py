"""Multivariate current status NPMLE.

The log-likelihood depends on ``F`` only through the masses it gives to the
cells of the grid spanned by the observed coordinates, so the NPMLE reduces
to maximising ``sum_i log (A w)_i`` over the probability simplex, where
``A[i, c] = 1`` iff cell ``c`` lies in the orthant region observed for
subject ``i``.  Columns of ``A`` that are identical are merged, and columns
dominated by another column can be dropped without changing the attainable
likelihood.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import InvalidInputError, InvalidStateError
from .model import MAX_DIMENSION, DistributionRepr, as_arrays

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50_000
WEIGHT_FLOOR = 1e-14


# --------------------------------------------------------------------------
# partition and membership


@dataclass(frozen=True)
class CellPartition:
    """Grid of cells cut at the distinct observed coordinates.

    On axis j with sorted breakpoints ``b_0 < ... < b_{n_j - 1}`` the cell
    intervals are ``[0, b_0], (b_0, b_1], ..., (b_{n_j - 1}, inf)``.
    """

    breakpoints: tuple[np.ndarray, ...]

    @property
    def d(self) -> int:
        return len(self.breakpoints)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(b) + 1 for b in self.breakpoints)

    @property
    def n_cells(self) -> int:
        return math.prod(self.shape)

    def unravel(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)

    def ravel(self, keys) -> np.ndarray:
        keys = np.atleast_2d(keys)
        return np.ravel_multi_index(tuple(keys.T), self.shape)

    def cell_bounds(self, keys) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper coordinates of the cells with multi-indices ``keys``."""
        keys = np.atleast_2d(keys)
        lower = np.empty(keys.shape, dtype=float)
        upper = np.empty(keys.shape, dtype=float)
        for j, b in enumerate(self.breakpoints):
            ext_lo = np.concatenate([[0.0], b])
            ext_hi = np.concatenate([b, [np.inf]])
            lower[:, j] = ext_lo[keys[:, j]]
            upper[:, j] = ext_hi[keys[:, j]]
        # the first cell on an axis is [0, b_0]; a zero-width cell at 0 is the point {0}
        return lower, upper

    def observation_ranks(self, T: np.ndarray) -> np.ndarray:
        """Breakpoint index of every observed coordinate."""
        return np.column_stack(
            [np.searchsorted(b, T[:, j]) for j, b in enumerate(self.breakpoints)]
        ).astype(np.int64)


def build_partition(observations) -> CellPartition:
    T, D = as_arrays(observations)
    if T.shape[0] == 0:
        raise InvalidInputError("need at least one observation")
    if T.shape[1] > MAX_DIMENSION:
        raise InvalidInputError(f"dimension {T.shape[1]} exceeds the cap {MAX_DIMENSION}")
    return CellPartition(tuple(np.unique(T[:, j]) for j in range(T.shape[1])))


def _membership(ranks: np.ndarray, D: np.ndarray, keys: np.ndarray) -> np.ndarray:
    # cell key c lies in the region of row i iff on every axis
    # c_j <= rank_ij (delta_ij = 1) or c_j > rank_ij (delta_ij = 0)
    A = np.ones((ranks.shape[0], keys.shape[0]), dtype=bool)
    for j in range(ranks.shape[1]):
        below = keys[None, :, j] <= ranks[:, j, None]
        A &= np.where(D[:, j, None] == 1, below, ~below)
    return A


@dataclass(frozen=True)
class MembershipMatrix:
    A: np.ndarray  # (n, m) bool
    keys: np.ndarray  # (m, d) cell multi-indices, one per column

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


def membership_matrix(partition: CellPartition, observations) -> MembershipMatrix:
    """Incidence between observation regions and every cell of the grid."""
    T, D = as_arrays(observations)
    if T.shape[1] != partition.d:
        raise InvalidInputError("observation dimension does not match the partition")
    keys = partition.unravel(np.arange(partition.n_cells))
    A = _membership(partition.observation_ranks(T), D, keys)
    return MembershipMatrix(A, keys)


def merge_equivalent_cells(A) -> tuple[np.ndarray, list[np.ndarray]]:
    """Merge identical columns.

    Returns the reduced matrix and, for each reduced column, the (sorted)
    indices of the original columns it stands for.  Reduced columns are
    ordered by their smallest member.
    """
    A = np.asarray(A, dtype=bool)
    packed = np.packbits(A, axis=0)
    _, first, inverse = np.unique(packed.T, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    col_group = rank[inverse]
    groups = [np.flatnonzero(col_group == g) for g in range(order.size)]
    return A[:, first[order]], groups


def _paint_witness(ranks, D, shape, axis, low_side):
    """Cells with a row whose boundary on ``axis`` sits right at the cell.

    ``low_side=True`` marks cells c with a delta=1 row ending at ``c[axis]``
    (the row excludes ``c + e_axis``); ``low_side=False`` marks cells with a
    delta=0 row starting at ``c[axis]`` (the row excludes ``c - e_axis``).
    Only rows whose region contains the cell count.
    """
    d = len(shape)
    witness = np.zeros(shape, dtype=bool)
    edge = [slice(None)] * d
    edge[axis] = shape[axis] - 1 if low_side else 0
    witness[tuple(edge)] = True
    want = 1 if low_side else 0
    for r, dl in zip(ranks, D):
        if dl[axis] != want:
            continue
        sl = []
        for k in range(d):
            if k == axis:
                sl.append(r[k] if low_side else r[k] + 1)
            elif dl[k] == 1:
                sl.append(slice(0, r[k] + 1))
            else:
                sl.append(slice(r[k] + 1, None))
        if not low_side and r[axis] + 1 >= shape[axis]:
            continue
        witness[tuple(sl)] = True
    return witness


def candidate_cells(partition: CellPartition, observations, downward: bool = True) -> np.ndarray:
    """Flat indices of cells that may need to carry mass.

    A cell whose column is contained in the column of its upper neighbour
    along some axis can hand its mass to that neighbour without lowering any
    row probability.  With ``downward=True`` a cell is also dropped when its
    column is strictly contained in that of its lower neighbour.  Following
    these moves never cycles, so the returned cells can carry every optimum.
    """
    T, D = as_arrays(observations)
    ranks = partition.observation_ranks(T)
    shape = partition.shape
    keep = np.ones(shape, dtype=bool)
    up = [_paint_witness(ranks, D, shape, j, True) for j in range(partition.d)]
    for u in up:
        keep &= u
    if downward:
        for j in range(partition.d):
            down = _paint_witness(ranks, D, shape, j, False)
            strict_below = np.zeros(shape, dtype=bool)
            src = [slice(None)] * partition.d
            dst = [slice(None)] * partition.d
            src[j] = slice(0, -1)
            dst[j] = slice(1, None)
            strict_below[tuple(dst)] = up[j][tuple(src)]
            keep &= ~(~down & strict_below)
    return np.flatnonzero(keep.ravel())


def drop_dominated(A: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Indices of columns not strictly contained in another column.

    ``A`` must already have identical columns merged.  Containment counts
    are formed in float32 blocks, which is exact for fewer than 2^24 rows.
    """
    Af = np.asarray(A, dtype=np.float32)
    size = Af.sum(axis=0)
    keep = np.ones(Af.shape[1], dtype=bool)
    for start in range(0, Af.shape[1], chunk):
        block = slice(start, start + chunk)
        overlap = Af[:, block].T @ Af
        inside = (overlap == size[block, None]) & (size[block, None] < size[None, :])
        keep[block] = ~inside.any(axis=1)
    return np.flatnonzero(keep)


@dataclass
class ReducedProblem:
    """Likelihood problem restricted to a set of representative cells."""

    partition: CellPartition
    A: np.ndarray  # (n, k) bool
    groups: list[np.ndarray]  # flat cell indices represented by each column
    n_grid_cells: int

    @property
    def representatives(self) -> np.ndarray:
        return np.array([g.min() for g in self.groups], dtype=np.int64)


def reduce_problem(observations, prune: str = "maximal") -> ReducedProblem:
    """Build the (reduced) membership matrix for ``observations``.

    ``prune`` is ``"none"`` (full grid, identical columns merged),
    ``"local"`` (only cells not dominated by a grid neighbour, see
    :func:`candidate_cells`) or ``"maximal"`` (additionally drop columns
    strictly contained in another column, when that check is affordable).
    """
    T, D = as_arrays(observations)
    partition = build_partition((T, D))
    if prune == "none":
        mm = membership_matrix(partition, (T, D))
        A, groups = merge_equivalent_cells(mm.A)
        flat = np.arange(partition.n_cells)
    elif prune in ("local", "maximal"):
        flat = candidate_cells(partition, (T, D))
        A_full = _membership(partition.observation_ranks(T), D, partition.unravel(flat))
        A, groups = merge_equivalent_cells(A_full)
    else:
        raise InvalidInputError(f"unknown pruning mode {prune!r}")
    groups = [flat[g] for g in groups]
    if prune == "maximal" and A.shape[1] > 1:
        cols = drop_dominated(A)
        A = A[:, cols]
        groups = [groups[c] for c in cols]
    if np.any(~A.any(axis=1)):
        raise InvalidStateError("an observation region contains no candidate cell")
    return ReducedProblem(partition, A, groups, partition.n_cells)


# --------------------------------------------------------------------------
# likelihood and EM


def _as_float(A) -> np.ndarray:
    return np.asarray(A, dtype=np.float64)


def log_likelihood(A, w) -> float:
    """``sum_i log (A w)_i``; ``-inf`` when some row has zero probability."""
    p = _as_float(A) @ np.asarray(w, dtype=float)
    if np.any(p <= 0):
        return -math.inf
    return float(np.sum(np.log(p)))


def _row_probs(A: np.ndarray, w: np.ndarray) -> np.ndarray:
    p = A @ w
    if np.any(p <= 0):
        raise InvalidStateError("some observation has zero fitted probability")
    return p


def em_step(A, w) -> np.ndarray:
    """One self-consistency update ``w_c <- w_c mean_i A[i, c] / (A w)_i``."""
    A = _as_float(A)
    w = np.asarray(w, dtype=float)
    p = _row_probs(A, w)
    w_new = w * (A.T @ (1.0 / p)) / A.shape[0]
    return w_new / w_new.sum()


def optimality_gap(A, w) -> float:
    """``max_c mean_i A[i, c] / (A w)_i - 1``; at most 0 exactly at a maximiser."""
    A = _as_float(A)
    p = _row_probs(A, np.asarray(w, dtype=float))
    return float(np.max(A.T @ (1.0 / p)) / A.shape[0] - 1.0)


@dataclass
class MleFit:
    weights: np.ndarray
    loglik_trace: list[float]
    optimality_gap: float
    iterations: int
    converged: bool
    newton_steps: int = 0

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


def _squarem_cycle(A, w0, ll0):
    """One safeguarded SQUAREM extrapolation built from two EM steps."""
    w1 = em_step(A, w0)
    w2 = em_step(A, w1)
    ll2 = log_likelihood(A, w2)
    r = w1 - w0
    v = w2 - 2 * w1 + w0
    nv = np.linalg.norm(v)
    if nv == 0:
        return w2, ll2
    alpha = -np.linalg.norm(r) / nv
    if alpha > -1:
        return w2, ll2
    while alpha < -1:
        w_ext = w0 - 2 * alpha * r + alpha * alpha * v
        if np.all(w_ext > 0):
            break
        alpha = (alpha - 1) / 2
    else:
        return w2, ll2
    w_ext /= w_ext.sum()
    try:
        w_new = em_step(A, w_ext)
    except InvalidStateError:
        return w2, ll2
    ll_new = log_likelihood(A, w_new)
    if ll_new >= ll2:
        return w_new, ll_new
    return w2, ll2


def _newton_polish(A, w, ll, tol, max_steps, trace):
    """Constrained-Newton refinement of ``w``.

    With ``s = diag(1/p) A w'`` the second-order expansion of
    ``sum log (A w')`` at the current row probabilities ``p`` equals
    ``n/2 - |s - 2|^2 / 2``, so each step solves a nonnegative least squares
    problem with the sum-to-one constraint appended as a heavily weighted
    row.  Columns are limited to the current support plus the strongest
    violators of the optimality condition.  A backtracking line search keeps
    the likelihood nondecreasing.
    """
    n, m = A.shape
    cap = max(2 * n, 200)
    penalty = np.sqrt(1e6 * n)
    steps = 0
    for _ in range(max_steps):
        p = A @ w
        grad = A.T @ (1.0 / p) / n
        if grad.max() - 1.0 <= tol:
            break
        support = np.flatnonzero(w > 0)
        if support.size >= cap:
            cols = np.sort(np.argsort(-grad)[:cap])
        else:
            viol = np.flatnonzero((grad > 1.0) & (w == 0))
            if viol.size > cap - support.size:
                viol = viol[np.argsort(-grad[viol])[: cap - support.size]]
            cols = np.union1d(support, viol)
        B = np.vstack([A[:, cols] / p[:, None], np.full(cols.size, penalty)])
        b = np.concatenate([np.full(n, 2.0), [penalty]])
        v, _ = nnls(B, b, maxiter=50 * cols.size + 100)
        if v.sum() <= 0:
            break
        target = np.zeros(m)
        target[cols] = v / v.sum()
        step = 1.0
        accepted = False
        while step > 1e-12:
            cand = (1 - step) * w + step * target
            ll_c = log_likelihood(A, cand)
            if ll_c > ll:
                w, ll = cand, ll_c
                accepted = True
                break
            if step == 1.0 and ll_c >= ll - 64 * np.finfo(float).eps * abs(ll):
                # likelihood flat to rounding: take the step if it is closer to optimal
                if optimality_gap(A, cand) < grad.max() - 1.0:
                    w, ll = cand, ll_c
                    accepted = True
                    break
            step /= 2
        if not accepted:
            break
        steps += 1
        trace.append(ll)
    return w, ll, steps


def em_solve(
    A,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    accelerate: bool = True,
    polish: bool = True,
    polish_every: int = 25,
) -> MleFit:
    """Maximise ``sum_i log (A w)_i`` over the simplex.

    Starts from uniform weights and runs EM (optionally SQUAREM-accelerated)
    until the optimality gap is at most ``tol`` or ``max_iter`` iterations
    have been spent.  With ``polish=True`` a constrained-Newton refinement is
    attempted first and again every ``polish_every`` iterations; it never
    lowers the likelihood beyond rounding.  Both EM updates and Newton steps
    count as iterations.  Weights below ``1e-14`` are zeroed at the end.

    Non-convergence is reported through ``converged=False``.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    A = _as_float(A)
    n, m = A.shape
    if n == 0 or m == 0 or np.any(A.sum(axis=1) == 0):
        raise InvalidInputError("every row of A needs at least one nonzero entry")
    w = np.full(m, 1.0 / m)
    ll = log_likelihood(A, w)
    trace = [ll / n]
    gap = optimality_gap(A, w)
    it = 0  # EM updates plus Newton steps
    newton = 0
    next_polish = 0
    while gap > tol and it < max_iter:
        if polish and it >= next_polish:
            steps = []
            w, ll, k = _newton_polish(A, w, ll, min(tol, 1e-12), min(100, max_iter - it), steps)
            newton += k
            it += k
            next_polish = it + polish_every
            trace.extend(x / n for x in steps)
            gap = optimality_gap(A, w)
            if gap <= tol or it >= max_iter:
                break
        if accelerate and it + 2 <= max_iter:
            w, ll = _squarem_cycle(A, w, ll)
            it += 2
        else:
            w = em_step(A, w)
            ll = log_likelihood(A, w)
            it += 1
        trace.append(ll / n)
        gap = optimality_gap(A, w)

    if polish and gap <= tol:
        # a few more Newton steps tighten the fitted probabilities well past tol
        steps = []
        w, ll, k = _newton_polish(A, w, ll, min(tol, 1e-12), 20, steps)
        newton += k
        it += k
        trace.extend(x / n for x in steps)
        gap = optimality_gap(A, w)

    small = (w > 0) & (w < WEIGHT_FLOOR)
    if small.any():
        w_try = np.where(small, 0.0, w)
        w_try /= w_try.sum()
        if np.all(A @ w_try > 0):
            w = w_try
            gap = optimality_gap(A, w)
            trace.append(log_likelihood(A, w) / n)
    return MleFit(w, trace, gap, it, gap <= tol, newton)


# --------------------------------------------------------------------------
# independent oracle


def _project_simplex_cols(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of every column of ``V`` onto the simplex."""
    m = V.shape[0]
    U = -np.sort(-V, axis=0)
    css = np.cumsum(U, axis=0) - 1.0
    idx = np.arange(1, m + 1)[:, None]
    cond = U - css / idx > 0
    rho = m - 1 - np.argmax(cond[::-1], axis=0)
    theta = css[rho, np.arange(V.shape[1])] / (rho + 1)
    return np.maximum(V - theta, 0.0)


def oracle_solve(
    A, restarts: int = 200, iterations: int = 4000, seed: int = 0
) -> np.ndarray:
    """Projected-gradient ascent with backtracked steps from random starts.

    Used in tests as an EM-independent check of the attainable likelihood.
    Restricted to ``m <= 12`` columns and ``n <= 50`` rows.
    """
    A = _as_float(A)
    n, m = A.shape
    if m > 12 or n > 50:
        raise InvalidInputError(f"oracle limited to m <= 12, n <= 50 (got m={m}, n={n})")
    if m == 1:
        return np.ones(1)
    rng = np.random.default_rng(seed)
    W = rng.dirichlet(np.ones(m), size=restarts).T  # (m, R)

    def value(W):
        P = A @ W
        with np.errstate(divide="ignore"):
            out = np.log(np.where(P > 0, P, 0.0)).sum(axis=0) / n
        return np.where(np.all(P > 0, axis=0), out, -np.inf)

    f = value(W)
    step = np.ones(restarts)
    for _ in range(iterations):
        G = A.T @ (1.0 / (A @ W)) / n
        cand = _project_simplex_cols(W + step * G)
        fc = value(cand)
        ok = fc >= f
        W = np.where(ok, cand, W)
        f = np.where(ok, fc, f)
        step = np.where(ok, np.minimum(step * 1.5, 1e6), step * 0.5)
        step = np.maximum(step, 1e-12)
    return W[:, int(np.argmax(f))]


# --------------------------------------------------------------------------
# assembling the estimator


def mle_distribution(partition: CellPartition, weights, groups) -> DistributionRepr:
    """Place each column's weight on its lexicographically smallest member cell."""
    weights = np.asarray(weights, dtype=float)
    reps = np.array([np.min(g) for g in groups], dtype=np.int64)
    keys = partition.unravel(reps)
    lower, upper = partition.cell_bounds(keys)
    keep = weights > 0
    w = weights[keep] / weights[keep].sum()
    return DistributionRepr(lower[keep], upper[keep], w)


@dataclass
class NpmleResult:
    problem: ReducedProblem
    fit: MleFit
    distribution: DistributionRepr = field(repr=False)

    @property
    def fitted_probabilities(self) -> np.ndarray:
        return _as_float(self.problem.A) @ self.fit.weights


def fit_npmle(
    observations,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    prune: str = "maximal",
    **solver_kw,
) -> NpmleResult:
    """Reduce, solve and assemble the NPMLE for multivariate current status data."""
    problem = reduce_problem(observations, prune=prune)
    fit = em_solve(problem.A, tol=tol, max_iter=max_iter, **solver_kw)
    dist = mle_distribution(problem.partition, fit.weights, problem.groups)
    return NpmleResult(problem, fit, dist)
