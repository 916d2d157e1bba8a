"""Revised simplex with a dense explicit basis inverse.

Problems are in standard form ``max c^T x  s.t.  A x = b, x >= 0``. Basis
positions hold column ids: nonnegative ids refer to real columns, negative
ids ``-(k+1)`` to the artificial unit column of row ``k``. Artificials
therefore sort first, which makes Bland's lowest-index rule evict them early.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
RESIDUAL_TOL = 1e-7
REFACTOR_EVERY = 50
STURDY_PIVOT = 1e-1
DEGENERATE_GAIN = 1e-9
PERTURB_SCALE = 1e-6
MAX_PERTURBATIONS = 5


class LPError(RuntimeError):
    pass


class Unbounded(LPError):
    pass


class Infeasible(LPError):
    pass


class SingularBasis(LPError):
    pass


class CyclingSuspected(LPError):
    pass


class TimeLimit(LPError):
    pass


def artificial_id(row: int) -> int:
    return -(row + 1)


def artificial_row(cid: int) -> int:
    return -cid - 1


@dataclass
class BasisState:
    ids: list[int]
    binv: np.ndarray  # Fortran-ordered so rank-one updates run in place
    x: np.ndarray
    costs: np.ndarray
    since_refactor: int = 0
    pinned: set[int] = field(default_factory=set)  # basic artificials kept at zero

    @classmethod
    def slack_start(cls, b: np.ndarray, ids: list[int], scale: np.ndarray, costs: np.ndarray) -> "BasisState":
        """Diagonal starting basis: position k holds a column equal to scale[k]*e_k."""
        binv = np.asfortranarray(np.diag(1.0 / scale))
        return cls(ids=list(ids), binv=binv, x=b / scale, costs=np.asarray(costs, dtype=float).copy())

    @property
    def m(self) -> int:
        return len(self.ids)

    def position(self, cid: int) -> int | None:
        try:
            return self.ids.index(cid)
        except ValueError:
            return None

    def objective(self) -> float:
        return float(self.costs @ self.x)


def compute_duals(basis: BasisState) -> np.ndarray:
    """zeta = c_B^T B^-1."""
    return basis.costs @ basis.binv


def reduced_cost(column: np.ndarray, cost: float, duals: np.ndarray) -> float:
    return float(cost - duals @ column)


def ratio_test(basis: BasisState, d: np.ndarray, pivot_tol: float = PIVOT_TOL, bland: bool = False) -> int:
    """Leaving position for entering direction ``d = B^-1 a``.

    Pinned artificials with a nonzero entry leave first (at step zero);
    otherwise the minimum ratio wins, ties going to the lowest column id.
    Outside Bland mode, rows within the primal tolerance of the minimum count
    as ties and very small pivots among them are avoided.
    """
    if basis.pinned:
        hits = [p for p, cid in enumerate(basis.ids) if cid in basis.pinned and abs(d[p]) > pivot_tol]
        if hits:
            return min(hits, key=lambda p: basis.ids[p])
    cand = np.flatnonzero(d > pivot_tol)
    if cand.size == 0:
        raise Unbounded("entering direction has no positive entry")
    xs = np.maximum(basis.x[cand], 0.0)
    if bland:
        ratios = xs / d[cand]
        theta = ratios.min()
        ties = cand[ratios <= theta + 1e-12 * (1.0 + theta)]
        return int(min(ties, key=lambda p: basis.ids[p]))
    # two-pass test: rows within the primal tolerance of the minimum ratio are
    # ties; tiny pivots among them are skipped when a sturdier one exists
    bound = ((xs + FEAS_TOL) / d[cand]).min()
    ties = cand[xs / d[cand] <= bound]
    big = d[ties].max()
    ties = ties[d[ties] >= STURDY_PIVOT * big]
    if ties.size == 1:
        return int(ties[0])
    return int(min(ties, key=lambda p: basis.ids[p]))


def pivot(basis: BasisState, position: int, entering_id: int, cost: float, d: np.ndarray,
          dual: bool = False) -> float:
    """Replace the column at ``position`` by the entering one; returns the step length.

    A primal pivot moves by the nonnegative ratio; a dual pivot (leaving row
    with negative value, negative pivot) moves by the exact ratio.
    """
    piv = d[position]
    if abs(piv) <= 1e-14:
        raise SingularBasis(f"pivot element {piv:.3e}")
    if dual:
        theta = basis.x[position] / piv
    else:
        theta = max(basis.x[position], 0.0) / piv if piv > 0 else 0.0
    basis.x -= theta * d
    basis.x[position] = theta
    row = basis.binv[position].copy() / piv
    dd = d.copy()
    dd[position] = 0.0
    binv = dger(-1.0, dd, row, a=basis.binv, overwrite_a=1)
    binv[position] = row
    basis.binv = binv
    left = basis.ids[position]
    basis.pinned.discard(left)
    basis.ids[position] = entering_id
    basis.costs[position] = cost
    basis.since_refactor += 1
    _snap(basis.x)
    return theta


def _snap(x: np.ndarray) -> None:
    # values within the primal tolerance of zero are round-off; treating them as
    # exact zeros keeps degenerate pivots recognizable as such
    x[np.abs(x) <= FEAS_TOL] = 0.0


def perturb(basis: BasisState, B: np.ndarray, rng: np.random.Generator, scale: float = PERTURB_SCALE) -> np.ndarray:
    """Shift every basic value up by a small random amount.

    Breaks ties among degenerate rows so the primal simplex stops stalling.
    Returns the matching change of the right-hand side, ``B @ delta``.
    """
    delta = scale * rng.uniform(0.5, 1.0, size=basis.m)
    basis.x += delta
    return B @ delta


def dual_cleanup(basis: BasisState, A, c: np.ndarray, allowed: np.ndarray | None = None,
                 max_iter: int = 10_000) -> int:
    """Dual simplex pivots until the basis is primal feasible again.

    Used after removing a perturbation: the basis is dual feasible for the
    columns of ``A`` (ids ``0..n-1``, costs ``c``), only some basic values are
    slightly negative. Returns the number of pivots.
    """
    n = A.shape[1]
    for it in range(max_iter):
        p = int(np.argmin(basis.x))
        if basis.x[p] >= -FEAS_TOL:
            _snap(basis.x)
            return it
        row = basis.binv[p]
        alpha = np.asarray(A.T @ row).ravel()
        rc = np.minimum(c - np.asarray(A.T @ compute_duals(basis)).ravel(), 0.0)
        mask = alpha < -PIVOT_TOL
        if allowed is not None:
            mask &= allowed[:n]
        for cid in basis.ids:
            if cid >= 0:
                mask[cid] = False
        cand = np.flatnonzero(mask)
        if cand.size == 0:
            raise Infeasible(f"row of basic position {p} cannot be made feasible")
        ratios = rc[cand] / alpha[cand]
        best = ratios.min()
        ties = cand[ratios <= best + 1e-12 * (1.0 + best)]
        j = int(ties[np.argmax(-alpha[ties])])
        col = A[:, j]
        col = col.toarray().ravel() if hasattr(col, "toarray") else np.asarray(col).ravel()
        d = basis.binv @ col
        pivot(basis, p, j, float(c[j]), d, dual=True)
    raise CyclingSuspected(f"dual cleanup exceeded {max_iter} pivots")


def refactor(basis: BasisState, B: np.ndarray, b: np.ndarray) -> None:
    """Recompute B^-1 and x_B from scratch and check the residual."""
    try:
        binv = np.linalg.inv(B)
    except np.linalg.LinAlgError as exc:
        raise SingularBasis(str(exc)) from exc
    resid = np.abs(B @ binv - np.eye(len(b))).max() if len(b) else 0.0
    if not np.isfinite(resid) or resid > RESIDUAL_TOL:
        raise SingularBasis(f"basis residual {resid:.3e} after refactorization")
    basis.binv = np.asfortranarray(binv)
    x = binv @ b
    _snap(x)
    basis.x = x
    basis.since_refactor = 0


class ColumnSet:
    """Column access for a static sparse matrix plus artificial unit columns."""

    def __init__(self, A: sp.spmatrix):
        A = sp.csc_matrix(A, dtype=float)
        A.sum_duplicates()
        self.A = A
        self.AT = A.T.tocsr()
        self.m, self.n = A.shape

    def column(self, cid: int) -> np.ndarray:
        if cid < 0:
            col = np.zeros(self.m)
            col[artificial_row(cid)] = 1.0
            return col
        col = np.zeros(self.m)
        lo, hi = self.A.indptr[cid], self.A.indptr[cid + 1]
        col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        return col

    def direction(self, binv: np.ndarray, cid: int) -> np.ndarray:
        if cid < 0:
            return binv[:, artificial_row(cid)].copy()
        lo, hi = self.A.indptr[cid], self.A.indptr[cid + 1]
        return binv[:, self.A.indices[lo:hi]] @ self.A.data[lo:hi]

    def basis_matrix(self, ids: list[int]) -> np.ndarray:
        return np.column_stack([self.column(c) for c in ids]) if ids else np.zeros((0, 0))


@dataclass
class LPResult:
    status: str
    x: np.ndarray
    objective: float
    duals: np.ndarray
    iterations: int
    basis: list[int] = field(default_factory=list)


@dataclass
class _Phase:
    costs: np.ndarray  # costs of real columns
    allowed: np.ndarray  # real columns allowed to enter


def solve_lp(
    c: np.ndarray,
    A: sp.spmatrix | np.ndarray,
    b: np.ndarray,
    *,
    opt_tol: float = 1e-9,
    feas_tol: float = 1e-7,
    max_iter: int | None = None,
    refactor_every: int = REFACTOR_EVERY,
    deadline: float | None = None,
) -> LPResult:
    """Maximize ``c @ x`` subject to ``A x = b, x >= 0`` by the two-phase method.

    Returns status ``"optimal"`` or ``"infeasible"``; raises Unbounded.
    Duals refer to the rows as given (sign flips for negative ``b`` undone).
    """
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    sign = np.where(b < 0, -1.0, 1.0)
    A = sp.diags(sign) @ sp.csc_matrix(A, dtype=float)
    b *= sign
    cols = ColumnSet(A)
    m, n = cols.m, cols.n
    if max_iter is None:
        max_iter = max(1000, 20 * (m + n))

    # crash: a column with a single positive entry can stand in for that row's artificial
    ids = [artificial_id(k) for k in range(m)]
    scale = np.ones(m)
    counts = np.diff(cols.A.indptr)
    for j in np.flatnonzero(counts == 1):
        lo = cols.A.indptr[j]
        k, v = cols.A.indices[lo], cols.A.data[lo]
        if v > 0 and ids[k] < 0:
            ids[k] = int(j)
            scale[k] = v
    art_costs = np.array([-1.0 if cid < 0 else 0.0 for cid in ids])
    basis = BasisState.slack_start(b, ids, scale, art_costs)

    iters = 0
    if any(cid < 0 for cid in ids):
        phase1 = _Phase(costs=np.zeros(n), allowed=np.ones(n, dtype=bool))
        iters += _iterate(basis, cols, b, phase1, opt_tol, max_iter, refactor_every, deadline)
        if basis.objective() < -feas_tol:
            return LPResult("infeasible", np.zeros(n), float("nan"), np.zeros(m), iters, list(basis.ids))
        iters += _drive_out_artificials(basis, cols)
    basis.costs = np.array([c[cid] if cid >= 0 else 0.0 for cid in basis.ids])
    phase2 = _Phase(costs=c, allowed=np.ones(n, dtype=bool))
    iters += _iterate(basis, cols, b, phase2, opt_tol, max_iter - iters, refactor_every, deadline)

    x = np.zeros(n)
    for p, cid in enumerate(basis.ids):
        if cid >= 0:
            x[cid] = basis.x[p]
    duals = compute_duals(basis) * sign
    return LPResult("optimal", x, float(c @ x), duals, iters, list(basis.ids))


def _drive_out_artificials(basis: BasisState, cols: ColumnSet) -> int:
    """Pivot zero-valued basic artificials out, or pin them when their row is redundant."""
    pivots = 0
    basic = set(basis.ids)
    for p in range(basis.m):
        cid = basis.ids[p]
        if cid >= 0:
            continue
        row = cols.AT @ basis.binv[p] if cols.n else np.zeros(0)
        row = np.abs(row)
        if basic:
            idx = [j for j in basic if j >= 0]
            row[idx] = 0.0
        j = int(np.argmax(row)) if row.size else -1
        if j >= 0 and row[j] > PIVOT_TOL:
            d = cols.direction(basis.binv, j)
            pivot(basis, p, j, 0.0, d)
            basic.discard(cid)
            basic.add(j)
            pivots += 1
        else:
            basis.pinned.add(cid)
    return pivots


def _iterate(
    basis: BasisState,
    cols: ColumnSet,
    b: np.ndarray,
    phase: _Phase,
    opt_tol: float,
    max_iter: int,
    refactor_every: int,
    deadline: float | None,
) -> int:
    m = basis.m
    degenerate_run = 0
    bland = False
    rhs = b
    perturbed = False
    perturbations = 0
    rng = np.random.default_rng(0)
    is_basic = np.zeros(cols.n, dtype=bool)

    def mark() -> None:
        is_basic[:] = False
        for cid in basis.ids:
            if cid >= 0:
                is_basic[cid] = True

    mark()
    it = 0
    while True:
        if deadline is not None and time.monotonic() > deadline:
            raise TimeLimit("LP time limit reached")
        if basis.since_refactor >= refactor_every:
            refactor(basis, cols.basis_matrix(basis.ids), rhs)
        y = compute_duals(basis)
        rc = phase.costs - cols.AT @ y
        rc[is_basic | ~phase.allowed] = -np.inf
        if bland:
            hits = np.flatnonzero(rc > opt_tol)
            j = int(hits[0]) if hits.size else -1
        else:
            j = int(np.argmax(rc)) if rc.size else -1
            if j >= 0 and rc[j] <= opt_tol:
                j = -1
        if j < 0:
            if not perturbed:
                return it
            perturbed = False
            degenerate_run = 0
            rhs = b
            refactor(basis, cols.basis_matrix(basis.ids), rhs)
            it += dual_cleanup(basis, cols.A, phase.costs, phase.allowed)
            mark()
            continue
        if it >= max_iter:
            raise CyclingSuspected(f"no optimum after {max_iter} pivots")
        d = cols.direction(basis.binv, j)
        p = ratio_test(basis, d, bland=bland)
        left = basis.ids[p]
        before = basis.objective()
        pivot(basis, p, j, phase.costs[j], d)
        it += 1
        if left >= 0:
            is_basic[left] = False
        is_basic[j] = True
        if basis.objective() - before > DEGENERATE_GAIN * max(1.0, abs(before)):
            degenerate_run = 0
            continue
        degenerate_run += 1
        if degenerate_run == m and not perturbed and perturbations < MAX_PERTURBATIONS:
            rhs = rhs + perturb(basis, cols.basis_matrix(basis.ids), rng)
            perturbed = True
            perturbations += 1
        elif degenerate_run > 3 * m:
            bland = True
