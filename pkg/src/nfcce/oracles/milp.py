"""Small branch-and-bound solver for mixed 0/1 linear programs.

    max c.x + const  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0,
                           x_j in {0, 1} for binary j

Node relaxations are solved from scratch with the package's simplex engine;
fixed binaries are eliminated from the LP (fixing to one moves the column to
the right-hand side). Branching is on the most fractional binary, nodes are
explored depth-first with ties broken by the better parent bound.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..simplex import solve_lp

INT_TOL = 1e-7
PRUNE_TOL = 1e-9


class InfeasibleInstance(RuntimeError):
    pass


class NodeLimit(RuntimeError):
    pass


@dataclass
class MilpInstance:
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    binary: np.ndarray  # bool mask over variables
    const: float = 0.0
    blocks: dict[str, slice] = field(default_factory=dict)
    variant: str = ""

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_constraints(self) -> int:
        return self.A_eq.shape[0] + self.A_ub.shape[0]

    def block(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[self.blocks[name]]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.const)

    def is_feasible(self, x: np.ndarray, tol: float = 1e-7) -> bool:
        if np.any(x < -tol):
            return False
        if self.A_eq.shape[0] and np.max(np.abs(self.A_eq @ x - self.b_eq)) > tol:
            return False
        if self.A_ub.shape[0] and np.max(self.A_ub @ x - self.b_ub) > tol:
            return False
        xb = x[self.binary]
        return bool(np.all(np.minimum(np.abs(xb), np.abs(xb - 1)) <= tol))


@dataclass
class MilpResult:
    objective: float
    x: np.ndarray
    nodes: int
    lp_iterations: int


@dataclass
class _Reduced:
    """Instance after presolve plus the map back to original variables."""

    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    binary: np.ndarray
    rep: np.ndarray  # original variable -> reduced variable


def _dedupe_rows(A: sp.csr_matrix, b: np.ndarray, keep_max: bool) -> tuple[sp.csr_matrix, np.ndarray]:
    """Drop empty rows and merge identical ones (the tighter rhs wins for <=)."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.eliminate_zeros()
    seen: dict[tuple, int] = {}
    rows: list[int] = []
    rhs: list[float] = []
    for k in range(A.shape[0]):
        lo, hi = A.indptr[k], A.indptr[k + 1]
        if lo == hi:
            if (keep_max and b[k] < -1e-12) or (not keep_max and abs(b[k]) > 1e-12):
                raise InfeasibleInstance("empty row with nonzero right-hand side")
            continue
        key = (tuple(A.indices[lo:hi]), tuple(np.round(A.data[lo:hi], 12)))
        if key in seen:
            r = seen[key]
            if keep_max:
                rhs[r] = min(rhs[r], b[k])
            elif abs(rhs[r] - b[k]) > 1e-9:
                raise InfeasibleInstance("contradictory duplicate equalities")
            continue
        seen[key] = len(rows)
        rows.append(k)
        rhs.append(float(b[k]))
    return A[rows], np.array(rhs)


def presolve(inst: MilpInstance) -> _Reduced:
    """Merge variables tied by ``x_a - x_b = 0`` rows, then drop empty and
    duplicate rows. Binary status survives a merge."""
    n = inst.n_vars
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    A_eq = sp.csr_matrix(inst.A_eq)
    for k in range(A_eq.shape[0]):
        lo, hi = A_eq.indptr[k], A_eq.indptr[k + 1]
        if hi - lo == 2 and inst.b_eq[k] == 0.0:
            (a, b), (va, vb) = A_eq.indices[lo:hi], A_eq.data[lo:hi]
            if va == -vb:
                ra, rb = find(int(a)), find(int(b))
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(n)])
    uniq, rep = np.unique(roots, return_inverse=True)
    P = sp.csr_matrix((np.ones(n), (np.arange(n), rep)), shape=(n, len(uniq)))
    c = P.T @ inst.c
    binary = np.zeros(len(uniq), dtype=bool)
    np.logical_or.at(binary, rep, inst.binary)
    A_eq, b_eq = _dedupe_rows(inst.A_eq @ P, inst.b_eq, keep_max=False)
    A_ub, b_ub = _dedupe_rows(inst.A_ub @ P, inst.b_ub, keep_max=True)
    return _Reduced(c=np.asarray(c).ravel(), A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub, binary=binary, rep=rep)


def solve_milp(inst: MilpInstance, *, int_tol: float = INT_TOL, prune_tol: float = PRUNE_TOL,
               node_limit: int | None = None, deadline: float | None = None) -> MilpResult:
    red = presolve(inst)
    n = len(red.c)
    m_eq, m_ub = red.A_eq.shape[0], red.A_ub.shape[0]
    A = sp.vstack([
        sp.hstack([red.A_eq, sp.csr_matrix((m_eq, m_ub))]),
        sp.hstack([red.A_ub, sp.identity(m_ub)]),
    ]).tocsc()
    b = np.concatenate([red.b_eq, red.b_ub])
    c = np.concatenate([red.c, np.zeros(m_ub)])
    binary = np.flatnonzero(red.binary)

    best_val = -np.inf
    best_x: np.ndarray | None = None
    nodes = 0
    lp_iters = 0
    counter = itertools.count()
    # heap entries: (-depth, -parent bound, tiebreak, fixings)
    heap: list = [(0, -np.inf, next(counter), {})]

    while heap:
        neg_depth, neg_bound, _, fixed = heapq.heappop(heap)
        if -neg_bound <= best_val + prune_tol:
            continue
        if node_limit is not None and nodes >= node_limit:
            raise NodeLimit(f"branch-and-bound exceeded {node_limit} nodes")
        if deadline is not None and time.monotonic() > deadline:
            raise TimeoutError("branch-and-bound deadline reached")
        nodes += 1
        keep = np.ones(n + m_ub, dtype=bool)
        ones = [j for j, v in fixed.items() if v == 1]
        keep[list(fixed)] = False
        rhs = b - (A[:, ones] @ np.ones(len(ones)) if ones else 0.0)
        free = np.flatnonzero(keep)
        res = solve_lp(c[free], A[:, free], rhs)
        lp_iters += res.iterations
        if res.status != "optimal":
            if nodes == 1:
                raise InfeasibleInstance("LP relaxation infeasible at the root")
            continue
        x = np.zeros(n + m_ub)
        x[free] = res.x
        x[ones] = 1.0
        bound = float(c @ x)
        if bound <= best_val + prune_tol:
            continue
        xb = x[binary]
        frac = np.minimum(xb, 1.0 - xb)
        k = int(np.argmax(frac)) if frac.size else -1
        if k < 0 or frac[k] <= int_tol:
            x[binary] = np.round(xb)
            best_val, best_x = bound, x[:n].copy()
            continue
        j = int(binary[k])
        first = 1 if x[j] >= 0.5 else 0
        depth = -neg_depth + 1
        # pushed last = popped first among equal keys is not guaranteed; order by tiebreak
        for v in (first, 1 - first):
            child = dict(fixed)
            child[j] = v
            heapq.heappush(heap, (-depth, -bound, next(counter), child))

    if best_x is None:
        raise InfeasibleInstance("no integral solution")
    return MilpResult(objective=best_val + inst.const, x=best_x[red.rep], nodes=nodes, lp_iterations=lp_iters)
