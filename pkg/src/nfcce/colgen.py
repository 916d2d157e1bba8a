"""Two-phase column generation over the master problem.

Pricing is partial by default: the v/s columns and every sigma column already
in the pool are priced directly, and the oracle is consulted only when none
of them improves. Each phase therefore ends with an oracle call certifying
that no column of the full LP has a positive reduced cost. ``pricing="full"``
calls the oracle at every iteration instead.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .master import MasterProblem, build_master_skeleton
from .oracles.base import OracleColumn, OracleQuery, PricingOracle, SigmaObjective
from .seqform import PurePlan, SequenceForm, plan_from_choices
from .simplex import (
    PIVOT_TOL,
    BasisState,
    CyclingSuspected,
    Infeasible,
    artificial_id,
    compute_duals,
    dual_cleanup,
    perturb,
    pivot,
    ratio_test,
    refactor,
)

log = logging.getLogger(__name__)

RC_TOL = 1e-6
PHASE1_TOL = 1e-7
DEGENERATE_GAIN = 1e-9
MAX_PERTURBATIONS = 5


class TimeLimitReached(RuntimeError):
    pass


@dataclass
class SolveStats:
    phase1_iters: int = 0
    phase2_iters: int = 0
    phase1_columns: int = 0
    phase2_columns: int = 0
    oracle_calls: int = 0
    seconds: float = 0.0


@dataclass
class Solution:
    status: str  # "optimal" or "time_limit"
    objective: float
    values: list[float]
    support: list[tuple[tuple[PurePlan, ...], float]]
    stats: SolveStats = field(default_factory=SolveStats)
    game: str = ""

    @property
    def solved(self) -> bool:
        return self.status == "optimal"

    def to_json(self, sf: SequenceForm) -> dict:
        return {
            "game": self.game,
            "status": self.status,
            "objective": self.objective,
            "values": list(self.values),
            "support": [{"plans": [p.as_labels(sf) for p in plans], "prob": prob} for plans, prob in self.support],
            "stats": asdict(self.stats),
        }

    @classmethod
    def from_json(cls, d: dict, sf: SequenceForm) -> "Solution":
        support = []
        for entry in d["support"]:
            plans = entry["plans"]
            if len(plans) != sf.n_players:
                raise ValueError(f"support entry has {len(plans)} plans, game has {sf.n_players} players")
            support.append((tuple(plan_from_choices(sf, i, p) for i, p in enumerate(plans)), float(entry["prob"])))
        stats = SolveStats(**{k: v for k, v in d.get("stats", {}).items() if k in SolveStats.__dataclass_fields__})
        return cls(status=d.get("status", "optimal"), objective=float(d["objective"]),
                   values=[float(v) for v in d.get("values", [])], support=support, stats=stats,
                   game=d.get("game", ""))

    def save(self, path: str | Path, sf: SequenceForm) -> None:
        Path(path).write_text(json.dumps(self.to_json(sf), indent=1) + "\n")


class TraceWriter:
    """Per-oracle-call CSV log: call#, oracle, best reduced cost, leaf, milliseconds."""

    header = ("call", "oracle", "best_reduced_cost", "leaf", "ms")

    def __init__(self, path: str | Path):
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(self.header)

    def __call__(self, call: int, oracle: str, col: OracleColumn, ms: float) -> None:
        leaf = "" if col.leaf is None else col.leaf
        self.writer.writerow((call, oracle, f"{col.reduced_cost:.12g}", leaf, f"{ms:.3f}"))

    def close(self) -> None:
        self.fh.close()


class ColumnGeneration:
    """One solve: owns the master problem and its basis."""

    def __init__(self, sf: SequenceForm, oracle: PricingOracle, *, tol: float = RC_TOL,
                 pricing: str = "partial", refactor_every: int = 50, time_limit: float | None = None,
                 max_iter: int | None = None, trace: Callable | None = None,
                 on_query: Callable[[OracleQuery, OracleColumn], None] | None = None):
        if pricing not in ("partial", "full"):
            raise ValueError(f"unknown pricing mode {pricing!r}")
        self.sf = sf
        self.oracle = oracle
        self.tol = tol
        self.pricing = pricing
        self.refactor_every = refactor_every
        self.time_limit = time_limit
        self.master: MasterProblem = build_master_skeleton(sf)
        self.max_iter = max_iter if max_iter is not None else 10 * self.master.m
        self.trace = trace
        self.on_query = on_query
        self.stats = SolveStats()
        self.start = time.monotonic()
        self.deadline = None if time_limit is None else self.start + time_limit
        if hasattr(oracle, "deadline"):
            oracle.deadline = self.deadline
        self.objective_trace: list[float] = []
        self.rhs = self.master.b.copy()
        self.rng = np.random.default_rng(0)

    # -- helpers -------------------------------------------------------

    def _check_time(self) -> None:
        if self.deadline is not None and time.monotonic() >= self.deadline:
            raise TimeLimitReached

    def _column(self, cid: int) -> np.ndarray:
        return self.master.column(cid)

    def _refactor(self, basis: BasisState) -> None:
        B = np.column_stack([self._column(c) for c in basis.ids])
        refactor(basis, B, self.rhs)

    def _call_oracle(self, query: OracleQuery, basis: BasisState) -> OracleColumn:
        self._check_time()
        t0 = time.perf_counter()
        exclude = np.zeros(self.master.n_static, dtype=bool)
        for cid in basis.ids:
            if 0 <= cid < self.master.n_static:
                exclude[cid] = True
        col = self.oracle.price(query, self.master, exclude=exclude)
        ms = 1000.0 * (time.perf_counter() - t0)
        self.stats.oracle_calls += 1
        if self.trace is not None:
            self.trace(self.stats.oracle_calls, self.oracle.name, col, ms)
        if self.on_query is not None:
            self.on_query(query, col)
        return col

    def _pool_pricing(self, duals: np.ndarray, sigma_weight: float, basic: set[int],
                      bland: bool) -> tuple[int, float] | None:
        """Best improving column among static and pooled sigma columns."""
        mp = self.master
        rc_static = -(duals @ mp.static)
        if mp.n_sigma:
            rc_sigma = sigma_weight * np.array(mp.sigma_costs) - duals @ mp.sigma_matrix()
            rc = np.concatenate([rc_static, rc_sigma])
        else:
            rc = rc_static
        if basic:
            idx = [c for c in basic if c >= 0]
            rc[idx] = -np.inf
        if bland:
            hits = np.flatnonzero(rc > self.tol)
            return (int(hits[0]), float(rc[hits[0]])) if hits.size else None
        j = int(np.argmax(rc))
        return (j, float(rc[j])) if rc[j] > self.tol else None

    def _entering_from_oracle(self, col: OracleColumn) -> int:
        if col.kind == "sigma":
            return self.master.add_sigma(col.plans)[0]
        return int(col.index)

    def _pool(self, sigma_weight: float) -> tuple[np.ndarray, np.ndarray]:
        mp = self.master
        A = np.hstack([mp.static, mp.sigma_matrix()])
        c = np.concatenate([np.zeros(mp.n_static), sigma_weight * np.array(mp.sigma_costs)])
        return A, c

    def _run_phase(self, basis: BasisState, sigma_weight: float, phase: int) -> None:
        mp = self.master
        degenerate = 0
        bland = False
        perturbed = False
        perturbations = 0
        it = 0
        while True:
            self._check_time()
            if basis.since_refactor >= self.refactor_every:
                self._refactor(basis)
            duals = compute_duals(basis)
            basic = set(basis.ids)
            entering = None
            if self.pricing == "partial":
                hit = self._pool_pricing(duals, sigma_weight, basic, bland)
                if hit is not None:
                    entering = hit[0]
            if entering is None:
                query = OracleQuery.from_duals(mp.layout, duals, sigma_weight)
                col = self._call_oracle(query, basis)
                if col.reduced_cost > self.tol:
                    entering = self._entering_from_oracle(col)
                    if entering in basic:
                        # round-off can report a basic column as improving
                        entering = None
                if entering is None:
                    if not perturbed:
                        return
                    # optimal for the shifted right-hand side: restore it and
                    # repair the small primal infeasibility that may result
                    perturbed = False
                    degenerate = 0
                    self.rhs = mp.b.copy()
                    self._refactor(basis)
                    A, c = self._pool(sigma_weight)
                    n = dual_cleanup(basis, A, c)
                    it += n
                    self._count(phase, n)
                    continue
            if it >= self.max_iter:
                raise CyclingSuspected(f"cycling suspected: phase {phase} exceeded {self.max_iter} pivots")
            column = self._column(entering)
            d = basis.binv @ column
            pos = ratio_test(basis, d, bland=bland)
            cost = sigma_weight * mp.cost(entering) if mp.is_sigma(entering) else 0.0
            before = basis.objective()
            pivot(basis, pos, entering, cost, d)
            it += 1
            self._count(phase, 1)
            if phase == 2:
                self.objective_trace.append(basis.objective())
            if basis.objective() - before > DEGENERATE_GAIN * max(1.0, abs(before)):
                degenerate = 0
                continue
            degenerate += 1
            if degenerate == mp.m and not perturbed and perturbations < MAX_PERTURBATIONS:
                B = np.column_stack([self._column(c) for c in basis.ids])
                self.rhs = self.rhs + perturb(basis, B, self.rng)
                perturbed = True
                perturbations += 1
            elif degenerate > 3 * mp.m:
                # once on, Bland's rule stays on for the phase
                bland = True

    def _count(self, phase: int, n: int) -> None:
        if phase == 1:
            self.stats.phase1_iters += n
        else:
            self.stats.phase2_iters += n

    def _drive_out(self, basis: BasisState) -> None:
        """Replace zero-valued basic artificials by real columns, or pin them."""
        mp = self.master
        for pos in range(basis.m):
            cid = basis.ids[pos]
            if cid >= 0:
                continue
            self._check_time()
            y = basis.binv[pos].copy()
            basic = set(basis.ids)
            # static and pooled columns first
            vals = y @ mp.static
            if mp.n_sigma:
                vals = np.concatenate([vals, y @ mp.sigma_matrix()])
            for c in basic:
                if c >= 0:
                    vals[c] = 0.0
            j = int(np.argmax(np.abs(vals)))
            entering = j if abs(vals[j]) > PIVOT_TOL else None
            if entering is None:
                obj = SigmaObjective.basis_row(mp.layout, y)
                for o in (obj, obj.negated()):
                    cand = self.oracle.best_sigma(o)
                    self.stats.oracle_calls += 1
                    if cand.value > PIVOT_TOL:
                        c, _ = mp.add_sigma(cand.plans)
                        if c not in basic and abs(y @ mp.column(c)) > PIVOT_TOL:
                            entering = c
                            break
            if entering is None:
                basis.pinned.add(cid)
                continue
            d = basis.binv @ mp.column(entering)
            pivot(basis, pos, entering, 0.0, d)
            self.stats.phase1_iters += 1

    # -- phases --------------------------------------------------------

    def phase1(self) -> BasisState:
        mp = self.master
        m = mp.m
        ids = []
        scale = np.ones(m)
        costs = np.zeros(m)
        first_slack = mp.n_static - sum(self.sf.n_seqs(i) for i in range(self.sf.n_players))
        for k in range(m):
            if k < mp.layout.alpha[0]:
                # beta rows have zero rhs: the slack column -e_k is a feasible basic start
                ids.append(first_slack + k)
                scale[k] = -1.0
            else:
                ids.append(artificial_id(k))
                costs[k] = -1.0
        basis = BasisState.slack_start(mp.b, ids, scale, costs)
        n0 = mp.n_sigma
        self._run_phase(basis, 0.0, 1)
        if basis.objective() < -PHASE1_TOL:
            raise Infeasible(f"auxiliary optimum {basis.objective():.3e} < 0")
        self._drive_out(basis)
        self.stats.phase1_columns = mp.n_sigma - n0
        return basis

    def phase2(self, basis: BasisState) -> Solution:
        mp = self.master
        basis.costs = np.array([mp.cost(c) if c >= 0 else 0.0 for c in basis.ids])
        n0 = mp.n_sigma
        self._run_phase(basis, 1.0, 2)
        self.stats.phase2_columns = mp.n_sigma - n0
        return self._extract(basis)

    def _extract(self, basis: BasisState) -> Solution:
        mp = self.master
        x = dict(zip(basis.ids, basis.x))
        support = []
        for cid, val in zip(basis.ids, basis.x):
            if mp.is_sigma(cid) and val > 1e-12:
                support.append((mp.plans_of(cid), float(val)))
        support.sort(key=lambda s: -s[1])
        values = [float(x.get(p, 0.0) - x.get(q, 0.0)) for p, q in zip(mp.v_plus_root, mp.v_minus_root)]
        objective = float(sum(prob * mp.cost(mp.sigma_index[tuple(p.key for p in plans)]) for plans, prob in support))
        self.stats.seconds = time.monotonic() - self.start
        return Solution(status="optimal", objective=objective, values=values, support=support,
                        stats=self.stats, game=self.sf.game.name)

    def solve(self) -> Solution:
        try:
            if self.time_limit is not None and self.time_limit <= 0:
                raise TimeLimitReached
            basis = self.phase1()
            return self.phase2(basis)
        except (TimeLimitReached, TimeoutError):
            self.stats.seconds = time.monotonic() - self.start
            return Solution(status="time_limit", objective=float("nan"), values=[], support=[],
                            stats=self.stats, game=self.sf.game.name)


def solve(sf: SequenceForm, oracle: PricingOracle, **kwargs) -> Solution:
    return ColumnGeneration(sf, oracle, **kwargs).solve()
