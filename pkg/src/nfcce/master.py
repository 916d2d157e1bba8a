"""Standard-form master problem of the coarse-equilibrium LP.

Row layout (``m = sum_i |Q_i| + n + 1``)::

    beta_i  (|Q_i| rows per player)  F_i^T v_i - U_i r_{-i}(sigma) - s_i = 0
    alpha_i (one row per player)     sum_p sigma(p) U'_i(p) - f_i^T v_i = 0
    gamma   (one row)                sum_p sigma(p) = 1

Static columns are the split free variables ``v_i = v_i^+ - v_i^-`` and the
slacks ``s_i``; sigma columns are generated on demand and never deleted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seqform import PurePlan, SequenceForm, plan_to_realization


@dataclass(frozen=True)
class RowLayout:
    beta: tuple[slice, ...]
    alpha: tuple[int, ...]
    gamma: int
    m: int

    @classmethod
    def of(cls, sf: SequenceForm) -> "RowLayout":
        beta = []
        start = 0
        for i in range(sf.n_players):
            beta.append(slice(start, start + sf.n_seqs(i)))
            start += sf.n_seqs(i)
        alpha = tuple(range(start, start + sf.n_players))
        gamma = start + sf.n_players
        return cls(beta=tuple(beta), alpha=alpha, gamma=gamma, m=gamma + 1)

    def split(self, y: np.ndarray) -> tuple[list[np.ndarray], np.ndarray, float]:
        """Partition a row vector into (beta blocks, alpha, gamma)."""
        return [y[s] for s in self.beta], y[list(self.alpha)], float(y[self.gamma])


def make_sigma_column(plans: tuple[PurePlan, ...], sf: SequenceForm,
                      layout: RowLayout | None = None) -> tuple[np.ndarray, float]:
    """Coefficient column and objective cost of sigma(plans)."""
    layout = layout or RowLayout.of(sf)
    reals = [plan_to_realization(p, sf).r[sf.leaf_seqs[:, j]] for j, p in enumerate(plans)]
    col = np.zeros(layout.m)
    reach_all = sf.leaf_prob * np.prod(reals, axis=0)
    for i in range(sf.n_players):
        others = sf.leaf_prob.copy()
        for j in range(sf.n_players):
            if j != i:
                others = others * reals[j]
        br = np.bincount(sf.leaf_seqs[:, i], weights=others * sf.leaf_payoff[:, i], minlength=sf.n_seqs(i))
        col[layout.beta[i]] = -br
        col[layout.alpha[i]] = reach_all @ sf.leaf_payoff[:, i]
    col[layout.gamma] = 1.0
    return col, float(col[list(layout.alpha)].sum())


@dataclass
class MasterProblem:
    sf: SequenceForm
    layout: RowLayout
    static: np.ndarray  # (m, S) dense
    static_labels: list[str]
    b: np.ndarray
    v_plus_root: list[int]  # static column of v_i^+ component 0 per player
    v_minus_root: list[int]
    sigma_cols: list[np.ndarray] = field(default_factory=list)
    sigma_costs: list[float] = field(default_factory=list)
    sigma_plans: list[tuple[PurePlan, ...]] = field(default_factory=list)
    sigma_index: dict[tuple, int] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.layout.m

    @property
    def n_static(self) -> int:
        return self.static.shape[1]

    @property
    def n_sigma(self) -> int:
        return len(self.sigma_cols)

    def is_sigma(self, cid: int) -> bool:
        return cid >= self.n_static

    def column(self, cid: int) -> np.ndarray:
        if cid < 0:
            col = np.zeros(self.m)
            col[-cid - 1] = 1.0
            return col
        if cid < self.n_static:
            return self.static[:, cid]
        return self.sigma_cols[cid - self.n_static]

    def cost(self, cid: int) -> float:
        if cid < self.n_static:
            return 0.0
        return self.sigma_costs[cid - self.n_static]

    def add_sigma(self, plans: tuple[PurePlan, ...]) -> tuple[int, bool]:
        """Column id of sigma(plans), appending it if new."""
        key = tuple(p.key for p in plans)
        if key in self.sigma_index:
            return self.sigma_index[key], False
        col, cost = make_sigma_column(plans, self.sf, self.layout)
        cid = self.n_static + len(self.sigma_cols)
        self.sigma_cols.append(col)
        self.sigma_costs.append(cost)
        self.sigma_plans.append(tuple(plans))
        self.sigma_index[key] = cid
        return cid, True

    def plans_of(self, cid: int) -> tuple[PurePlan, ...]:
        return self.sigma_plans[cid - self.n_static]

    def sigma_matrix(self) -> np.ndarray:
        if not self.sigma_cols:
            return np.zeros((self.m, 0))
        return np.column_stack(self.sigma_cols)


def build_master_skeleton(sf: SequenceForm) -> MasterProblem:
    layout = RowLayout.of(sf)
    cols: list[np.ndarray] = []
    labels: list[str] = []
    v_plus: list[int] = []
    v_minus: list[int] = []
    for i in range(sf.n_players):
        F = sf.flow_matrix(i).toarray()
        f = sf.flow_rhs(i)
        for sign, tag in ((1.0, "+"), (-1.0, "-")):
            for k in range(F.shape[0]):
                col = np.zeros(layout.m)
                col[layout.beta[i]] = sign * F[k]
                col[layout.alpha[i]] = -sign * f[k]
                if k == 0:
                    (v_plus if sign > 0 else v_minus).append(len(cols))
                cols.append(col)
                labels.append(f"v{i}{tag}[{k}]")
    for i in range(sf.n_players):
        for q in range(sf.n_seqs(i)):
            col = np.zeros(layout.m)
            col[layout.beta[i].start + q] = -1.0
            cols.append(col)
            labels.append(f"s{i}[{q}]")
    b = np.zeros(layout.m)
    b[layout.gamma] = 1.0
    return MasterProblem(sf=sf, layout=layout, static=np.column_stack(cols), static_labels=labels,
                         b=b, v_plus_root=v_plus, v_minus_root=v_minus)
