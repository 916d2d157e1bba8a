"""Shared pricing machinery: dual partitions, the linear sigma objective and
the static (v/s) part of pricing."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..master import MasterProblem, RowLayout
from ..seqform import PurePlan, SequenceForm, plan_to_realization


class UnsupportedGame(ValueError):
    """The oracle cannot price columns for this kind of game."""


@dataclass(frozen=True)
class OracleQuery:
    """Duals of the master, split by row block, plus the phase's sigma cost weight.

    ``sigma_weight`` is 1 in phase 2 (sigma columns carry their welfare cost)
    and 0 in phase 1 (real columns cost nothing).
    """

    duals: np.ndarray
    beta: tuple[np.ndarray, ...]
    alpha: np.ndarray
    gamma: float
    sigma_weight: float = 1.0
    static_costs: np.ndarray | None = None

    @classmethod
    def from_duals(cls, layout: RowLayout, duals: np.ndarray, sigma_weight: float = 1.0,
                   static_costs: np.ndarray | None = None) -> "OracleQuery":
        duals = np.asarray(duals, dtype=float)
        if duals.shape != (layout.m,):
            raise ValueError(f"dual vector of shape {duals.shape}, master has {layout.m} rows")
        beta, alpha, gamma = layout.split(duals)
        return cls(duals=duals, beta=tuple(b.copy() for b in beta), alpha=alpha.copy(), gamma=gamma,
                   sigma_weight=sigma_weight, static_costs=static_costs)


@dataclass(frozen=True)
class SigmaObjective:
    """Linear functional on sigma columns, in terms of the pure plans p:

        value(p) = sum_i lam_i U'_i(p) + sum_i mu_i . (U_i r_{-i}(p)) + const

    where ``(U_i r_{-i})(q)`` sums chance-weighted payoffs of i over leaves whose
    i-sequence is q, reached by the other players' plans. Reduced costs and rows
    of B^-1 applied to sigma columns both take this form.
    """

    lam: np.ndarray
    mu: tuple[np.ndarray, ...]
    const: float = 0.0

    @classmethod
    def reduced_cost(cls, q: OracleQuery) -> "SigmaObjective":
        # column has -U_i r_{-i} on the beta block, U'_i on alpha_i and 1 on gamma
        return cls(lam=q.sigma_weight - q.alpha, mu=tuple(q.beta), const=-q.gamma)

    @classmethod
    def basis_row(cls, layout: RowLayout, y: np.ndarray) -> "SigmaObjective":
        beta, alpha, gamma = layout.split(y)
        return cls(lam=alpha.copy(), mu=tuple(-b for b in beta), const=gamma)

    def negated(self) -> "SigmaObjective":
        return SigmaObjective(lam=-self.lam, mu=tuple(-m for m in self.mu), const=-self.const)

    def leaf_constant(self, sf: SequenceForm) -> np.ndarray:
        """Per-leaf coefficient of the joint reach term sum_i lam_i u_i(l)."""
        return sf.leaf_prob * (sf.leaf_payoff @ self.lam)

    def leaf_mu(self, sf: SequenceForm) -> np.ndarray:
        """(L, n): mu_i(q_i^l) * p_c(l) * u_i(l)."""
        out = np.empty((sf.n_leaves, sf.n_players))
        for i in range(sf.n_players):
            out[:, i] = self.mu[i][sf.leaf_seqs[:, i]] * sf.leaf_prob * sf.leaf_payoff[:, i]
        return out

    def value(self, plans: tuple[PurePlan, ...], sf: SequenceForm) -> float:
        reach = np.stack([plan_to_realization(p, sf).r[sf.leaf_seqs[:, j]] for j, p in enumerate(plans)], axis=1)
        joint = reach.prod(axis=1)
        total = float(self.leaf_constant(sf) @ joint) + self.const
        mu = self.leaf_mu(sf)
        for i in range(sf.n_players):
            others = np.prod(np.delete(reach, i, axis=1), axis=1)
            total += float(mu[:, i] @ others)
        return total


@dataclass(frozen=True)
class SigmaCandidate:
    value: float
    plans: tuple[PurePlan, ...]
    leaf: int | None = None


@dataclass(frozen=True)
class OracleColumn:
    """Best entering column found by an oracle.

    ``kind`` is "sigma", "v" or "s"; ``index`` is the static column index for
    v/s columns. For sigma columns ``reduced_cost`` is recomputed exactly from
    the plans, and ``leaf`` is the certifying leaf (None when not applicable).
    """

    kind: str
    reduced_cost: float
    index: int | None = None
    plans: tuple[PurePlan, ...] | None = None
    leaf: int | None = None
    search_value: float | None = None


def static_reduced_costs(master: MasterProblem, query: OracleQuery) -> np.ndarray:
    costs = query.static_costs if query.static_costs is not None else np.zeros(master.n_static)
    return costs - query.duals @ master.static


def exact_sigma_reduced_cost(master: MasterProblem, query: OracleQuery, plans: tuple[PurePlan, ...]) -> float:
    from ..master import make_sigma_column

    col, cost = make_sigma_column(plans, master.sf, master.layout)
    return float(query.sigma_weight * cost - query.duals @ col)


class PricingOracle(ABC):
    """Finds the sigma column maximizing a SigmaObjective."""

    name = "oracle"

    def __init__(self, sf: SequenceForm):
        self.sf = sf
        self.calls = 0

    @abstractmethod
    def best_sigma(self, obj: SigmaObjective) -> SigmaCandidate:
        ...

    def price(self, query: OracleQuery, master: MasterProblem, exclude: np.ndarray | None = None) -> OracleColumn:
        """Best column over v/s (checked directly) and sigma (searched).

        ``exclude`` masks static columns that are basic. Ties favour v/s columns,
        then lower static index.
        """
        self.calls += 1
        rc = static_reduced_costs(master, query)
        if exclude is not None:
            rc = np.where(exclude, -np.inf, rc)
        cand = self.best_sigma(SigmaObjective.reduced_cost(query))
        exact = exact_sigma_reduced_cost(master, query, cand.plans)
        j = int(np.argmax(rc)) if rc.size else -1
        if j >= 0 and rc[j] >= exact:
            kind = "v" if master.static_labels[j].startswith("v") else "s"
            return OracleColumn(kind=kind, reduced_cost=float(rc[j]), index=j)
        return OracleColumn(kind="sigma", reduced_cost=exact, plans=cand.plans, leaf=cand.leaf,
                            search_value=cand.value)


def player_search(ps, seq_value: np.ndarray, allowed: np.ndarray | None = None
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward induction maximizing a linear function of a realization plan.

    Returns (cont, best, choice): ``cont[q]`` is the best value of the subtree
    hanging below sequence q (including seq_value[q]), ``best[h]`` the best
    continuation at infoset h and ``choice[h]`` its lowest-index argmax.
    ``allowed`` optionally masks sequences that may be chosen.
    """
    cont = np.asarray(seq_value, dtype=float).copy()
    best = np.zeros(ps.n_infosets)
    choice = np.full(ps.n_infosets, -1, dtype=np.int64)
    for h in reversed(range(ps.n_infosets)):
        first = int(ps.infoset_first[h])
        vals = cont[first:first + ps.n_actions(h)]
        if allowed is not None:
            mask = allowed[first:first + ps.n_actions(h)]
            if not mask.any():
                continue
            vals = np.where(mask, vals, -np.inf)
        a = int(np.argmax(vals))
        choice[h] = a
        best[h] = vals[a]
        cont[ps.infoset_parent[h]] += vals[a]
    return cont, best, choice
