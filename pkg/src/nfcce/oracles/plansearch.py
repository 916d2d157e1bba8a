"""Tree-search pricing for two-player games without chance.

For a fixed leaf l, the joint reach term of the sigma objective is a constant
and the remaining terms separate by player: each player independently picks
the best plan among those that follow its sequence to l. All leaves are
handled at once by adding, along each sequence path, the loss incurred by
forcing that action instead of the unconstrained best one.
"""

from __future__ import annotations

import numpy as np

from ..seqform import PlayerSequences, PurePlan, SequenceForm, _reduce
from .base import PricingOracle, SigmaCandidate, SigmaObjective, UnsupportedGame, player_search


def _forced_gain(ps: PlayerSequences, cont: np.ndarray, best: np.ndarray) -> np.ndarray:
    """``path[q]``: change in the root value when the plan must follow q."""
    path = np.zeros(ps.n_seqs)
    for q in range(1, ps.n_seqs):
        h = ps.seq_infoset[q]
        path[q] = path[ps.infoset_parent[h]] + cont[q] - best[h]
    return path


def _forced_plan(ps: PlayerSequences, choice: np.ndarray, q: int) -> PurePlan:
    raw = choice.copy()
    while q > 0:
        h = int(ps.seq_infoset[q])
        raw[h] = ps.seq_action[q]
        q = int(ps.infoset_parent[h])
    return _reduce(ps, [int(a) for a in raw])


def _check_two_player(sf: SequenceForm) -> None:
    if sf.n_players != 2:
        raise UnsupportedGame("tree-search pricing needs exactly two players; use the MILP oracle")
    if sf.has_chance:
        raise UnsupportedGame("tree-search pricing does not support chance nodes; use the MILP oracle")


def c_plan_search(sf: SequenceForm, i: int, leaf: int | None, weights: np.ndarray) -> tuple[float, PurePlan]:
    """Plan of player ``i`` following its sequence to ``leaf`` that minimizes
    ``sum_l weights[q_{-i}^l] * p_c(l) * u_{-i}(l) * r_i(q_i^l)``.

    Ties go to the lowest action index; ``leaf=None`` leaves the plan free.
    """
    if sf.n_players != 2:
        raise UnsupportedGame("c_plan_search is defined for two players")
    o = 1 - i
    ps = sf.seqs[i]
    w = np.asarray(weights, dtype=float)[sf.leaf_seqs[:, o]] * sf.leaf_prob * sf.leaf_payoff[:, o]
    seq_value = -np.bincount(sf.leaf_seqs[:, i], weights=w, minlength=ps.n_seqs)
    cont, best, choice = player_search(ps, seq_value)
    if leaf is None:
        return -float(cont[0]), _reduce(ps, [int(a) for a in choice])
    q = int(sf.leaf_seqs[leaf, i])
    path = _forced_gain(ps, cont, best)
    return -float(cont[0] + path[q]), _forced_plan(ps, choice, q)


class PlanSearchOracle(PricingOracle):
    """P-LRC: exact pricing by per-leaf tree search (two players, no chance)."""

    name = "plrc"

    def __init__(self, sf: SequenceForm):
        _check_two_player(sf)
        super().__init__(sf)

    def leaf_values(self, obj: SigmaObjective) -> tuple[np.ndarray, list]:
        """Best objective value among plan pairs reaching each leaf."""
        sf = self.sf
        mu = obj.leaf_mu(sf)
        total = obj.leaf_constant(sf) + obj.const
        parts = []
        for j in range(2):
            ps = sf.seqs[j]
            # player j's plan scales the other player's mu term
            seq_value = np.bincount(sf.leaf_seqs[:, j], weights=mu[:, 1 - j], minlength=ps.n_seqs)
            cont, best, choice = player_search(ps, seq_value)
            path = _forced_gain(ps, cont, best)
            total = total + cont[0] + path[sf.leaf_seqs[:, j]]
            parts.append(choice)
        return total, parts

    def best_sigma(self, obj: SigmaObjective) -> SigmaCandidate:
        sf = self.sf
        values, choices = self.leaf_values(obj)
        leaf = int(np.argmax(values))
        plans = tuple(_forced_plan(sf.seqs[j], choices[j], int(sf.leaf_seqs[leaf, j])) for j in range(2))
        return SigmaCandidate(value=float(values[leaf]), plans=plans, leaf=leaf)


def p_lrc(query, master):
    """Price the master once with tree search; see PricingOracle.price."""
    return PlanSearchOracle(master.sf).price(query, master)
