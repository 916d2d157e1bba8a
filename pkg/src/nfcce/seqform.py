"""Sequence-form compilation of an extensive-form game.

Sequences of each player are numbered in depth-first preorder: the empty
sequence is index 0 and the sequences ``h·a`` of an information set ``h`` are
allocated contiguously, in declared action order, the first time ``h`` is met.
Information sets are numbered in the same first-encounter order, so the parent
sequence of an information set always has a smaller index than its own
sequences. Chance gets the same treatment with one information set per node.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .game import ExtensiveFormGame, require_valid

FLOW_TOL = 1e-9


@dataclass(frozen=True)
class PlayerSequences:
    """Sequence bookkeeping for one player (or chance, with ``player == -1``)."""

    player: int
    infoset_ids: tuple[str, ...]
    infoset_labels: tuple[tuple[str, ...], ...]
    infoset_parent: np.ndarray  # parent sequence of each infoset
    infoset_first: np.ndarray  # index of the infoset's first action sequence
    seq_infoset: np.ndarray  # infoset a sequence ends in, -1 for the empty sequence
    seq_action: np.ndarray

    @property
    def n_seqs(self) -> int:
        return len(self.seq_infoset)

    @property
    def n_infosets(self) -> int:
        return len(self.infoset_ids)

    @cached_property
    def infoset_index(self) -> dict[str, int]:
        return {h: k for k, h in enumerate(self.infoset_ids)}

    def n_actions(self, h: int) -> int:
        return len(self.infoset_labels[h])

    def seq(self, h: int, a: int) -> int:
        return int(self.infoset_first[h]) + a

    def seq_parent(self, q: int) -> int:
        h = self.seq_infoset[q]
        return -1 if h < 0 else int(self.infoset_parent[h])

    @cached_property
    def children_infosets(self) -> list[list[int]]:
        """Infosets that directly follow each sequence."""
        out: list[list[int]] = [[] for _ in range(self.n_seqs)]
        for h, q in enumerate(self.infoset_parent):
            out[q].append(h)
        return out

    def describe(self, q: int) -> tuple[tuple[str, str], ...]:
        """The sequence as a tuple of (infoset id, action label) pairs."""
        path = []
        while q > 0:
            h = int(self.seq_infoset[q])
            path.append((self.infoset_ids[h], self.infoset_labels[h][int(self.seq_action[q])]))
            q = int(self.infoset_parent[h])
        return tuple(reversed(path))


class _SeqBuilder:
    def __init__(self, player: int):
        self.player = player
        self.ids: list[str] = []
        self.labels: list[tuple[str, ...]] = []
        self.parent: list[int] = []
        self.first: list[int] = []
        self.seq_infoset = [-1]
        self.seq_action = [-1]
        self.index: dict[str, int] = {}

    def visit(self, infoset: str, labels: tuple[str, ...], parent_seq: int) -> int:
        h = self.index.get(infoset)
        if h is None:
            h = len(self.ids)
            self.index[infoset] = h
            self.ids.append(infoset)
            self.labels.append(labels)
            self.parent.append(parent_seq)
            self.first.append(len(self.seq_infoset))
            for a in range(len(labels)):
                self.seq_infoset.append(h)
                self.seq_action.append(a)
        return self.first[h]

    def freeze(self) -> PlayerSequences:
        return PlayerSequences(
            player=self.player,
            infoset_ids=tuple(self.ids),
            infoset_labels=tuple(self.labels),
            infoset_parent=np.array(self.parent, dtype=np.int64),
            infoset_first=np.array(self.first, dtype=np.int64),
            seq_infoset=np.array(self.seq_infoset, dtype=np.int64),
            seq_action=np.array(self.seq_action, dtype=np.int64),
        )


@dataclass(frozen=True, eq=False)
class SequenceForm:
    """Sequence form of a valid game.

    Leaf data is stored per leaf (in preorder); the sparse utility tensors are
    the leaf payoffs aggregated by terminal sequence profile, already weighted
    by the chance reach probability.
    """

    game: ExtensiveFormGame
    seqs: tuple[PlayerSequences, ...]
    chance: PlayerSequences | None
    leaf_ids: tuple[str, ...]
    leaf_seqs: np.ndarray  # (L, n) terminal sequence of each player
    leaf_chance_seq: np.ndarray  # (L,)
    leaf_prob: np.ndarray  # (L,) chance reach probability
    leaf_payoff: np.ndarray  # (L, n)

    @property
    def n_players(self) -> int:
        return len(self.seqs)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_ids)

    @property
    def has_chance(self) -> bool:
        return self.chance is not None

    def n_seqs(self, i: int) -> int:
        return self.seqs[i].n_seqs

    def n_infosets(self, i: int) -> int:
        return self.seqs[i].n_infosets

    @cached_property
    def _profiles(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        keys, inverse = np.unique(self.leaf_seqs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        vals = np.zeros((len(keys), self.n_players))
        np.add.at(vals, inverse, self.leaf_payoff * self.leaf_prob[:, None])
        return keys, vals, inverse

    @property
    def profiles(self) -> np.ndarray:
        """Distinct terminal sequence profiles, shape (K, n)."""
        return self._profiles[0]

    @property
    def profile_payoff(self) -> np.ndarray:
        """Chance-marginalized payoff of each profile, shape (K, n)."""
        return self._profiles[1]

    @property
    def leaf_profile(self) -> np.ndarray:
        """Row of ``profiles`` that each leaf belongs to."""
        return self._profiles[2]

    def flow_matrix(self, i: int) -> sp.csr_matrix:
        """F_i with an explicit first row selecting the empty sequence."""
        ps = self.seqs[i]
        return _flow_matrix(ps)

    def flow_rhs(self, i: int) -> np.ndarray:
        f = np.zeros(self.seqs[i].n_infosets + 1)
        f[0] = 1.0
        return f

    def utility_matrix(self, i: int) -> sp.csr_matrix:
        """Two-player sparse utility U_i of shape |Q_1| x |Q_2|."""
        if self.n_players != 2:
            raise ValueError("utility_matrix is only defined for two players")
        keys, vals, _ = self._profiles
        shape = (self.n_seqs(0), self.n_seqs(1))
        return sp.csr_matrix((vals[:, i], (keys[:, 0], keys[:, 1])), shape=shape)

    def incidence(self, i: int) -> sp.csr_matrix:
        """R_i: R_i[q, l] = 1 iff sequence q of player i lies on the root path of leaf l."""
        ps = self.seqs[i]
        return _incidence(ps, self.leaf_seqs[:, i])

    def chance_incidence(self) -> tuple[np.ndarray, sp.csr_matrix]:
        """Rows of R_c for the terminal chance sequences, and those sequences."""
        if self.chance is None:
            raise ValueError("game has no chance nodes")
        terminal = np.unique(self.leaf_chance_seq)
        full = _incidence(self.chance, self.leaf_chance_seq)
        return terminal, full[terminal]

    def terminal_sequences(self, i: int) -> np.ndarray:
        return np.unique(self.leaf_seqs[:, i])

    @cached_property
    def chance_realization(self) -> np.ndarray:
        """r_c: realization plan of chance over its sequences."""
        if self.chance is None:
            return np.ones(1)
        ch = self.chance
        probs = {n.id: n.probs for n in self.game.nodes if n.kind == "chance"}
        r = np.zeros(ch.n_seqs)
        r[0] = 1.0
        for h, nid in enumerate(ch.infoset_ids):
            for a, p in enumerate(probs[nid]):
                r[ch.seq(h, a)] = r[ch.infoset_parent[h]] * p
        return r


def _flow_matrix(ps: PlayerSequences) -> sp.csr_matrix:
    rows = [0]
    cols = [0]
    vals = [1.0]
    for h in range(ps.n_infosets):
        rows.append(h + 1)
        cols.append(int(ps.infoset_parent[h]))
        vals.append(-1.0)
        for a in range(ps.n_actions(h)):
            rows.append(h + 1)
            cols.append(ps.seq(h, a))
            vals.append(1.0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(ps.n_infosets + 1, ps.n_seqs))


def _incidence(ps: PlayerSequences, leaf_seq: np.ndarray) -> sp.csr_matrix:
    rows: list[int] = []
    cols: list[int] = []
    for leaf, q in enumerate(leaf_seq):
        q = int(q)
        while q >= 0:
            rows.append(q)
            cols.append(leaf)
            q = ps.seq_parent(q)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(ps.n_seqs, len(leaf_seq)))


def build_sequence_form(game: ExtensiveFormGame) -> SequenceForm:
    """Compile a valid game. Raises GameError on an invalid one."""
    require_valid(game)
    n = game.players
    builders = [_SeqBuilder(i) for i in range(n)]
    chance = _SeqBuilder(-1)
    leaf_ids: list[str] = []
    leaf_seqs: list[tuple[int, ...]] = []
    leaf_cseq: list[int] = []
    leaf_prob: list[float] = []
    leaf_pay: list[tuple[float, ...]] = []

    stack: list[tuple[str, tuple[int, ...], int, float]] = [(game.root, (0,) * n, 0, 1.0)]
    while stack:
        nid, cur, cseq, prob = stack.pop()
        node = game.node(nid)
        if node.kind == "leaf":
            leaf_ids.append(nid)
            leaf_seqs.append(cur)
            leaf_cseq.append(cseq)
            leaf_prob.append(prob)
            leaf_pay.append(node.payoffs)
            continue
        pending = []
        if node.kind == "decision":
            i = node.player
            first = builders[i].visit(node.infoset, node.labels, cur[i])
            for a, child in enumerate(node.children):
                nxt = list(cur)
                nxt[i] = first + a
                pending.append((child, tuple(nxt), cseq, prob))
        else:
            first = chance.visit(nid, node.labels, cseq)
            for a, child in enumerate(node.children):
                pending.append((child, cur, first + a, prob * node.probs[a]))
        stack.extend(reversed(pending))

    return SequenceForm(
        game=game,
        seqs=tuple(b.freeze() for b in builders),
        chance=chance.freeze() if chance.ids else None,
        leaf_ids=tuple(leaf_ids),
        leaf_seqs=np.array(leaf_seqs, dtype=np.int64).reshape(len(leaf_ids), n),
        leaf_chance_seq=np.array(leaf_cseq, dtype=np.int64),
        leaf_prob=np.array(leaf_prob),
        leaf_payoff=np.array(leaf_pay, dtype=float).reshape(len(leaf_ids), n),
    )


# --------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class RealizationPlan:
    player: int
    r: np.ndarray

    def satisfies_flow(self, sf: SequenceForm, tol: float = FLOW_TOL) -> bool:
        res = sf.flow_matrix(self.player) @ self.r - sf.flow_rhs(self.player)
        return bool(np.max(np.abs(res), initial=0.0) <= tol and np.min(self.r, initial=0.0) >= -1e-12)

    def is_pure(self, tol: float = FLOW_TOL) -> bool:
        return bool(np.all((np.abs(self.r) <= tol) | (np.abs(self.r - 1) <= tol)))


@dataclass(frozen=True)
class PurePlan:
    """A reduced pure plan: ``choices[h]`` is the action index taken at infoset
    ``h``, or -1 when ``h`` is unreachable under the player's own earlier moves.
    The pair ``(player, choices)`` is the canonical key."""

    player: int
    choices: tuple[int, ...]

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        return (self.player, self.choices)

    def as_labels(self, sf: SequenceForm) -> dict[str, str]:
        ps = sf.seqs[self.player]
        return {ps.infoset_ids[h]: ps.infoset_labels[h][a] for h, a in enumerate(self.choices) if a >= 0}


def plan_from_choices(sf: SequenceForm, player: int, choices: Mapping[str, str | int]) -> PurePlan:
    """Build a reduced plan from {infoset id: action label or index}.

    Entries for infosets that the plan itself makes unreachable are dropped.
    """
    ps = sf.seqs[player]
    raw = [-1] * ps.n_infosets
    for hid, act in choices.items():
        if hid not in ps.infoset_index:
            raise ValueError(f"player {player}: unknown infoset {hid!r}")
        h = ps.infoset_index[hid]
        if isinstance(act, str):
            if act not in ps.infoset_labels[h]:
                raise ValueError(f"player {player}: infoset {hid!r} has no action {act!r}")
            raw[h] = ps.infoset_labels[h].index(act)
        else:
            if not 0 <= int(act) < ps.n_actions(h):
                raise ValueError(f"player {player}: infoset {hid!r} has no action index {act}")
            raw[h] = int(act)
    return _reduce(ps, raw)


def _reduce(ps: PlayerSequences, raw: Sequence[int]) -> PurePlan:
    reach = np.zeros(ps.n_seqs, dtype=bool)
    reach[0] = True
    out = [-1] * ps.n_infosets
    for h in range(ps.n_infosets):
        if reach[ps.infoset_parent[h]]:
            a = raw[h]
            if a < 0:
                raise ValueError(f"player {ps.player}: no action at reachable infoset {ps.infoset_ids[h]!r}")
            out[h] = a
            reach[ps.seq(h, a)] = True
    return PurePlan(ps.player, tuple(out))


def plan_to_realization(plan: PurePlan, sf: SequenceForm) -> RealizationPlan:
    ps = sf.seqs[plan.player]
    if len(plan.choices) != ps.n_infosets:
        raise ValueError(f"plan has {len(plan.choices)} infosets, player {plan.player} has {ps.n_infosets}")
    r = np.zeros(ps.n_seqs)
    r[0] = 1.0
    for h, a in enumerate(plan.choices):
        if a >= ps.n_actions(h):
            raise ValueError(f"infoset {ps.infoset_ids[h]!r}: action index {a} out of range")
        if r[ps.infoset_parent[h]] == 1.0:
            if a < 0:
                raise ValueError(f"no action at reachable infoset {ps.infoset_ids[h]!r}")
            r[ps.seq(h, a)] = 1.0
    return RealizationPlan(plan.player, r)


def realization_to_plan(r: np.ndarray, sf: SequenceForm, player: int, tol: float = FLOW_TOL) -> PurePlan:
    """Inverse of plan_to_realization for a pure realization plan."""
    ps = sf.seqs[player]
    out = [-1] * ps.n_infosets
    for h in range(ps.n_infosets):
        if r[ps.infoset_parent[h]] > 1 - tol:
            hits = [a for a in range(ps.n_actions(h)) if r[ps.seq(h, a)] > 1 - tol]
            if len(hits) != 1:
                raise ValueError(f"realization plan is not pure at infoset {ps.infoset_ids[h]!r}")
            out[h] = hits[0]
    return PurePlan(player, tuple(out))


def realization_expected_utility(profile: Sequence[RealizationPlan | np.ndarray], sf: SequenceForm, i: int) -> float:
    """Expected utility of player ``i`` when every player follows its realization plan."""
    if len(profile) != sf.n_players:
        raise ValueError(f"expected {sf.n_players} realization plans, got {len(profile)}")
    weight = sf.leaf_prob.copy()
    for j, rp in enumerate(profile):
        r = rp.r if isinstance(rp, RealizationPlan) else np.asarray(rp)
        if r.shape != (sf.n_seqs(j),):
            raise ValueError(f"player {j}: plan of shape {r.shape}, expected ({sf.n_seqs(j)},)")
        weight = weight * r[sf.leaf_seqs[:, j]]
    return float(weight @ sf.leaf_payoff[:, i])


def profile_utilities(plans: Sequence[PurePlan], sf: SequenceForm) -> np.ndarray:
    """Expected utility of every player under a pure plan profile."""
    reals = [plan_to_realization(p, sf).r for p in plans]
    weight = sf.leaf_prob.copy()
    for j, r in enumerate(reals):
        weight = weight * r[sf.leaf_seqs[:, j]]
    return weight @ sf.leaf_payoff


def best_response(
    sf: SequenceForm, i: int, mixture: Sequence[tuple[float, Sequence[PurePlan | None]]]
) -> tuple[float, PurePlan]:
    """Best pure plan of player ``i`` against a correlated mixture of the others.

    ``mixture`` holds (weight, profile) pairs; entry ``i`` of each profile is
    ignored. Solved by backward induction over player i's information sets.
    """
    if not mixture:
        raise ValueError("empty opponent mixture")
    weights = np.array([w for w, _ in mixture], dtype=float)
    if np.any(weights < -FLOW_TOL) or abs(weights.sum() - 1.0) > FLOW_TOL:
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    reach = np.zeros(sf.n_leaves)
    for w, prof in mixture:
        term = np.full(sf.n_leaves, w)
        for j in range(sf.n_players):
            if j != i:
                term *= plan_to_realization(prof[j], sf).r[sf.leaf_seqs[:, j]]
        reach += term
    leaf_value = reach * sf.leaf_prob * sf.leaf_payoff[:, i]

    ps = sf.seqs[i]
    value = np.zeros(ps.n_seqs)
    np.add.at(value, sf.leaf_seqs[:, i], leaf_value)
    best = [0] * ps.n_infosets
    for h in reversed(range(ps.n_infosets)):
        first = ps.infoset_first[h]
        cont = value[first:first + ps.n_actions(h)]
        a = int(np.argmax(cont))
        best[h] = a
        value[ps.infoset_parent[h]] += cont[a]
    return float(value[0]), _reduce(ps, best)


def best_response_value(sf: SequenceForm, i: int, mixture: Sequence[tuple[float, Sequence[PurePlan | None]]]) -> float:
    return best_response(sf, i, mixture)[0]
