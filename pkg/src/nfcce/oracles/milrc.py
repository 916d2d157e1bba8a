"""MILP pricing: the sigma objective as a mixed 0/1 program over realization
plans and leaf selectors, solved by branch and bound, then purified.

Variants
  two-player          r_0, r_1, leaf selector z, and one McCormick variable w
                      per sequence pair with a nonzero joint-payoff coefficient
  two-player-chance   as above on chance-weighted payoffs; the single
                      sum(z) = 1 row becomes one row per chance outcome
                      sequence
  three-player        z and per-player selectors z_i over leaves; the objective
                      is linear in them
"""

from __future__ import annotations

import time
from enum import Enum

import numpy as np
import scipy.sparse as sp

from ..seqform import PurePlan, SequenceForm, _reduce
from .base import PricingOracle, SigmaCandidate, SigmaObjective, UnsupportedGame, player_search
from .milp import MilpInstance, solve_milp

SUPPORT_TOL = 1e-9


class Variant(str, Enum):
    TWO_PLAYER = "two-player"
    TWO_PLAYER_CHANCE = "two-player-chance"
    THREE_PLAYER = "three-player"


class PurificationError(RuntimeError):
    pass


def default_variant(sf: SequenceForm) -> Variant:
    if sf.n_players == 2:
        return Variant.TWO_PLAYER_CHANCE if sf.has_chance else Variant.TWO_PLAYER
    if sf.n_players == 3 and not sf.has_chance:
        return Variant.THREE_PLAYER
    raise UnsupportedGame(f"no MILP pricing for {sf.n_players} players"
                          + (" with chance" if sf.has_chance else ""))


def _leaf_keys_uniform(sf: SequenceForm, key: np.ndarray, movers: set) -> bool:
    """True when, at every node where a mover acts, all children lead to the
    same set of leaf keys. Then any pure choice of the movers reaches exactly
    one leaf per key."""
    game = sf.game
    leaf_index = {lid: k for k, lid in enumerate(sf.leaf_ids)}
    below: dict[str, frozenset] = {}
    for node in reversed(list(game.preorder())):
        if node.is_leaf:
            below[node.id] = frozenset([int(key[leaf_index[node.id]])])
            continue
        sets = [below[c] for c in node.children]
        mover = (node.kind == "chance" and "chance" in movers) or (node.kind == "decision" and node.player in movers)
        if mover and any(s != sets[0] for s in sets[1:]):
            return False
        below[node.id] = frozenset().union(*sets)
    return True


def chance_history_keys(sf: SequenceForm) -> np.ndarray:
    """Per leaf, an id of the chance outcomes on its path (labels in order,
    ignoring the players' moves in between)."""
    game = sf.game
    hist: dict[str, tuple] = {game.root: ()}
    for node in game.preorder():
        for a, child in enumerate(node.children):
            hist[child] = hist[node.id] + ((node.labels[a],) if node.kind == "chance" else ())
    ids: dict[tuple, int] = {}
    return np.array([ids.setdefault(hist[lid], len(ids)) for lid in sf.leaf_ids], dtype=np.int64)


def chance_is_uniform(sf: SequenceForm) -> bool:
    """Every pure plan pair reaches exactly one leaf per chance history."""
    return _leaf_keys_uniform(sf, chance_history_keys(sf), set(range(sf.n_players)))


class _Builder:
    def __init__(self):
        self.n = 0
        self.blocks: dict[str, slice] = {}
        self.eq: list[tuple[dict[int, float], float]] = []
        self.ub: list[tuple[dict[int, float], float]] = []

    def add_block(self, name: str, size: int) -> slice:
        s = slice(self.n, self.n + size)
        self.blocks[name] = s
        self.n += size
        return s

    def rows_eq(self, M: sp.spmatrix, offset: int, rhs: np.ndarray) -> None:
        M = sp.csr_matrix(M)
        for k in range(M.shape[0]):
            lo, hi = M.indptr[k], M.indptr[k + 1]
            self.eq.append(({offset + int(j): float(v) for j, v in zip(M.indices[lo:hi], M.data[lo:hi])},
                            float(rhs[k])))

    @staticmethod
    def _matrix(rows, n):
        data, ri, ci = [], [], []
        for k, (coef, _) in enumerate(rows):
            for j, v in coef.items():
                ri.append(k)
                ci.append(j)
                data.append(v)
        A = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
        return A, np.array([r for _, r in rows], dtype=float)

    def finish(self, c: np.ndarray, binary: np.ndarray, const: float, variant: Variant) -> MilpInstance:
        A_eq, b_eq = self._matrix(self.eq, self.n)
        A_ub, b_ub = self._matrix(self.ub, self.n)
        return MilpInstance(c=c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub, binary=binary, const=const,
                            blocks=dict(self.blocks), variant=variant.value)


def build_milrc(obj: SigmaObjective, sf: SequenceForm, variant: Variant | str | None = None) -> MilpInstance:
    """MILP whose optimum is max over pure plan profiles of ``obj``."""
    variant = default_variant(sf) if variant is None else Variant(variant)
    arity = 3 if variant == Variant.THREE_PLAYER else 2
    if sf.n_players != arity or len(obj.lam) != arity:
        raise ValueError(f"{variant.value} build needs {arity} players, got game {sf.n_players} / duals {len(obj.lam)}")
    if variant == Variant.TWO_PLAYER and sf.has_chance:
        raise ValueError("game has chance nodes; use the two-player-chance build")
    if variant == Variant.THREE_PLAYER and sf.has_chance:
        raise UnsupportedGame("three-player MILP pricing does not support chance nodes")
    if variant == Variant.THREE_PLAYER:
        return _build_three(obj, sf)
    return _build_two(obj, sf, variant)


def _flow_and_selectors(bld: _Builder, sf: SequenceForm, L: int) -> tuple[list[slice], slice]:
    r = [bld.add_block(f"r{i}", sf.n_seqs(i)) for i in range(sf.n_players)]
    z = bld.add_block("z", L)
    for i in range(sf.n_players):
        bld.rows_eq(sf.flow_matrix(i), r[i].start, sf.flow_rhs(i))
    return r, z


def _build_two(obj: SigmaObjective, sf: SequenceForm, variant: Variant) -> MilpInstance:
    L = sf.n_leaves
    bld = _Builder()
    r, z = _flow_and_selectors(bld, sf, L)
    keys = sf.profiles
    joint = sf.profile_payoff @ obj.lam
    nz = np.flatnonzero(joint != 0.0)
    w = bld.add_block("w", len(nz))
    c = np.zeros(bld.n)
    mu = obj.leaf_mu(sf)
    # mu_i term is linear in the other player's plan
    c[r[1]] += np.bincount(sf.leaf_seqs[:, 1], weights=mu[:, 0], minlength=sf.n_seqs(1))
    c[r[0]] += np.bincount(sf.leaf_seqs[:, 0], weights=mu[:, 1], minlength=sf.n_seqs(0))
    c[w] = joint[nz]
    binary = np.zeros(bld.n, dtype=bool)
    binary[z] = True
    for k, p in enumerate(nz):
        q0, q1 = int(keys[p, 0]), int(keys[p, 1])
        wj, a, bb = w.start + k, r[0].start + q0, r[1].start + q1
        binary[a] = True
        bld.ub.append(({wj: 1.0, a: -1.0}, 0.0))
        bld.ub.append(({wj: 1.0, bb: -1.0}, 0.0))
        bld.ub.append(({a: 1.0, bb: 1.0, wj: -1.0}, 1.0))
        # w >= 0 is the variable bound
    for leaf in range(L):
        for i in range(2):
            bld.ub.append(({z.start + leaf: 1.0, r[i].start + int(sf.leaf_seqs[leaf, i]): -1.0}, 0.0))
    # z marks exactly the leaves reached by a pure pair, so every leaf of a
    # profile with a McCormick variable has z(l) = w(profile); this is valid at
    # every integral point and tightens the relaxation considerably
    inverse = sf.leaf_profile
    w_of_profile = {int(p): w.start + k for k, p in enumerate(nz)}
    for leaf in range(L):
        wj = w_of_profile.get(int(inverse[leaf]))
        if wj is not None and sf.leaf_prob[leaf] > 0:
            bld.eq.append(({z.start + leaf: 1.0, wj: -1.0}, 0.0))
    if variant == Variant.TWO_PLAYER:
        bld.eq.append(({z.start + leaf: 1.0 for leaf in range(L)}, 1.0))
    elif chance_is_uniform(sf):
        hist = chance_history_keys(sf)
        for h in np.unique(hist):
            bld.eq.append(({z.start + int(leaf): 1.0 for leaf in np.flatnonzero(hist == h)}, 1.0))
    else:
        bld.eq.append(({z.start + leaf: float(sf.leaf_prob[leaf]) for leaf in range(L)}, 1.0))
    return bld.finish(c, binary, obj.const, variant)


def _build_three(obj: SigmaObjective, sf: SequenceForm) -> MilpInstance:
    L = sf.n_leaves
    n = 3
    bld = _Builder()
    r, z = _flow_and_selectors(bld, sf, L)
    zi = [bld.add_block(f"z{i}", L) for i in range(n)]
    c = np.zeros(bld.n)
    c[z] = obj.leaf_constant(sf)
    mu = obj.leaf_mu(sf)
    for i in range(n):
        c[zi[i]] = mu[:, i]
    binary = np.zeros(bld.n, dtype=bool)
    binary[z] = True
    for i in range(n):
        binary[zi[i]] = True
        binary[r[i]] = True
    bld.eq.append(({z.start + leaf: 1.0 for leaf in range(L)}, 1.0))
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for leaf in range(L):
            zl, zil = z.start + leaf, zi[i].start + leaf
            bld.ub.append(({zl: 1.0, zil: -1.0}, 0.0))
            for j in others:
                bld.ub.append(({zil: 1.0, r[j].start + int(sf.leaf_seqs[leaf, j]): -1.0}, 0.0))
            # z_i is the product of the others' reach indicators
            row = {zil: -1.0}
            for j in others:
                row[r[j].start + int(sf.leaf_seqs[leaf, j])] = 1.0
            bld.ub.append((row, float(len(others) - 1)))
        if _leaf_keys_uniform(sf, sf.leaf_seqs[:, i], set(others)):
            for q in sf.terminal_sequences(i):
                members = np.flatnonzero(sf.leaf_seqs[:, i] == q)
                bld.eq.append(({zi[i].start + int(leaf): 1.0 for leaf in members}, 1.0))
    return bld.finish(c, binary, obj.const, Variant.THREE_PLAYER)


def purify(inst: MilpInstance, x: np.ndarray, obj: SigmaObjective, sf: SequenceForm) -> tuple[PurePlan, ...]:
    """Pure plans whose objective is at least that of the MILP point ``x``.

    Players are handled in turn; each picks, among sequences with positive
    mass in ``x``, the continuation maximizing its linear objective given the
    plans already fixed (and the fractional plans of players not yet fixed).
    """
    n = sf.n_players
    reals = [np.asarray(inst.block(x, f"r{i}"), dtype=float).copy() for i in range(n)]
    lc = obj.leaf_constant(sf)
    mu = obj.leaf_mu(sf)
    plans: list[PurePlan] = []
    for i in range(n):
        reach = [reals[j][sf.leaf_seqs[:, j]] for j in range(n)]
        others = np.prod([reach[j] for j in range(n) if j != i], axis=0)
        w = lc * others
        for k in range(n):
            if k == i:
                continue
            w = w + mu[:, k] * np.prod([reach[j] for j in range(n) if j not in (i, k)], axis=0)
        ps = sf.seqs[i]
        seq_value = np.bincount(sf.leaf_seqs[:, i], weights=w, minlength=ps.n_seqs)
        allowed = reals[i] > SUPPORT_TOL
        _, _, choice = player_search(ps, seq_value, allowed)
        try:
            plan = _reduce(ps, [int(a) for a in choice])
        except ValueError as exc:
            raise PurificationError(f"player {i}: no positive continuation ({exc})") from None
        plans.append(plan)
        r = np.zeros(ps.n_seqs)
        r[0] = 1.0
        for h, a in enumerate(plan.choices):
            if a >= 0:
                r[ps.seq(h, a)] = 1.0
        reals[i] = r
    return tuple(plans)


class MilpOracle(PricingOracle):
    """MI-LRC pricing through branch and bound."""

    name = "milrc"

    def __init__(self, sf: SequenceForm, variant: Variant | str | None = None, deadline: float | None = None):
        super().__init__(sf)
        self.variant = default_variant(sf) if variant is None else Variant(variant)
        self.deadline = deadline
        self.last_milp_value: float | None = None
        self.nodes = 0

    def best_sigma(self, obj: SigmaObjective) -> SigmaCandidate:
        inst = build_milrc(obj, self.sf, self.variant)
        res = solve_milp(inst, deadline=self.deadline)
        self.nodes += res.nodes
        self.last_milp_value = res.objective
        plans = purify(inst, res.x, obj, self.sf)
        zs = inst.block(res.x, "z")
        leaf = int(np.argmax(zs > 0.5)) if np.any(zs > 0.5) else None
        return SigmaCandidate(value=obj.value(plans, self.sf), plans=plans, leaf=leaf)


def mi_lrc(query, master, variant: Variant | str | None = None):
    return MilpOracle(master.sf, variant).price(query, master)
