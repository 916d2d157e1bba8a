"""Benchmark game generators.

All generators are pure functions of their configuration: the same config
always produces the same game, node ids and infoset ids included.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .game import ExtensiveFormGame, GameError, Node

MAX_LEAVES = 10**6


@dataclass(frozen=True)
class RandomGameConfig:
    depth: int
    branching: int
    seed: int = 0
    infoset_merge_prob: float = 0.5
    players: int = 2

    def check(self) -> None:
        if self.depth < 1 or self.branching < 2:
            raise GameError(f"need depth >= 1 and branching >= 2, got {self.depth}, {self.branching}")
        if not 0.0 <= self.infoset_merge_prob <= 1.0:
            raise GameError(f"merge probability {self.infoset_merge_prob} outside [0, 1]")
        if self.depth * math.log(self.branching) > math.log(MAX_LEAVES) + 1e-9:
            raise GameError(f"{self.branching}^{self.depth} leaves exceeds {MAX_LEAVES}")
        if self.players < 2:
            raise GameError("need at least two players")


def gen_random_game(cfg: RandomGameConfig) -> ExtensiveFormGame:
    """Uniform-depth random game; players act in turn by level (player 0 at the root).

    Nodes of the acting player on one level are grouped by that player's own
    history; within a group each node after the first joins a uniformly chosen
    existing infoset with probability ``infoset_merge_prob``. Leaf payoffs are
    i.i.d. uniform on (-1, 1).
    """
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    n, b = cfg.players, cfg.branching
    # each level: list of (node id, per-player own history)
    level: list[tuple[str, tuple[tuple, ...]]] = [("n", tuple(() for _ in range(n)))]
    nodes: list[Node] = []
    for depth in range(cfg.depth):
        player = depth % n
        groups: dict[tuple, list[int]] = {}
        for k, (_, hist) in enumerate(level):
            groups.setdefault(hist[player], []).append(k)
        infoset_of = [""] * len(level)
        counter = 0
        for members in groups.values():
            opened: list[str] = []
            for k in members:
                if opened and rng.random() < cfg.infoset_merge_prob:
                    infoset_of[k] = opened[int(rng.integers(len(opened)))]
                else:
                    infoset_of[k] = f"d{depth}.{counter}"
                    counter += 1
                    opened.append(infoset_of[k])
        nxt = []
        labels = tuple(f"a{a}" for a in range(b))
        for k, (nid, hist) in enumerate(level):
            children = tuple(f"{nid}.{a}" for a in range(b))
            nodes.append(Node(id=nid, kind="decision", player=player, infoset=infoset_of[k],
                              labels=labels, children=children))
            for a, child in enumerate(children):
                h = list(hist)
                h[player] = hist[player] + ((infoset_of[k], a),)
                nxt.append((child, tuple(h)))
        level = nxt
    pay = rng.uniform(-1.0, 1.0, size=(len(level), n))
    for (nid, _), u in zip(level, pay):
        nodes.append(Node(id=nid, kind="leaf", payoffs=tuple(float(x) for x in u)))
    name = f"R{cfg.depth}-{cfg.branching}" + (f"x{n}" if n != 2 else "") + f"/s{cfg.seed}"
    return ExtensiveFormGame(players=n, root="n", nodes=tuple(nodes), name=name)


class GoofspielVariant(str, Enum):
    REVEALED_ORDER = "r"
    SPLIT_TIES = "s"
    DISCARD_TIES = "d"


@dataclass(frozen=True)
class GoofspielConfig:
    ranks: int = 3
    variant: GoofspielVariant = GoofspielVariant.REVEALED_ORDER

    def check(self) -> None:
        if self.ranks < 2:
            raise GameError(f"need at least 2 ranks, got {self.ranks}")


def gen_goofspiel(cfg: GoofspielConfig) -> ExtensiveFormGame:
    """Two-player Goofspiel with cards ``1..K``.

    Player 0 bids first, player 1 bids without seeing that bid; both bids are
    public once the round ends. In the revealed-order variant prizes come up
    as 1, 2, ..., K; otherwise chance turns up each prize uniformly among the
    remaining ones, and a lone remaining prize is turned up without a chance
    node. Ties split the prize (s) or discard it (d); the revealed-order
    variant splits.
    """
    cfg.check()
    variant = GoofspielVariant(cfg.variant)
    K = cfg.ranks
    nodes: list[Node] = []
    split = variant != GoofspielVariant.DISCARD_TIES

    def infoset(player: int, prizes: tuple, bids: tuple, own_hand: tuple) -> str:
        rounds = ",".join(f"{p}:{b0}/{b1}" for p, (b0, b1) in zip(prizes, bids))
        return f"p{player}|{rounds}|{prizes[-1]}"

    def add(nid: str, prizes: tuple, bids: tuple, hands: tuple, score: tuple) -> None:
        remaining_prizes = [c for c in range(1, K + 1) if c not in prizes]
        if len(prizes) == len(bids):  # next prize must be turned up
            if not remaining_prizes:
                nodes.append(Node(id=nid, kind="leaf", payoffs=tuple(float(s) for s in score)))
                return
            if variant == GoofspielVariant.REVEALED_ORDER or len(remaining_prizes) == 1:
                add(nid, prizes + (remaining_prizes[0],), bids, hands, score)
                return
            children = tuple(f"{nid}c{c}" for c in remaining_prizes)
            p = 1.0 / len(remaining_prizes)
            nodes.append(Node(id=nid, kind="chance", labels=tuple(f"prize{c}" for c in remaining_prizes),
                              children=children, probs=tuple(p for _ in remaining_prizes)))
            for c, child in zip(remaining_prizes, children):
                add(child, prizes + (c,), bids, hands, score)
            return
        # player 0 bids, then player 1 without seeing it
        h0, h1 = hands
        lab0 = tuple(f"bid{c}" for c in h0)
        kids0 = tuple(f"{nid}b{c}" for c in h0)
        nodes.append(Node(id=nid, kind="decision", player=0, infoset=infoset(0, prizes, bids, h0),
                          labels=lab0, children=kids0))
        for c0, kid in zip(h0, kids0):
            lab1 = tuple(f"bid{c}" for c in h1)
            kids1 = tuple(f"{kid}b{c}" for c in h1)
            nodes.append(Node(id=kid, kind="decision", player=1, infoset=infoset(1, prizes, bids, h1),
                              labels=lab1, children=kids1))
            for c1, leafish in zip(h1, kids1):
                prize = Fraction(prizes[-1])
                s0, s1 = score
                if c0 > c1:
                    s0 += prize
                elif c1 > c0:
                    s1 += prize
                elif split:
                    s0 += prize / 2
                    s1 += prize / 2
                add(leafish, prizes, bids + ((c0, c1),),
                    (tuple(c for c in h0 if c != c0), tuple(c for c in h1 if c != c1)), (s0, s1))

    start = tuple(range(1, K + 1))
    add("g", (), (), (start, start), (Fraction(0), Fraction(0)))
    return ExtensiveFormGame(players=2, root="g", nodes=tuple(nodes), name=f"G{K}{variant.value.upper()}")


def gen_coarse_gap_game(k: float = 3.0) -> ExtensiveFormGame:
    """2x3 bimatrix game, embedded as a two-level tree with player 1 not observing
    player 0's move, whose best coarse correlated equilibrium has welfare (k+1)/2
    while every correlated equilibrium has welfare at most 1."""
    k2 = k * k
    table = [
        [(k, 0.0), (-k2, 0.0), (-k2, 1.0)],
        [(-k2, 0.0), (1.0, 0.0), (-k2, -1.0)],
    ]
    nodes = [Node(id="root", kind="decision", player=0, infoset="row", labels=("a1", "a2"),
                  children=("x1", "x2"))]
    for r, x in enumerate(("x1", "x2")):
        kids = tuple(f"{x}.b{c + 1}" for c in range(3))
        nodes.append(Node(id=x, kind="decision", player=1, infoset="col", labels=("b1", "b2", "b3"), children=kids))
        for c, kid in enumerate(kids):
            nodes.append(Node(id=kid, kind="leaf", payoffs=tuple(float(u) for u in table[r][c])))
    return ExtensiveFormGame(players=2, root="root", nodes=tuple(nodes), name=f"coarse-gap-k{k:g}")


def gen_matching_pennies() -> ExtensiveFormGame:
    """Zero-sum matching pennies as a simultaneous-move tree."""
    nodes = [Node(id="root", kind="decision", player=0, infoset="p0", labels=("H", "T"), children=("xH", "xT"))]
    for a in ("H", "T"):
        kids = (f"x{a}H", f"x{a}T")
        nodes.append(Node(id=f"x{a}", kind="decision", player=1, infoset="p1", labels=("H", "T"), children=kids))
        for b, kid in zip("HT", kids):
            u = 1.0 if a == b else -1.0
            nodes.append(Node(id=kid, kind="leaf", payoffs=(u, -u)))
    return ExtensiveFormGame(players=2, root="root", nodes=tuple(nodes), name="matching-pennies")


def gen_single_leaf(payoffs: tuple[float, ...] = (1.0, 2.0)) -> ExtensiveFormGame:
    return ExtensiveFormGame(players=len(payoffs), root="l",
                             nodes=(Node(id="l", kind="leaf", payoffs=tuple(payoffs)),), name="single-leaf")


def bimatrix_game(payoffs: np.ndarray) -> ExtensiveFormGame:
    """Embed an (m x k x 2) bimatrix game as a simultaneous-move tree."""
    m, k = payoffs.shape[:2]
    rows = tuple(f"r{a}" for a in range(m))
    cols = tuple(f"c{b}" for b in range(k))
    nodes = [Node(id="root", kind="decision", player=0, infoset="row", labels=rows,
                  children=tuple(f"x{a}" for a in range(m)))]
    for a, b in itertools.product(range(m), range(k)):
        if b == 0:
            nodes.append(Node(id=f"x{a}", kind="decision", player=1, infoset="col", labels=cols,
                              children=tuple(f"x{a}.{bb}" for bb in range(k))))
        nodes.append(Node(id=f"x{a}.{b}", kind="leaf", payoffs=tuple(float(u) for u in payoffs[a, b])))
    return ExtensiveFormGame(players=2, root="root", nodes=tuple(nodes), name="bimatrix")
