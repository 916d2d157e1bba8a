"""Extensive-form game model, JSON round-tripping and structural validation.

Players are numbered ``0 .. players-1``; chance is not a player and acts at
``kind == "chance"`` nodes. Every decision node belongs to an information set
whose id is a string unique per player.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Literal

NodeKind = Literal["decision", "chance", "leaf"]

PROB_TOL = 1e-12


class GameError(ValueError):
    """Raised when a game is structurally invalid for the requested operation."""


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    player: int | None = None
    infoset: str | None = None
    labels: tuple[str, ...] = ()
    children: tuple[str, ...] = ()
    probs: tuple[float, ...] = ()
    payoffs: tuple[float, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.kind == "leaf"

    def to_json(self) -> dict:
        out: dict = {"id": self.id, "kind": self.kind}
        if self.kind == "decision":
            out["player"] = self.player
            out["infoset"] = self.infoset
        if self.kind != "leaf":
            out["actions"] = [{"label": a, "child": c} for a, c in zip(self.labels, self.children)]
        if self.kind == "chance":
            out["probs"] = list(self.probs)
        if self.kind == "leaf":
            out["payoffs"] = list(self.payoffs)
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Node":
        kind = d["kind"]
        if kind not in ("decision", "chance", "leaf"):
            raise GameError(f"node {d.get('id')!r}: unknown kind {kind!r}")
        actions = d.get("actions") or []
        player = d.get("player")
        return cls(
            id=str(d["id"]),
            kind=kind,
            player=int(player) if player is not None else None,
            infoset=str(d["infoset"]) if d.get("infoset") is not None else None,
            labels=tuple(str(a["label"]) for a in actions),
            children=tuple(str(a["child"]) for a in actions),
            probs=tuple(float(p) for p in d.get("probs") or ()),
            payoffs=tuple(float(u) for u in d.get("payoffs") or ()),
        )


@dataclass(frozen=True)
class ExtensiveFormGame:
    """Immutable game tree. ``nodes`` keeps the order in which nodes were declared."""

    players: int
    root: str
    nodes: tuple[Node, ...]
    name: str = ""

    @cached_property
    def by_id(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    def node(self, node_id: str) -> Node:
        return self.by_id[node_id]

    @property
    def has_chance(self) -> bool:
        return any(n.kind == "chance" for n in self.nodes)

    def preorder(self) -> Iterator[Node]:
        """Depth-first preorder from the root, children in declared action order."""
        stack = [self.root]
        while stack:
            node = self.by_id[stack.pop()]
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[Node]:
        return [n for n in self.preorder() if n.is_leaf]

    def to_json(self) -> dict:
        out = {"players": self.players, "root": self.root, "nodes": [n.to_json() for n in self.nodes]}
        if self.name:
            out["name"] = self.name
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, d: dict) -> "ExtensiveFormGame":
        return cls(
            players=int(d["players"]),
            root=str(d["root"]),
            nodes=tuple(Node.from_json(n) for n in d["nodes"]),
            name=str(d.get("name", "")),
        )


def load_game(path: str | Path) -> ExtensiveFormGame:
    with open(path) as fh:
        return ExtensiveFormGame.from_json(json.load(fh))


def save_game(game: ExtensiveFormGame, path: str | Path) -> None:
    Path(path).write_text(game.dumps() + "\n")


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, detail: str) -> None:
        self.violations.append(f"{code}: {detail}")

    def __bool__(self) -> bool:
        return self.ok


def validate_game(game: ExtensiveFormGame) -> ValidationReport:
    """Check every structural invariant; never raises.

    Violation codes: ``bad players``, ``duplicate id``, ``unknown root``,
    ``dangling child``, ``multiple parents``, ``unreachable node``, ``cycle``,
    ``bad decision node``, ``bad chance node``, ``bad leaf``,
    ``infoset action mismatch``, ``imperfect recall``.
    """
    rep = ValidationReport()
    if game.players < 1:
        rep.add("bad players", f"players={game.players}")
        return rep
    seen: dict[str, Node] = {}
    for n in game.nodes:
        if n.id in seen:
            rep.add("duplicate id", n.id)
        seen[n.id] = n
    if game.root not in seen:
        rep.add("unknown root", game.root)
        return rep

    parent: dict[str, str] = {}
    for n in game.nodes:
        if n.kind == "decision":
            if n.player is None or not 0 <= n.player < game.players:
                rep.add("bad decision node", f"{n.id}: player {n.player}")
            if n.infoset is None:
                rep.add("bad decision node", f"{n.id}: missing infoset")
            if not n.children:
                rep.add("bad decision node", f"{n.id}: no actions")
            if len(set(n.labels)) != len(n.labels):
                rep.add("bad decision node", f"{n.id}: duplicate action labels")
        elif n.kind == "chance":
            if not n.children or len(n.probs) != len(n.children):
                rep.add("bad chance node", f"{n.id}: probs/actions length mismatch")
            elif any(p < 0 or not math.isfinite(p) for p in n.probs) or abs(sum(n.probs) - 1.0) > PROB_TOL:
                rep.add("bad chance node", f"{n.id}: probabilities {n.probs}")
        else:
            if n.children:
                rep.add("bad leaf", f"{n.id}: leaf with actions")
            if len(n.payoffs) != game.players or not all(math.isfinite(u) for u in n.payoffs):
                rep.add("bad leaf", f"{n.id}: payoffs {n.payoffs}")
        for c in n.children:
            if c not in seen:
                rep.add("dangling child", f"{n.id} -> {c}")
            elif c in parent:
                rep.add("multiple parents", c)
            else:
                parent[c] = n.id
    if game.root in parent:
        rep.add("cycle", f"root {game.root} has a parent")
    if not rep.ok:
        return rep

    # reachability and acyclicity (each node has at most one parent, so a walk suffices)
    visited: set[str] = set()
    stack = [game.root]
    while stack:
        nid = stack.pop()
        if nid in visited:
            rep.add("cycle", nid)
            return rep
        visited.add(nid)
        stack.extend(seen[nid].children)
    for n in game.nodes:
        if n.id not in visited:
            rep.add("unreachable node", n.id)
    if not rep.ok:
        return rep

    # information sets: same player, same labels, same own history
    first: dict[tuple[int, str], Node] = {}
    history_of: dict[tuple[int, str], tuple] = {}
    walk: list[tuple[str, tuple[tuple, ...]]] = [(game.root, tuple(() for _ in range(game.players)))]
    while walk:
        nid, hist = walk.pop()
        n = seen[nid]
        if n.kind == "decision":
            key = (n.player, n.infoset)
            ref = first.setdefault(key, n)
            if ref.labels != n.labels:
                rep.add("infoset action mismatch", f"player {n.player} infoset {n.infoset!r}: {ref.id} vs {n.id}")
            own = hist[n.player]
            prev = history_of.setdefault(key, own)
            if prev != own:
                rep.add("imperfect recall", f"player {n.player} infoset {n.infoset!r} at {n.id}")
            for a, c in zip(n.labels, n.children):
                nh = list(hist)
                nh[n.player] = own + ((n.infoset, a),)
                walk.append((c, tuple(nh)))
        else:
            for c in n.children:
                walk.append((c, hist))
    return rep


def require_valid(game: ExtensiveFormGame) -> None:
    rep = validate_game(game)
    if not rep.ok:
        raise GameError("invalid game: " + "; ".join(rep.violations[:5]))
