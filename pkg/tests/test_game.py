import dataclasses
import json

import pytest

from nfcce.game import ExtensiveFormGame, GameError, Node, load_game, require_valid, save_game, validate_game
from nfcce.generators import GoofspielConfig, GoofspielVariant, gen_goofspiel, gen_matching_pennies, gen_single_leaf


def codes(game):
    return [v.split(":")[0] for v in validate_game(game).violations]


def replace_node(game, nid, **kw):
    return dataclasses.replace(game, nodes=tuple(dataclasses.replace(n, **kw) if n.id == nid else n
                                                 for n in game.nodes))


def test_single_leaf_is_valid():
    assert validate_game(gen_single_leaf()).ok


def test_goofspiel_split_ties_is_valid():
    assert validate_game(gen_goofspiel(GoofspielConfig(3, GoofspielVariant.SPLIT_TIES))).ok


def test_infoset_action_mismatch():
    g = gen_matching_pennies()
    g = replace_node(g, "xT", labels=("H",), children=("xTH",))
    g = dataclasses.replace(g, nodes=tuple(n for n in g.nodes if n.id != "xTT"))
    assert "infoset action mismatch" in codes(g)


def test_imperfect_recall():
    # player 0 moves twice and forgets the first move
    nodes = [
        Node("r", "decision", 0, "a", ("L", "R"), ("x", "y")),
        Node("x", "decision", 0, "b", ("l", "r"), ("x1", "x2")),
        Node("y", "decision", 0, "b", ("l", "r"), ("y1", "y2")),
    ] + [Node(k, "leaf", payoffs=(0.0, 0.0)) for k in ("x1", "x2", "y1", "y2")]
    assert "imperfect recall" in codes(ExtensiveFormGame(2, "r", tuple(nodes)))


@pytest.mark.parametrize("mutate, code", [
    (lambda g: dataclasses.replace(g, root="nope"), "unknown root"),
    (lambda g: replace_node(g, "xH", children=("xHH", "missing")), "dangling child"),
    (lambda g: replace_node(g, "xHH", payoffs=(1.0,)), "bad leaf"),
    (lambda g: replace_node(g, "root", player=5), "bad decision node"),
    (lambda g: dataclasses.replace(g, nodes=g.nodes + (g.nodes[-1],)), "duplicate id"),
    (lambda g: dataclasses.replace(g, nodes=g.nodes + (Node("orphan", "leaf", payoffs=(0.0, 0.0)),)),
     "unreachable node"),
    (lambda g: replace_node(g, "xT", children=("xHH", "xTT")), "multiple parents"),
])
def test_structural_violations(mutate, code):
    assert code in codes(mutate(gen_matching_pennies()))


def test_bad_chance_probabilities():
    nodes = (Node("c", "chance", labels=("a", "b"), children=("l1", "l2"), probs=(0.5, 0.6)),
             Node("l1", "leaf", payoffs=(0.0, 0.0)), Node("l2", "leaf", payoffs=(0.0, 0.0)))
    assert "bad chance node" in codes(ExtensiveFormGame(2, "c", nodes))


def test_require_valid_raises():
    with pytest.raises(GameError):
        require_valid(dataclasses.replace(gen_matching_pennies(), root="nope"))


def test_json_round_trip(tmp_path):
    g = gen_goofspiel(GoofspielConfig(3, GoofspielVariant.DISCARD_TIES))
    path = tmp_path / "g.json"
    save_game(g, path)
    back = load_game(path)
    assert back == g
    d = json.loads(path.read_text())
    assert set(d) == {"players", "root", "nodes", "name"}
    assert {n["kind"] for n in d["nodes"]} == {"decision", "chance", "leaf"}
