import itertools

import numpy as np
import pytest

from nfcce.colgen import ColumnGeneration
from nfcce.generators import (
    GoofspielConfig,
    GoofspielVariant,
    RandomGameConfig,
    gen_goofspiel,
    gen_matching_pennies,
    gen_random_game,
    gen_single_leaf,
)
from nfcce.master import RowLayout, build_master_skeleton
from nfcce.oracles.base import OracleQuery, SigmaObjective, UnsupportedGame, exact_sigma_reduced_cost
from nfcce.oracles.milp import InfeasibleInstance, MilpInstance, presolve, solve_milp
from nfcce.oracles.milrc import (
    MilpOracle,
    Variant,
    build_milrc,
    chance_history_keys,
    chance_is_uniform,
    purify,
)
from nfcce.oracles.plansearch import PlanSearchOracle, c_plan_search, p_lrc
from nfcce.seqform import build_sequence_form, plan_to_realization
from nfcce.verify import enumerate_reduced_plans


def random_objective(sf, rng, scale=1.0):
    return SigmaObjective(lam=rng.normal(size=sf.n_players) * scale,
                          mu=tuple(rng.normal(size=sf.n_seqs(i)) * scale for i in range(sf.n_players)),
                          const=float(rng.normal()))


def reach_of(plans, sf):
    return np.prod([plan_to_realization(p, sf).r[sf.leaf_seqs[:, j]] for j, p in enumerate(plans)], axis=0)


def exhaustive_best(obj, sf):
    plans = [enumerate_reduced_plans(sf, i) for i in range(sf.n_players)]
    return max(obj.value(p, sf) for p in itertools.product(*plans))


def encode(inst, obj, sf, plans):
    """MILP point of a two-player pure plan pair (or its convex weight)."""
    x = np.zeros(inst.n_vars)
    reals = [plan_to_realization(p, sf).r for p in plans]
    for i in range(2):
        x[inst.blocks[f"r{i}"]] = reals[i]
    x[inst.blocks["z"]] = np.prod([reals[i][sf.leaf_seqs[:, i]] for i in range(2)], axis=0)
    nz = np.flatnonzero(sf.profile_payoff @ obj.lam != 0.0)
    keys = sf.profiles[nz]
    x[inst.blocks["w"]] = reals[0][keys[:, 0]] * reals[1][keys[:, 1]]
    return x


# -- c_plan_search -------------------------------------------------------

def test_plan_search_zero_weights():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 2, 0)))
    leaf = 5
    value, plan = c_plan_search(sf, 0, leaf, np.zeros(sf.n_seqs(1)))
    assert value == 0.0
    r = plan_to_realization(plan, sf).r
    assert r[sf.leaf_seqs[leaf, 0]] == 1.0
    ps = sf.seqs[0]
    on_path = set()
    q = int(sf.leaf_seqs[leaf, 0])
    while q > 0:
        on_path.add(int(ps.seq_infoset[q]))
        q = ps.seq_parent(q)
    assert all(a in (0, -1) for h, a in enumerate(plan.choices) if h not in on_path)


def test_plan_search_single_leaf():
    sf = build_sequence_form(gen_single_leaf((2.0, 5.0)))
    value, plan = c_plan_search(sf, 0, 0, np.array([3.0]))
    assert value == 15.0 and plan.choices == ()


@pytest.mark.parametrize("game", [gen_matching_pennies()] + [gen_random_game(RandomGameConfig(3, 3, s)) for s in range(3)])
def test_plan_search_matches_enumeration(game):
    sf = build_sequence_form(game)
    rng = np.random.default_rng(1)
    for i in range(2):
        w = rng.normal(size=sf.n_seqs(1 - i))
        plans = enumerate_reduced_plans(sf, i)
        lw = w[sf.leaf_seqs[:, 1 - i]] * sf.leaf_payoff[:, 1 - i]
        for leaf in range(0, sf.n_leaves, 3):
            q = sf.leaf_seqs[leaf, i]
            vals = [float(lw @ plan_to_realization(p, sf).r[sf.leaf_seqs[:, i]])
                    for p in plans if plan_to_realization(p, sf).r[q] == 1.0]
            value, plan = c_plan_search(sf, i, leaf, w)
            assert value == pytest.approx(min(vals), abs=1e-12)
            assert plan_to_realization(plan, sf).r[q] == 1.0


# -- P-LRC ---------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_plrc_matches_enumeration(seed):
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 2, seed)))
    rng = np.random.default_rng(seed)
    oracle = PlanSearchOracle(sf)
    for _ in range(5):
        obj = random_objective(sf, rng)
        cand = oracle.best_sigma(obj)
        assert cand.value == pytest.approx(exhaustive_best(obj, sf), abs=1e-9)
        assert cand.value == pytest.approx(obj.value(cand.plans, sf), abs=1e-9)
        assert reach_of(cand.plans, sf)[cand.leaf] == 1.0


def test_plrc_ties_go_to_lowest_leaf():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(3, 2, 0)))
    obj = SigmaObjective(lam=np.zeros(2), mu=(np.zeros(sf.n_seqs(0)), np.zeros(sf.n_seqs(1))))
    assert PlanSearchOracle(sf).best_sigma(obj).leaf == 0


def test_plrc_rejects_chance_and_three_players():
    with pytest.raises(UnsupportedGame):
        PlanSearchOracle(build_sequence_form(gen_goofspiel(GoofspielConfig(3, GoofspielVariant.DISCARD_TIES))))
    with pytest.raises(UnsupportedGame):
        PlanSearchOracle(build_sequence_form(gen_random_game(RandomGameConfig(3, 2, 0, players=3))))


def test_reported_reduced_cost_reprices_exactly():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 3, 2)))
    master = build_master_skeleton(sf)
    rng = np.random.default_rng(0)
    for _ in range(10):
        q = OracleQuery.from_duals(master.layout, rng.normal(size=master.m))
        col = p_lrc(q, master)
        if col.kind == "sigma":
            assert col.reduced_cost == pytest.approx(exact_sigma_reduced_cost(master, q, col.plans), abs=1e-9)
            assert col.search_value == pytest.approx(col.reduced_cost, abs=1e-9)
        else:
            assert col.reduced_cost == pytest.approx(-(q.duals @ master.static[:, col.index]), abs=1e-12)


def test_certificate_at_optimum(coarse_gap_sf):
    queries = []
    ColumnGeneration(coarse_gap_sf, PlanSearchOracle(coarse_gap_sf), on_query=lambda q, c: queries.append(c)).solve()
    assert queries[-1].reduced_cost <= 1e-6


# -- MILP build ------------------------------------------------------------

def test_single_leaf_milp_is_forced():
    sf = build_sequence_form(gen_single_leaf((1.0, 2.0)))
    obj = random_objective(sf, np.random.default_rng(0))
    res = solve_milp(build_milrc(obj, sf))
    assert res.objective == pytest.approx(obj.value(tuple(enumerate_reduced_plans(sf, i)[0] for i in range(2)), sf))


def test_zero_duals_give_best_welfare_leaf(coarse_gap_sf):
    obj = SigmaObjective(lam=np.ones(2), mu=(np.zeros(coarse_gap_sf.n_seqs(0)), np.zeros(coarse_gap_sf.n_seqs(1))))
    assert solve_milp(build_milrc(obj, coarse_gap_sf)).objective == pytest.approx(3.0)
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 3, 0)))
    obj = SigmaObjective(lam=np.ones(2), mu=(np.zeros(sf.n_seqs(0)), np.zeros(sf.n_seqs(1))))
    assert solve_milp(build_milrc(obj, sf)).objective == pytest.approx(sf.leaf_payoff.sum(axis=1).max())


@pytest.mark.parametrize("seed", range(4))
def test_milp_matches_enumeration(seed):
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 2, seed)))
    rng = np.random.default_rng(10 + seed)
    for _ in range(3):
        obj = random_objective(sf, rng)
        inst = build_milrc(obj, sf)
        res = solve_milp(inst)
        assert res.objective == pytest.approx(exhaustive_best(obj, sf), abs=1e-7)
        assert inst.is_feasible(res.x)
        assert inst.objective(res.x) == pytest.approx(res.objective, abs=1e-9)


def test_g3d_structure():
    sf = build_sequence_form(gen_goofspiel(GoofspielConfig(3, GoofspielVariant.DISCARD_TIES)))
    obj = random_objective(sf, np.random.default_rng(0))
    inst = build_milrc(obj, sf)
    assert inst.variant == Variant.TWO_PLAYER_CHANCE.value
    assert inst.blocks["z"].stop - inst.blocks["z"].start == sf.n_leaves
    assert all(inst.blocks[f"r{i}"].stop - inst.blocks[f"r{i}"].start == 334 for i in range(2))
    assert chance_is_uniform(sf)
    histories = np.unique(chance_history_keys(sf))
    assert len(histories) == 6  # 3 first prizes x 2 second prizes
    z = inst.blocks["z"]
    A = inst.A_eq.toarray()
    chance_rows = [k for k in range(A.shape[0]) if np.all(A[k, z.start:z.stop] >= 0)
                   and A[k, z.start:z.stop].sum() > 1 and not A[k, :z.start].any() and not A[k, z.stop:].any()]
    assert len(chance_rows) == 6


def test_three_player_build():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(2, 2, 0, players=3)))
    inst = build_milrc(random_objective(sf, np.random.default_rng(0)), sf)
    L = sf.n_leaves
    vectors = [name for name in ("z", "z0", "z1", "z2") if inst.blocks[name].stop - inst.blocks[name].start == L]
    assert len(vectors) == 4
    assert all(inst.binary[inst.blocks[name]].all() for name in vectors)


@pytest.mark.parametrize("seed", range(3))
def test_three_player_milp_matches_enumeration(seed):
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 2, seed, players=3)))
    rng = np.random.default_rng(seed)
    obj = random_objective(sf, rng)
    cand = MilpOracle(sf).best_sigma(obj)
    assert cand.value == pytest.approx(exhaustive_best(obj, sf), abs=1e-7)


def test_build_arity_errors(coarse_gap_sf):
    obj3 = SigmaObjective(lam=np.zeros(3), mu=(np.zeros(1),) * 3)
    with pytest.raises(ValueError):
        build_milrc(obj3, coarse_gap_sf)
    g3d = build_sequence_form(gen_goofspiel(GoofspielConfig(3, GoofspielVariant.DISCARD_TIES)))
    obj = SigmaObjective(lam=np.zeros(2), mu=(np.zeros(334), np.zeros(334)))
    with pytest.raises(ValueError):
        build_milrc(obj, g3d, Variant.TWO_PLAYER)


# -- branch and bound ------------------------------------------------------

def knapsack(values, weights, cap):
    import scipy.sparse as sp
    n = len(values)
    return MilpInstance(c=np.array(values, float), A_eq=sp.csr_matrix((0, n)), b_eq=np.zeros(0),
                        A_ub=sp.csr_matrix(np.vstack([weights, np.eye(n)])), b_ub=np.concatenate([[cap], np.ones(n)]),
                        binary=np.ones(n, dtype=bool))


def test_branch_and_bound_knapsack():
    values, weights = [10, 13, 7, 8, 4], [5, 7, 4, 5, 3]
    best = max(sum(v for v, s in zip(values, pick) if s) for pick in itertools.product([0, 1], repeat=5)
               if sum(w for w, s in zip(weights, pick) if s) <= 12)
    res = solve_milp(knapsack(values, weights, 12))
    assert res.objective == pytest.approx(best)
    assert set(np.round(res.x, 9)) <= {0.0, 1.0}


def test_branch_and_bound_infeasible_root():
    import scipy.sparse as sp
    inst = MilpInstance(c=np.ones(2), A_eq=sp.csr_matrix([[1.0, 1.0]]), b_eq=np.array([-1.0]),
                        A_ub=sp.csr_matrix((0, 2)), b_ub=np.zeros(0), binary=np.ones(2, dtype=bool))
    with pytest.raises(InfeasibleInstance):
        solve_milp(inst)


def test_presolve_merges_aliases():
    import scipy.sparse as sp
    A_eq = sp.csr_matrix([[1.0, -1.0, 0.0], [1.0, 0.0, 1.0], [1.0, 0.0, 1.0]])
    inst = MilpInstance(c=np.array([1.0, 2.0, 0.0]), A_eq=A_eq, b_eq=np.array([0.0, 1.0, 1.0]),
                        A_ub=sp.csr_matrix((0, 3)), b_ub=np.zeros(0), binary=np.array([False, True, False]))
    red = presolve(inst)
    assert len(red.c) == 2 and red.A_eq.shape[0] == 1
    assert red.binary.tolist() == [True, False] and red.c.tolist() == [3.0, 0.0]
    assert solve_milp(inst).objective == pytest.approx(3.0)


# -- purification -----------------------------------------------------------

def test_purify_pure_point_is_identity():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(3, 3, 1)))
    rng = np.random.default_rng(0)
    obj = random_objective(sf, rng)
    inst = build_milrc(obj, sf)
    plans = tuple(enumerate_reduced_plans(sf, i)[3] for i in range(2))
    x = encode(inst, obj, sf, plans)
    assert inst.is_feasible(x)
    assert inst.objective(x) == pytest.approx(obj.value(plans, sf), abs=1e-12)
    assert purify(inst, x, obj, sf) == plans


@pytest.mark.parametrize("seed", range(5))
def test_purify_never_loses_objective(seed):
    sf = build_sequence_form(gen_random_game(RandomGameConfig(3, 3, seed)))
    rng = np.random.default_rng(seed)
    plans = [enumerate_reduced_plans(sf, i) for i in range(2)]
    for _ in range(5):
        obj = random_objective(sf, rng)
        inst = build_milrc(obj, sf)
        # convex combination of pure points sharing a leaf keeps z integral
        leaf = int(rng.integers(sf.n_leaves))
        pairs = [p for p in itertools.product(*plans) if reach_of(p, sf)[leaf] == 1.0]
        pick = rng.choice(len(pairs), size=min(3, len(pairs)), replace=False)
        lam = rng.dirichlet(np.ones(len(pick)))
        x = sum(l * encode(inst, obj, sf, pairs[k]) for l, k in zip(lam, pick))
        pure = purify(inst, x, obj, sf)
        assert obj.value(pure, sf) >= inst.objective(x) - 1e-7


def test_purify_at_milp_optimum_is_exact():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 2, 3)))
    obj = random_objective(sf, np.random.default_rng(5))
    inst = build_milrc(obj, sf)
    res = solve_milp(inst)
    assert obj.value(purify(inst, res.x, obj, sf), sf) == pytest.approx(res.objective, abs=1e-7)


# -- MI-LRC end to end --------------------------------------------------------

def test_milrc_agrees_with_plrc_on_every_call():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(3, 3, 0)))
    milp, gaps = MilpOracle(sf), []

    def replay(query, col):
        gaps.append(abs(milp.price(query, master).reduced_cost - col.reduced_cost))

    cg = ColumnGeneration(sf, PlanSearchOracle(sf), on_query=replay)
    master = cg.master
    cg.solve()
    assert gaps and max(gaps) <= 1e-6


def test_g3d_purified_plans_follow_chance_selection():
    sf = build_sequence_form(gen_goofspiel(GoofspielConfig(3, GoofspielVariant.DISCARD_TIES)))
    layout = RowLayout.of(sf)
    rng = np.random.default_rng(2)
    obj = SigmaObjective.reduced_cost(OracleQuery.from_duals(layout, rng.normal(size=layout.m) * 0.1))
    inst = build_milrc(obj, sf)
    res = solve_milp(inst)
    plans = purify(inst, res.x, obj, sf)
    reached = np.flatnonzero(reach_of(plans, sf) > 0.5)
    selected = np.flatnonzero(inst.block(res.x, "z") > 0.5)
    np.testing.assert_array_equal(reached, selected)
    assert obj.value(plans, sf) == pytest.approx(res.objective, abs=1e-7)
