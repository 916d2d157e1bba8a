import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from nfcce.game import GameError
from nfcce.generators import (
    GoofspielConfig,
    GoofspielVariant,
    RandomGameConfig,
    bimatrix_game,
    gen_goofspiel,
    gen_matching_pennies,
    gen_random_game,
    gen_single_leaf,
)
from nfcce.seqform import build_sequence_form, plan_from_choices, realization_expected_utility, plan_to_realization
from nfcce.verify import (
    brute_force_cce,
    check_nfcce,
    count_reduced_plans,
    enumerate_reduced_plans,
    reduced_normal_form,
)


def test_plan_counts(coarse_gap_game):
    mp = gen_matching_pennies()
    assert [len(enumerate_reduced_plans(mp, i)) for i in range(2)] == [2, 2]
    assert [len(enumerate_reduced_plans(coarse_gap_game, i)) for i in range(2)] == [2, 3]
    g3r = gen_goofspiel(GoofspielConfig(3, GoofspielVariant.REVEALED_ORDER))
    assert [len(enumerate_reduced_plans(g3r, i)) for i in range(2)] == [24, 24]
    assert [count_reduced_plans(g3r, i) for i in range(2)] == [24, 24]


def test_plans_are_distinct_and_valid():
    sf = build_sequence_form(gen_random_game(RandomGameConfig(4, 2, 3)))
    for i in range(2):
        plans = enumerate_reduced_plans(sf, i)
        reals = {tuple(plan_to_realization(p, sf).r) for p in plans}
        assert len(reals) == len(plans) == count_reduced_plans(sf, i)


def test_plan_cap_error():
    g3s = gen_goofspiel(GoofspielConfig(3, GoofspielVariant.SPLIT_TIES))
    with pytest.raises(GameError, match="game too large for brute force"):
        enumerate_reduced_plans(g3s, 0, cap=100)
    with pytest.raises(GameError, match="game too large for brute force"):
        brute_force_cce(g3s)


def test_brute_force_coarse_gap(coarse_gap_game):
    res = brute_force_cce(coarse_gap_game)
    assert res.objective == pytest.approx(2.0, abs=1e-9)
    assert check_nfcce(coarse_gap_game, res.support(), 1e-6).passed
    # the half/half distribution on (a1,b1),(a2,b2) is one optimum
    sf = build_sequence_form(coarse_gap_game)
    half = [((plan_from_choices(sf, 0, {"row": "a1"}), plan_from_choices(sf, 1, {"col": "b1"})), 0.5),
            ((plan_from_choices(sf, 0, {"row": "a2"}), plan_from_choices(sf, 1, {"col": "b2"})), 0.5)]
    rep = check_nfcce(sf, half, 1e-9)
    assert rep.passed and sum(p.eq_value for p in rep.players) == pytest.approx(2.0)


def test_brute_force_single_leaf():
    res = brute_force_cce(gen_single_leaf((1.5, -0.5)))
    assert res.objective == pytest.approx(1.0)
    assert res.sigma.shape == (1, 1) and res.sigma[0, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(3))
def test_brute_force_zero_sum(seed):
    u = np.random.default_rng(seed).uniform(-1, 1, size=(3, 3))
    assert brute_force_cce(bimatrix_game(np.stack([u, -u], axis=-1))).objective == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("cfg", [RandomGameConfig(3, 2, 0), RandomGameConfig(3, 3, 1), RandomGameConfig(4, 2, 2)])
def test_brute_force_matches_highs(cfg):
    game = gen_random_game(cfg)
    res = brute_force_cce(game)
    nf = res.nf
    shape = nf.shape
    rows = []
    for i, U in enumerate(nf.payoffs):
        for k in range(shape[i]):
            rows.append(-(U - np.broadcast_to(np.take(U, [k], axis=i), shape)).reshape(-1))
    ref = linprog(-nf.welfare().reshape(-1), A_ub=np.array(rows), b_ub=np.zeros(len(rows)),
                  A_eq=np.ones((1, res.sigma.size)), b_eq=[1.0], bounds=(0, None), method="highs")
    assert res.objective == pytest.approx(-ref.fun, abs=1e-7)
    assert check_nfcce(game, res.support(), 1e-6).passed


def test_normal_form_matches_expected_utility():
    sf = build_sequence_form(gen_goofspiel(GoofspielConfig(3, GoofspielVariant.REVEALED_ORDER)))
    nf = reduced_normal_form(sf)
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = rng.integers(24, size=2)
        reals = [plan_to_realization(nf.plans[0][a], sf), plan_to_realization(nf.plans[1][b], sf)]
        want = [realization_expected_utility(reals, sf, i) for i in range(2)]
        np.testing.assert_allclose([nf.payoffs[i][a, b] for i in range(2)], want, atol=1e-12)


def test_point_mass_fails(coarse_gap_sf):
    sf = coarse_gap_sf
    mass = [((plan_from_choices(sf, 0, {"row": "a1"}), plan_from_choices(sf, 1, {"col": "b1"})), 1.0)]
    rep = check_nfcce(sf, mass, 1e-6)
    assert not rep.passed
    assert rep.players[1].gain == pytest.approx(1.0)
    assert rep.players[1].deviation_plan == {"col": "b3"}
    assert rep.players[0].gain <= 1e-12
    assert rep.to_json()["passed"] is False


def test_uniform_on_zero_payoff_game_passes():
    sf = build_sequence_form(bimatrix_game(np.zeros((2, 3, 2))))
    plans = [enumerate_reduced_plans(sf, i) for i in range(2)]
    pairs = list(itertools.product(*plans))
    rep = check_nfcce(sf, [(p, 1.0 / len(pairs)) for p in pairs], 0.0)
    assert rep.passed and rep.max_gain == 0.0


def test_malformed_support(coarse_gap_sf):
    sf = coarse_gap_sf
    p = (plan_from_choices(sf, 0, {"row": "a1"}), plan_from_choices(sf, 1, {"col": "b1"}))
    with pytest.raises(ValueError):
        check_nfcce(sf, [], 1e-6)
    with pytest.raises(ValueError):
        check_nfcce(sf, [(p, 0.7)], 1e-6)
    with pytest.raises(ValueError):
        check_nfcce(sf, [(p, 1.2), (p, -0.2)], 1e-6)
    with pytest.raises(ValueError):
        check_nfcce(sf, [(p[::-1], 1.0)], 1e-6)
    with pytest.raises(ValueError):
        check_nfcce(sf, [(p[:1], 1.0)], 1e-6)
