"""Ground truth by brute force over the reduced normal form.

Everything here is independent of the column-generation code path: plans
are enumerated explicitly, the CCE LP is written with one deviation row per
(player, alternative plan), and equilibrium checks use backward-induction
best responses.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .game import ExtensiveFormGame, GameError
from .seqform import (
    PurePlan,
    SequenceForm,
    best_response,
    build_sequence_form,
    plan_to_realization,
)
from .simplex import solve_lp

PLAN_CAP = 10**4
PROFILE_CAP = 10**6
DENSE_CAP = 2 * 10**7  # entries of the dense deviation matrix


def _as_sf(game: ExtensiveFormGame | SequenceForm) -> SequenceForm:
    return game if isinstance(game, SequenceForm) else build_sequence_form(game)


def enumerate_reduced_plans(game: ExtensiveFormGame | SequenceForm, i: int, cap: int = PLAN_CAP) -> list[PurePlan]:
    """All reduced pure plans of player ``i``, in lexicographic order of choices."""
    sf = _as_sf(game)
    ps = sf.seqs[i]
    out: list[PurePlan] = []
    choices = [-1] * ps.n_infosets
    reach = np.zeros(ps.n_seqs, dtype=bool)
    reach[0] = True

    def rec(h: int) -> None:
        if h == ps.n_infosets:
            out.append(PurePlan(i, tuple(choices)))
            if len(out) > cap:
                raise GameError(f"game too large for brute force: player {i} has more than {cap} reduced plans")
            return
        if not reach[ps.infoset_parent[h]]:
            choices[h] = -1
            rec(h + 1)
            return
        for a in range(ps.n_actions(h)):
            choices[h] = a
            q = ps.seq(h, a)
            reach[q] = True
            rec(h + 1)
            reach[q] = False
        choices[h] = -1

    rec(0)
    return out


def count_reduced_plans(game: ExtensiveFormGame | SequenceForm, i: int) -> int:
    """Number of reduced plans, computed without enumerating them."""
    sf = _as_sf(game)
    ps = sf.seqs[i]
    count = np.ones(ps.n_seqs, dtype=object)
    for h in reversed(range(ps.n_infosets)):
        first = int(ps.infoset_first[h])
        count[ps.infoset_parent[h]] *= sum(count[first:first + ps.n_actions(h)])
    return int(count[0])


@dataclass
class ReducedNormalForm:
    plans: list[list[PurePlan]]
    payoffs: list[np.ndarray]  # U'_i, one axis per player

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.plans)

    def welfare(self) -> np.ndarray:
        return sum(self.payoffs)


def reduced_normal_form(game: ExtensiveFormGame | SequenceForm, cap: int = PLAN_CAP) -> ReducedNormalForm:
    sf = _as_sf(game)
    n = sf.n_players
    plans = [enumerate_reduced_plans(sf, i, cap) for i in range(n)]
    if math.prod(len(p) for p in plans) > PROFILE_CAP:
        raise GameError(f"game too large for brute force: more than {PROFILE_CAP} plan profiles")
    reach = [np.stack([plan_to_realization(p, sf).r for p in plans[i]], axis=1)[sf.leaf_seqs[:, i]]
             for i in range(n)]
    letters = string.ascii_lowercase[:n]
    subscripts = "z," + ",".join(f"z{c}" for c in letters) + "->" + letters
    payoffs = [np.einsum(subscripts, sf.leaf_prob * sf.leaf_payoff[:, i], *reach) for i in range(n)]
    return ReducedNormalForm(plans=plans, payoffs=payoffs)


@dataclass
class BruteForceResult:
    objective: float
    sigma: np.ndarray  # over plan profiles, shaped like the normal form
    nf: ReducedNormalForm

    def support(self, tol: float = 1e-12) -> list[tuple[tuple[PurePlan, ...], float]]:
        out = []
        for idx in zip(*np.nonzero(self.sigma > tol)):
            out.append((tuple(self.nf.plans[i][k] for i, k in enumerate(idx)), float(self.sigma[idx])))
        return out


def brute_force_cce(game: ExtensiveFormGame | SequenceForm, cap: int = PLAN_CAP) -> BruteForceResult:
    """Welfare-maximizing coarse correlated equilibrium of the reduced normal form.

    Columns: sigma over all plan profiles, then one slack per deviation row.
    Row (i, p'): sum_p sigma(p) (U'_i(p) - U'_i(p'_i, p_-i)) - s = 0.
    """
    nf = reduced_normal_form(game, cap)
    shape = nf.shape
    N = math.prod(shape)
    if N * (sum(shape) + 1) > DENSE_CAP:
        raise GameError(f"game too large for brute force: {N} profiles x {sum(shape)} deviations")
    rows = []
    for i, U in enumerate(nf.payoffs):
        for k in range(shape[i]):
            dev = np.broadcast_to(np.take(U, [k], axis=i), shape)
            rows.append((U - dev).reshape(-1))
    n_dev = len(rows)
    A_sigma = np.vstack(rows + [np.ones(N)])
    A = sp.hstack([sp.csr_matrix(A_sigma), sp.vstack([-sp.identity(n_dev), sp.csr_matrix((1, n_dev))])])
    b = np.zeros(n_dev + 1)
    b[-1] = 1.0
    c = np.concatenate([nf.welfare().reshape(-1), np.zeros(n_dev)])
    res = solve_lp(c, A, b)
    if res.status != "optimal":
        raise RuntimeError(f"brute-force CCE LP ended {res.status}")
    sigma = res.x[:N].reshape(shape)
    return BruteForceResult(objective=res.objective, sigma=sigma, nf=nf)


@dataclass
class PlayerDeviation:
    eq_value: float
    best_deviation: float
    gain: float
    deviation_plan: dict[str, str]


@dataclass
class DeviationReport:
    players: list[PlayerDeviation]
    eps: float

    @property
    def passed(self) -> bool:
        return all(p.gain <= self.eps for p in self.players)

    @property
    def max_gain(self) -> float:
        return max(p.gain for p in self.players)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "eps": self.eps,
            "players": [{"eq_value": p.eq_value, "best_deviation": p.best_deviation, "gain": p.gain,
                         "deviation": p.deviation_plan} for p in self.players],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def check_nfcce(game: ExtensiveFormGame | SequenceForm, support, eps: float = 1e-6) -> DeviationReport:
    """Check that no player gains more than ``eps`` by an ex-ante pure deviation.

    ``support`` is a list of (plan profile, probability) pairs or any object
    with a ``support`` attribute holding one.
    """
    sf = _as_sf(game)
    support = getattr(support, "support", support)
    if not support:
        raise ValueError("empty support")
    probs = np.array([w for _, w in support], dtype=float)
    if np.any(probs < -1e-9) or abs(probs.sum() - 1.0) > 1e-7:
        raise ValueError(f"support probabilities must be nonnegative and sum to 1 (sum {probs.sum():.9g})")
    for plans, _ in support:
        if len(plans) != sf.n_players:
            raise ValueError(f"profile with {len(plans)} plans for a {sf.n_players}-player game")
        for i, p in enumerate(plans):
            if p.player != i:
                raise ValueError(f"plan for player {p.player} in slot {i}")
            plan_to_realization(p, sf)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    mixture = [(float(w), plans) for w, (plans, _) in zip(probs, support)]
    reach_all = []
    for _, plans in mixture:
        w = sf.leaf_prob.copy()
        for j, p in enumerate(plans):
            w = w * plan_to_realization(p, sf).r[sf.leaf_seqs[:, j]]
        reach_all.append(w)
    joint = np.array([w for w, _ in mixture]) @ np.array(reach_all)
    eq = joint @ sf.leaf_payoff
    out = []
    for i in range(sf.n_players):
        val, plan = best_response(sf, i, mixture)
        out.append(PlayerDeviation(eq_value=float(eq[i]), best_deviation=float(val), gain=float(val - eq[i]),
                                   deviation_plan=plan.as_labels(sf)))
    return DeviationReport(players=out, eps=eps)
