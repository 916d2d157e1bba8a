import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from nfcce.simplex import (
    BasisState,
    Unbounded,
    artificial_id,
    artificial_row,
    compute_duals,
    pivot,
    ratio_test,
    refactor,
    solve_lp,
)


def random_feasible_lp(rng, m, n, degenerate=False):
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    x0 = rng.uniform(0, 1, n)
    if degenerate:
        x0[rng.random(n) < 0.6] = 0.0
    b = A @ x0
    # bounded: sum(x) + slack = sum(x0) + 1 keeps x0 feasible
    A = np.vstack([np.hstack([A, np.zeros((m, 1))]), np.ones(n + 1)])
    b = np.append(b, x0.sum() + 1.0)
    c = rng.normal(size=n + 1)
    return c, A, b


@pytest.mark.parametrize("seed", range(40))
def test_matches_highs_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(2, 12)), int(rng.integers(3, 25))
    c, A, b = random_feasible_lp(rng, m, n, degenerate=seed % 2 == 0)
    ref = linprog(-c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    res = solve_lp(c, sp.csr_matrix(A), b)
    assert res.status == "optimal" and ref.status == 0
    assert res.objective == pytest.approx(-ref.fun, abs=1e-7)
    assert np.abs(A @ res.x - b).max() < 1e-7 and res.x.min() > -1e-9
    # strong duality with the returned duals
    assert res.duals @ b == pytest.approx(res.objective, abs=1e-6)
    assert np.all(c - A.T @ res.duals <= 1e-7)


def test_redundant_rows():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    b = np.array([1.0, 2.0, 1.0])
    res = solve_lp(np.array([1.0, 2.0, 0.5]), A, b)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(2.0)


def test_negative_rhs_is_handled():
    A = np.array([[-1.0, -1.0]])
    res = solve_lp(np.array([1.0, 3.0]), A, np.array([-2.0]))
    assert res.objective == pytest.approx(6.0)
    assert res.duals[0] == pytest.approx(-3.0)


def test_infeasible():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert solve_lp(np.ones(2), A, np.array([1.0, 2.0])).status == "infeasible"


def test_unbounded():
    A = np.array([[1.0, -1.0]])
    with pytest.raises(Unbounded):
        solve_lp(np.array([0.0, 1.0]), A, np.array([1.0]))


def test_klee_minty_cube():
    n = 6
    # max sum 2^(n-j) x_j, s.t. 2 sum_{k<j} 2^(j-k) x_k + x_j <= 5^j
    A = np.zeros((n, 2 * n))
    for j in range(n):
        for k in range(j):
            A[j, k] = 2 ** (j - k + 1)
        A[j, j] = 1.0
        A[j, n + j] = 1.0
    b = np.array([5.0 ** (j + 1) for j in range(n)])
    c = np.concatenate([[2.0 ** (n - 1 - j) for j in range(n)], np.zeros(n)])
    assert solve_lp(c, A, b).objective == pytest.approx(5.0 ** n)


def test_artificial_ids():
    assert artificial_id(0) == -1 and artificial_row(artificial_id(7)) == 7


def test_pivot_updates_inverse():
    B = np.eye(3)
    basis = BasisState.slack_start(np.ones(3), [0, 1, 2], np.ones(3), np.zeros(3))
    a = np.array([0.5, 2.0, 0.25])
    p = ratio_test(basis, a)
    assert p == 1  # min ratio 1/2
    pivot(basis, p, 3, 1.0, a)
    B[:, p] = a
    np.testing.assert_allclose(basis.binv, np.linalg.inv(B), atol=1e-12)
    np.testing.assert_allclose(basis.x, np.linalg.solve(B, np.ones(3)), atol=1e-12)
    np.testing.assert_allclose(compute_duals(basis), basis.costs @ np.linalg.inv(B))
    refactor(basis, B, np.ones(3))
    np.testing.assert_allclose(basis.binv, np.linalg.inv(B), atol=1e-12)


def test_ratio_test_prefers_sturdy_pivot():
    basis = BasisState.slack_start(np.array([0.0, 0.0]), [0, 1], np.ones(2), np.zeros(2))
    # both rows tie at ratio 0; the tiny pivot on row 0 is skipped
    assert ratio_test(basis, np.array([1e-6, 1.0])) == 1
    # Bland mode takes the lowest column id among exact ties
    assert ratio_test(basis, np.array([1e-6, 1.0]), bland=True) == 0
