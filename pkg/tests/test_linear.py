import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grounded, random_system
from datalogo.engine import naive_eval
from datalogo.ground import system_from_polys
from datalogo.linear import (
    LinearError,
    SemiringMatrix,
    linear_eligible,
    linear_lfp,
    matrix_power_sum,
    matrix_stability_index,
    to_matrix_form,
    unit_cycle,
)
from datalogo.oracle import brute_fixpoint
from datalogo.pops import BOOL, INF, NAT, REAL_BOT, TROPPLUS, TropPPops


def test_sssp_matrix_form():
    ls = to_matrix_form(grounded("sssp.dl", "fig1"))
    assert ls.A.rows == [
        [INF, 2, INF, INF],
        [1, INF, INF, INF],
        [5, 3, INF, INF],
        [INF, INF, 4, INF],
    ]
    assert ls.B == [0, INF, INF, INF]


def test_matrix_form_rejections():
    with pytest.raises(LinearError):
        to_matrix_form(grounded("tc_quadratic.dl", "fig2"))
    with pytest.raises(LinearError, match="absorbing"):
        to_matrix_form(system_from_polys(REAL_BOT, [[(1, [0])]]))


def test_power_sum_small():
    A = SemiringMatrix(TROPPLUS, [[INF, 1], [2, INF]])
    assert matrix_power_sum(A, 0) == SemiringMatrix.identity(TROPPLUS, 2)
    assert matrix_power_sum(A, 1).rows == [[0, 1], [2, 0]]
    assert matrix_stability_index(A, 10) == 1
    with pytest.raises(ValueError):
        matrix_power_sum(A, -1)


def test_nat_cycle_never_stabilises():
    assert matrix_stability_index(unit_cycle(NAT, 2), 30) is None


def test_unit_cycle_index_is_p_plus_one_times_n_minus_one():
    # the tight index on the unit N-cycle, which the acceptance suite
    # compares with the published pN + p - 1
    for n in range(2, 7):
        for p in range(4):
            P = TropPPops(p)
            assert matrix_stability_index(unit_cycle(P, n), 60) == (p + 1) * n - 1


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 5), st.integers(0, 3))
def test_random_matrices_within_corrected_bound(rng, n, p):
    P = TropPPops(p)
    A = SemiringMatrix(P, [[P.sample(rng) if rng.random() < 0.5 else P.zero for _ in range(n)] for _ in range(n)])
    q = matrix_stability_index(A, (p + 1) * n + 2)
    assert q is not None and q <= max((p + 1) * n - 1, 0)


def test_linear_lfp_sssp_and_ops():
    s = grounded("sssp.dl", "fig1")
    sol = linear_lfp(s)
    assert sol.assignment == (0, 1, 4, 8) and sol.engine == "linear"
    assert sol.ops > 0


def test_linear_lfp_two_shortest():
    s = grounded("sssp_p1.dl", "fig1")
    assert linear_lfp(s).assignment == naive_eval(s).assignment


def test_linear_eligibility_reasons():
    assert "not linear" in linear_eligible(grounded("tc_quadratic.dl", "fig2"))
    assert "several" in linear_eligible(grounded("company.dl", "company"))
    fin = system_from_polys([TROPPLUS], [[(0, [])]])
    assert linear_eligible(fin) is None
    assert linear_eligible(system_from_polys(NAT, [[(1, [0])]])) is not None
    with pytest.raises(LinearError):
        linear_lfp(grounded("winmove.dl", "wm"))


def test_small_p_is_caught_by_fixpoint_check():
    P = TropPPops(2)
    a = P.parse("[1,2,3]")
    s = system_from_polys(P, [[(a, [0]), (P.one, [])]])
    with pytest.raises(LinearError, match="too small"):
        linear_lfp(s, p=0)
    assert linear_lfp(s).assignment == naive_eval(s).assignment


@settings(max_examples=100, deadline=None)
@given(
    st.randoms(use_true_random=False),
    st.sampled_from([BOOL, TROPPLUS, TropPPops(1), TropPPops(2)]),
    st.integers(1, 10),
)
def test_linear_lfp_matches_iteration(rng, pops, n):
    s = random_system(rng, pops, n, linear=True)
    want = brute_fixpoint(s).assignment
    assert linear_lfp(s).assignment == want
    assert naive_eval(s).assignment == want


def test_empty_system():
    s = system_from_polys(TROPPLUS, [])
    assert linear_lfp(s).assignment == ()


def test_matrix_requires_square():
    with pytest.raises(LinearError):
        SemiringMatrix(BOOL, [[True, False]])


def test_format():
    A = unit_cycle(TropPPops(1), 2)
    assert A.format() == ["[[inf,inf], [1,inf]]", "[[1,inf], [inf,inf]]"]
