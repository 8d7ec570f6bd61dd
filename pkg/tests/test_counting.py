import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccpexact.counting import (
    FAMILIES,
    ChainSize,
    count_ba,
    count_dpsa,
    count_uda,
    dpsa_bounds,
    family_decomposition,
    family_size,
    predicted_states,
)
from ccpexact.errors import BadBounds
from ccpexact.model import GroupDecomposition, validate_problem
from ccpexact.solver import solve_ba, solve_dpsa, solve_uda


def groups(*sizes):
    total = sum((g + 1) * c for g, c in enumerate(sizes))
    return GroupDecomposition(tuple(((g + 1) / total, c) for g, c in enumerate(sizes)))


def test_spot_values():
    assert count_ba(3, 2, 2) == ChainSize(26, 48)
    assert count_ba(1, 1, 1) == ChainSize(2, 1)
    assert count_uda(3, 2, 2) == ChainSize(9, 10)
    assert count_uda(3, 3, 2) == ChainSize(10, 12)
    assert count_dpsa(groups(2, 2), 2) == ChainSize(36, 72)


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("t", range(1, 5))
def test_full_collection_forms(n, t):
    assert count_ba(n, n, t) == ChainSize((t + 1) ** n, n * t * (t + 1) ** (n - 1))
    assert count_uda(n, n, t) == ChainSize(math.comb(n + t, t), t * math.comb(n + t - 1, t))
    assert count_dpsa(groups(n), t) == count_uda(n, n, t)
    assert count_dpsa(groups(*[1] * n), t) == count_ba(n, n, t)


def test_huge_counts_stay_exact():
    v = count_ba(200, 200, 3).vertices
    assert v == 4 ** 200 and v.bit_length() == 401


def test_bounds_chain():
    for n in range(1, 8):
        for t in range(1, 5):
            for k in range(1, n + 1):
                vb, vu = count_ba(n, k, t).vertices, count_uda(n, k, t).vertices
                if t >= 2:
                    assert t ** n <= vb <= (t + 1) ** n
                assert math.comb(n + t - 1, n) <= vu <= math.comb(n + t, t)


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("t", range(1, 4))
def test_measured_sizes_match(n, t):
    for k in range(1, n + 1):
        p = validate_problem(n, k, t)
        ba, uda = solve_ba(p), solve_uda(p)
        assert count_ba(n, k, t) == ChainSize(ba.states_expanded, ba.edges_traversed)
        assert count_uda(n, k, t) == ChainSize(uda.states_expanded, uda.edges_traversed)


def test_measured_grouped_sizes_match():
    rng = random.Random(11)
    for _ in range(20):
        n, t = rng.randint(2, 7), rng.randint(1, 3)
        sizes = []
        left = n
        while left:
            sizes.append(rng.randint(1, left))
            left -= sizes[-1]
        dec = groups(*sizes)
        probs = [q for q, c in dec.groups for _ in range(c)]
        r = solve_dpsa(validate_problem(n, n, t, probs))
        assert count_dpsa(dec, t) == ChainSize(r.states_expanded, r.edges_traversed)


def test_dpsa_rejects_partial_goal():
    with pytest.raises(BadBounds):
        count_dpsa(groups(2, 2), 2, k=3)
    assert count_dpsa(groups(2, 2), 2, k=4) == ChainSize(36, 72)


@pytest.mark.parametrize("args", [(0, 1, 1), (3, 4, 1), (3, 0, 1), (3, 2, 0)])
def test_bad_bounds(args):
    with pytest.raises(BadBounds):
        count_ba(*args)
    with pytest.raises(BadBounds):
        count_uda(*args)


def test_bounds_single_group_and_equal_groups():
    vb, eb = dpsa_bounds(7, 1, 3)
    assert vb == math.comb(10, 3)
    assert eb == pytest.approx(3 * math.comb(9, 3), rel=1e-14)
    for n, G, t in [(6, 2, 2), (12, 3, 4), (30, 5, 3), (30, 30, 2)]:
        exact = count_dpsa(groups(*[n // G] * G), t)
        vb, eb = dpsa_bounds(n, G, t)
        assert vb == pytest.approx(exact.vertices, rel=1e-12)
        assert eb == pytest.approx(exact.edges, rel=1e-12)


@given(st.lists(st.integers(1, 8), min_size=1, max_size=6), st.integers(1, 4))
def test_bounds_dominate(sizes, t):
    exact = count_dpsa(groups(*sizes), t)
    vb, eb = dpsa_bounds(sum(sizes), len(sizes), t)
    assert exact.vertices <= vb * (1 + 1e-12)
    assert exact.edges <= eb * (1 + 1e-12)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n,t,c", [(6, 2, 2), (6, 3, 3), (12, 2, 4), (8, 1, 2)])
def test_table_families(family, n, t, c):
    dec = family_decomposition(family, n, c)
    assert family_size(family, n, t, c) == count_dpsa(dec, t)


def test_predicted_states():
    assert predicted_states(validate_problem(3, 2, 2, [0.2, 0.3, 0.5]), "BA") == 26
    assert predicted_states(validate_problem(3, 3, 2), "UDA") == 10
    assert predicted_states(validate_problem(4, 4, 2, [0.1, 0.1, 0.4, 0.4]), "DPSA") == 36
    assert predicted_states(validate_problem(4, 2, 2, [0.1, 0.1, 0.4, 0.4]), "DPSA") is None
