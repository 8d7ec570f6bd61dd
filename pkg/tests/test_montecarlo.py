import math

import numpy as np
import pytest

from ccpexact.errors import BadBounds
from ccpexact.model import validate_problem
from ccpexact.montecarlo import (
    ALIAS_THRESHOLD,
    GENERATOR,
    alias_table,
    compare,
    simulate,
    z_score,
)


def test_deterministic_process():
    r = simulate(validate_problem(1, 1, 3, [1.0]), 100, 123)
    assert (r.mean, r.sample_variance, r.std_error, r.min, r.max) == (3.0, 0.0, 0.0, 3, 3)


def test_two_coupons():
    r = simulate(validate_problem(2, 2, 1), 100_000, 42)
    assert 2.96 <= r.mean <= 3.04
    assert r.sampler == "inversion" and r.generator == GENERATOR
    assert r.std_error == math.sqrt(r.sample_variance / r.iterations)
    assert r.min == 2


def test_frozen_stream():
    """Regression values for the documented generator; any change here is a format break."""
    r = simulate(validate_problem(3, 2, 2, [0.2, 0.3, 0.5]), 1000, 0xC0FFEE)
    assert (r.mean, r.min, r.max) == (5.886, 4, 16)


def test_reproducible():
    p = validate_problem(70, 70, 2, [0.5 / 35] * 35 + [0.5 / 35] * 35)
    a, b = simulate(p, 500, 9), simulate(p, 500, 9)
    assert a == b and a.sampler == "alias"
    assert simulate(p, 500, 10) != a


def test_prefix_stability():
    """Trial i depends only on (seed, i): a longer run extends a shorter one."""
    p = validate_problem(5, 3, 2, [0.1, 0.2, 0.2, 0.2, 0.3])
    short = simulate(p, 1, 77)
    long = simulate(p, 1000, 77)
    assert short.min >= p.k * p.t
    assert long.min <= short.mean <= long.max


def test_minimum_draws():
    r = simulate(validate_problem(6, 4, 3), 2000, 1)
    assert r.min >= 12


def test_example_one_z_score(example_one):
    rep = compare(example_one, "BA", 100_000, 2024)
    assert abs(rep.z_score) < 5
    assert rep.rel_error == abs(rep.sim.mean - rep.exact.expectation) / rep.exact.expectation
    assert rep.z_score == (rep.sim.mean - rep.exact.expectation) / rep.sim.std_error


def test_deterministic_compare():
    rep = compare(validate_problem(1, 1, 2), "auto", 50, 3)
    assert rep.abs_error == 0.0 and rep.z_score == 0.0


def test_error_shrinks_with_iterations():
    p = validate_problem(20, 20, 3)
    small = [compare(p, "UDA", 1000, s).rel_error for s in range(5)]
    large = [compare(p, "UDA", 100_000, s).rel_error for s in range(5)]
    assert max(large) < sorted(small)[2]
    assert np.mean(large) < np.mean(small)


def test_alias_table_reconstructs_probabilities():
    probs = np.array([0.05, 0.1, 0.15, 0.3, 0.4] + [0.0] * 0)
    prob, alias = alias_table(probs)
    n = probs.size
    mass = prob / n
    for j in range(n):
        mass[alias[j]] += (1 - prob[j]) / n
    assert mass == pytest.approx(probs, abs=1e-15)


def test_alias_used_for_many_coupons():
    assert simulate(validate_problem(ALIAS_THRESHOLD, 1, 1), 10, 0).sampler == "alias"
    assert simulate(validate_problem(ALIAS_THRESHOLD - 1, 1, 1), 10, 0).sampler == "inversion"


def test_bad_iterations():
    with pytest.raises(BadBounds):
        simulate(validate_problem(2, 2, 1), 0, 1)


def test_z_score_edges():
    assert z_score(3.0, 3.0, 0.0) == 0.0
    assert z_score(4.0, 3.0, 0.0) == math.inf
    assert z_score(2.0, 3.0, 0.5) == -2.0
