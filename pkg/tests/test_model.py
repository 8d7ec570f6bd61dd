import math

import pytest

from ccpexact import model
from ccpexact.errors import (
    BadBounds,
    DimensionMismatch,
    NonPositiveProbability,
    NotNormalized,
    TerminalState,
    ValidationError,
)
from ccpexact.model import (
    DrawingDistribution,
    GroupDecomposition,
    group_decompose,
    validate_problem,
)


class TestValidation:
    def test_uniform_default(self):
        p = validate_problem(4, 2, 3)
        assert p.dist.kind == "uniform"
        assert p.probs == (0.25,) * 4
        assert p.max_layer == 2 * 3 + 2 * 2

    @pytest.mark.parametrize("n,k,t", [(3, 5, 1), (0, 0, 1), (3, 0, 1), (3, 2, 0), (2, 1, -1)])
    def test_bad_bounds(self, n, k, t):
        with pytest.raises(BadBounds):
            validate_problem(n, k, t)

    def test_non_integer(self):
        with pytest.raises(BadBounds):
            validate_problem(3, 1.5, 1)
        with pytest.raises(BadBounds):
            validate_problem(True, 1, 1)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            validate_problem(4, 2, 2, [0.5, 0.5])

    @pytest.mark.parametrize("probs", [[0.5, 0.5, 0.0], [1.2, -0.2], [float("nan"), 1.0]])
    def test_non_positive(self, probs):
        with pytest.raises(NonPositiveProbability):
            DrawingDistribution.explicit(probs)

    def test_normalization_tolerance(self):
        DrawingDistribution.explicit([0.5, 0.5 + 5e-10])
        with pytest.raises(NotNormalized):
            DrawingDistribution.explicit([0.5, 0.5 + 1e-6])

    def test_renormalize(self):
        d = DrawingDistribution.explicit([0.5, 0.5005], renormalize=True)
        assert math.isclose(math.fsum(d.probs), 1.0, abs_tol=1e-15)
        with pytest.raises(NotNormalized):
            DrawingDistribution.explicit([0.5, 0.51], renormalize=True)

    def test_errors_are_value_errors(self):
        assert issubclass(NotNormalized, ValidationError)
        assert issubclass(NotNormalized, ValueError)
        assert BadBounds.exit_code == 3

    def test_explicit_equal_is_uniform(self):
        assert DrawingDistribution.explicit([0.25] * 4).is_uniform
        assert not DrawingDistribution.explicit([0.2, 0.3, 0.5]).is_uniform


def test_parse_probabilities(tmp_path):
    assert model.parse_probabilities("[0.2, 0.3, 0.5]") == [0.2, 0.3, 0.5]
    assert model.parse_probabilities("0.2 0.3\n0.5\n") == [0.2, 0.3, 0.5]
    assert model.parse_probabilities("0.2,0.3,0.5") == [0.2, 0.3, 0.5]
    f = tmp_path / "p.txt"
    f.write_text("[0.25, 0.75]", encoding="utf-8")
    assert model.read_probabilities(f) == [0.25, 0.75]


def test_group_decompose():
    d = group_decompose(DrawingDistribution.explicit([0.1, 0.3, 0.1, 0.3, 0.2]))
    assert d.groups == ((0.3, 2), (0.2, 1), (0.1, 2))
    assert (d.G, d.n) == (3, 5)
    u = group_decompose(DrawingDistribution.uniform(7))
    assert u.groups == ((1 / 7, 7),)
    # no tolerance: values one ulp apart stay in separate groups
    a = 0.25
    b = math.nextafter(a, 1.0)
    assert group_decompose([a, b, 1 - a - b]).G == 3


def test_p_complete_dispatch():
    probs = (0.2, 0.3, 0.5)
    assert model.p_complete((2, 0, 2), probs, t=2) == pytest.approx(0.7)
    assert model.p_complete((1, 0, 2), 4) == 0.5
    dec = GroupDecomposition(((0.3, 2), (0.2, 2)))
    assert model.p_complete(((0, 1, 1), (2, 0, 0)), dec) == pytest.approx(0.3)
    with pytest.raises(TypeError):
        model.p_complete((0, 0), probs)


class TestSuccessors:
    def test_ba_example(self, example_one):
        out = model.successors_ba((2, 1, 0), example_one)
        assert [tr.successor for tr in out] == [(2, 2, 0), (2, 1, 1)]
        assert [tr.prob for tr in out] == pytest.approx([0.3 / 0.8, 0.5 / 0.8])

    def test_ba_terminal(self, example_one):
        with pytest.raises(TerminalState):
            model.successors_ba((2, 2, 0), example_one)

    def test_uda(self):
        out = model.successors_uda((1, 2, 1), 4, 2, 4)
        assert out == [((0, 3, 1), 1 / 3), ((1, 1, 2), 2 / 3)]
        with pytest.raises(TerminalState):
            model.successors_uda((1, 1, 2), 4, 2, 2)

    def test_dpsa(self):
        dec = GroupDecomposition(((0.3, 2), (0.2, 2)))
        out = model.successors_dpsa(((1, 1, 0), (2, 0, 0)), dec, 2, 4)
        assert [tr.successor for tr in out] == [
            ((0, 2, 0), (2, 0, 0)),
            ((1, 0, 1), (2, 0, 0)),
            ((1, 1, 0), (1, 1, 0)),
        ]
        assert sum(tr.prob for tr in out) == pytest.approx(1.0, abs=1e-15)

    def test_dpsa_single_group_matches_uda(self):
        dec = GroupDecomposition(((0.2, 5),))
        grouped = model.successors_dpsa(((2, 2, 1),), dec, 2, 5)
        plain = model.successors_uda((2, 2, 1), 5, 2, 5)
        assert [(s[0], p) for s, p in grouped] == [tuple(tr) for tr in plain]

    def test_escape_normalizes_slightly_off_probs(self):
        # probabilities summing to 1 - 5e-10 still give outgoing mass 1
        p = validate_problem(3, 3, 1, [0.2, 0.3, 0.5 - 5e-10])
        out = model.successors_ba((1, 0, 0), p)
        assert math.fsum(tr.prob for tr in out) == pytest.approx(1.0, abs=1e-15)


def test_images_commute_with_successors():
    """Projecting full successors onto multiplicity vectors gives the UDA edges."""
    from collections import defaultdict
    from itertools import product

    for n in range(1, 5):
        for t in range(1, 4):
            p = validate_problem(n, n, t)
            for state in product(range(t + 1), repeat=n):
                if model.complete_count(state, t) >= n:
                    continue
                agg = defaultdict(float)
                for tr in model.successors_ba(state, p):
                    agg[model.multiplicity_vector(tr.successor, t)] += tr.prob
                expect = model.successors_uda(model.multiplicity_vector(state, t), n, t, n)
                assert set(agg) == {tr.successor for tr in expect}
                for tr in expect:
                    assert agg[tr.successor] == pytest.approx(tr.prob, rel=1e-12)


def test_grouped_image():
    probs = (0.3, 0.2, 0.3, 0.2)
    dec = group_decompose(probs)
    assert model.grouped_image((2, 0, 1, 2), probs, dec, 2) == ((0, 1, 1), (1, 0, 1))
