"""Closed-form sizes of the chains each engine walks.

Counts are exact Python integers (``(t+1)**n`` leaves 64 bits behind almost
immediately).  Only :func:`dpsa_bounds` returns floats, since it evaluates a
binomial at a non-integer argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import BadBounds
from .model import GroupDecomposition


@dataclass(frozen=True)
class ChainSize:
    vertices: int
    edges: int

    def as_dict(self) -> dict:
        return {"vertices": self.vertices, "edges": self.edges}


def _check(n: int, k: int, t: int) -> None:
    if n < 1 or t < 1 or not 1 <= k <= n:
        raise BadBounds(f"need 1 <= k <= n and t >= 1, got n={n}, k={k}, t={t}")


def _binom(a: int, b: int) -> int:
    # math.comb rejects negative arguments; the formulas below rely on C(a, b) = 0 there
    if a < 0 or b < 0 or b > a:
        return 0
    return math.comb(a, b)


def _ba_vertices(m: int, h: int, t: int) -> int:
    """Full states over ``m`` coupons with at most ``h`` of them complete."""
    return sum(math.comb(m, j) * t ** (m - j) for j in range(0, min(h, m) + 1))


def count_ba(n: int, k: int, t: int) -> ChainSize:
    _check(n, k, t)
    return ChainSize(_ba_vertices(n, k, t), n * t * _ba_vertices(n - 1, k - 1, t))


def count_uda(n: int, k: int, t: int) -> ChainSize:
    _check(n, k, t)
    vertices = math.comb(n + t, n) - _binom(n + t - (k + 1), n - (k + 1))
    edges = t * math.comb(n + t - 1, t) - t * _binom(n + t - k - 1, t)
    return ChainSize(vertices, edges)


def count_dpsa(decomposition: GroupDecomposition, t: int, k: int | None = None) -> ChainSize:
    """Grouped-chain size for ``k = n``; no closed form is known for ``k < n``."""
    if t < 1:
        raise BadBounds(f"t must be >= 1, got {t}")
    if not decomposition.groups or any(c < 1 for c in decomposition.sizes):
        raise BadBounds("decomposition needs at least one non-empty group")
    if k is not None and k != decomposition.n:
        raise BadBounds(f"grouped counts are only available for k = n ({decomposition.n}), got k={k}")
    vertices = math.prod(math.comb(c + t, t) for c in decomposition.sizes)
    edges = t * sum(Fraction(c, c + t) for c in decomposition.sizes) * vertices
    if edges.denominator != 1:  # pragma: no cover - every term divides out
        raise ArithmeticError(f"non-integral edge count {edges}")
    return ChainSize(vertices, int(edges))


def _real_binom(x: float, t: int) -> float:
    """C(x + t, t) for real ``x``, as a product so integer ``x`` stays exact-ish."""
    out = 1.0
    for i in range(1, t + 1):
        out *= (x + i) / i
    return out


def dpsa_bounds(n: int, G: int, t: int) -> tuple[float, float]:
    """Upper bounds on grouped-chain vertices and edges for any ``G``-group split.

    Equal group sizes attain both bounds.
    """
    if n < 1 or t < 1 or not 1 <= G <= n:
        raise BadBounds(f"need 1 <= G <= n and t >= 1, got n={n}, G={G}, t={t}")
    c = n / G
    try:
        vertices = _real_binom(c, t) ** G
    except OverflowError:
        vertices = math.inf
    return vertices, t * (n / (c + t)) * vertices


# Named distribution families and their grouped-chain sizes, written out
# independently of count_dpsa so the two can be checked against each other.
FAMILIES = ("no-symmetry", "c-size-groups", "c-groups", "almost-uniform", "uniform")


def family_decomposition(family: str, n: int, c: int | None = None) -> GroupDecomposition:
    """A representative decomposition for ``family``; probabilities are placeholders."""
    if family == "no-symmetry":
        sizes = [1] * n
    elif family == "c-size-groups":
        sizes = [c] * (n // c)
    elif family == "c-groups":
        sizes = [n // c] * c
    elif family == "almost-uniform":
        sizes = [1, n - 1]
    elif family == "uniform":
        sizes = [n]
    else:
        raise BadBounds(f"unknown family {family!r}")
    if sum(sizes) != n:
        raise BadBounds(f"{family} with c={c} does not split n={n} evenly")
    # distinct placeholder probabilities keep the groups apart
    total = sum((g + 1) * s for g, s in enumerate(sizes))
    return GroupDecomposition(tuple(((g + 1) / total, s) for g, s in enumerate(sizes)))


def family_size(family: str, n: int, t: int, c: int | None = None) -> ChainSize:
    """Tabulated grouped-chain size for a named family, with ``k = n``."""
    if family == "no-symmetry":
        v = (t + 1) ** n
        e = Fraction(t * n * (t + 1) ** (n - 1))
    elif family == "c-size-groups":
        v = math.comb(c + t, t) ** (n // c)
        e = t * Fraction(n, c + t) * v
    elif family == "c-groups":
        v = math.comb(n // c + t, t) ** c
        e = t * Fraction(n, n // c + t) * v
    elif family == "almost-uniform":
        v = (t + 1) * math.comb(n - 1 + t, t)
        e = t * (Fraction(1, t + 1) + Fraction(n - 1, n - 1 + t)) * v
    elif family == "uniform":
        v = math.comb(n + t, t)
        e = Fraction(t * math.comb(n + t - 1, t))
    else:
        raise BadBounds(f"unknown family {family!r}")
    return ChainSize(v, int(e))


def predicted_states(problem, engine: str) -> int | None:
    """Closed-form vertex count for ``engine`` on ``problem``, if one exists."""
    from .model import group_decompose

    if engine == "BA":
        return count_ba(problem.n, problem.k, problem.t).vertices
    if engine == "UDA":
        return count_uda(problem.n, problem.k, problem.t).vertices
    if engine == "DPSA" and problem.k == problem.n:
        decomposition = group_decompose(problem.dist)
        if decomposition.G == 1:
            return count_uda(problem.n, problem.k, problem.t).vertices
        return count_dpsa(decomposition, problem.t).vertices
    return None
