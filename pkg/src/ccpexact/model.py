"""Problem instances, drawing distributions and the three state representations.

States are plain tuples so they hash cheaply and sort lexicographically:

* full state       ``(s_1, ..., s_n)``        copies held of each coupon
* multiplicity     ``(x_0, ..., x_t)``        number of coupons holding i copies
* grouped          ``((x_0..x_t), ...)``      one multiplicity vector per group

Successor lists are produced in canonical order (coupon index, copy count,
then ``(group, copy count)``) so that every accumulation downstream happens
in a reproducible order.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence, Union

from .errors import (
    BadBounds,
    DimensionMismatch,
    NonPositiveProbability,
    NotNormalized,
    TerminalState,
)

NORMALIZATION_TOL = 1e-9
RENORMALIZE_TOL = 1e-3

FullState = tuple[int, ...]
MultiplicityState = tuple[int, ...]
GroupedState = tuple[tuple[int, ...], ...]
State = Union[FullState, GroupedState]


@dataclass(frozen=True)
class DrawingDistribution:
    """Per-coupon drawing probabilities, either uniform over ``n`` or explicit."""

    n: int
    probs: tuple[float, ...] | None = None

    @classmethod
    def uniform(cls, n: int) -> "DrawingDistribution":
        if n < 1:
            raise BadBounds(f"uniform distribution needs n >= 1, got {n}")
        return cls(n=n)

    @classmethod
    def explicit(cls, probs: Sequence[float], renormalize: bool = False) -> "DrawingDistribution":
        values = tuple(float(p) for p in probs)
        if not values:
            raise BadBounds("explicit distribution needs at least one probability")
        bad = [i for i, p in enumerate(values) if not p > 0.0 or not math.isfinite(p)]
        if bad:
            raise NonPositiveProbability(
                f"probabilities must be positive; offending indices {bad[:10]}"
            )
        total = math.fsum(values)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            if renormalize and abs(total - 1.0) <= RENORMALIZE_TOL:
                values = tuple(p / total for p in values)
            else:
                raise NotNormalized(f"probabilities sum to {total!r}, not 1")
        return cls(n=len(values), probs=values)

    @property
    def kind(self) -> str:
        return "uniform" if self.probs is None else "explicit"

    @property
    def is_uniform(self) -> bool:
        """True when every coupon has the same probability (declared or explicit)."""
        return self.probs is None or len(set(self.probs)) == 1

    def probabilities(self) -> tuple[float, ...]:
        if self.probs is None:
            return (1.0 / self.n,) * self.n
        return self.probs


@dataclass(frozen=True)
class Problem:
    n: int
    k: int
    t: int
    dist: DrawingDistribution

    @property
    def probs(self) -> tuple[float, ...]:
        return self.dist.probabilities()

    @property
    def max_layer(self) -> int:
        """Largest tracked-draw count any terminal state can have."""
        return self.k * self.t + (self.n - self.k) * (self.t - 1)


def validate_problem(
    n: int,
    k: int,
    t: int,
    dist: DrawingDistribution | Sequence[float] | str | None = None,
    renormalize: bool = False,
) -> Problem:
    """Build a :class:`Problem`, checking ``1 <= k <= n`` and ``t >= 1``.

    ``dist`` may be a :class:`DrawingDistribution`, a sequence of explicit
    probabilities, or ``None`` / ``"uniform"`` for the uniform law.
    """
    for name, value in (("n", n), ("k", k), ("t", t)):
        if isinstance(value, bool) or int(value) != value:
            raise BadBounds(f"{name} must be an integer, got {value!r}")
    n, k, t = int(n), int(k), int(t)
    if n < 1 or k < 1 or k > n or t < 1:
        raise BadBounds(f"need 1 <= k <= n and t >= 1, got n={n}, k={k}, t={t}")
    if dist is None or (isinstance(dist, str) and dist == "uniform"):
        dist = DrawingDistribution.uniform(n)
    elif not isinstance(dist, DrawingDistribution):
        dist = DrawingDistribution.explicit(dist, renormalize=renormalize)
    if dist.n != n:
        raise DimensionMismatch(f"distribution has {dist.n} entries but n={n}")
    return Problem(n=n, k=k, t=t, dist=dist)


def parse_probabilities(text: str) -> list[float]:
    """Parse a JSON array of decimals or whitespace-separated decimals."""
    stripped = text.strip()
    if stripped.startswith("["):
        values = json.loads(stripped)
        if not isinstance(values, list):
            raise ValueError("expected a JSON array of numbers")
        return [float(v) for v in values]
    return [float(tok) for tok in stripped.replace(",", " ").split()]


def read_probabilities(path: str | Path) -> list[float]:
    return parse_probabilities(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class GroupDecomposition:
    """Coupons grouped by equal drawing probability, largest probability first."""

    groups: tuple[tuple[float, int], ...]

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def q(self) -> tuple[float, ...]:
        return tuple(q for q, _ in self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.groups)

    @property
    def n(self) -> int:
        return sum(self.sizes)


def group_decompose(dist: DrawingDistribution | Sequence[float]) -> GroupDecomposition:
    """Group coupons by exactly equal probability; no tolerance is applied."""
    if isinstance(dist, DrawingDistribution):
        if dist.probs is None:
            return GroupDecomposition(((1.0 / dist.n, dist.n),))
        probs = dist.probs
    else:
        probs = tuple(float(p) for p in dist)
    counts = Counter(probs)
    return GroupDecomposition(tuple(sorted(counts.items(), key=lambda qc: -qc[0])))


class Transition(NamedTuple):
    successor: State
    prob: float


def _is_grouped(state) -> bool:
    return len(state) > 0 and isinstance(state[0], tuple)


def complete_count(state: State, t: int) -> int:
    """Number of complete coupons in a full or grouped state."""
    if _is_grouped(state):
        return sum(v[t] for v in state)
    return sum(1 for s in state if s >= t)


def p_complete_full(state: FullState, probs: Sequence[float], t: int) -> float:
    return math.fsum(p for s, p in zip(state, probs) if s >= t)


def p_complete_multiplicity(state: MultiplicityState, n: int) -> float:
    return state[-1] / n


def p_complete_grouped(state: GroupedState, decomposition: GroupDecomposition) -> float:
    return math.fsum(v[-1] * q for v, q in zip(state, decomposition.q))


def p_complete(state, source, t: int | None = None) -> float:
    """Probability mass of the complete coupons in ``state``.

    ``source`` selects the representation: a :class:`GroupDecomposition` for
    grouped states, the coupon count ``n`` (an int) for multiplicity vectors,
    or a distribution / probability sequence (with ``t``) for full states.
    """
    if isinstance(source, GroupDecomposition):
        return p_complete_grouped(state, source)
    if isinstance(source, int):
        return p_complete_multiplicity(state, source)
    if t is None:
        raise TypeError("t is required for full states")
    probs = source.probabilities() if isinstance(source, DrawingDistribution) else source
    return p_complete_full(state, probs, t)


def multiplicity_vector(state: FullState, t: int) -> MultiplicityState:
    x = [0] * (t + 1)
    for s in state:
        x[s] += 1
    return tuple(x)


def grouped_image(
    state: FullState, probs: Sequence[float], decomposition: GroupDecomposition, t: int
) -> GroupedState:
    slot = {q: g for g, q in enumerate(decomposition.q)}
    gx = [[0] * (t + 1) for _ in range(decomposition.G)]
    for s, p in zip(state, probs):
        gx[slot[float(p)]][s] += 1
    return tuple(tuple(v) for v in gx)


def initial_full(n: int) -> FullState:
    return (0,) * n


def initial_multiplicity(n: int, t: int) -> MultiplicityState:
    return (n,) + (0,) * t


def initial_grouped(decomposition: GroupDecomposition, t: int) -> GroupedState:
    return tuple((c,) + (0,) * t for c in decomposition.sizes)


def escape_full(state: FullState, probs: Sequence[float], t: int) -> float:
    """Probability that a single draw hits an incomplete coupon.

    Summed over the incomplete coupons rather than taken as ``1 - p_complete``
    so outgoing probabilities stay normalized when ``p`` is off by up to 1e-9.
    """
    return math.fsum(p for s, p in zip(state, probs) if s < t)


def successors_ba(state: FullState, problem: Problem) -> list[Transition]:
    t = problem.t
    if complete_count(state, t) >= problem.k:
        raise TerminalState(f"{state} already has {problem.k} complete coupons")
    probs = problem.probs
    open_idx = [i for i, s in enumerate(state) if s < t]
    escape = math.fsum(probs[i] for i in open_idx)
    out = []
    for i in open_idx:
        nxt = list(state)
        nxt[i] += 1
        out.append(Transition(tuple(nxt), probs[i] / escape))
    return out


def successors_uda(state: MultiplicityState, n: int, t: int, k: int) -> list[Transition]:
    if state[t] >= k:
        raise TerminalState(f"{state} already has {k} complete coupons")
    open_count = n - state[t]
    out = []
    for i in range(t):
        if state[i] > 0:
            nxt = list(state)
            nxt[i] -= 1
            nxt[i + 1] += 1
            out.append(Transition(tuple(nxt), state[i] / open_count))
    return out


def grouped_escape(state: GroupedState, decomposition: GroupDecomposition, t: int) -> float:
    """Probability that a single draw hits an incomplete coupon."""
    return math.fsum((c - v[t]) * q for v, (q, c) in zip(state, decomposition.groups))


def successors_dpsa(
    state: GroupedState, decomposition: GroupDecomposition, t: int, k: int
) -> list[Transition]:
    if sum(v[t] for v in state) >= k:
        raise TerminalState(f"{state} already has {k} complete coupons")
    if decomposition.G == 1:
        # a single group is the uniform chain; use its exact count ratios
        (v,) = state
        return [
            Transition((tr.successor,), tr.prob)
            for tr in successors_uda(v, decomposition.n, t, k)
        ]
    escape = grouped_escape(state, decomposition, t)
    out = []
    for g, (v, q) in enumerate(zip(state, decomposition.q)):
        for i in range(t):
            if v[i] > 0:
                nv = list(v)
                nv[i] -= 1
                nv[i + 1] += 1
                nxt = state[:g] + (tuple(nv),) + state[g + 1:]
                out.append(Transition(nxt, v[i] * q / escape))
    return out
