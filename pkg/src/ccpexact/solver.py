"""Layered dynamic programming over the collection chain and the three engines.

Every engine walks the chain one tracked draw at a time.  Each live state
carries weighted moments ``(P, U1, U2)``: its reach probability and the
reach-probability-weighted first and second moments of the number of draws
spent getting there.  Moving along an edge out of a state whose incomplete
coupons are hit with probability ``e`` adds a ``Geom(e)`` holding time:

    P'  += w * P
    U1' += w * (U1 + P / e)
    U2' += w * (U2 + 2 * U1 / e + P * (2 - e) / e**2)

Terminal states (``k`` complete coupons) are folded into the running totals
as soon as they appear, so only two layers are ever held in memory.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import model
from .errors import AbsorbingAncestor, EngineMismatch, NotUniform, Overflow
from .model import GroupDecomposition, Problem, Transition
from .summation import CompensatedSum, two_sum

DEFAULT_STATE_CAP = 10**8

ENGINES = ("BA", "UDA", "DPSA")


@dataclass(frozen=True)
class StateMoments:
    """Weighted moments held by one state.

    ``P`` is the reach probability, ``U1 = P * E[D]`` and ``U2 = P * E[D^2]``
    where ``D`` is the number of draws taken to reach the state.
    """

    P: float = 0.0
    U1: float = 0.0
    U2: float = 0.0

    @property
    def expectation(self) -> float:
        return self.U1 / self.P

    @property
    def second_moment(self) -> float:
        return self.U2 / self.P


INITIAL_MOMENTS = StateMoments(1.0, 0.0, 0.0)


def holding_moments(escape: float) -> tuple[float, float]:
    """Mean and second moment of a ``Geom(escape)`` holding time."""
    if not escape > 0.0:
        raise AbsorbingAncestor(f"escape probability {escape!r} is not positive")
    g1 = 1.0 / escape
    return g1, (2.0 - escape) * g1 * g1


def accumulate_successor(
    ancestor: StateMoments, edge_prob: float, pF_ancestor: float
) -> StateMoments:
    """Contribution of one edge ``ancestor -> successor`` to the successor's moments."""
    if pF_ancestor >= 1.0:
        raise AbsorbingAncestor(f"complete mass {pF_ancestor!r} leaves no way out")
    escape = 1.0 - pF_ancestor
    g1 = 1.0 / escape
    g2 = (1.0 + pF_ancestor) / (escape * escape)
    P, U1, U2 = ancestor.P, ancestor.U1, ancestor.U2
    return StateMoments(
        edge_prob * P,
        edge_prob * (U1 + P * g1),
        edge_prob * (U2 + 2.0 * U1 * g1 + P * g2),
    )


@dataclass
class SolveResult:
    expectation: float
    second_moment: float
    variance: float
    engine: str
    states_expanded: int
    edges_traversed: int
    layers: int
    terminal_mass: float
    wall_time: float
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "expectation": self.expectation,
            "second_moment": self.second_moment,
            "variance": self.variance,
            "engine": self.engine,
            "states_expanded": self.states_expanded,
            "edges_traversed": self.edges_traversed,
            "layers": self.layers,
            "terminal_mass": self.terminal_mass,
            "wall_time_s": self.wall_time,
        }


# -- state representations -------------------------------------------------
#
# ``expand`` returns (g1, g2, transitions) for a non-terminal state; g1 and g2
# are the holding-time moments of that state.


class _FullRep:
    name = "full"

    def __init__(self, problem: Problem):
        self.problem = problem
        self.probs = problem.probs
        self.t, self.k = problem.t, problem.k

    def initial(self):
        return model.initial_full(self.problem.n)

    def is_terminal(self, state) -> bool:
        return model.complete_count(state, self.t) >= self.k

    def expand(self, state):
        g1, g2 = holding_moments(model.escape_full(state, self.probs, self.t))
        return g1, g2, model.successors_ba(state, self.problem)


class _MultiplicityRep:
    name = "multiplicity"

    def __init__(self, problem: Problem):
        self.n, self.t, self.k = problem.n, problem.t, problem.k

    def initial(self):
        return model.initial_multiplicity(self.n, self.t)

    def is_terminal(self, state) -> bool:
        return state[self.t] >= self.k

    def expand(self, state):
        m = self.n - state[self.t]
        g1 = self.n / m
        g2 = self.n * (2 * self.n - m) / (m * m)
        return g1, g2, model.successors_uda(state, self.n, self.t, self.k)


class _GroupedRep:
    name = "grouped"

    def __init__(self, problem: Problem, decomposition: GroupDecomposition):
        self.decomposition = decomposition
        self.t, self.k = problem.t, problem.k
        self._single = _MultiplicityRep(problem) if decomposition.G == 1 else None

    def initial(self):
        return model.initial_grouped(self.decomposition, self.t)

    def is_terminal(self, state) -> bool:
        return sum(v[self.t] for v in state) >= self.k

    def expand(self, state):
        if self._single is not None:
            g1, g2, _ = self._single.expand(state[0])
        else:
            g1, g2 = holding_moments(model.grouped_escape(state, self.decomposition, self.t))
        return g1, g2, model.successors_dpsa(state, self.decomposition, self.t, self.k)


def _representation(problem: Problem, representation: str, decomposition=None):
    if representation == "full":
        return _FullRep(problem)
    if representation == "multiplicity":
        if not problem.dist.is_uniform:
            raise NotUniform("the multiplicity representation needs a uniform distribution")
        return _MultiplicityRep(problem)
    if representation == "grouped":
        return _GroupedRep(problem, decomposition or model.group_decompose(problem.dist))
    raise ValueError(f"unknown representation {representation!r}")


def _finish(
    engine: str,
    E: float,
    E2: float,
    mass: float,
    states: int,
    edges: int,
    layers: int,
    started: float,
    diagnostics: dict,
) -> SolveResult:
    raw = E2 - E * E
    diagnostics["raw_variance"] = raw
    return SolveResult(
        expectation=E,
        second_moment=E2,
        variance=max(0.0, raw),
        engine=engine,
        states_expanded=states,
        edges_traversed=edges,
        layers=layers,
        terminal_mass=mass,
        wall_time=time.perf_counter() - started,
        diagnostics=diagnostics,
    )


def run_layered_dp(
    problem: Problem,
    representation: str,
    *,
    decomposition: GroupDecomposition | None = None,
    state_cap: int = DEFAULT_STATE_CAP,
    record_terminals: bool = False,
    layer_hook: Callable[[int, dict], None] | None = None,
    engine: str | None = None,
) -> SolveResult:
    """Reference layered DP over hash-keyed layers.

    ``representation`` is ``"full"``, ``"multiplicity"`` or ``"grouped"``.
    ``layer_hook(b, layer)`` is called with every live layer before it is
    expanded; the layer maps states to their :class:`StateMoments`.
    """
    started = time.perf_counter()
    rep = _representation(problem, representation, decomposition)
    engine = engine or {"full": "BA", "multiplicity": "UDA", "grouped": "DPSA"}[rep.name]

    # each accumulator: [P, cP, U1, cU1, U2, cU2] (value + compensation pairs)
    current = {rep.initial(): [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]}
    E, E2, mass = CompensatedSum(), CompensatedSum(), CompensatedSum()
    states, edges, layers = 1, 0, 0
    worst_conservation = 0.0
    terminals = [] if record_terminals else None

    while current:
        if layer_hook is not None:
            layer_hook(layers, {s: StateMoments(a[0] + a[1], a[2] + a[3], a[4] + a[5])
                                for s, a in current.items()})
        nxt: dict = {}
        for state in sorted(current):
            acc = current[state]
            P, U1, U2 = acc[0] + acc[1], acc[2] + acc[3], acc[4] + acc[5]
            g1, g2, transitions = rep.expand(state)
            edges += len(transitions)
            dU1 = U1 + P * g1
            dU2 = U2 + 2.0 * U1 * g1 + P * g2
            for succ, w in transitions:
                slot = nxt.get(succ)
                if slot is None:
                    nxt[succ] = [w * P, 0.0, w * dU1, 0.0, w * dU2, 0.0]
                else:
                    slot[0], slot[1] = two_sum(slot[0], slot[1], w * P)
                    slot[2], slot[3] = two_sum(slot[2], slot[3], w * dU1)
                    slot[4], slot[5] = two_sum(slot[4], slot[5], w * dU2)
        states += len(nxt)
        layers += 1
        if states > state_cap:
            raise Overflow(
                f"expanded {states} states, above the cap of {state_cap}", states, state_cap
            )
        live = {}
        live_mass = CompensatedSum()
        for state in sorted(nxt):
            acc = nxt[state]
            if rep.is_terminal(state):
                E.add(acc[2] + acc[3])
                E2.add(acc[4] + acc[5])
                mass.add(acc[0] + acc[1])
                if terminals is not None:
                    terminals.append(state)
            else:
                live[state] = acc
                live_mass.add(acc[0] + acc[1])
        worst_conservation = max(worst_conservation, abs(live_mass.value + mass.value - 1.0))
        current = live

    diagnostics = {
        "backend": "reference",
        "representation": rep.name,
        "max_conservation_error": worst_conservation,
    }
    if terminals is not None:
        diagnostics["terminals"] = terminals
    return _finish(engine, E.value, E2.value, mass.value, states, edges, layers, started,
                   diagnostics)


# -- engines ------------------------------------------------------------------


def _canonical_order(probs: Iterable[float]) -> list[int]:
    """Coupon order by descending probability, ties kept in input order."""
    probs = list(probs)
    return sorted(range(len(probs)), key=lambda i: -probs[i])


def solve_ba(problem: Problem, *, state_cap: int = DEFAULT_STATE_CAP,
             record_terminals: bool = False) -> SolveResult:
    """Base algorithm over full per-coupon count vectors.

    Coupons are relabelled by descending probability before the walk, which
    leaves the answer unchanged and makes it independent of the input order.
    """
    order = _canonical_order(problem.probs)
    relabelled = problem
    if problem.dist.probs is not None and order != sorted(order):
        relabelled = model.validate_problem(
            problem.n, problem.k, problem.t,
            model.DrawingDistribution(problem.n, tuple(problem.probs[i] for i in order)),
        )
    result = run_layered_dp(relabelled, "full", state_cap=state_cap,
                            record_terminals=record_terminals)
    if record_terminals and relabelled is not problem:
        back = []
        for state in result.diagnostics["terminals"]:
            original = [0] * problem.n
            for pos, i in enumerate(order):
                original[i] = state[pos]
            back.append(tuple(original))
        result.diagnostics["terminals"] = sorted(back)
    return result


def _use_dense(backend: str) -> bool:
    if backend not in ("auto", "dense", "reference"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend != "reference"


def solve_uda(problem: Problem, *, state_cap: int = DEFAULT_STATE_CAP,
              backend: str = "auto") -> SolveResult:
    """Uniform-distribution engine over multiplicity vectors ``(x_0, ..., x_t)``."""
    if not problem.dist.is_uniform:
        raise NotUniform("UDA needs a uniform drawing distribution")
    if _use_dense(backend):
        from .dense import solve_grouped_dense

        decomposition = GroupDecomposition(((1.0 / problem.n, problem.n),))
        return solve_grouped_dense(problem, decomposition, engine="UDA", state_cap=state_cap)
    return run_layered_dp(problem, "multiplicity", state_cap=state_cap)


def solve_dpsa(problem: Problem, *, state_cap: int = DEFAULT_STATE_CAP,
               backend: str = "auto") -> SolveResult:
    """Engine over one multiplicity vector per group of equally likely coupons."""
    decomposition = model.group_decompose(problem.dist)
    if _use_dense(backend):
        from .dense import solve_grouped_dense

        return solve_grouped_dense(problem, decomposition, engine="DPSA", state_cap=state_cap)
    return run_layered_dp(problem, "grouped", decomposition=decomposition, state_cap=state_cap)


def choose_engine(problem: Problem) -> str:
    if problem.dist.is_uniform:
        return "UDA"
    if model.group_decompose(problem.dist).G < problem.n:
        return "DPSA"
    return "BA"


def solve(problem: Problem, engine: str = "auto", *, state_cap: int = DEFAULT_STATE_CAP,
          backend: str = "auto") -> SolveResult:
    """Solve with the named engine; ``"auto"`` picks UDA, then DPSA, then BA."""
    name = engine.upper()
    if name == "AUTO":
        name = choose_engine(problem)
    if name == "BA":
        return solve_ba(problem, state_cap=state_cap)
    if name == "UDA":
        if not problem.dist.is_uniform:
            raise EngineMismatch("UDA was requested for a non-uniform distribution")
        return solve_uda(problem, state_cap=state_cap, backend=backend)
    if name == "DPSA":
        return solve_dpsa(problem, state_cap=state_cap, backend=backend)
    raise EngineMismatch(f"unknown engine {engine!r}")


