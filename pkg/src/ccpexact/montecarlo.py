"""Seeded simulation of the drawing process, used as a statistical cross-check.

Random numbers come from SplitMix64.  Trial ``i`` owns its own stream, whose
starting point is the SplitMix64 finalizer applied to
``seed + (i + 1) * 0x9E3779B97F4A7C15``.  A trial's draws therefore do not
depend on how trials are scheduled.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .errors import BadBounds
from .model import Problem
from .solver import SolveResult, solve

GENERATOR = "splitmix64-per-trial/1"
ALIAS_THRESHOLD = 64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _uniform(z):
    return float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _trials(seed, iterations, n, k, t, cdf, alias_prob, alias_idx, use_alias):
    out = np.empty(iterations, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for trial in range(iterations):
        state = _mix(seed + np.uint64(trial + 1) * _GOLDEN)
        counts[:] = 0
        done = 0
        draws = 0
        while done < k:
            state += _GOLDEN
            u = _uniform(_mix(state))
            if use_alias:
                x = u * n
                j = min(int(x), n - 1)
                i = j if x - j < alias_prob[j] else alias_idx[j]
            else:
                i = 0
                while i < n - 1 and u >= cdf[i]:
                    i += 1
            draws += 1
            counts[i] += 1
            if counts[i] == t:
                done += 1
        out[trial] = draws
    return out


def alias_table(probs) -> tuple[np.ndarray, np.ndarray]:
    """Vose's alias table: column ``j`` keeps itself with ``prob[j]``, else ``alias[j]``."""
    p = np.asarray(probs, dtype=np.float64)
    n = p.size
    scaled = p * (n / p.sum())
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, g = small.pop(), large.pop()
        prob[s], alias[s] = scaled[s], g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    # leftovers are 1 up to rounding
    return prob, alias


def _cdf(probs) -> np.ndarray:
    # only used below ALIAS_THRESHOLD coupons, so exact prefix sums are cheap
    total = math.fsum(probs)
    out = np.array([math.fsum(probs[: i + 1]) / total for i in range(len(probs))])
    out[-1] = 1.0
    return out


@dataclass(frozen=True)
class SimResult:
    iterations: int
    seed: int
    mean: float
    sample_variance: float
    std_error: float
    min: int
    max: int
    sampler: str
    generator: str = GENERATOR
    wall_time: float = field(default=0.0, compare=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["wall_time_s"] = d.pop("wall_time")
        return d


def simulate(problem: Problem, iterations: int, seed: int) -> SimResult:
    """Run ``iterations`` independent trials and summarize the draw counts."""
    if iterations < 1:
        raise BadBounds(f"iterations must be >= 1, got {iterations}")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    probs = problem.probs
    n = problem.n
    use_alias = n >= ALIAS_THRESHOLD
    if use_alias:
        prob, alias = alias_table(probs)
        cdf = np.ones(1)
    else:
        prob, alias = np.ones(1), np.zeros(1, dtype=np.int64)
        cdf = _cdf(probs)
    start = time.perf_counter()
    draws = _trials(np.uint64(seed), iterations, n, problem.k, problem.t,
                    cdf, prob, alias, use_alias)
    elapsed = time.perf_counter() - start
    mean = int(draws.sum()) / iterations
    if iterations > 1:
        var = math.fsum(((draws - mean) ** 2).tolist()) / (iterations - 1)
    else:
        var = 0.0
    return SimResult(
        iterations=iterations,
        seed=seed,
        mean=mean,
        sample_variance=var,
        std_error=math.sqrt(var / iterations),
        min=int(draws.min()),
        max=int(draws.max()),
        sampler="alias" if use_alias else "inversion",
        wall_time=elapsed,
    )


@dataclass(frozen=True)
class ComparisonReport:
    exact: SolveResult
    sim: SimResult
    abs_error: float
    rel_error: float
    z_score: float

    def as_dict(self) -> dict:
        return {
            "exact": self.exact.as_dict(),
            "sim": self.sim.as_dict(),
            "abs_error": self.abs_error,
            "rel_error": self.rel_error,
            "z_score": self.z_score,
            "exact_wall_time_s": self.exact.wall_time,
            "sim_wall_time_s": self.sim.wall_time,
        }


def z_score(mean: float, expectation: float, std_error: float) -> float:
    if std_error > 0.0:
        return (mean - expectation) / std_error
    # a zero-spread sample is either right on the target or infinitely far off
    if mean == expectation:
        return 0.0
    return math.copysign(math.inf, mean - expectation)


def compare(problem: Problem, engine: str = "auto", iterations: int = 100_000,
            seed: int = 0xC0FFEE, **solve_kwargs) -> ComparisonReport:
    exact = solve(problem, engine, **solve_kwargs)
    sim = simulate(problem, iterations, seed)
    diff = sim.mean - exact.expectation
    return ComparisonReport(
        exact=exact,
        sim=sim,
        abs_error=abs(diff),
        rel_error=abs(diff) / exact.expectation,
        z_score=z_score(sim.mean, exact.expectation, sim.std_error),
    )
