"""Ground truth that shares no code with the engines.

The linear-solve oracle works on the per-draw chain over every full state,
keeping the self-loops that the engines fold into holding times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BadBounds, TooLarge
from .model import Problem

RAW_STATE_LIMIT = 20_000
#: above this many transient states the sparse LU replaces dense elimination
DENSE_LIMIT = 1_000
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class OracleResult:
    expectation: float
    variance: float | None = None
    second_moment: float | None = None


def harmonic(n: int) -> float:
    return math.fsum(1.0 / j for j in range(1, n + 1))


def harmonic_expectation(n: int, k: int) -> float:
    """Expected draws to see ``k`` distinct coupons out of ``n`` equally likely ones."""
    if n < 1 or not 1 <= k <= n:
        raise BadBounds(f"need 1 <= k <= n, got n={n}, k={k}")
    return n * (harmonic(n) - harmonic(n - k))


def geometric_stage_moments(n: int) -> OracleResult:
    """Mean and variance of a full uniform collection as a sum of geometric stages."""
    if n < 1:
        raise BadBounds(f"n must be >= 1, got {n}")
    # stage m (m coupons already seen) succeeds with probability (n - m)/n
    expectation = n * math.fsum(1.0 / (n - m) for m in range(n))
    variance = math.fsum(
        (1.0 - (n - m) / n) / ((n - m) / n) ** 2 for m in range(n)
    )
    return OracleResult(expectation, variance, variance + expectation ** 2)


def _raw_chain(problem: Problem):
    n, k, t = problem.n, problem.k, problem.t
    radix = t + 1
    total = radix ** n
    if total > RAW_STATE_LIMIT:
        raise TooLarge(f"raw chain has {total} states, limit is {RAW_STATE_LIMIT}")
    codes = np.arange(total, dtype=np.int64)
    places = radix ** np.arange(n, dtype=np.int64)
    digits = (codes[:, None] // places[None, :]) % radix  # digits[s, i] = copies of coupon i
    transient = (digits >= t).sum(axis=1) < k
    index = np.full(total, -1, dtype=np.int64)
    index[transient] = np.arange(int(transient.sum()))
    probs = np.asarray(problem.probs, dtype=np.float64)

    rows, cols, vals = [], [], []
    src = np.flatnonzero(transient)
    diag = np.zeros(src.size)
    for i in range(n):
        complete = digits[src, i] >= t
        diag += np.where(complete, probs[i], 0.0)
        mov = src[~complete]
        dst = index[mov + places[i]]
        keep = dst >= 0  # moves into the terminal set leave the transient block
        rows.append(index[mov][keep])
        cols.append(dst[keep])
        vals.append(np.full(int(keep.sum()), probs[i]))
    m = src.size
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag)
    Q = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
    )
    return Q, int(index[0])


def _check_residual(A, x, b) -> None:
    r = A @ x - b
    scale = abs(A).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max()
    rel = float(np.abs(r).max() / scale)
    if not rel <= RESIDUAL_TOL:
        raise ArithmeticError(f"linear solve residual {rel:.3e} exceeds {RESIDUAL_TOL}")


def brute_force_linear_solve(problem: Problem) -> OracleResult:
    """Absorption-time moments of the raw per-draw chain.

    With ``Q`` the transient block, ``(I - Q) m1 = 1`` gives the expectation
    and ``(I - Q) m2 = 1 + 2 Q m1`` the second moment.
    """
    Q, start = _raw_chain(problem)
    m = Q.shape[0]
    A = sp.identity(m, format="csr") - Q
    ones = np.ones(m)
    if m <= DENSE_LIMIT:
        dense = A.toarray()
        m1 = np.linalg.solve(dense, ones)
        rhs = 1.0 + 2.0 * (Q @ m1)
        m2 = np.linalg.solve(dense, rhs)
    else:
        # states only move to larger codes, so I - Q is upper triangular in
        # code order and the natural column order produces no fill-in
        lu = spla.splu(A.tocsc(), permc_spec="NATURAL")
        m1 = lu.solve(ones)
        rhs = 1.0 + 2.0 * (Q @ m1)
        m2 = lu.solve(rhs)
    _check_residual(A, m1, ones)
    _check_residual(A, m2, rhs)
    e, e2 = float(m1[start]), float(m2[start])
    return OracleResult(e, max(0.0, e2 - e * e), e2)
