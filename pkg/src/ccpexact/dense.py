"""Compiled layered DP for grouped (and multiplicity) states.

Layers are stored as dense arrays instead of hash maps.  A state is a tuple
of per-group multiplicity vectors; within one group the vectors are sorted by
their tracked-draw count ``beta = sum(i * x_i)`` and then lexicographically,
so each group's vectors with a given ``beta`` occupy a contiguous block.  A
layer ``r`` holds every tuple whose betas sum to ``r``, ranked in the order
``(beta_0, pos_0, beta_1, pos_1, ...)``::

    rank = sum_g Off[g, r_g, beta_g] + pos_g * N[g + 1, r_g - beta_g]

with ``r_0 = r``, ``r_{g+1} = r_g - beta_g``, ``N[g, r]`` the number of
tuples of groups ``g..G-1`` with betas summing to ``r`` and ``Off`` the
matching prefix sums.  Each new state *pulls* from its predecessors (undo
one copy in one group), so every state's moments are summed in a fixed order
with no scatter and no hash lookups.

Tuples whose complete count exceeds ``k`` occupy slots but are never
reached; they are not counted as expanded states.
"""

from __future__ import annotations

import time

import numba
import numpy as np

from .errors import Overflow
from .model import GroupDecomposition, Problem
from .solver import SolveResult, _finish

_JIT = dict(cache=True, nogil=True)


@numba.njit(**_JIT)
def _binomials(top, width):
    C = np.zeros((top + 1, width + 1), dtype=np.int64)
    for a in range(top + 1):
        C[a, 0] = 1
        for b in range(1, min(a, width) + 1):
            C[a, b] = C[a - 1, b - 1] + (C[a - 1, b] if b <= a - 1 else 0)
    return C


@numba.njit(**_JIT)
def _lex_rank(y, c, t, C):
    # rank of (y_1..y_t), sum <= c, among all such vectors in lexicographic order
    rank = 0
    rem = c
    for j in range(t):
        d = t - 1 - j
        v = y[j]
        if v > 0:
            rank += C[rem + d + 1, d + 1] - C[rem - v + d + 1, d + 1]
        rem -= v
    return rank


@numba.njit(**_JIT)
def beta_of(vecs, sid, t):
    b = 0
    for j in range(1, t + 1):
        b += j * vecs[sid, j]
    return b


_PREFIX_TABLE_LIMIT = 1 << 24


@numba.njit(**_JIT)
def _prefix_key(v, sid, b, t, c):
    key = b
    for j in range(1, t - 1):
        key = key * (c + 1) + v[sid, j]
    return key


@numba.njit(**_JIT)
def _locate(first, z, b, t, c):
    """Sorted id of the vector ``z`` (slots 0..t) whose beta is ``b``."""
    if t == 1:
        return first[b]
    key = b
    rest = b
    for j in range(1, t - 1):
        key = key * (c + 1) + z[j]
        rest -= j * z[j]
    rho = (-rest) % t
    return first[key] + (z[t - 1] - rho) // t


@numba.njit(**_JIT)
def _group_tables(c, t, prefix_limit):
    """Vectors of one group sorted by (beta, lex), block starts and predecessor ids."""
    C = _binomials(c + t + 2, t + 2)
    m = C[c + t, t]
    lex = np.zeros((m, t), dtype=np.int32)
    y = np.zeros(t, dtype=np.int32)
    total = 0
    for idx in range(m):
        lex[idx, :] = y
        # lexicographic successor under sum(y) <= c
        j = t - 1
        while j >= 0:
            if total < c:
                y[j] += 1
                total += 1
                break
            total -= y[j]
            y[j] = 0
            j -= 1
    B = c * t
    beta = np.zeros(m, dtype=np.int64)
    for idx in range(m):
        b = 0
        for j in range(t):
            b += (j + 1) * lex[idx, j]
        beta[idx] = b
    start = np.zeros(B + 2, dtype=np.int64)
    for idx in range(m):
        start[beta[idx] + 1] += 1
    for b in range(B + 1):
        start[b + 1] += start[b]
    fill = start[:-1].copy()
    inv = np.zeros(m, dtype=np.int64)
    vecs = np.zeros((m, t + 1), dtype=np.int32)
    for idx in range(m):
        sid = fill[beta[idx]]
        fill[beta[idx]] += 1
        inv[idx] = sid
        s = 0
        for j in range(t):
            vecs[sid, j + 1] = lex[idx, j]
            s += lex[idx, j]
        vecs[sid, 0] = c - s
    # pred[id, j]: vector with one copy moved back from slot j to slot j - 1;
    # local[j, id]: its offset inside the previous beta block, xfrom[j, id]: the
    # number of coupons that held j - 1 copies there
    pred = np.full((m, t + 1), -1, dtype=np.int64)
    local = np.full((t + 1, m), -1, dtype=np.int64)
    xfrom = np.zeros((t + 1, m), dtype=np.int32)
    z = np.zeros(t + 1, dtype=np.int32)
    # Within a beta block the vectors with a fixed prefix (y_1..y_{t-2}) are
    # consecutive, and y_{t-1} steps by t through them starting at the residue
    # (-B') mod t, where B' is the beta left after the prefix.  A table of
    # prefix starts then locates any vector without searching.
    radix = 1
    for _ in range(t - 2):
        radix *= c + 1
    use_prefix = (B + 1) * radix <= prefix_limit
    if use_prefix:
        first = np.full((B + 1) * radix, -1, dtype=np.int64)
        for sid in range(m):
            key = _prefix_key(vecs, sid, beta_of(vecs, sid, t), t, c)
            if first[key] < 0:
                first[key] = sid
    for sid in range(m):
        b = beta_of(vecs, sid, t)
        for j in range(1, t + 1):
            if vecs[sid, j] > 0:
                z[:] = vecs[sid, :]
                z[j] -= 1
                z[j - 1] += 1
                if use_prefix:
                    a = _locate(first, z, b - 1, t, c)
                else:
                    a = inv[_lex_rank(z[1:], c, t, C)]
                pred[sid, j] = a
                local[j, sid] = a - start[b - 1]
                xfrom[j, sid] = z[j - 1]
    return vecs, start, pred, local, xfrom


@numba.njit(**_JIT)
def _add(s, c, x):
    # branch-free TwoSum; the rounding error of s + x goes into c
    u = s + x
    bp = u - s
    c += (s - (u - bp)) + (x - bp)
    return u, c


@numba.njit(**_JIT)
def _first(g0, beta, pos, rem, G, starts, Bmax_g, Nt):
    for g in range(g0, G):
        r = rem[g]
        top = min(Bmax_g[g], r)
        for b in range(top + 1):
            if starts[g, b + 1] > starts[g, b] and Nt[g + 1, r - b] > 0:
                beta[g] = b
                break
        pos[g] = 0
        if g + 1 < G:
            rem[g + 1] = r - beta[g]


@numba.njit(**_JIT)
def _next(beta, pos, rem, G, starts, Bmax_g, Nt):
    g = G - 1
    while g >= 0:
        b = beta[g]
        if pos[g] + 1 < starts[g, b + 1] - starts[g, b]:
            pos[g] += 1
            _first(g + 1, beta, pos, rem, G, starts, Bmax_g, Nt)
            return True
        r = rem[g]
        top = min(Bmax_g[g], r)
        for nb in range(b + 1, top + 1):
            if starts[g, nb + 1] > starts[g, nb] and Nt[g + 1, r - nb] > 0:
                beta[g] = nb
                pos[g] = 0
                if g + 1 < G:
                    rem[g + 1] = r - nb
                _first(g + 1, beta, pos, rem, G, starts, Bmax_g, Nt)
                return True
        g -= 1
    return False


@numba.njit(**_JIT)
def _run(vecs, goff, starts, preds, lpred, lnum, lcnt, Bmax_g, Nt, Off, q, sizes, n, k, t,
         max_layer, uniform, cap):
    G = sizes.shape[0]
    last = G - 1
    npre = G - 1
    beta = np.zeros(G, dtype=np.int64)
    pos = np.zeros(G, dtype=np.int64)
    rem = np.zeros(G, dtype=np.int64)
    term = np.zeros(G, dtype=np.int64)
    shifted = np.zeros(G, dtype=np.int64)
    # predecessors through a move in a leading group sit at rank base + pos_last
    src_base = np.zeros(G * t, dtype=np.int64)
    src_num = np.zeros(G * t)
    qL = q[last]
    cL = sizes[last]
    oL = goff[last]

    # Layer columns, each already divided by the state's escape probability
    # (by its open-coupon count when uniform): reach probability P,
    # D1 = U1 + P*h1 and D2 = U2 + 2*U1*h1 + P*h2.  An edge then contributes
    # numerator * column.  Unreached and terminal slots hold zeros.
    widest = 1
    for rr in range(max_layer + 1):
        widest = max(widest, Nt[0, rr])
    LP, L1, L2 = np.zeros(widest), np.zeros(widest), np.zeros(widest)
    NP, N1, N2 = np.zeros(widest), np.zeros(widest), np.zeros(widest)
    if uniform:
        inv = 1.0 / n
        LP[0], L1[0], L2[0] = inv, inv, inv
    else:
        e, ce = 0.0, 0.0
        for g in range(G):
            e, ce = _add(e, ce, sizes[g] * q[g])
        e += ce
        h1 = 1.0 / e
        LP[0], L1[0], L2[0] = h1, h1 * h1, (2.0 - e) * h1 * h1 * h1

    bw = 1
    for b in range(Bmax_g[last] + 1):
        bw = max(bw, starts[last, b + 1] - starts[last, b])
    bP, b1, b2 = np.zeros(bw), np.zeros(bw), np.zeros(bw)

    E, cE, E2, cE2, M, cM = 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    states = 1
    edges = 0
    layers = 0
    worst = 0.0
    n_live = 1
    r = 0
    while n_live > 0 and r < max_layer:
        R = r + 1
        n_live = 0
        LM, cLM = 0.0, 0.0

        rem[0] = R
        if npre > 0:
            _first(0, beta, pos, rem, npre, starts, Bmax_g, Nt)
        rank0 = 0
        while True:
            # leading groups are fixed inside a block; only the last group varies
            head = 0
            pre_done = 0
            pe, pce = 0.0, 0.0
            for g in range(npre):
                rg = rem[g]
                bg = beta[g]
                term[g] = Off[g, rg, bg] + pos[g] * Nt[g + 1, rg - bg]
                shifted[g] = head
                if rg - 1 >= bg:
                    head += Off[g, rg - 1, bg] + pos[g] * Nt[g + 1, rg - 1 - bg]
                vid = goff[g] + starts[g, bg] + pos[g]
                pre_done += vecs[vid, t]
                if not uniform:
                    pe, pce = _add(pe, pce, (sizes[g] - vecs[vid, t]) * q[g])
            bL = R if npre == 0 else rem[npre - 1] - beta[npre - 1]
            nsrc = 0
            # leading-group predecessors that keep / lose one complete coupon
            lead_keep = 0
            lead_drop = 0
            tail = 0
            for g in range(npre - 1, -1, -1):
                tail_g = tail
                tail += term[g]
                bg = beta[g]
                if bg == 0:
                    continue
                rg = rem[g]
                lead = shifted[g] + Off[g, rg - 1, bg - 1] + tail_g
                stride = Nt[g + 1, rg - bg]
                first_a = starts[g, bg - 1]
                vid = goff[g] + starts[g, bg] + pos[g]
                for j in range(t, 0, -1):
                    a = preds[vid, j]
                    if a >= 0:
                        src_base[nsrc] = lead + (a - first_a) * stride
                        src_num[nsrc] = vecs[goff[g] + a, j - 1] * q[g]
                        nsrc += 1
                        if j == t:
                            lead_drop += 1
                        else:
                            lead_keep += 1
            firstL = starts[last, bL]
            width = starts[last, bL + 1] - firstL
            vid0 = oL + firstL

            for p in range(width):
                bP[p] = 0.0
                b1[p] = 0.0
                b2[p] = 0.0
            # sources in canonical (group, slot) order; they were stored reversed
            for e_i in range(nsrc - 1, -1, -1):
                base = src_base[e_i]
                num = src_num[e_i]
                sP = LP[base:base + width]
                s1 = L1[base:base + width]
                s2 = L2[base:base + width]
                for p in range(width):
                    bP[p] += num * sP[p]
                    b1[p] += num * s1[p]
                    b2[p] += num * s2[p]
            if bL >= 1:
                for j in range(1, t + 1):
                    for p in range(width):
                        o = lpred[j, firstL + p]
                        if o >= 0:
                            i = head + o
                            w = lnum[j, firstL + p]
                            bP[p] += w * LP[i]
                            b1[p] += w * L1[i]
                            b2[p] += w * L2[i]

            for p in range(width):
                rank = rank0 + p
                done = pre_done + vecs[vid0 + p, t]
                # a predecessor was expanded iff it had fewer than k complete
                # coupons; those reached through slot t had one fewer
                hits = 0
                if done < k:
                    hits += lead_keep + lcnt[0, firstL + p]
                if done <= k:
                    hits += lead_drop + lcnt[1, firstL + p]
                if hits == 0 or done >= k:
                    NP[rank] = 0.0
                    N1[rank] = 0.0
                    N2[rank] = 0.0
                    if hits == 0:
                        continue
                edges += hits
                states += 1
                vP = bP[p]
                v1 = b1[p]
                v2 = b2[p]
                if done >= k:
                    E, cE = _add(E, cE, v1)
                    E2, cE2 = _add(E2, cE2, v2)
                    M, cM = _add(M, cM, vP)
                    continue
                n_live += 1
                LM, cLM = _add(LM, cLM, vP)
                if uniform:
                    m = n - done
                    inv = 1.0 / m
                    h1 = n * inv
                    h2 = (n * (2.0 * n - m)) * (inv * inv)
                else:
                    e, ce = _add(pe, pce, (cL - vecs[vid0 + p, t]) * qL)
                    e += ce
                    inv = 1.0 / e
                    h1 = inv
                    h2 = (2.0 - e) * inv * inv
                NP[rank] = vP * inv
                N1[rank] = (v1 + vP * h1) * inv
                N2[rank] = (v2 + 2.0 * v1 * h1 + vP * h2) * inv
            rank0 += width
            if npre == 0 or not _next(beta, pos, rem, npre, starts, Bmax_g, Nt):
                break
        layers += 1
        err = abs((LM + cLM) + (M + cM) - 1.0)
        if err > worst:
            worst = err
        LP, NP = NP, LP
        L1, N1 = N1, L1
        L2, N2 = N2, L2
        r = R
        if states > cap:
            return E + cE, E2 + cE2, M + cM, states, edges, layers, worst, 1
    return E + cE, E2 + cE2, M + cM, states, edges, layers, worst, 0


@numba.njit(**_JIT)
def _layer_tables(counts, t, max_layer):
    """Suffix counts ``N`` and prefix offsets ``Off``.

    ``counts[g, b]`` is the number of group-g vectors with tracked count b.
    A float64 shadow of ``N`` flags values too large for int64.
    """
    G = counts.shape[0]
    R = max_layer
    Bw = counts.shape[1]
    N = np.zeros((G + 1, R + 1), dtype=np.int64)
    approx = np.zeros((G + 1, R + 1))
    N[G, 0] = 1
    approx[G, 0] = 1.0
    Off = np.zeros((G, R + 1, Bw + 1), dtype=np.int64)
    for g in range(G - 1, -1, -1):
        for r in range(R + 1):
            acc = 0
            fac = 0.0
            top = min(Bw - 1, r)
            for b in range(top + 1):
                Off[g, r, b] = acc
                acc += counts[g, b] * N[g + 1, r - b]
                fac += counts[g, b] * approx[g + 1, r - b]
            for b in range(top + 1, Bw + 1):
                Off[g, r, b] = acc
            N[g, r] = acc
            approx[g, r] = fac
    return N, Off, approx.max()


_TABLE_CACHE: dict = {}


def _tables_for(c: int, t: int):
    key = (c, t)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = _group_tables(c, t, _PREFIX_TABLE_LIMIT)
        if len(_TABLE_CACHE) > 64:
            _TABLE_CACHE.pop(next(iter(_TABLE_CACHE)))
    return _TABLE_CACHE[key]


def solve_grouped_dense(
    problem: Problem,
    decomposition: GroupDecomposition,
    *,
    engine: str,
    state_cap: int,
) -> SolveResult:
    started = time.perf_counter()
    t, k, n = problem.t, problem.k, problem.n
    sizes = decomposition.sizes
    uniform = decomposition.G == 1
    max_layer = problem.max_layer

    tables = [_tables_for(c, t) for c in sizes]
    Bmax = max(c * t for c in sizes)
    counts = np.zeros((len(sizes), Bmax + 1), dtype=np.int64)
    for g, tab in enumerate(tables):
        counts[g, : tab[1].shape[0] - 1] = np.diff(tab[1])
    Nt, Off, biggest = _layer_tables(counts, t, max_layer)
    if biggest >= 2.0**62:
        raise Overflow(f"layer index space of about {biggest:.3g} slots does not fit in int64",
                       None, state_cap)
    widest = int(Nt[0].max())
    if widest > state_cap:
        raise Overflow(
            f"a single layer spans {widest} slots, above the cap of {state_cap}",
            widest, state_cap,
        )

    goff = np.zeros(len(sizes), dtype=np.int64)
    for g in range(1, len(sizes)):
        goff[g] = goff[g - 1] + tables[g - 1][0].shape[0]
    vecs = np.concatenate([tab[0] for tab in tables])
    preds = np.concatenate([tab[2] for tab in tables])
    starts = np.zeros((len(sizes), Bmax + 2), dtype=np.int64)
    for g, tab in enumerate(tables):
        s = tab[1]
        starts[g, : s.shape[0]] = s
        starts[g, s.shape[0]:] = s[-1]
    # last group: predecessor offsets inside the previous block and their numerators
    lpred = tables[-1][3]
    lnum = tables[-1][4].astype(np.float64)
    if not uniform:
        lnum *= decomposition.q[-1]
    # per last-group vector: predecessors through slots 1..t-1, and through slot t
    lcnt = np.stack([(lpred[1:t] >= 0).sum(axis=0), lpred[t] >= 0]).astype(np.int64)

    E, E2, mass, states, edges, layers, worst, status = _run(
        vecs, goff, starts, preds, lpred, lnum, lcnt,
        np.array([c * t for c in sizes], dtype=np.int64),
        Nt, Off,
        np.array(decomposition.q, dtype=np.float64),
        np.array(sizes, dtype=np.int64),
        n, k, t, max_layer, uniform, state_cap,
    )
    if status == 1:
        raise Overflow(f"expanded {states} states, above the cap of {state_cap}",
                       states, state_cap)
    diagnostics = {
        "backend": "dense",
        "representation": "multiplicity" if engine == "UDA" else "grouped",
        "max_conservation_error": worst,
        "groups": decomposition.G,
    }
    return _finish(engine, E, E2, mass, int(states), int(edges), int(layers), started,
                   diagnostics)


def warm_up() -> None:
    """Compile the kernels on a tiny instance."""
    from .model import validate_problem

    p = validate_problem(2, 2, 1, [0.75, 0.25])
    solve_grouped_dense(p, GroupDecomposition(((0.75, 1), (0.25, 1))), engine="DPSA",
                        state_cap=100)
    p = validate_problem(2, 2, 1)
    solve_grouped_dense(p, GroupDecomposition(((0.5, 2),)), engine="UDA", state_cap=100)
