"""Exact reference solvers used by the tests.

Nothing here imports the IPM or the flow reductions; integral problems are
solved with integer arithmetic and the tiny-LP oracle with fractions.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class OracleError(Exception):
    pass


@dataclass
class OracleResult:
    optimum: object
    witness: object
    method: str
    feasible: bool = True


def _edges(net):
    return [(int(e[0]), int(e[1]), int(e[2]), int(e[3])) for e in zip(net.tails, net.heads, net.caps, net.costs)]


# ---------------------------------------------------------------------------
# max flow


def oracle_maxflow(net, s: int, t: int) -> OracleResult:
    """Edmonds-Karp on the arc list (parallel and antiparallel arcs allowed)."""
    edges = _edges(net)
    n = net.n
    to, cap, adj = [], [], [[] for _ in range(n)]
    for a, b, u, _ in edges:
        adj[a].append(len(to))
        to.append(b)
        cap.append(u)
        adj[b].append(len(to))
        to.append(a)
        cap.append(0)
    value = 0
    if s != t:
        while True:
            parent = [-1] * n
            parent[s] = -2
            queue = deque([s])
            while queue and parent[t] == -1:
                v = queue.popleft()
                for arc in adj[v]:
                    w = to[arc]
                    if cap[arc] > 0 and parent[w] == -1:
                        parent[w] = arc
                        queue.append(w)
            if parent[t] == -1:
                break
            push, v = None, t
            while v != s:
                arc = parent[v]
                push = cap[arc] if push is None else min(push, cap[arc])
                v = to[arc ^ 1]
            v = t
            while v != s:
                arc = parent[v]
                cap[arc] -= push
                cap[arc ^ 1] += push
                v = to[arc ^ 1]
            value += push
    flow = [edges[i][2] - cap[2 * i] for i in range(len(edges))]
    return OracleResult(value, flow, "edmonds-karp")


# ---------------------------------------------------------------------------
# min-cost flow


def oracle_mincost(net) -> OracleResult:
    """Successive shortest paths with Dijkstra potentials.

    Arcs with negative cost are saturated up front and replaced by their
    reverses, so every residual cost starts nonnegative.  Demands use the
    supply convention: d_v = outflow(v) - inflow(v).
    """
    edges = _edges(net)
    n = net.n
    supply = [int(v) for v in net.demands]
    if sum(supply) != 0:
        return OracleResult(None, None, "ssp", feasible=False)
    base = 0
    flow = [0] * len(edges)
    to, cap, cost, adj = [], [], [], [[] for _ in range(n + 2)]

    def add(a, b, u, c):
        adj[a].append(len(to))
        to.append(b)
        cap.append(u)
        cost.append(c)
        adj[b].append(len(to))
        to.append(a)
        cap.append(0)
        cost.append(-c)
        return len(to) - 2

    arcs = []
    for a, b, u, c in edges:
        if a == b:
            if c < 0:
                base += u * c
                arcs.append(("loop", u))
            else:
                arcs.append(("loop", 0))
            continue
        if c < 0:
            base += u * c
            supply[a] -= u
            supply[b] += u
            arcs.append(("rev", add(b, a, u, -c), u))
        else:
            arcs.append(("fwd", add(a, b, u, c)))
    S, T = n, n + 1
    need = 0
    for v in range(n):
        if supply[v] > 0:
            add(S, v, supply[v], 0)
            need += supply[v]
        elif supply[v] < 0:
            add(v, T, -supply[v], 0)
    pot = [0] * (n + 2)
    sent = 0
    total = 0
    while sent < need:
        dist = [None] * (n + 2)
        prev = [-1] * (n + 2)
        dist[S] = 0
        heap = [(0, S)]
        while heap:
            d, v = heapq.heappop(heap)
            if d != dist[v]:
                continue
            for arc in adj[v]:
                if cap[arc] <= 0:
                    continue
                w = to[arc]
                nd = d + cost[arc] + pot[v] - pot[w]
                if dist[w] is None or nd < dist[w]:
                    dist[w] = nd
                    prev[w] = arc
                    heapq.heappush(heap, (nd, w))
        if dist[T] is None:
            return OracleResult(None, None, "ssp", feasible=False)
        for v in range(n + 2):
            if dist[v] is not None:
                pot[v] += dist[v]
        push, v = need - sent, T
        while v != S:
            arc = prev[v]
            push = min(push, cap[arc])
            v = to[arc ^ 1]
        v = T
        while v != S:
            arc = prev[v]
            cap[arc] -= push
            cap[arc ^ 1] += push
            total += push * cost[arc]
            v = to[arc ^ 1]
        sent += push
    for i, arc in enumerate(arcs):
        if arc[0] == "loop":
            flow[i] = arc[1]
        elif arc[0] == "fwd":
            flow[i] = cap[arc[1] ^ 1]
        else:
            flow[i] = arc[2] - cap[arc[1] ^ 1]
    return OracleResult(base + total, flow, "ssp")


# ---------------------------------------------------------------------------
# tiny LPs


def _solve_exact(M, rhs):
    """Gaussian elimination over fractions; None when singular."""
    k = len(M)
    aug = [list(row) + [r] for row, r in zip(M, rhs)]
    for col in range(k):
        piv = next((i for i in range(col, k) if aug[i][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        for i in range(k):
            if i != col and aug[i][col] != 0:
                f = aug[i][col] / aug[col][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
    return [aug[i][k] / aug[i][i] for i in range(k)]


def oracle_lp(lp, max_n: int = 3, max_m: int = 24) -> OracleResult:
    """Exact optimum of min c^T x, A^T x = b, l <= x <= u for tiny instances.

    The dual g(z) = b^T z + sum_i min(l_i t_i, u_i t_i), t = c - A z, is
    concave piecewise linear; when A has full column rank its maximum sits
    on a point where n of the hyperplanes a_i^T z = c_i meet.  Every such
    point is enumerated and g evaluated exactly.  The primal is assumed
    feasible, so max g equals the primal optimum.
    """
    A = np.asarray(lp.A, dtype=float)
    m, n = A.shape
    if n > max_n or m > max_m:
        raise OracleError(f"oracle_lp is limited to n <= {max_n}, m <= {max_m}")
    Af = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in lp.b]
    c = [Fraction(v) for v in lp.c]
    lo = [Fraction(v) for v in lp.l]
    hi = [Fraction(v) for v in lp.u]

    def g(z):
        val = sum((bj * zj for bj, zj in zip(b, z)), Fraction(0))
        for i in range(m):
            t = c[i] - sum((a * zj for a, zj in zip(Af[i], z)), Fraction(0))
            val += min(lo[i] * t, hi[i] * t)
        return val

    if n == 0:
        z = []
        return OracleResult(g(z), z, "dual-vertex")
    if np.linalg.matrix_rank(A) < n:
        raise OracleError("A must have full column rank")
    best, arg = None, None
    for rows in itertools.combinations(range(m), n):
        z = _solve_exact([Af[i] for i in rows], [c[i] for i in rows])
        if z is None:
            continue
        val = g(z)
        if best is None or val > best:
            best, arg = val, z
    return OracleResult(best, arg, "dual-vertex")


# ---------------------------------------------------------------------------
# spectral checks


def loewner_check(A, Atilde, lam: float, rtol: float = 1e-9) -> bool:
    """(1/lam) A^T A <= Atilde^T Atilde <= A^T A via dense eigenvalues."""
    B = np.asarray(A, dtype=float)
    B = B.T @ B
    H = np.asarray(Atilde, dtype=float)
    H = H.T @ H
    scale = max(float(np.linalg.norm(B, 2)), 1e-300)
    lo = np.linalg.eigvalsh(H - B / lam).min()
    hi = np.linalg.eigvalsh(B - H).min()
    return bool(lo >= -rtol * scale and hi >= -rtol * scale)


def incidence_condition(tails, heads, n: int) -> float:
    """sqrt(largest / smallest nonzero eigenvalue) of the graph Laplacian."""
    Lap = np.zeros((n, n))
    for a, b in zip(tails, heads):
        if a == b:
            continue
        Lap[a, a] += 1
        Lap[b, b] += 1
        Lap[a, b] -= 1
        Lap[b, a] -= 1
    ev = np.linalg.eigvalsh(Lap)
    if ev.size == 0 or ev.max() <= 0:
        return 1.0
    nz = ev[ev > 1e-9 * ev.max()]
    return float(np.sqrt(nz.max() / nz.min()))
