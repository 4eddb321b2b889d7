"""Seeded instance generators shared by the test modules."""

import numpy as np

from commflow import flow, ipm
from commflow.commsim import Party, RowPartition


def random_box_lp(seed, n=None, m=None, L=8):
    """Feasible box LP with integer data and a full-column-rank A."""
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(n + 1, 25))
    A = rng.integers(-5, 6, (m, n)).astype(float)
    while np.linalg.matrix_rank(A) < n:
        A = rng.integers(-5, 6, (m, n)).astype(float)
    lo = rng.integers(-5, 1, m).astype(float)
    hi = lo + rng.integers(1, 6, m)
    xs = lo + (hi - lo) * rng.random(m)
    b = A.T @ xs
    c = rng.integers(-5, 6, m).astype(float)
    return ipm.DistributedLP(A, b, c, lo, hi, RowPartition.alternating(m), L=L)


def _owners(m):
    return [Party.ALICE if i % 2 else Party.BOB for i in range(m)]


def random_mincost(seed, nmax=12, W=8, negative=False):
    """Random digraph with demands that some flow meets, all data <= W."""
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(2, nmax + 1))
        m = int(rng.integers(1, 3 * n + 1))
        tails = rng.integers(0, n, m)
        heads = rng.integers(0, n, m)
        caps = rng.integers(0, W + 1, m)
        costs = rng.integers(-W if negative else 0, W + 1, m)
        f = np.array([rng.integers(0, u + 1) for u in caps])
        net = flow.FlowNetwork(n, tails, heads, caps, costs, _owners(m))
        d = net.excess(f)
        if np.abs(d).max() <= W:
            return flow.FlowNetwork(n, tails, heads, caps, costs, _owners(m), d)


def random_maxflow(seed, nmax=12, U=64):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, nmax + 1))
    m = int(rng.integers(1, 3 * n + 1))
    tails = rng.integers(0, n, m)
    heads = rng.integers(0, n, m)
    caps = rng.integers(0, U + 1, m)
    net = flow.FlowNetwork(n, tails, heads, caps, np.zeros(m, dtype=np.int64), _owners(m))
    return net, 0, n - 1


def random_connected(seed, nmax=20):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, nmax + 1))
    order = rng.permutation(n)
    edges = [(int(order[i]), int(order[int(rng.integers(0, i))])) for i in range(1, n)]
    extra = int(rng.integers(0, 2 * n))
    edges += [(int(a), int(b)) for a, b in rng.integers(0, n, (extra, 2)) if a != b]
    tails, heads = zip(*edges)
    return flow.FlowNetwork(n, tails, heads, np.ones(len(edges), dtype=np.int64), np.zeros(len(edges), dtype=np.int64))
