"""Flow problems on top of the two-party IPM.

Demands follow the supply convention ``d_v = outflow(v) - inflow(v)``.  The
incidence row of arc (a, b) has -1 at a and +1 at b, so ``A^T f`` is
inflow minus outflow and the LP right-hand side is ``-d``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from commflow import ipm, numerics
from commflow.commsim import Channel, Party, RowPartition

log = logging.getLogger(__name__)


class FlowError(Exception):
    pass


class RetryExhaustedError(FlowError):
    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts


@dataclass
class FlowNetwork:
    n: int
    tails: np.ndarray
    heads: np.ndarray
    caps: np.ndarray
    costs: np.ndarray
    owners: list = None
    demands: np.ndarray = None

    def __post_init__(self):
        self.tails = np.asarray(self.tails, dtype=np.int64).reshape(-1)
        self.heads = np.asarray(self.heads, dtype=np.int64).reshape(-1)
        m = len(self.tails)
        self.caps = np.asarray(self.caps, dtype=np.int64).reshape(m) if m else np.zeros(0, dtype=np.int64)
        self.costs = np.asarray(self.costs).reshape(m) if m else np.zeros(0, dtype=np.int64)
        if self.owners is None:
            self.owners = [Party.ALICE] * m
        self.owners = [Party(o) for o in self.owners]
        if self.demands is None:
            self.demands = np.zeros(self.n, dtype=np.int64)
        self.demands = np.asarray(self.demands).reshape(self.n)
        if len(self.heads) != m or len(self.owners) != m:
            raise ValueError("arc arrays differ in length")
        if m and (self.tails.min() < 0 or self.heads.min() < 0 or max(self.tails.max(), self.heads.max()) >= self.n):
            raise ValueError("arc endpoint out of range")
        if np.any(self.caps < 0):
            raise ValueError("negative capacity")

    @property
    def m(self) -> int:
        return len(self.tails)

    @classmethod
    def from_edges(cls, n, edges, demands=None):
        """``edges``: iterable of (tail, head, cap, cost[, owner])."""
        edges = list(edges)
        owners = [e[4] if len(e) > 4 else Party.ALICE for e in edges]
        cols = list(zip(*[e[:4] for e in edges])) if edges else [[], [], [], []]
        return cls(n, cols[0], cols[1], cols[2], cols[3], owners, demands)

    @property
    def W(self) -> int:
        """Largest magnitude among costs, demands and capacities (at least 1)."""
        vals = [1]
        for arr in (self.costs, self.demands, self.caps):
            if len(arr):
                vals.append(float(np.max(np.abs(arr))))
        return int(math.ceil(max(vals)))

    def with_costs(self, costs) -> "FlowNetwork":
        return FlowNetwork(self.n, self.tails, self.heads, self.caps, costs, list(self.owners), self.demands.copy())

    def cost_of(self, f) -> float:
        return float(np.dot(self.costs, f))

    def excess(self, f) -> np.ndarray:
        """outflow - inflow for each vertex."""
        f = np.asarray(f)
        ex = np.zeros(self.n, dtype=f.dtype)
        np.add.at(ex, self.tails, f)
        np.subtract.at(ex, self.heads, f)
        return ex

    def is_feasible(self, f) -> bool:
        f = np.asarray(f)
        if np.any(f < 0) or np.any(f > self.caps):
            return False
        return bool(np.all(self.excess(f) == self.demands))


@dataclass
class FlowSolution:
    f: np.ndarray
    feasible: bool
    cost: float
    flow_value: float | None = None
    iterations: int = 0
    attempts: int = 0
    info: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "flow": [int(v) for v in self.f] if self.f is not None else None,
            "feasible": self.feasible,
            "cost": self.cost,
            "flow_value": self.flow_value,
            "iterations": self.iterations,
            "attempts": self.attempts,
            "total_bits": self.info.get("total_bits"),
        }


# ---------------------------------------------------------------------------
# incidence LP


def components(net: FlowNetwork):
    """Weakly connected components over arcs with positive capacity."""
    parent = list(range(net.n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b, u in zip(net.tails, net.heads, net.caps):
        if u > 0:
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(v) for v in range(net.n)])


@dataclass
class IncidenceLP:
    lp: ipm.DistributedLP
    arcs: np.ndarray
    columns: np.ndarray
    fixed: np.ndarray
    feasible: bool


def incidence_lp(net: FlowNetwork, costs=None, ground: bool = True) -> IncidenceLP:
    """min c^T f, A^T f = -d, 0 <= f <= u with one row per arc.

    With ``ground`` the arcs that cannot carry flow (zero capacity,
    self-loops) are set aside in ``fixed`` and one vertex column per
    component is dropped so that A has full column rank.  ``feasible`` is
    False when some component's demands do not sum to zero.
    """
    costs = np.asarray(net.costs if costs is None else costs, dtype=float)
    m, n = net.m, net.n
    fixed = np.zeros(m)
    loops = net.tails == net.heads
    fixed[loops] = np.where(costs[loops] < 0, net.caps[loops], 0)
    if ground:
        arcs = np.flatnonzero((net.caps > 0) & ~loops)
        comp = components(net)
        roots = np.unique(comp)
        columns = np.array([v for v in range(n) if comp[v] != v], dtype=int)
        feasible = all(int(np.sum(net.demands[comp == r])) == 0 for r in roots)
    else:
        arcs = np.arange(m)
        columns = np.arange(n)
        feasible = int(np.sum(net.demands)) == 0
    colpos = -np.ones(n, dtype=int)
    colpos[columns] = np.arange(len(columns))
    A = np.zeros((len(arcs), len(columns)))
    for row, e in enumerate(arcs):
        a, b = net.tails[e], net.heads[e]
        if colpos[a] >= 0:
            A[row, colpos[a]] -= 1.0
        if colpos[b] >= 0:
            A[row, colpos[b]] += 1.0
    b = -np.asarray(net.demands, dtype=float)[columns]
    owners = RowPartition([net.owners[e] for e in arcs])
    W = net.W
    L = max(1, int(math.ceil(math.log2(W + 1))))
    lp = ipm.DistributedLP(A, b, costs[arcs], np.zeros(len(arcs)), net.caps[arcs].astype(float), owners, L)
    return IncidenceLP(lp, arcs, columns, fixed, feasible)


def condition_bound_check(net: FlowNetwork):
    """Exact condition number of the incidence matrix and n sqrt(2n).

    kappa is the ratio of the largest to the smallest nonzero singular
    value; for a disconnected graph the zero singular values of every
    component are ignored.
    """
    A = np.zeros((net.m, net.n))
    for row, (a, b) in enumerate(zip(net.tails, net.heads)):
        if a != b:
            A[row, a] = -1.0
            A[row, b] = 1.0
    n = net.n
    bound = n * math.sqrt(2 * n)
    if net.m == 0 or not np.any(A):
        return 1.0, bound
    sv = np.linalg.svd(A, compute_uv=False)
    nz = sv[sv > 1e-9 * sv.max()]
    return float(nz.max() / nz.min()), bound


# ---------------------------------------------------------------------------
# perturbation and certificates


def perturbation_grid(m: int, W: int) -> np.ndarray:
    """{k / (4 m^2 W^2) : k = 1 .. 2 m W}."""
    if m == 0:
        return np.zeros(0)
    return np.arange(1, 2 * m * W + 1) / (4.0 * m * m * W * W)


def perturb_costs(net: FlowNetwork, rng: np.random.Generator, W: int | None = None) -> FlowNetwork:
    """c'_e = c_e + z_e, z_e uniform on the isolation grid."""
    W = net.W if W is None else W
    m = net.m
    if m == 0:
        return net.with_costs(np.zeros(0))
    k = rng.integers(1, 2 * m * W + 1, size=m)
    z = k / (4.0 * m * m * W * W)
    return net.with_costs(np.asarray(net.costs, dtype=float) + z)


def negative_cycle(net: FlowNetwork, f) -> list | None:
    """A residual cycle of negative original cost, or None (Bellman-Ford)."""
    f = np.asarray(f)
    arcs = []
    for e, (a, b, u, c) in enumerate(zip(net.tails, net.heads, net.caps, net.costs)):
        if a == b:
            continue
        if f[e] < u:
            arcs.append((int(a), int(b), float(c), e))
        if f[e] > 0:
            arcs.append((int(b), int(a), -float(c), e))
    n = net.n
    dist = [0.0] * n
    pred = [None] * n
    last = None
    for _ in range(n):
        last = None
        for a, b, c, e in arcs:
            if dist[a] + c < dist[b] - 1e-9:
                dist[b] = dist[a] + c
                pred[b] = (a, e)
                last = b
        if last is None:
            return None
    v = last
    for _ in range(n):
        v = pred[v][0]
    cycle, w = [], v
    while True:
        a, e = pred[w]
        cycle.append(e)
        w = a
        if w == v:
            break
    return cycle


def loop_optimal(net: FlowNetwork, f) -> bool:
    loops = net.tails == net.heads
    want = np.where(np.asarray(net.costs)[loops] < 0, net.caps[loops], 0)
    ok = np.asarray(f)[loops] == want
    ok |= np.asarray(net.costs)[loops] == 0
    return bool(np.all(ok))


# ---------------------------------------------------------------------------
# min-cost flow


def _run_ipm(inc: IncidenceLP, W, constants, mode, channel, mu_exponent, check_every):
    lp = inc.lp
    m = lp.m
    c1 = max(float(np.sum(np.abs(lp.c))), 1.0)
    xi = float(np.max(lp.u))
    eps = constants.eps if constants is not None else ipm.StepConstants.practical(m + lp.n, max(lp.n, 1)).eps
    # pick delta' so that mu_init = 100 m^2 W^3 / eps
    delta_prime = 8.0 * c1 * xi / (100.0 * m * W**3)
    mod = ipm.build_modified_lp(lp, eps=eps, delta_prime=delta_prime, channel=channel if mode == "two_party" else None)
    if constants is None:
        constants = ipm.StepConstants.practical(mod.lp.m, mod.lp.n, eps=eps)
    mu_target = float(m * W) ** (-mu_exponent)
    rng = channel.stream("ipm") if channel is not None else np.random.default_rng(0)
    out = ipm.path_following(mod.lp, mod.initial, mu_target, constants, mode, channel, rng, check_every=check_every)
    return mod, out


def mincost_flow(
    net: FlowNetwork,
    channel: Channel | None = None,
    retries: int | None = None,
    *,
    mode: str = "sequential",
    seed: int = 0,
    constants: ipm.StepConstants | None = None,
    mu_exponent: float = 2.0,
    check_every: int = 0,
) -> FlowSolution:
    """Exact min-cost flow: perturb, solve the LP, round, certify.

    ``retries`` defaults to ceil(log2 n) + 3 fresh perturbations.  An
    infeasible demand vector is reported through ``feasible=False``.
    """
    if retries is None:
        retries = max(1, math.ceil(math.log2(max(net.n, 2)))) + 3
    m = net.m
    W = net.W
    inc0 = incidence_lp(net)
    if not inc0.feasible:
        return FlowSolution(None, False, math.inf, info={"reason": "demand sums", "total_bits": _bits(channel)})
    if len(inc0.arcs) == 0 or inc0.lp.n == 0:
        f = inc0.fixed.astype(np.int64)
        if len(inc0.arcs) == 0 and np.any(net.demands != 0):
            return FlowSolution(None, False, math.inf, info={"reason": "no arcs", "total_bits": _bits(channel)})
        if len(inc0.arcs):
            f[inc0.arcs] = np.where(np.asarray(net.costs)[inc0.arcs] < 0, net.caps[inc0.arcs], 0)
        return FlowSolution(f, True, net.cost_of(f), attempts=0, info={"total_bits": _bits(channel)})
    rng = None if channel is not None else np.random.default_rng(seed)
    failures = []
    iterations = 0
    for attempt in range(1, retries + 1):
        stream = channel.stream(f"perturb:{attempt}") if channel is not None else rng
        pert = perturb_costs(net, stream, W)
        inc = incidence_lp(pert)
        try:
            mod, out = _run_ipm(inc, W, constants, mode, channel, mu_exponent, check_every)
        except (ipm.IPMError, numerics.NumericsError, np.linalg.LinAlgError) as exc:
            log.info("attempt %d: IPM failed: %s", attempt, exc)
            failures.append(f"ipm: {exc}")
            continue
        iterations += out.info.get("iterations", 0)
        k = len(inc.arcs)
        aux = out.x[k:]
        if aux.size and float(np.max(np.abs(aux))) * mod.beta >= 0.1:
            return FlowSolution(None, False, math.inf, iterations=iterations, attempts=attempt, info={"reason": "auxiliary flow", "aux_inf": float(np.max(np.abs(aux)) * mod.beta), "total_bits": _bits(channel)})
        x = out.x[:k]
        f = inc.fixed.copy()
        f[inc.arcs] = x
        distance = float(np.max(np.abs(f - np.rint(f)), initial=0.0))
        fr = np.rint(f).astype(np.int64)
        if channel is not None:
            _announce_rounding(channel, net, fr)
        if not net.is_feasible(fr):
            failures.append(f"rounded flow infeasible (distance {distance:.3g})")
            continue
        if negative_cycle(net, fr) is not None or not loop_optimal(net, fr):
            failures.append(f"rounded flow not optimal (distance {distance:.3g})")
            continue
        return FlowSolution(fr, True, net.cost_of(fr), iterations=iterations, attempts=attempt, info={"round_distance": distance, "failures": failures, "total_bits": _bits(channel)})
    raise RetryExhaustedError(f"no certified optimum after {retries} perturbations: {failures[-1] if failures else ''}", retries)


def _announce_rounding(channel: Channel, net: FlowNetwork, f):
    # each party ships its conservation totals so both can check feasibility
    for party in (Party.ALICE, Party.BOB):
        mask = np.array([o is party for o in net.owners], dtype=bool)
        if not mask.any():
            continue
        ex = np.zeros(net.n)
        np.add.at(ex, net.tails[mask], f[mask])
        np.subtract.at(ex, net.heads[mask], f[mask])
        channel.send(party, Party.COORDINATOR, "round", ex)


def _bits(channel):
    return channel.transcript.total_bits if channel is not None else None


# ---------------------------------------------------------------------------
# max flow


@dataclass
class MaxflowReduction:
    network: FlowNetwork
    F: int
    extra: int

    def value(self, f) -> int:
        return int(self.F - int(f[self.extra]))

    def edge_flows(self, f) -> np.ndarray:
        return np.asarray(f)[: self.extra]


def maxflow_reduce(net: FlowNetwork, s: int, t: int, bound: str = "sum") -> MaxflowReduction:
    """Append e' = (s, t) with capacity F and cost 1; others cost 0.

    ``bound="sum"`` takes F = sum of all capacities; ``"cut"`` takes the
    smaller of the capacity leaving s and the capacity entering t, which
    still bounds the max flow and keeps W small.
    """
    if s == t:
        raise ValueError("source equals sink")
    if bound == "sum":
        F = int(np.sum(net.caps))
    elif bound == "cut":
        proper = net.tails != net.heads
        F = int(min(np.sum(net.caps[proper & (net.tails == s)]), np.sum(net.caps[proper & (net.heads == t)])))
    else:
        raise ValueError(f"unknown bound {bound!r}")
    tails = np.append(net.tails, s)
    heads = np.append(net.heads, t)
    caps = np.append(net.caps, F)
    costs = np.append(np.zeros(net.m, dtype=np.int64), 1)
    d = np.zeros(net.n, dtype=np.int64)
    d[s] += F
    d[t] -= F
    red = FlowNetwork(net.n, tails, heads, caps, costs, list(net.owners) + [Party.ALICE], d)
    return MaxflowReduction(red, F, net.m)


def residual_network(net: FlowNetwork, f, delta: int):
    """G_f(delta) with capacities floor(min(r, 2 m delta) / delta).

    Returns the network and, per residual arc, (original arc, +1 | -1).
    """
    m = net.m
    tails, heads, caps, owners, origin = [], [], [], [], []
    for e in range(m):
        a, b = int(net.tails[e]), int(net.heads[e])
        if a == b:
            continue
        for r, x, y, sign in ((net.caps[e] - f[e], a, b, 1), (f[e], b, a, -1)):
            if r < 0:
                raise FlowError("negative residual capacity")
            if r >= delta:
                tails.append(x)
                heads.append(y)
                caps.append(min(int(r), 2 * m * delta) // delta)
                owners.append(net.owners[e])
                origin.append((e, sign))
    g = FlowNetwork(net.n, tails, heads, caps, np.zeros(len(tails), dtype=np.int64), owners)
    return g, origin


def maxflow_scaling(
    net: FlowNetwork,
    s: int,
    t: int,
    channel: Channel | None = None,
    *,
    mode: str = "sequential",
    seed: int = 0,
    constants: ipm.StepConstants | None = None,
    mu_exponent: float = 2.0,
    retries: int | None = None,
    inner=None,
    bound: str = "cut",
) -> FlowSolution:
    """Capacity scaling: one small-capacity max flow per level delta.

    ``inner(network, s, t)`` solves a single level and returns integral arc
    flows; by default it runs ``maxflow_reduce`` plus ``mincost_flow``.
    """
    if s == t:
        raise ValueError("source equals sink")
    f = np.zeros(net.m, dtype=np.int64)
    U = int(np.max(net.caps)) if net.m else 0
    levels = []
    attempts = 0
    iterations = 0
    if U > 0:
        delta = 1 << (U.bit_length() - 1)
        level = 0
        while delta >= 1:
            g, origin = residual_network(net, f, delta)
            if inner is not None:
                fp = np.asarray(inner(g, s, t), dtype=np.int64)
                value = None
            else:
                red = maxflow_reduce(g, s, t, bound)
                sol = mincost_flow(red.network, channel, retries, mode=mode, seed=seed + 7919 * level, constants=constants, mu_exponent=mu_exponent)
                if not sol.feasible:
                    raise FlowError(f"reduced network infeasible at delta {delta}")
                attempts += sol.attempts
                iterations += sol.iterations
                fp = red.edge_flows(sol.f)
                value = red.value(sol.f)
            for (e, sign), v in zip(origin, fp):
                f[e] += sign * delta * int(v)
            if np.any(f < 0) or np.any(f > net.caps):
                raise FlowError("scaling step produced an infeasible flow")
            levels.append({"delta": delta, "arcs": g.m, "value": value})
            delta //= 2
            level += 1
    value = int(np.sum(f[net.heads == t]) - np.sum(f[net.tails == t]))
    return FlowSolution(f, True, 0.0, flow_value=value, iterations=iterations, attempts=attempts, info={"levels": levels, "rounds": len(levels), "total_bits": _bits(channel)})
