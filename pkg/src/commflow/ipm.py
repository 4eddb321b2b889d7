"""Short-step path following for min c^T x s.t. A^T x = b, l <= x <= u.

The rows of ``A`` (and the matching entries of ``c``, ``l``, ``u``, ``x``,
``s``) are split between Alice and Bob.  ``short_step`` runs either
sequentially or as the two-party protocol with a coordinator, in which case
every vector that leaves a party goes through the channel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from commflow import numerics
from commflow.commsim import Channel, Party, RowPartition, charge_protocol_cost

log = logging.getLogger(__name__)

CLAMP = 40.0


class IPMError(Exception):
    pass


class DomainError(IPMError):
    pass


class NotCenteredError(IPMError):
    def __init__(self, message, report=None, iteration=None):
        super().__init__(message)
        self.report = report
        self.iteration = iteration


class StepTooLargeError(IPMError):
    pass


class DegenerateBoxError(IPMError):
    pass


class ResidualError(IPMError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# data


@dataclass
class DistributedLP:
    """min c^T x  s.t.  A^T x = b,  l <= x <= u, with row ownership."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    l: np.ndarray
    u: np.ndarray
    owners: RowPartition = None
    L: int = 32

    def __post_init__(self):
        self.A = numerics.as_dense(self.A)
        m, n = self.A.shape
        self.b = np.asarray(self.b, dtype=float).reshape(n)
        self.c = np.asarray(self.c, dtype=float).reshape(m)
        self.l = np.asarray(self.l, dtype=float).reshape(m)
        self.u = np.asarray(self.u, dtype=float).reshape(m)
        if self.owners is None:
            self.owners = RowPartition.all_alice(m)
        if len(self.owners) != m:
            raise ValueError("row partition does not cover every row")
        if np.any(self.l > self.u):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.A, axis=1).max()) if self.m else 0

    def check_bits(self):
        """Raise if some entry does not fit L integer bits."""
        limit = 2.0 ** self.L
        for name in ("A", "b", "c", "l", "u"):
            arr = getattr(self, name)
            if arr.size and np.max(np.abs(arr)) >= limit:
                raise ValueError(f"entries of {name} exceed the {self.L}-bit range")

    def objective(self, x) -> float:
        return float(self.c @ x)

    def residual(self, x) -> np.ndarray:
        return self.A.T @ x - self.b


@dataclass
class CenteredTriple:
    x: np.ndarray
    s: np.ndarray
    mu: float
    tau: numerics.LewisWeightVector | None = None
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StepConstants:
    """Step-size constants.  ``conforming`` is False once any is overridden."""

    alpha: float
    eps: float
    lam: float
    gamma: float
    r: float
    C: float
    C_norm: float
    C_valid: float
    p: float
    lewis_tol: float = 1e-6
    sketch_c: float = 3.0
    conforming: bool = True

    @classmethod
    def theoretical(cls, m: int, n: int, C: float = 100.0) -> "StepConstants":
        alpha = 1.0 / (4.0 * math.log(4.0 * m / n))
        eps = alpha / C
        lam = C * math.log(C * m / eps**2) / eps
        gamma = eps / (C * lam)
        p = 1.0 - alpha
        C_norm = C / (1.0 - p)
        r = eps * gamma / (C_norm * math.sqrt(n))
        return cls(alpha, eps, lam, gamma, r, C, C_norm, C_norm, p)

    @classmethod
    def practical(cls, m: int, n: int, eps: float = 0.25, r_scale: float = 0.1, lewis_tol: float = 1e-4) -> "StepConstants":
        """Desk-scale constants with the same shape as the theoretical ones.

        ``lam = 1/eps`` and ``gamma = eps^2`` turn the cosh-potential step into
        a (nearly) full Newton step, and ``r = r_scale/sqrt(n)`` keeps the
        sqrt(n) dependence of the iteration count.
        """
        base = cls.theoretical(m, n, C=1.0)
        return replace(
            base,
            eps=eps,
            lam=1.0 / eps,
            gamma=eps * eps,
            r=r_scale / math.sqrt(n),
            C_norm=1.0,
            C_valid=1.0,
            lewis_tol=lewis_tol,
            conforming=False,
        )

    def override(self, **kw) -> "StepConstants":
        return replace(self, conforming=False, **kw)

    @property
    def sketch_factor(self) -> float:
        return math.exp(self.gamma)

    @property
    def primal_threshold(self) -> float:
        return self.eps * self.gamma / self.C_norm


@dataclass
class CenteringReport:
    centrality_norm: float
    dual_residual: float
    primal_residual_weighted: float
    eps: float
    centrality_ok: bool
    dual_ok: bool
    primal_ok: bool

    @property
    def is_centered(self) -> bool:
        return self.centrality_ok and self.dual_ok and self.primal_ok


# ---------------------------------------------------------------------------
# barrier and weights


def barrier(x, l, u):
    """phi, phi', phi'' of -log(x - l) - log(u - x), elementwise."""
    x = np.asarray(x, dtype=float)
    lo = x - l
    hi = u - x
    if np.any(lo <= 0) or np.any(hi <= 0):
        raise DomainError("point outside the open box")
    phi = -np.log(lo) - np.log(hi)
    d1 = -1.0 / lo + 1.0 / hi
    d2 = 1.0 / lo**2 + 1.0 / hi**2
    return phi, d1, d2


def central_weights(lp: DistributedLP, x, constants: StepConstants, warm=None, strict=True) -> numerics.LewisWeightVector:
    """tau(x) = w(phi''(x)^{-1/2} A) with v = (n/m) 1."""
    _, _, d2 = barrier(x, lp.l, lp.u)
    M = lp.A / np.sqrt(d2)[:, None]
    v = np.full(lp.m, lp.n / lp.m)
    return numerics.lewis_weights(M, constants.p, v, tol=constants.lewis_tol, w0=warm, strict=strict)


def ensure_tau(lp, triple: CenteredTriple, constants) -> numerics.LewisWeightVector:
    if triple.tau is None:
        triple.tau = central_weights(lp, triple.x, constants, warm=triple.info.get("warm"))
    return triple.tau


def centrality(lp, triple, constants):
    tau = ensure_tau(lp, triple, constants).w
    _, d1, d2 = barrier(triple.x, lp.l, lp.u)
    return (triple.s + triple.mu * tau * d1) / (triple.mu * tau * np.sqrt(d2))


def potential(y, lam) -> float:
    return float(np.sum(np.cosh(np.clip(lam * y, -CLAMP, CLAMP))))


def potential_gradient(y, lam):
    """grad of sum cosh(lam y) with lam*y clamped to +-40; returns (grad, clamps)."""
    z = lam * np.asarray(y, dtype=float)
    clamps = int(np.count_nonzero(np.abs(z) > CLAMP))
    if clamps:
        log.warning("clamped %d potential arguments", clamps)
    return lam * np.sinh(np.clip(z, -CLAMP, CLAMP)), clamps


def check_centered(lp: DistributedLP, triple: CenteredTriple, eps: float | None = None, constants: StepConstants | None = None) -> CenteringReport:
    """Evaluate the three centering conditions at level ``eps``."""
    if constants is None:
        constants = StepConstants.practical(lp.m, lp.n)
    if eps is None:
        eps = constants.eps
    tau = ensure_tau(lp, triple, constants).w
    _, d1, d2 = barrier(triple.x, lp.l, lp.u)
    y = (triple.s + triple.mu * tau * d1) / (triple.mu * tau * np.sqrt(d2))
    cnorm = float(np.max(np.abs(y))) if y.size else 0.0
    rhs = lp.c - triple.s
    if lp.n:
        z, *_ = np.linalg.lstsq(lp.A, rhs, rcond=None)
        dual = float(np.linalg.norm(lp.A @ z - rhs))
    else:
        dual = float(np.linalg.norm(rhs))
    res = lp.residual(triple.x)
    if lp.n:
        D = 1.0 / (tau * d2)
        primal = float(math.sqrt(max(res @ numerics.solve_normal_equations(lp.A, D, res), 0.0)))
    else:
        primal = 0.0
    dual_tol = 1e-6 * max(float(np.linalg.norm(lp.c)), 1e-300)
    threshold = eps * constants.gamma / constants.C_norm
    return CenteringReport(cnorm, dual, primal, eps, cnorm <= eps, dual <= dual_tol, primal <= threshold)


# ---------------------------------------------------------------------------
# sampling


def make_sampling_matrix(delta_r, sigma_bar, constants: StepConstants, mode: str = "identity", rng=None, c_s: float = 1.0) -> np.ndarray:
    """Diagonal of a valid sampling matrix R.

    ``identity`` returns ones.  ``bernoulli`` keeps row i with probability
    p_i = min(1, max(c_s sigma_i log m / gamma^2, C_valid^2 |dr_i| / gamma))
    and scales it by 1/p_i.
    """
    delta_r = np.asarray(delta_r, dtype=float)
    sigma_bar = np.asarray(sigma_bar, dtype=float)
    if delta_r.shape != sigma_bar.shape:
        raise ValueError("length mismatch")
    if mode == "identity":
        return np.ones_like(delta_r)
    if mode != "bernoulli":
        raise ValueError(f"unknown sampling mode {mode!r}")
    p = bernoulli_probabilities(delta_r, sigma_bar, constants, c_s)
    keep = rng.random(len(p)) < p
    R = np.zeros_like(p)
    R[keep] = 1.0 / p[keep]
    return R


def bernoulli_probabilities(delta_r, sigma_bar, constants, c_s=1.0):
    m = len(delta_r)
    g = constants.gamma
    return np.minimum(1.0, np.maximum(c_s * sigma_bar * math.log(max(m, 2)) / g**2, constants.C_valid**2 * np.abs(delta_r) / g))


# ---------------------------------------------------------------------------
# the step


def _parts(lp: DistributedLP):
    return {Party.ALICE: lp.owners.rows(Party.ALICE), Party.BOB: lp.owners.rows(Party.BOB)}


def short_step(
    lp: DistributedLP,
    triple: CenteredTriple,
    mu_new: float,
    constants: StepConstants,
    mode: str = "sequential",
    channel: Channel | None = None,
    rng: np.random.Generator | None = None,
    sampling: str = "identity",
    check: bool = True,
) -> CenteredTriple:
    """One short step from (x, s, mu) towards mu_new."""
    if mode not in ("sequential", "two_party"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "two_party" and channel is None:
        raise ValueError("two_party mode needs a channel")
    if rng is None:
        rng = channel.stream("ipm") if channel is not None else np.random.default_rng(0)
    mu = triple.mu
    if abs(mu_new - mu) > constants.r * mu * (1 + 1e-9):
        raise StepTooLargeError(f"|mu_new - mu| = {abs(mu_new - mu):.3e} exceeds r mu = {constants.r * mu:.3e}")
    if check:
        report = check_centered(lp, triple, constants=constants)
        if not report.is_centered:
            raise NotCenteredError("short step precondition violated", report)

    A, b = lp.A, lp.b
    m, n = A.shape
    parts = _parts(lp)
    tau_vec = ensure_tau(lp, triple, constants)
    tau = tau_vec.w
    x, s = triple.x, triple.s
    _, d1, d2 = barrier(x, lp.l, lp.u)
    sq = np.sqrt(d2)

    if channel is not None and channel.charge_mode == "formula":
        kappa = numerics.condition_estimate(A / sq[:, None])
        charge_protocol_cost(channel, "lewis", numerics.lewis_cost(n, lp.k, channel.frac_bits, kappa, constants.p, n / m, constants.eps))

    y = (s + mu * tau * d1) / (mu * tau * sq)
    grad, clamps = potential_gradient(y, constants.lam)
    g = -constants.gamma * grad

    Abar = A / np.sqrt(tau * d2)[:, None]
    sketch = numerics.spectral_approx(
        {p: Abar[idx] for p, idx in parts.items()},
        constants.sketch_factor,
        constants.sketch_c,
        rng,
        channel=channel if mode == "two_party" else None,
        phase="sketch",
    )

    if mode == "two_party":
        v1 = np.zeros(n)
        v2 = np.zeros(n)
        for party, idx in parts.items():
            if len(idx) == 0:
                continue
            v1 += channel.send(party, Party.COORDINATOR, "v1", A[idx].T @ (g[idx] / sq[idx]))
            v2 += channel.send(party, Party.COORDINATOR, "v2", A[idx].T @ x[idx])
        u1 = numerics.solve_sketch(sketch, v1)
        u2 = numerics.solve_sketch(sketch, v2 - b)
        delivered = {}
        for party, idx in parts.items():
            if len(idx) == 0:
                continue
            delivered[party] = (
                channel.send(Party.COORDINATOR, party, "u1", u1),
                channel.send(Party.COORDINATOR, party, "u2", u2),
            )
        d_1 = np.zeros(m)
        d_2 = np.zeros(m)
        for party, idx in parts.items():
            if party not in delivered:
                continue
            pu1, pu2 = delivered[party]
            scale = 1.0 / (tau[idx] * sq[idx])
            d_1[idx] = scale * (A[idx] @ pu1)
            d_2[idx] = scale * (A[idx] @ pu2)
    else:
        u1 = numerics.solve_sketch(sketch, A.T @ (g / sq))
        u2 = numerics.solve_sketch(sketch, A.T @ x - b)
        scale = 1.0 / (tau * sq)
        d_1 = scale * (A @ u1)
        d_2 = scale * (A @ u2)

    d_r = d_1 + d_2
    if sampling == "identity":
        R = np.ones(m)
    else:
        sigma_bar = numerics.leverage_scores(Abar)
        R = make_sampling_matrix(d_r, sigma_bar, constants, sampling, rng)
    dx = (g - R * d_r) / sq
    ds = mu * tau * sq * d_1
    x_new = x + dx
    s_new = s + ds
    if np.any(x_new <= lp.l) or np.any(x_new >= lp.u):
        raise StepTooLargeError("step leaves the box")
    info = {
        "warm": tau,
        "clamps": clamps,
        "potential": potential(y, constants.lam),
        "centrality": float(np.max(np.abs(y))) if m else 0.0,
        "sketch_rows": sketch.rows,
    }
    return CenteredTriple(x_new, s_new, mu_new, None, info)


def iteration_count(mu_init: float, mu_final: float, r: float) -> int:
    """ceil(log(mu_init/mu_final) / -log(1-r)), 0 when mu_final >= mu_init."""
    if mu_final >= mu_init:
        return 0
    k = math.ceil(math.log(mu_init / mu_final) / -math.log1p(-r))
    # guard the ceiling against rounding in the logs
    while k > 0 and mu_init * (1 - r) ** (k - 1) <= mu_final:
        k -= 1
    while mu_init * (1 - r) ** k > mu_final:
        k += 1
    return k


def path_following(
    lp: DistributedLP,
    initial: CenteredTriple,
    mu_final: float,
    constants: StepConstants,
    mode: str = "sequential",
    channel: Channel | None = None,
    rng: np.random.Generator | None = None,
    sampling: str = "identity",
    check: bool = True,
    check_every: int = 1,
) -> CenteredTriple:
    """Follow the central path from ``initial.mu`` down to ``mu_final``.

    The infinity-norm centrality is checked before every step.  The full
    three-condition check runs at both ends and every ``check_every``
    iterations in between (0 disables the in-between checks).
    """
    if rng is None:
        rng = channel.stream("ipm") if channel is not None else np.random.default_rng(0)
    mu0 = initial.mu
    total = iteration_count(mu0, mu_final, constants.r)
    triple = initial
    history = []
    potential_violations = 0
    for k in range(total):
        if check and (k == 0 or (check_every and k % check_every == 0)):
            report = check_centered(lp, triple, constants=constants)
            if not report.is_centered:
                raise NotCenteredError(f"centering lost before iteration {k}", report, k)
        mu_next = mu0 * (1 - constants.r) ** (k + 1)
        triple = short_step(lp, triple, mu_next, constants, mode, channel, rng, sampling, check=False)
        if triple.info["clamps"]:
            raise NotCenteredError(f"potential argument clamped at iteration {k}", None, k)
        if check and triple.info["centrality"] > constants.eps:
            raise NotCenteredError(f"centrality {triple.info['centrality']:.3g} above eps at iteration {k}", None, k)
        if triple.info["potential"] > lp.m**2:
            potential_violations += 1
            log.info("potential %.3g exceeds m^2 at iteration %d", triple.info["potential"], k)
        history.append(triple.info["centrality"])
    if check and total:
        report = check_centered(lp, triple, constants=constants)
        if not report.is_centered:
            raise NotCenteredError(f"centering lost after iteration {total - 1}", report, total)
    triple.info = dict(triple.info, iterations=total, centrality_history=history, potential_violations=potential_violations)
    return triple


# ---------------------------------------------------------------------------
# initial point and final point


@dataclass
class ModifiedLP:
    lp: DistributedLP
    original: DistributedLP
    initial: CenteredTriple
    mu_init: float
    delta_prime: float
    beta: float
    xi: float
    signs: np.ndarray
    aux_columns: np.ndarray

    @property
    def n_aux(self) -> int:
        return len(self.aux_columns)


def build_modified_lp(
    lp: DistributedLP,
    delta: float = 1e-3,
    eps: float = 0.25,
    delta_prime: float | None = None,
    pad_aux_box: bool = False,
    channel: Channel | None = None,
) -> ModifiedLP:
    """Append beta*I rows so that the box midpoint becomes feasible.

    The auxiliary variables get the box [0, 2 x_aux] by default so that
    their large cost drives them to zero.  ``pad_aux_box`` widens it to
    [-Xi, 2 x_aux + Xi].
    """
    m, n = lp.m, lp.n
    widths = lp.u - lp.l
    xi = float(np.max(np.abs(widths))) if m else 0.0
    if xi == 0:
        raise DegenerateBoxError("every box is a single point")
    x_init = (lp.l + lp.u) / 2.0
    if delta_prime is None:
        delta_prime = delta / (10.0 * m * 2.0 ** (2 * lp.L))
    c1 = max(float(np.sum(np.abs(lp.c))), 1.0)
    mu_init = 8.0 * m * c1 * xi / (eps * delta_prime)

    if channel is not None:
        for party, idx in _parts(lp).items():
            if len(idx):
                channel.send(party, Party.COORDINATOR, "init", lp.A[idx].T @ x_init[idx])
                channel.send(party, Party.COORDINATOR, "init", [np.max(widths[idx]), np.sum(np.abs(lp.c[idx]))])

    res = lp.b - lp.A.T @ x_init
    beta = float(np.max(np.abs(res)) / xi) if n else 0.0
    if beta <= 1e-12 * max(1.0, float(np.max(np.abs(lp.b), initial=0.0))):
        triple = CenteredTriple(x_init, lp.c.copy(), mu_init)
        return ModifiedLP(lp, lp, triple, mu_init, delta_prime, 0.0, xi, np.ones(n), np.zeros(0, dtype=int))

    signs = np.where(res < 0, -1.0, 1.0)
    A = lp.A * signs
    b = lp.b * signs
    x_aux = np.abs(res) / beta
    keep = np.flatnonzero(x_aux > 1e-12 * np.max(x_aux))
    x_aux = x_aux[keep]
    aux_rows = np.zeros((len(keep), n))
    aux_rows[np.arange(len(keep)), keep] = beta
    if pad_aux_box:
        l_aux, u_aux = -xi * np.ones(len(keep)), 2 * x_aux + xi
    else:
        l_aux, u_aux = np.zeros(len(keep)), 2 * x_aux
    c_aux = np.full(len(keep), 2.0 * c1 / delta_prime)
    owners = lp.owners.concat(RowPartition.all_alice(len(keep)))
    needed = max(lp.L, int(math.ceil(math.log2(max(float(np.max(c_aux)), float(np.max(u_aux)), 2.0)))) + 1)
    mlp = DistributedLP(
        np.vstack([A, aux_rows]),
        b,
        np.concatenate([lp.c, c_aux]),
        np.concatenate([lp.l, l_aux]),
        np.concatenate([lp.u, u_aux]),
        owners,
        needed,
    )
    x0 = np.concatenate([x_init, x_aux])
    triple = CenteredTriple(x0, mlp.c.copy(), mu_init)
    return ModifiedLP(mlp, lp, triple, mu_init, delta_prime, beta, xi, signs, keep)


def final_mu(modified: ModifiedLP, C: float = 1.0) -> float:
    """delta' ||c||_1 Xi / (C n)."""
    lp = modified.original
    c1 = max(float(np.sum(np.abs(lp.c))), 1.0)
    return modified.delta_prime * c1 * modified.xi / (C * max(lp.n, 1))


@dataclass
class FinalPoint:
    x: np.ndarray
    s: np.ndarray
    residual_inf: float
    gap_estimate: float
    corrections: int
    aux_inf: float = 0.0


def extract_final(
    lp: DistributedLP,
    triple: CenteredTriple,
    delta: float = 1e-3,
    constants: StepConstants | None = None,
    n_orig: int | None = None,
    channel: Channel | None = None,
    rng=None,
    max_corrections: int = 20,
    strict: bool = True,
) -> FinalPoint:
    """Project the first ``n_orig`` coordinates of ``triple.x`` onto A^T x = b.

    ``lp`` is the original program; ``triple`` may live on a modified
    program with extra trailing rows, which are dropped.  Each correction is
    a sketched weighted least-squares solve; it is repeated until the
    residual is at most ``delta``.
    """
    m = lp.m
    if constants is None:
        constants = StepConstants.practical(max(m, 1), max(lp.n, 1))
    if rng is None:
        rng = channel.stream("final") if channel is not None else np.random.default_rng(0)
    x = triple.x[:m].copy()
    s = triple.s[:m].copy()
    aux = triple.x[m:]
    tau = triple.tau.w[:m] if triple.tau is not None else np.ones(m)
    _, _, d2 = barrier(x, lp.l, lp.u)
    D = 1.0 / (tau * d2)
    corrections = 0
    res = lp.b - lp.A.T @ x
    parts = _parts(lp)
    while np.max(np.abs(res), initial=0.0) > delta and corrections < max_corrections:
        rows = lp.A * np.sqrt(D)[:, None]
        sketch = numerics.spectral_approx(
            {p: rows[idx] for p, idx in parts.items()},
            constants.sketch_factor,
            constants.sketch_c,
            rng,
            channel=channel,
            phase="final:sketch",
        )
        if channel is not None:
            total = np.zeros(lp.n)
            for party, idx in parts.items():
                if len(idx):
                    total += channel.send(party, Party.COORDINATOR, "final", lp.A[idx].T @ x[idx])
            z = numerics.solve_sketch(sketch, lp.b - total)
            for party, idx in parts.items():
                if len(idx):
                    zp = channel.send(Party.COORDINATOR, party, "final", z)
                    x[idx] = x[idx] + D[idx] * (lp.A[idx] @ zp)
        else:
            z = numerics.solve_sketch(sketch, res)
            x = x + D * (lp.A @ z)
        x = np.clip(x, lp.l, lp.u)
        res = lp.b - lp.A.T @ x
        corrections += 1
    resid = float(np.max(np.abs(res), initial=0.0))
    gap = triple.mu * float(np.sum(triple.tau.w)) if triple.tau is not None else triple.mu * m
    fp = FinalPoint(x, s, resid, gap, corrections, float(np.max(np.abs(aux), initial=0.0)))
    if strict and resid > delta:
        raise ResidualError(f"primal residual {resid:.3e} exceeds delta {delta:.3e}", resid)
    return fp


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float
    primal_residual_inf: float
    iterations: int
    final: FinalPoint
    transcript_summary: dict | None = None

    def to_dict(self):
        return {
            "x": [float(v) for v in self.x],
            "objective": self.objective,
            "primal_residual_inf": self.primal_residual_inf,
            "iterations": self.iterations,
            "transcript_summary": self.transcript_summary,
        }


def solve_lp(
    lp: DistributedLP,
    delta: float = 1e-3,
    constants: StepConstants | None = None,
    mode: str = "sequential",
    channel: Channel | None = None,
    rng=None,
    sampling: str = "identity",
    delta_prime: float | None = None,
    mu_final: float | None = None,
    check: bool = True,
) -> LPSolution:
    """Modified LP, path following, then final-point extraction."""
    if rng is None:
        rng = channel.stream("ipm") if channel is not None else np.random.default_rng(0)
    mod = build_modified_lp(lp, delta, eps=(constants.eps if constants else 0.25), delta_prime=delta_prime, channel=channel if mode == "two_party" else None)
    mlp = mod.lp
    if constants is None:
        constants = StepConstants.practical(mlp.m, mlp.n)
    if mu_final is None:
        mu_final = final_mu(mod)
    out = path_following(mlp, mod.initial, mu_final, constants, mode, channel, rng, sampling, check)
    ensure_tau(mlp, out, constants)
    # undo the column sign flips: they do not touch x
    final = extract_final(lp, out, delta, constants, channel=channel if mode == "two_party" else None, rng=rng)
    summary = channel.transcript.summary() if channel is not None else None
    return LPSolution(final.x, lp.objective(final.x), final.residual_inf, out.info.get("iterations", 0), final, summary)
