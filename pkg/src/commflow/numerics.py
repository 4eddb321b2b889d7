"""Linear-algebra substrate: fixed-point quantization, leverage scores,
Lewis weights, leverage-score row sampling and sketched solves.

All local arithmetic is float64.  Quantization only happens when a value
crosses the simulated channel (see :mod:`commflow.commsim`).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.linalg.lapack
import scipy.sparse as sp

RCOND_MIN = 1e-12


class NumericsError(Exception):
    pass


class OverflowQuantizationError(NumericsError):
    """A value does not fit the fixed-point range for the configured L."""


class SingularMatrixError(NumericsError):
    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class ConvergenceError(NumericsError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class SketchError(NumericsError):
    pass


# ---------------------------------------------------------------------------
# matrices


@dataclass
class SparseMatrix:
    """Row-major sparse matrix with a recorded per-row nonzero cap ``k``."""

    csr: sp.csr_matrix
    k: int

    @classmethod
    def from_triples(cls, rows, cols, triples, k=None):
        triples = list(triples)
        seen = set()
        for i, j, _ in triples:
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"entry ({i}, {j}) out of range for {rows}x{cols}")
            if (i, j) in seen:
                raise ValueError(f"duplicate entry ({i}, {j})")
            seen.add((i, j))
        if triples:
            r, c, v = zip(*triples)
        else:
            r, c, v = (), (), ()
        csr = sp.csr_matrix((np.asarray(v, float), (np.asarray(r, int), np.asarray(c, int))), shape=(rows, cols))
        return cls.from_any(csr, k)

    @classmethod
    def from_any(cls, A, k=None):
        csr = sp.csr_matrix(A, dtype=float)
        csr.eliminate_zeros()
        nnz = np.diff(csr.indptr)
        kmax = int(nnz.max()) if len(nnz) else 0
        if k is None:
            k = kmax
        elif kmax > k:
            raise ValueError(f"row with {kmax} nonzeros exceeds cap k={k}")
        return cls(csr, int(k))

    @property
    def shape(self):
        return self.csr.shape

    def toarray(self):
        return self.csr.toarray()

    def triples(self):
        coo = self.csr.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[t]), int(coo.col[t]), float(coo.data[t])) for t in order]


def as_dense(A) -> np.ndarray:
    if isinstance(A, SparseMatrix):
        return A.toarray()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def parse_coordinate_text(text: str, shape=None) -> SparseMatrix:
    """Parse ``row col value`` lines (0-indexed).  ``#`` starts a comment."""
    triples = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'row col value', got {line!r}")
        try:
            triples.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if shape is None:
        rows = 1 + max((t[0] for t in triples), default=-1)
        cols = 1 + max((t[1] for t in triples), default=-1)
        shape = (rows, cols)
    return SparseMatrix.from_triples(shape[0], shape[1], triples)


def format_coordinate_text(A: SparseMatrix) -> str:
    return "".join(f"{i} {j} {v!r}\n" for i, j, v in A.triples())


# ---------------------------------------------------------------------------
# fixed point


@dataclass
class FixedPointVector:
    values: np.ndarray
    frac_bits: int

    def __len__(self):
        return len(self.values)


def quantize(x, L: int) -> FixedPointVector:
    """Round to the nearest multiple of 2**-L (ties to even).

    Raises :class:`OverflowQuantizationError` when some |x_i| >= 2**L.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    x = np.asarray(x, dtype=float)
    if x.size and not np.all(np.isfinite(x)):
        raise OverflowQuantizationError("non-finite value on the wire")
    if x.size and np.max(np.abs(x)) >= 2.0 ** L:
        worst = float(np.max(np.abs(x)))
        raise OverflowQuantizationError(f"|value| = {worst:.6g} does not fit in {L} integer bits")
    # scaling by a power of two is exact, np.rint rounds half to even
    q = np.ldexp(np.rint(np.ldexp(x, L)), -L)
    return FixedPointVector(q, L)


# ---------------------------------------------------------------------------
# leverage scores


def _triangular_factor(M: np.ndarray):
    """Upper-triangular R with R^T R = M^T M, from a QR of M.

    Columns are equilibrated first and the condition test is on the
    equilibrated M (ratio of the extreme diagonal entries of its R), which
    is the square root of that of the Gram matrix.
    """
    n = M.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    if M.shape[0] < n:
        raise SingularMatrixError("fewer rows than columns", 0.0)
    norms = np.sqrt(np.einsum("ij,ij->j", M, M))
    if not norms.all():
        raise SingularMatrixError("zero column", 0.0)
    qr, _, _, info = scipy.linalg.lapack.dgeqrf(M / norms)
    d = np.abs(qr.diagonal())
    rcond = d.min() / d.max() if d.max() > 0 else 0.0
    if rcond < RCOND_MIN:
        raise SingularMatrixError(f"matrix numerically rank deficient (rcond ~ {rcond:.2e})", rcond)
    return qr[:n] * (_upper_mask(n) * norms)


@functools.lru_cache(maxsize=256)
def _upper_mask(n: int) -> np.ndarray:
    mask = np.triu(np.ones((n, n)))
    mask.flags.writeable = False
    return mask


def leverage_scores(A) -> np.ndarray:
    """sigma_i = a_i^T (A^T A)^{-1} a_i via the triangular factor of a QR."""
    M = as_dense(A)
    if M.shape[1] == 0:
        return np.zeros(M.shape[0])
    R = _triangular_factor(M)
    Z = _trsolve(R, M.T, trans=1)
    return np.clip(np.einsum("ij,ij->j", Z, Z), 0.0, 1.0)


def leverage_overestimates(sigma, m: int) -> np.ndarray:
    """Round each score up to a power of two, floored at 1/(2 m^2)."""
    sigma = np.asarray(sigma, dtype=float)
    floor = 1.0 / (2.0 * m * m)
    target = np.maximum(sigma, floor)
    exps = np.ceil(np.log2(target))
    out = np.exp2(exps)
    # log2 of an exact power of two may land a hair above the integer
    low = out / 2
    out = np.where(low >= target, low, out)
    assert np.all(out >= sigma)
    return out


# ---------------------------------------------------------------------------
# sampling and spectral approximation


def sampling_probabilities(u, alpha: float, c: float, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    # log 1 = 0 would drop every row of a one-column matrix
    return np.minimum(1.0, alpha * c * math.log(max(n, 2)) * u)


def sample_matrix(u, alpha: float, c: float, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Diagonal of S: S_ii = 1/sqrt(p_i) with probability p_i, else 0.

    ``n`` is the dimension entering the ``log n`` factor; it defaults to
    ``len(u)``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    p = sampling_probabilities(u, alpha, c, len(u) if n is None else n)
    draws = rng.random(len(u))
    keep = draws < p
    diag = np.zeros(len(u))
    diag[keep] = 1.0 / np.sqrt(p[keep])
    return diag


def rate_for(lam: float) -> float:
    """Sampling rate alpha = ((lam+1)/(lam-1))^2 for a lam-spectral approximation."""
    if lam <= 1:
        raise ValueError("approximation factor must exceed 1")
    return ((lam + 1.0) / (lam - 1.0)) ** 2


@dataclass
class SpectralSketch:
    sketch: np.ndarray
    scale: float
    sampled_rows: np.ndarray
    approx_factor: float
    overestimates: np.ndarray = field(repr=False, default=None)
    attempts: int = 1
    _factor: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def gram(self) -> np.ndarray:
        return self.sketch.T @ self.sketch

    @property
    def rows(self) -> int:
        return len(self.sampled_rows)

    @property
    def factor(self) -> np.ndarray:
        if self._factor is None:
            self._factor = _triangular_factor(self.sketch)
        return self._factor

    def row_bound(self, c: float) -> float:
        """2 c alpha ||sigma_hat||_1 log n."""
        n = self.sketch.shape[1]
        return 2 * c * rate_for(self.approx_factor) * float(np.sum(self.overestimates)) * math.log(max(n, 2))


def loewner_sandwich(A, Atilde, lam: float, rtol: float = 1e-9) -> bool:
    """(1/lam) A^T A <= At^T At <= A^T A, checked with a dense eigensolver."""
    A = as_dense(A)
    Atilde = as_dense(Atilde)
    G = A.T @ A
    Gt = Atilde.T @ Atilde
    scale = max(1.0, float(np.max(np.abs(G))))
    upper = np.linalg.eigvalsh(G - Gt).min()
    lower = np.linalg.eigvalsh(Gt - G / lam).min()
    return upper >= -rtol * scale and lower >= -rtol * scale


def spectral_approx(
    parts,
    lam: float,
    c: float = 3.0,
    rng: np.random.Generator | None = None,
    channel=None,
    phase: str = "sketch",
    verify: bool = False,
    retries: int = 5,
) -> SpectralSketch:
    """Leverage-score row sampling of the row-stacked ``parts``.

    ``parts`` maps an owner to its row block (any order-preserving mapping or
    a plain sequence of blocks).  When a channel is given, each party ships
    its sampled rows to the coordinator and the out-of-scope leverage-score
    estimation protocol is charged by formula.  With ``verify`` the Loewner
    sandwich is checked densely and the sample redrawn (at most ``retries``
    times) on failure.
    """
    from commflow import commsim

    if rng is None:
        rng = np.random.default_rng()
    if isinstance(parts, dict):
        owners = list(parts)
        blocks = [as_dense(parts[o]) for o in owners]
    else:
        blocks = [as_dense(b) for b in parts]
        owners = [commsim.Party.ALICE, commsim.Party.BOB][: len(blocks)] if len(blocks) <= 2 else list(range(len(blocks)))
    A = np.vstack(blocks) if blocks else np.zeros((0, 0))
    m, n = A.shape
    sigma = leverage_scores(A)
    sig_hat = leverage_overestimates(sigma, max(m, 1))
    alpha = rate_for(lam)
    scale = math.sqrt((lam + 1.0) / (2.0 * lam))
    if channel is not None and channel.charge_mode == "formula":
        k = int(max((np.count_nonzero(b, axis=1).max() if b.size else 0) for b in blocks)) if blocks else 0
        kappa = condition_estimate(A)
        commsim.charge_protocol_cost(channel, phase + ":leverage", leverage_cost(n, k, channel.frac_bits, kappa))
    for attempt in range(1, retries + 1):
        S = sample_matrix(sig_hat, alpha, c, rng, n=n)
        keep = np.flatnonzero(S)
        rows = S[keep, None] * A[keep]
        if channel is not None:
            offsets = np.cumsum([0] + [len(b) for b in blocks])
            delivered = []
            for owner, lo, hi in zip(owners, offsets[:-1], offsets[1:]):
                mine = (keep >= lo) & (keep < hi)
                delivered.append(channel.send_rows(owner, commsim.Party.COORDINATOR, phase, rows[mine]))
            rows = np.vstack(delivered) if delivered else rows
        sketch = scale * rows
        if not verify or loewner_sandwich(A, sketch, lam):
            return SpectralSketch(sketch, scale, keep, lam, sig_hat, attempt)
    raise SketchError(f"spectral sandwich failed after {retries} resamples")


def condition_estimate(A: np.ndarray) -> float:
    if A.size == 0:
        return 1.0
    ev = np.linalg.eigvalsh(A.T @ A)
    lo = max(ev.min(), 1e-300)
    return float(math.sqrt(max(ev.max(), lo) / lo))


def leverage_cost(n: int, k: int, L: int, kappa: float) -> int:
    """Bits charged for leverage-score overestimation: n k L + n L ceil(log2 kappa)."""
    return int(n * k * L + n * L * math.ceil(math.log2(max(kappa, 1.0))))


def lewis_cost(n: int, k: int, L: int, kappa: float, p: float, eta: float, eps: float) -> int:
    """Bits charged for the approximate Lewis-weight protocol."""
    if n == 0:
        return 0
    base = n * k * L + n * (L + math.log2(max(kappa, 1.0)) + math.log2(1.0 / eta) / p)
    rounds = math.log2(1.0 / (eta * eps * p)) / (1.0 - abs(p / 2.0 - 1.0))
    return int(math.ceil(base * max(rounds, 1.0)))


# ---------------------------------------------------------------------------
# Lewis weights


@dataclass
class LewisWeightVector:
    w: np.ndarray
    p: float
    v: np.ndarray
    converged: bool
    residual: float
    iterations: int = 0


def lewis_residual(A, w, p, v) -> float:
    M = as_dense(A)
    sig = leverage_scores(M * (w ** (0.5 - 1.0 / p))[:, None])
    return float(np.max(np.abs(w - sig - v)) / np.max(np.abs(w)))


def lewis_weights(A, p: float, v, tol: float = 1e-6, max_iter: int = 200, w0=None, strict: bool = True) -> LewisWeightVector:
    """v-regularized l_p Lewis weights, w = sigma(W^{1/2-1/p} A) + v.

    Iterates w <- w^{1-p/2} (sigma(W^{1/2-1/p} A) + v)^{p/2}, which has the
    same fixed point and contracts by 1-p/2 for p in (0, 4).  For p = 2
    this is the plain map and one step suffices.
    """
    if not 0 < p < 4:
        raise ValueError("p must lie in (0, 4)")
    M = as_dense(A)
    m, n = M.shape
    v = np.broadcast_to(np.asarray(v, dtype=float), (m,)).copy()
    if np.any(v <= 0):
        raise ValueError("regularizer must be positive")
    w = (n / m) * np.ones(m) + v if w0 is None else np.maximum(np.asarray(w0, dtype=float), v)
    expo = 0.5 - 1.0 / p
    residual = math.inf
    for it in range(1, max_iter + 1):
        target = leverage_scores(M * (w ** expo)[:, None]) + v
        residual = float(np.max(np.abs(w - target)) / np.max(w))
        if residual <= tol:
            return LewisWeightVector(w, p, v, True, residual, it - 1)
        w = target if p == 2 else w ** (1.0 - p / 2.0) * target ** (p / 2.0)
    residual = lewis_residual(M, w, p, v)
    if residual <= tol:
        return LewisWeightVector(w, p, v, True, residual, max_iter)
    if strict:
        raise ConvergenceError(f"Lewis weights did not converge (residual {residual:.3e})", residual)
    return LewisWeightVector(w, p, v, False, residual, max_iter)


# ---------------------------------------------------------------------------
# solves


def solve_normal_equations(A, D, b) -> np.ndarray:
    """Solve (A^T D A) x = b through a QR of D^{1/2} A."""
    M = as_dense(A)
    d = np.asarray(D, dtype=float)
    if d.ndim == 2:
        d = np.diag(d)
    if np.any(d <= 0):
        raise ValueError("D must be positive")
    return solve_factor(_triangular_factor(M * np.sqrt(d)[:, None]), b)


def _trsolve(R, b, trans=0):
    x, info = scipy.linalg.lapack.dtrtrs(R, b, lower=0, trans=trans)
    if info != 0:
        raise SingularMatrixError("singular triangular factor", 0.0)
    return x


def solve_factor(R: np.ndarray, b) -> np.ndarray:
    return _trsolve(R, _trsolve(R, np.asarray(b, dtype=float), trans=1))


def solve_gram(H: np.ndarray, b) -> np.ndarray:
    """Solve H x = b for a symmetric positive definite H."""
    try:
        c = scipy.linalg.cho_factor(H, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("Gram matrix is not positive definite", 0.0) from None
    d = np.abs(np.diag(c[0]))
    rcond = d.min() / d.max() if d.size and d.max() > 0 else 0.0
    if rcond < RCOND_MIN:
        raise SingularMatrixError(f"Gram matrix numerically singular (rcond ~ {rcond**2:.2e})", rcond)
    return scipy.linalg.cho_solve(c, np.asarray(b, dtype=float), check_finite=False)


def solve_sketch(sketch: "SpectralSketch", b) -> np.ndarray:
    """Solve (At^T At) x = b from the sketch rows without forming the Gram matrix."""
    return solve_factor(sketch.factor, b)


def sketch_solve(A, D, b, lam: float, c: float = 3.0, rng=None, sketch: SpectralSketch | None = None) -> np.ndarray:
    """Solve with H = At^T At where At is a ``lam``-spectral sketch of D^{1/2} A.

    If H approximates B = A^T D A within exp(+-l), the B-energy of the
    error obeys energy(xbar - x) <= (e^l (e^l - 1))^2 energy(x).
    """
    M = as_dense(A)
    d = np.asarray(D, dtype=float)
    if d.ndim == 2:
        d = np.diag(d)
    if sketch is None:
        sketch = spectral_approx([M * np.sqrt(d)[:, None]], lam, c, rng)
    return solve_sketch(sketch, b)


def specapprox_error_bound(lam: float) -> float:
    """(e^lam (e^lam - 1))^2."""
    e = math.exp(lam)
    return (e * (e - 1.0)) ** 2


def energy(B: np.ndarray, x) -> float:
    """x^T B x, the quantity the sketched-solve error bound is stated in."""
    x = np.asarray(x, dtype=float)
    return float(x @ B @ x)
