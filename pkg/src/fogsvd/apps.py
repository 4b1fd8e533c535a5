"""Applications built on the masked SVD pipeline.

Shift detection works on row-centered data.  Recommendation scores use
per-user centering and finish with a fixed-point masked dot product, while
compression and dimension reduction reuse the uncentered factors.

Centering happens on masked values held by SD_d: with ``c`` the number of
summed entries, ``c*d' - sum(d')`` keeps the ``value + z*W + r*S`` shape but
with signed components, so SD_u/SD_v recover Gram entries with
:func:`signed_derandomize` and divide out the ``c**2`` scale exactly.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .eigen import SvdFactors, jacobi_eigen, numerical_rank, singular_values
from .protocol import (
    MaskedMatrix, ProtocolViolationError, Transcript, collect_masked, gram_entry_bits,
    int_gram, role_rng,
)
from .sysparams import ConfigurationError, ProductBound, SystemParams, init_system

DEFAULT_FBITS = 20
PROBE_MAX = 1 << 20


class RankError(ValueError):
    pass


class DegenerateDimensionError(ValueError):
    def __init__(self, index: int, axis: str = "dimension"):
        super().__init__(f"{axis} {index} has zero variance")
        self.index = index


# --- signed recovery ----------------------------------------------------------

@dataclass(frozen=True)
class NormalizationParams:
    """Signed-recovery thresholds; ``W`` and ``S`` must exceed twice each."""

    T_W: int
    T_S: int
    scale: int   # c: entries were multiplied by c when centering
    along_centered_axis: bool = True   # Gram sums over the centered index

    @classmethod
    def from_bound(cls, b: ProductBound, W: int, scale: int,
                   along_centered_axis: bool = True) -> "NormalizationParams":
        return cls(b.w_threshold(), b.s_threshold(W), scale, along_centered_axis)

    def check(self, W: int, S: int) -> None:
        if not (2 * self.T_W < W and 2 * self.T_S < S):
            raise ValueError("W and S must exceed twice the signed thresholds")


def signed_residue(e: int, W: int, S: int, T_W: int, T_S: int) -> int:
    """Recover a signed inner value: residues above a threshold are negative."""
    x = e % S
    if x > T_S:
        x -= S
    y = x % W
    if y > T_W:
        y -= W
    return y


def signed_derandomize(e: int, W: int, S: int, T_W: int, T_S: int, scale: int = 1,
                       check: bool = True) -> Fraction:
    """Signed residue divided by ``scale**2``.

    When the Gram sums over the centered index every entry is a multiple of
    ``scale``; with ``check`` set anything else is treated as tampering.
    """
    y = signed_residue(e, W, S, T_W, T_S)
    if check and scale > 1 and y % scale:
        raise ProtocolViolationError(f"entry {y} is not divisible by the centering scale {scale}")
    return Fraction(y, scale * scale)


def signed_gram(G, W: int, S: int, norm: NormalizationParams) -> list[list[Fraction]]:
    return [[signed_derandomize(e, W, S, norm.T_W, norm.T_S, norm.scale,
                                norm.along_centered_axis) for e in row] for row in G]


# --- centering -----------------------------------------------------------------

def center_masked(M: MaskedMatrix | Sequence[Sequence[int]], axis: str = "rows") -> list[list[int]]:
    """``c*x - sum`` along rows (c = N, per dimension) or columns (c = l, per user)."""
    rows = [list(r) for r in (M.entries if isinstance(M, MaskedMatrix) else M)]
    if axis == "rows":
        N = len(rows[0])
        return [[N * x - s for x in r] for r, s in ((r, sum(r)) for r in rows)]
    if axis == "columns":
        l = len(rows)
        sums = [sum(c) for c in zip(*rows)]
        return [[l * x - s for x, s in zip(r, sums)] for r in rows]
    raise ValueError("axis must be 'rows' or 'columns'")


class RunningCenter:
    """Row-centering that tracks per-row sums so columns can come and go."""

    def __init__(self, l: int):
        self.l = l
        self.columns: list[list[int]] = []
        self.sums = [0] * l

    def add(self, column: Sequence[int]) -> None:
        if len(column) != self.l:
            raise ValueError(f"column must have {self.l} entries")
        self.columns.append(list(column))
        self.sums = [s + x for s, x in zip(self.sums, column)]

    def remove(self, index: int) -> list[int]:
        col = self.columns.pop(index)
        self.sums = [s - x for s, x in zip(self.sums, col)]
        return col

    def centered(self) -> list[list[int]]:
        N = len(self.columns)
        return [[N * col[i] - self.sums[i] for col in self.columns] for i in range(self.l)]


# --- shift detection -----------------------------------------------------------

def correlation_matrix(gram_centered: Sequence[Sequence[Fraction | int]]) -> np.ndarray:
    """Correlation matrix from the exact centered Gram ``sum_k (x_i - m_i)(x_j - m_j)``.

    Dividing by ``delta_i * delta_j`` with ``delta = sqrt(diag / (N-1))`` would
    give ``(N-1)`` times the correlation; the common factor is removed so the
    diagonal is exactly one.
    """
    n = len(gram_centered)
    diag = [gram_centered[i][i] for i in range(n)]
    for i, v in enumerate(diag):
        if v <= 0:
            raise DegenerateDimensionError(i)
    root = [math.sqrt(v) for v in diag]
    R = np.empty((n, n))
    for i in range(n):
        R[i, i] = 1.0
        for j in range(i + 1, n):
            R[i, j] = R[j, i] = float(gram_centered[i][j]) / (root[i] * root[j])
    return R


def detection_params(N: int, l: int, d: int, **kw) -> SystemParams:
    return init_system(N, l, d, normalize="rows", **kw)


@dataclass
class CorrelationResult:
    R: np.ndarray
    first_vector: np.ndarray
    transcript: Transcript


def masked_correlation(params: SystemParams, A, seed=None, workers: int = 1) -> CorrelationResult:
    """SD_d centers rows and forms the l x l Gram; SD_u recovers the correlation."""
    if params.normalize != "rows":
        raise ValueError("parameters were not built for row centering")
    pub = params.public()
    masked, _, tr = collect_masked(params, A, seed, workers)
    C = center_masked(masked, "rows")
    G = int_gram(C)
    tr.send("SD_d", "SD_u", "gram", pub.l ** 2 * gram_entry_bits(pub, "u"))
    bound = ProductBound(pub.N, pub.N * pub.d, pub.N * pub.d, pub.N * pub.t, pub.N * pub.t, True)
    norm = NormalizationParams.from_bound(bound, params.W, pub.N)
    R = correlation_matrix(signed_gram(G, params.W, params.S, norm))
    return CorrelationResult(R, first_eigenvector(R), tr)


def plain_correlation(A) -> np.ndarray:
    return np.corrcoef(np.asarray(A, dtype=np.float64))


def first_eigenvector(R) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    return jacobi_eigen((R + R.T) / 2).vectors[:, 0]


def detect_shift(reference, current) -> float:
    """Angle between two unit vectors, ignoring sign."""
    dot = abs(float(np.dot(reference, current)))
    return math.acos(min(1.0, dot))


# --- paired factors -------------------------------------------------------------

def probe_vector(l: int, seed) -> list[int]:
    """Public random vector used to align U and V signs.

    Wide entries make it unlikely to be orthogonal to a singular vector of
    structured data.
    """
    rng = role_rng(seed, "probe")
    return [rng.randint(1, PROBE_MAX) for _ in range(l)]


def align_signs(vectors: np.ndarray, reference: np.ndarray, rank: int) -> np.ndarray:
    """Flip columns so that ``column . reference > 0`` for the first ``rank``."""
    out = vectors.copy()
    for j in range(rank):
        if out[:, j] @ reference < 0:
            out[:, j] = -out[:, j]
    return out


def _decompose(G) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    eig = jacobi_eigen(np.array([[float(x) for x in r] for r in G]))
    return eig.values, eig.vectors, singular_values(eig.values)


def _factors(gu, gv, probe: Sequence[int], probe_image: Sequence[float], size: int) -> SvdFactors:
    """SD_u aligns ``u_k . probe > 0``; SD_v aligns ``v_k . (A^T probe) > 0``."""
    ev_u, U, sigma = _decompose(gu)
    _, V, _ = _decompose(gv)
    rank = numerical_rank(ev_u, size)
    k = min(len(gu), len(gv))
    sigma = sigma[:k].copy()
    sigma[rank:] = 0.0
    U = align_signs(U, np.asarray(probe, dtype=np.float64), rank)
    V = align_signs(V, np.asarray(probe_image, dtype=np.float64), rank)
    return SvdFactors(U, sigma, V, rank)


def masked_probe(masked_rows, probe: Sequence[int]) -> list[int]:
    """SD_d: ``probe^T A'`` over masked rows (one masked value per column)."""
    return [sum(g * x for g, x in zip(probe, col)) for col in zip(*masked_rows)]


def probe_bound(l: int, value_max: int, mask_max: int, signed: bool = False) -> ProductBound:
    return ProductBound(l, PROBE_MAX, value_max, 0, mask_max, signed)


def factor_params(N: int, l: int, d: int, **kw) -> SystemParams:
    """Base parameters plus room for the sign probe."""
    kappa1 = kw.pop("kappa1", None) or N.bit_length() + l.bit_length() + 1
    bound = probe_bound(l, d, 1 << kappa1)
    return init_system(N, l, d, kappa1=kappa1, extra_bounds=[bound], **kw)


def masked_factors(params: SystemParams, A, seed=None, workers: int = 1):
    """Full SVD with U and V signs paired (base, uncentered protocol)."""
    pub = params.public()
    if not probe_bound(pub.l, pub.d, pub.t).holds(params.W, params.S):
        raise ConfigurationError("parameters leave no room for the sign probe; "
                                 "build them with factor_params")
    masked, _, tr = collect_masked(params, A, seed, workers)
    rows = [list(r) for r in masked.entries]
    gu, gv = int_gram(rows), int_gram([list(c) for c in zip(*rows)])
    tr.send("SD_d", "SD_u", "gram", pub.l ** 2 * gram_entry_bits(pub, "u"))
    tr.send("SD_d", "SD_v", "gram", pub.N ** 2 * gram_entry_bits(pub, "v"))
    W, S = params.W, params.S
    gu = [[e % S % W for e in r] for r in gu]
    gv = [[e % S % W for e in r] for r in gv]
    probe = probe_vector(pub.l, seed)
    image = [e % S % W for e in masked_probe(rows, probe)]
    return _factors(gu, gv, probe, image, max(pub.l, pub.N)), masked, tr


# --- compression ----------------------------------------------------------------

def compress(factors: SvdFactors, k: int) -> SvdFactors:
    if not 1 <= k <= factors.rank:
        raise RankError(f"k = {k} must lie in [1, rank = {factors.rank}]")
    return factors.truncate(k)


@dataclass(frozen=True)
class FixedPointScale:
    fbits: int = DEFAULT_FBITS

    @property
    def scale(self) -> int:
        return 1 << self.fbits

    def quantize(self, x: float) -> int:
        return int(round(x * self.scale))

    def dequantize(self, q: int | Fraction, power: int = 1) -> float:
        return float(Fraction(q, self.scale ** power))


def _mask(values: Sequence[int], W: int, S: int, t: int, rng: random.Random) -> list[int]:
    return [v + rng.randint(1, t) * W + rng.randint(1, t) * S for v in values]


def reduction_bound(l: int, d: int, t: int, fbits: int = DEFAULT_FBITS) -> ProductBound:
    """Masked scalar products of quantized unit vectors with raw data columns."""
    return ProductBound(l, (1 << fbits) + 1, d, t, t, signed=True)


def reduction_params(N: int, l: int, d: int, fbits: int = DEFAULT_FBITS, **kw) -> SystemParams:
    kappa1 = kw.get("kappa1") or N.bit_length() + l.bit_length() + 1
    kw["kappa1"] = kappa1
    return init_system(N, l, d, extra_bounds=[reduction_bound(l, d, 1 << kappa1, fbits)], **kw)


def reduce_dims(params: SystemParams, A, k: int, seed=None, fbits: int = DEFAULT_FBITS,
                workers: int = 1):
    """Project every user column onto SD_u's top-``k`` left vectors.

    SD_u masks the quantized vectors, SD_d takes scalar products with the
    masked columns; SD_u then unmasks and rescales.  Returns ``(U_k, Y)``
    with ``Y`` approximately ``U_k^T A``.
    """
    pub = params.public()
    masked, _, tr = collect_masked(params, A, seed, workers)
    rows = [list(r) for r in masked.entries]
    gu = [[e % params.S % params.W for e in r] for r in int_gram(rows)]
    tr.send("SD_d", "SD_u", "gram", pub.l ** 2 * gram_entry_bits(pub, "u"))
    ev, U, _ = _decompose(gu)
    rank = numerical_rank(ev, max(pub.l, pub.N))
    if not 1 <= k <= rank:
        raise RankError(f"k = {k} must lie in [1, rank = {rank}]")
    fp = FixedPointScale(fbits)
    bound = reduction_bound(pub.l, pub.d, pub.t, fbits)
    rng = role_rng(seed, "SD_u-reduce")
    Y = np.empty((k, pub.N))
    for j in range(k):
        mu = _mask([fp.quantize(x) for x in U[:, j]], params.W, params.S, pub.t, rng)
        for i, col in enumerate(zip(*rows)):
            e = sum(a * b for a, b in zip(mu, col))
            Y[j, i] = fp.dequantize(signed_residue(e, params.W, params.S, bound.w_threshold(),
                                                   bound.s_threshold(params.W)))
    return U[:, :k], Y


# --- recommendation ----------------------------------------------------------------

def fill_unknown(ratings, unknown: int = -1) -> list[list[int]]:
    """Replace unknown cells with the user's (column's) rounded average rating."""
    rows = [list(map(int, r)) for r in ratings]
    l, N = len(rows), len(rows[0])
    out = [r[:] for r in rows]
    for c in range(N):
        known = [rows[i][c] for i in range(l) if rows[i][c] != unknown]
        if not known:
            raise ValueError(f"user {c} has no known ratings")
        avg = int(Fraction(sum(known), len(known)) + Fraction(1, 2))
        for i in range(l):
            if rows[i][c] == unknown:
                out[i][c] = avg
    return out


@dataclass(frozen=True)
class ReputationQuery:
    user: int
    item: int
    k: int


def _sigma_max_bound(l: int, N: int, d: int) -> float:
    # centered entries satisfy |x| <= d, so sigma_max <= ||X||_F <= sqrt(lN) d
    return math.sqrt(l * N) * d


def recommend_bounds(N: int, l: int, d: int, t: int, k: int, fbits: int) -> list[ProductBound]:
    s = math.sqrt(_sigma_max_bound(l, N, d))
    u_max = math.ceil(s * (1 << fbits)) + 1
    # per-user standard deviation of integer data is at least 1/sqrt(l)
    v_max = math.ceil(s * math.sqrt(l) * (1 << fbits)) + 1
    return [
        ProductBound(k, u_max, v_max, t, t, signed=True),
        probe_bound(l, l * d, l * t, signed=True),
    ]


def recommend_params(N: int, l: int, d: int, k_max: int | None = None,
                     fbits: int = DEFAULT_FBITS, **kw) -> SystemParams:
    kappa1 = kw.pop("kappa1", None) or N.bit_length() + l.bit_length() + 1
    bounds = recommend_bounds(N, l, d, 1 << kappa1, k_max or min(l, N), fbits)
    return init_system(N, l, d, normalize="columns", kappa1=kappa1, extra_bounds=bounds, **kw)


@dataclass
class RecommendSession:
    """State after the masked normalization and SVD.

    ``factors`` belong to the z-scored matrix split as SD_u (U, sigma) and
    SD_v (V, sigma, per-user deviations); no single party holds them all.
    """

    factors: SvdFactors
    deviations: np.ndarray
    params: SystemParams
    transcript: Transcript
    seed: object


def recommend_session(params: SystemParams, ratings, seed=None, workers: int = 1,
                      unknown: int = -1) -> RecommendSession:
    if params.normalize != "columns":
        raise ValueError("parameters were not built for column centering")
    A = fill_unknown(ratings, unknown)
    pub = params.public()
    masked, _, tr = collect_masked(params, A, seed, workers)
    C = center_masked(masked, "columns")
    gu, gv = int_gram(C), int_gram([list(c) for c in zip(*C)])
    tr.send("SD_d", "SD_u", "gram", pub.l ** 2 * gram_entry_bits(pub, "u"))
    tr.send("SD_d", "SD_v", "gram", pub.N ** 2 * gram_entry_bits(pub, "v"))
    W, S, l, t, d = params.W, params.S, pub.l, pub.t, pub.d
    nu = NormalizationParams.from_bound(ProductBound(pub.N, l * d, l * d, l * t, l * t, True),
                                        W, l, along_centered_axis=False)
    nv = NormalizationParams.from_bound(ProductBound(l, l * d, l * d, l * t, l * t, True), W, l)
    gu_plain = signed_gram(gu, W, S, nu)
    gv_plain = signed_gram(gv, W, S, nv)
    var = [gv_plain[c][c] for c in range(pub.N)]
    for c, v in enumerate(var):
        if v <= 0:
            raise DegenerateDimensionError(c, "user")
    deviations = np.array([math.sqrt(v / (l - 1)) for v in var])

    probe = probe_vector(l, seed)
    pb = probe_bound(l, l * d, l * t, signed=True)
    image = [Fraction(signed_residue(e, W, S, pb.w_threshold(), pb.s_threshold(W)), l)
             for e in masked_probe(C, probe)]
    factors = _factors(gu_plain, gv_plain, probe, [float(x) for x in image], max(l, pub.N))
    return RecommendSession(factors, deviations, params, tr, seed)


def recommend(session: RecommendSession, query: ReputationQuery,
              fbits: int = DEFAULT_FBITS) -> float:
    """Masked score for ``query.item`` as seen by ``query.user``.

    SD_u sends the masked, quantized row ``U_k sqrt(S_k)`` of the item; SD_v
    the masked, quantized row ``V_k sqrt(S_k) / dev`` of the user.  SD_d
    multiplies them and the FD unmasks.
    """
    f = session.factors
    if not 1 <= query.k <= f.rank:
        raise RankError(f"k = {query.k} must lie in [1, rank = {f.rank}]")
    p = session.params
    l, N = p.l, p.N
    if not (0 <= query.item < l and 0 <= query.user < N):
        raise IndexError("query outside the rating matrix")
    fp = FixedPointScale(fbits)
    root = np.sqrt(f.sigma[:query.k])
    u = [fp.quantize(x) for x in f.U[query.item, :query.k] * root]
    v = [fp.quantize(x) for x in f.V[query.user, :query.k] * root / session.deviations[query.user]]
    bound = recommend_bounds(N, l, p.d, p.t, query.k, fbits)[0]
    if max(map(abs, u), default=0) > bound.x or max(map(abs, v), default=0) > bound.y:
        raise ProtocolViolationError("quantized factors exceed the configured bound")
    mu = _mask(u, p.W, p.S, p.t, role_rng(session.seed, f"SD_u-q{query.item}"))
    mv = _mask(v, p.W, p.S, p.t, role_rng(session.seed, f"SD_v-q{query.user}"))
    tr = session.transcript
    tr.send("SD_u", "SD_d", "masked-factor", len(mu) * max(x.bit_length() for x in mu))
    tr.send("SD_v", "SD_d", "masked-factor", len(mv) * max(x.bit_length() for x in mv))
    score_masked = sum(a * b for a, b in zip(mu, mv))
    tr.send("SD_d", "FD0", "masked-score", score_masked.bit_length())
    y = signed_residue(score_masked, p.W, p.S, bound.w_threshold(), bound.s_threshold(p.W))
    return fp.dequantize(y, power=2)


def plain_recommend(ratings, user: int, item: int, k: int, unknown: int = -1) -> float:
    """Plaintext reference: per-user centering, truncated SVD, per-user scaling."""
    A = np.array(fill_unknown(ratings, unknown), dtype=np.float64)
    C = A - A.mean(axis=0)
    dev = C.std(axis=0, ddof=1)
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    Ck = (U[:, :k] * s[:k]) @ Vt[:k]
    return float(Ck[item, user] / dev[user])


def zscores(ratings, unknown: int = -1) -> np.ndarray:
    A = np.array(fill_unknown(ratings, unknown), dtype=np.float64)
    return (A - A.mean(axis=0)) / A.std(axis=0, ddof=1)
