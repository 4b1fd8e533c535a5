import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fogsvd import apps, eigen, protocol, sysparams
from fogsvd.protocol import ProtocolViolationError

from conftest import random_matrix


# --- signed recovery ---------------------------------------------------------------

def _embed(value, zw, zs, W, S):
    return value + zw * W + zs * S


def test_signed_negative_value_recovered():
    rng = random.Random(0)
    T_W, T_S = 100, 10**6
    W, S = 2 * T_W + 1, 2 * T_S + 7
    for _ in range(100):
        inner = -7 + rng.randint(-50, 50) * W
        e = inner + rng.randint(1, 10**6) * S
        assert apps.signed_residue(e, W, S, T_W, T_S) == -7


def test_signed_positive_same_as_unsigned():
    W, S = 1001, 10**9 + 7
    e = 42 + 3 * W + 5 * S
    assert apps.signed_residue(e, W, S, 500, 10**8) == protocol.derandomize_entry(e, W, S) == 42


def test_boundary_at_threshold_stays_positive():
    T_W, W, S, T_S = 100, 201, 10**6 + 3, 5 * 10**5
    assert apps.signed_residue(T_W, W, S, T_W, T_S) == T_W
    assert apps.signed_residue(T_W + 1, W, S, T_W, T_S) == T_W + 1 - W


def test_signed_exhaustive_tiny():
    N, d, t = 2, 2, 2
    b = sysparams.centered_gram_bounds(N, 1, d, t, "rows")[0]
    W = b.w_floor() + 1
    S = b.s_floor(W) + 1
    span = range(-N * d, N * d + 1)
    mspan = range(-N * t, N * t + 1)
    for x1, x2, y1, y2 in itertools.product(span, repeat=4):
        for zx, zy in ((mspan[0], mspan[-1]), (mspan[-1], mspan[-1]), (0, mspan[0])):
            e = ((x1 + zx * W + 3 * S) * (y1 + zy * W - 2 * S)
                 + (x2 + zy * W + 5 * S) * (y2 + zx * W + 7 * S))
            got = apps.signed_residue(e, W, S, b.w_threshold(), b.s_threshold(W))
            assert got == x1 * y1 + x2 * y2


def test_divisibility_violation():
    with pytest.raises(ProtocolViolationError):
        apps.signed_derandomize(7, 1001, 10**9 + 7, 500, 10**8, scale=2)
    assert apps.signed_derandomize(8, 1001, 10**9 + 7, 500, 10**8, scale=2) == Fraction(2)


# --- centering -------------------------------------------------------------------

def test_constant_row_centers_to_zero():
    W, S = 10**4, 10**9 + 7
    rng = random.Random(1)
    row = [5 + rng.randint(1, 8) * W + rng.randint(1, 8) * S for _ in range(6)]
    C = apps.center_masked([row])
    bound = sysparams.ProductBound(6, 6 * 5, 1, 6 * 8, 0, True)
    for x in C[0]:
        assert apps.signed_residue(x, W, S, bound.w_threshold(), bound.s_threshold(W)) == 0


def test_two_column_hand_expansion():
    W, S = 1000, 10**7 + 19
    d, z, r = [3, 9], [2, 5], [4, 1]
    masked = [[d[i] + z[i] * W + r[i] * S for i in range(2)]]
    C = apps.center_masked(masked)
    for k in range(2):
        expect = ((2 * d[k] - sum(d)) + (2 * z[k] - sum(z)) * W + (2 * r[k] - sum(r)) * S)
        assert C[0][k] == expect


def test_centering_permutation_invariant():
    rng = random.Random(2)
    M = [[rng.randint(0, 10**6) for _ in range(7)] for _ in range(3)]
    perm = list(range(7))
    rng.shuffle(perm)
    C = apps.center_masked(M)
    Cp = apps.center_masked([[r[j] for j in perm] for r in M])
    assert Cp == [[r[j] for j in perm] for r in C]


def test_columns_axis():
    assert apps.center_masked([[1, 4], [3, 0]], "columns") == [[-2, 4], [2, -4]]


def test_running_center_add_remove():
    rng = random.Random(3)
    cols = [[rng.randint(0, 10**9) for _ in range(4)] for _ in range(6)]
    rc = apps.RunningCenter(4)
    for c in cols[:5]:
        rc.add(c)
    rc.add(cols[5])
    full = apps.center_masked([list(r) for r in zip(*cols)])
    assert rc.centered() == full
    rc.remove(2)
    rest = cols[:2] + cols[3:]
    assert rc.centered() == apps.center_masked([list(r) for r in zip(*rest)])


# --- correlation / detection ----------------------------------------------------------

@pytest.fixture(scope="module")
def det_params(key1024):
    return apps.detection_params(20, 4, 15, keypair=key1024, seed=3)


def test_correlation_matches_plaintext(det_params):
    rng = random.Random(4)
    A = random_matrix(rng, 4, 20, 15)
    res = apps.masked_correlation(det_params, A, seed=1)
    assert np.max(np.abs(res.R - apps.plain_correlation(A))) < 1e-9
    assert np.all(np.diag(res.R) == 1.0)


def test_perfectly_correlated_dimensions(key1024):
    p = apps.detection_params(6, 2, 15, keypair=key1024, seed=1)
    x = [1, 4, 2, 7, 3, 5]
    res = apps.masked_correlation(p, [x, [2 * v for v in x]], seed=0)
    assert res.R[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_constant_dimension_rejected(key1024):
    p = apps.detection_params(5, 2, 9, keypair=key1024, seed=1)
    with pytest.raises(apps.DegenerateDimensionError) as exc:
        apps.masked_correlation(p, [[3, 3, 3, 3, 3], [1, 2, 3, 4, 5]], seed=0)
    assert exc.value.index == 0


def test_detect_shift_basics():
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert apps.detect_shift(e1, e1) == 0.0
    assert apps.detect_shift(e1, -e1) == 0.0
    assert apps.detect_shift(e1, e2) == pytest.approx(math.pi / 2)


def test_injected_anomaly_increases_angle():
    rng = np.random.default_rng(5)
    base_signal = rng.integers(0, 10, size=60)
    base = np.vstack([base_signal, base_signal + rng.integers(0, 3, 60),
                      rng.integers(0, 10, 60), rng.integers(0, 10, 60)])
    clean = np.vstack([base_signal, base_signal + rng.integers(0, 3, 60),
                       rng.integers(0, 10, 60), rng.integers(0, 10, 60)])
    dirty = clean.copy()
    dirty[3, 7] *= 10
    dirty[3, 7] += 10
    ref = apps.first_eigenvector(apps.plain_correlation(base))
    a_clean = apps.detect_shift(ref, apps.first_eigenvector(apps.plain_correlation(clean)))
    a_dirty = apps.detect_shift(ref, apps.first_eigenvector(apps.plain_correlation(dirty)))
    assert a_dirty > a_clean


# --- compression -----------------------------------------------------------------

def test_compress_full_rank_and_errors(key1024):
    rng = random.Random(6)
    A = random_matrix(rng, 4, 6, 15)
    p = apps.factor_params(6, 4, 15, keypair=key1024, seed=2)
    f, _, _ = apps.masked_factors(p, A, seed=1)
    assert np.max(np.abs(apps.compress(f, f.rank).reconstruct() - np.array(A))) < 1e-9
    with pytest.raises(apps.RankError):
        apps.compress(f, f.rank + 1)
    with pytest.raises(apps.RankError):
        apps.compress(f, 0)


def test_masked_factors_needs_probe_room(toy_key):
    p = sysparams.init_system(3, 2, 3, attack_resistant=False, kappa1=2,
                              mask_mode="independent", keypair=toy_key, seed=0)
    with pytest.raises(sysparams.ConfigurationError):
        apps.masked_factors(p, [[1, 2, 3], [3, 2, 1]], seed=0)


def test_compress_rank_two_eckart_young(key1024):
    rng = np.random.default_rng(7)
    X = rng.integers(1, 4, size=(5, 2)) @ rng.integers(0, 4, size=(2, 8))
    p = apps.factor_params(8, 5, int(X.max()), keypair=key1024, seed=2)
    f, _, _ = apps.masked_factors(p, X.tolist(), seed=1)
    assert f.rank == 2
    err = np.linalg.norm(X - apps.compress(f, 1).reconstruct())
    assert err == pytest.approx(f.sigma[1], rel=1e-8)


def test_reduce_dims_against_projection(key1024):
    rng = random.Random(8)
    A = random_matrix(rng, 5, 12, 15)
    p = apps.reduction_params(12, 5, 15, keypair=key1024, seed=1)
    U, Y = apps.reduce_dims(p, A, 2, seed=1)
    Af = np.array(A, float)
    tol = 5 * 15 * 2.0 ** -apps.DEFAULT_FBITS
    assert np.max(np.abs(Y - U.T @ Af)) <= tol
    Uo = eigen.svd_oracle(A).U[:, :2]
    # same subspace as the plaintext projection
    assert np.max(np.abs(U @ Y - Uo @ (Uo.T @ Af))) <= 10 * tol
    with pytest.raises(apps.RankError):
        apps.reduce_dims(p, A, 6, seed=1)


def test_fixed_point_error_bound():
    fp = apps.FixedPointScale(20)
    rng = random.Random(0)
    for _ in range(1000):
        x = rng.uniform(-100, 100)
        assert abs(fp.dequantize(fp.quantize(x)) - x) <= 2.0 ** -20


# --- recommendation -----------------------------------------------------------------

def test_fill_unknown_uses_user_average():
    R = [[5, -1], [3, 2], [-1, 4]]
    assert apps.fill_unknown(R) == [[5, 3], [3, 2], [4, 4]]
    with pytest.raises(ValueError):
        apps.fill_unknown([[-1], [-1]])


@pytest.fixture(scope="module")
def rec_params(key1024):
    return apps.recommend_params(6, 5, 5, keypair=key1024, seed=2)


def _ratings(rng, l=5, N=6):
    while True:
        R = [[rng.randint(1, 5) if rng.random() > 0.3 else -1 for _ in range(N)]
             for _ in range(l)]
        try:
            A = apps.fill_unknown(R)
        except ValueError:
            continue
        if all(len(set(c)) > 1 for c in zip(*A)):
            return R


def test_recommend_matches_plaintext(rec_params):
    R = _ratings(random.Random(9))
    s = apps.recommend_session(rec_params, R, seed=4)
    tol = 2.0 ** (1 - 20) * 2 * np.abs(apps.zscores(R)).max()
    for c in range(6):
        for p in range(5):
            got = apps.recommend(s, apps.ReputationQuery(c, p, 2))
            assert abs(got - apps.plain_recommend(R, c, p, 2)) <= tol


def test_full_rank_reproduces_zscores(rec_params):
    R = _ratings(random.Random(10))
    s = apps.recommend_session(rec_params, R, seed=4)
    Z = apps.zscores(R)
    k = s.factors.rank
    for c, p in [(0, 0), (3, 2), (5, 4)]:
        assert apps.recommend(s, apps.ReputationQuery(c, p, k)) == pytest.approx(Z[p, c], abs=1e-5)


def test_identical_users_give_column_pattern(rec_params):
    col = [1, 4, 2, 5, 3]
    R = [[v] * 6 for v in col]
    s = apps.recommend_session(rec_params, R, seed=1)
    assert s.factors.rank == 1
    z = (np.array(col) - np.mean(col)) / np.std(col, ddof=1)
    for c in range(6):
        got = [apps.recommend(s, apps.ReputationQuery(c, p, 1)) for p in range(5)]
        assert np.allclose(got, z, atol=1e-5)


def test_recommend_rank_error(rec_params):
    col = [1, 4, 2, 5, 3]
    s = apps.recommend_session(rec_params, [[v] * 6 for v in col], seed=1)
    with pytest.raises(apps.RankError):
        apps.recommend(s, apps.ReputationQuery(0, 0, 2))


def test_recommend_invariant_to_relabeling_other_users(rec_params):
    R = _ratings(random.Random(11))
    perm = [0, 3, 1, 5, 2, 4]   # user 0 stays put
    Rp = [[row[j] for j in perm] for row in R]
    a = apps.recommend(apps.recommend_session(rec_params, R, seed=2), apps.ReputationQuery(0, 1, 2))
    b = apps.recommend(apps.recommend_session(rec_params, Rp, seed=3), apps.ReputationQuery(0, 1, 2))
    assert a == pytest.approx(b, abs=1e-5)
