import random

import numpy as np
import pytest

from fogsvd import crypto, eigen, packing, protocol, sysparams
from fogsvd.protocol import MaskRecord, MaskedMatrix

from conftest import random_matrix


@pytest.fixture(scope="module")
def toy(toy_key):
    return sysparams.init_system(3, 3, 7, attack_resistant=False, kappa1=2,
                                 mask_mode="independent", keypair=toy_key, seed=1)


@pytest.fixture(scope="module")
def params832(key1024):
    return sysparams.init_system(32, 8, 15, keypair=key1024, seed=7)


def test_zero_vector_encrypts_to_zero_chunks(toy):
    pub = toy.public()
    up = protocol.ed_upload(pub, [0, 0, 0], random.Random(0))
    assert len(up.ciphertexts) == toy.n_ciphertexts
    assert all(crypto.decrypt(toy.keypair, c) == 0 for c in up.ciphertexts)


def test_ed_rejects_out_of_range(toy):
    with pytest.raises(protocol.DataRangeError):
        protocol.ed_upload(toy.public(), [0, 8, 0], random.Random(0))
    with pytest.raises(protocol.DataRangeError):
        protocol.ed_upload(toy.public(), [0, 1], random.Random(0))


def test_enron_shaped_upload_uses_fifteen_ciphertexts():
    kp = crypto.keygen(512, random.Random("enron"))
    # per-slot width of 97 bits fits 10 slots in a 1024-bit modulus
    bound = (1 << 96) + 12345
    seq = packing.build_superseq(packing.max_slots(bound, kp.n), bound, kp.n)
    pub = sysparams.PublicParams(256, 150, 15, 10, 80, kp.public, seq, 15, "coordinated")
    up = protocol.ed_upload(pub, [1] * 150, random.Random(0))
    assert len(seq) == 10 and len(up.ciphertexts) == 15


def test_forced_unit_masks(toy):
    pub = toy.public()
    up = protocol.ed_upload(pub, [3, 5, 7], random.Random(1), ed_id=0)
    forced = MaskRecord(0, (1, 1, 1), (1, 1, 1))
    out, rec = protocol.fd_randomize(up, toy.W, toy.S, pub, random.Random(2), masks=forced)
    M = protocol.sdd_unpack([out], toy.keypair, sysparams.PublicParams(
        1, 3, 7, toy.kappa1, toy.kappa3, toy.public_key, toy.seq, toy.n_ciphertexts, "independent"))
    assert M.column(0) == [x + toy.W + toy.S for x in (3, 5, 7)]


def test_random_masks_strip_to_data(toy):
    pub = toy.public()
    rng = random.Random(3)
    for _ in range(20):
        data = [rng.randint(0, 7) for _ in range(3)]
        up = protocol.ed_upload(pub, data, rng)
        out, rec = protocol.fd_randomize(up, toy.W, toy.S, pub, rng)
        assert all(1 <= z <= toy.t for z in rec.z + rec.r)
        one = sysparams.PublicParams(1, 3, 7, toy.kappa1, toy.kappa3, toy.public_key, toy.seq,
                                     toy.n_ciphertexts, "independent")
        col = protocol.sdd_unpack([out], toy.keypair, one).column(0)
        assert col == [d + z * toy.W + r * toy.S for d, z, r in zip(data, rec.z, rec.r)]
        assert [x % toy.S % toy.W for x in col] == data


def test_tampered_mask_is_caught(toy):
    pub = toy.public()
    up = protocol.ed_upload(pub, [7, 7, 7], random.Random(1), ed_id=0)
    big = toy.t + 5
    tampered = MaskRecord(0, (big, big, big), (big, big, big))
    out, _ = protocol.fd_randomize(up, toy.W, toy.S, pub, random.Random(0), masks=tampered)
    one = sysparams.PublicParams(1, 3, 7, toy.kappa1, toy.kappa3, toy.public_key, toy.seq,
                                 toy.n_ciphertexts, "independent")
    with pytest.raises(protocol.ProtocolViolationError) as exc:
        protocol.sdd_unpack([out], toy.keypair, one)
    assert exc.value.ed_id == 0
    assert "ED0" in str(exc.value)


def test_missing_upload(toy):
    pub = toy.public()
    ups = [protocol.fd_randomize(protocol.ed_upload(pub, [1, 2, 3], random.Random(i), ed_id=i),
                                 toy.W, toy.S, pub, random.Random(i))[0] for i in range(2)]
    with pytest.raises(protocol.MissingDataError):
        protocol.sdd_unpack(ups, toy.keypair, pub)


def test_masked_matrix_matches_fd_records(toy):
    A = [[1, 2, 3], [4, 5, 6], [7, 0, 1]]
    res = protocol.run_protocol(toy, A, seed=11)
    for i, rec in enumerate(res.masks):
        expect = [A[k][i] + z * toy.W + r * toy.S for k, (z, r) in enumerate(zip(rec.z, rec.r))]
        assert res.masked.column(i) == expect
    for row in res.masked.entries:
        assert all(x <= toy.seq.bound for x in row)


def test_sdd_gram_schoolbook():
    assert protocol.sdd_gram(MaskedMatrix(((5,),))) == protocol.GramPair([[25]], [[25]])
    M = MaskedMatrix(((1, 2, 3), (4, 5, 6)))
    g = protocol.sdd_gram(M)
    gu = [[sum(M.entries[i][k] * M.entries[j][k] for k in range(3)) for j in range(2)]
          for i in range(2)]
    gv = [[sum(M.entries[k][i] * M.entries[k][j] for k in range(2)) for j in range(3)]
          for i in range(3)]
    assert g.gu == gu and g.gv == gv
    assert g.gv == [list(r) for r in zip(*g.gv)]


def test_derandomize_entry_examples():
    S = 10**9 + 7
    assert protocol.derandomize_entry(42 + 3 * 1000 + 5 * S, 1000, S) == 42
    assert protocol.derandomize_entry(0, 1000, S) == 0
    with pytest.raises(protocol.BoundViolationError):
        protocol.derandomize_entry(999, 1000, S, limit=500)


def test_derandomize_summed_products():
    rng = random.Random(4)
    N, d, t = 3, 15, 8
    b = sysparams.gram_bound(N, 1, d, t)
    W = b.w_floor() + 1
    S = b.s_floor(W) + 1
    for _ in range(200):
        x = [rng.randint(0, d) for _ in range(N)]
        y = [rng.randint(0, d) for _ in range(N)]
        mx = [v + rng.randint(1, t) * W + rng.randint(1, t) * S for v in x]
        my = [v + rng.randint(1, t) * W + rng.randint(1, t) * S for v in y]
        e = sum(a * c for a, c in zip(mx, my))
        assert protocol.derandomize_entry(e, W, S) == sum(a * c for a, c in zip(x, y))


def test_single_entry(toy_key):
    p = sysparams.init_system(1, 1, 7, attack_resistant=False, kappa1=2,
                              mask_mode="independent", keypair=toy_key, seed=0)
    res = protocol.run_protocol(p, [[5]], seed=1)
    assert res.sigma == pytest.approx([5.0])


def test_identity_and_diagonal(toy_key):
    p = sysparams.init_system(2, 2, 3, attack_resistant=False, kappa1=2,
                              mask_mode="independent", keypair=toy_key, seed=0)
    res = protocol.run_protocol(p, [[1, 0], [0, 1]], seed=1)
    assert np.allclose(res.sigma, [1, 1])
    assert np.allclose(np.abs(res.sdu.vectors) @ np.abs(res.sdu.vectors).T, np.eye(2))
    res = protocol.run_protocol(p, [[3, 0], [0, 1]], seed=1)
    assert np.allclose(res.sigma, [3, 1])


def test_random_4x6_against_oracle(toy_key):
    rng = random.Random(6)
    p = sysparams.init_system(6, 4, 15, attack_resistant=False, kappa1=2,
                              mask_mode="independent", keypair=toy_key, seed=0)
    A = random_matrix(rng, 4, 6, 15)
    res = protocol.run_protocol(p, A, seed=2)
    ref = np.linalg.svd(np.array(A, float), compute_uv=False)
    assert np.allclose(res.sigma, ref, rtol=1e-9)


def test_full_run_8x32(params832):
    rng = random.Random(8)
    A = random_matrix(rng, 8, 32, 15)
    res = protocol.run_protocol(params832, A, seed=3)
    gu, gv = eigen.gram(A)
    assert protocol.derandomize_gram(res.grams.gu, params832.W, params832.S) == gu
    assert protocol.derandomize_gram(res.grams.gv, params832.W, params832.S) == gv
    oracle = eigen.svd_oracle(A)
    assert np.allclose(res.sigma, oracle.sigma, rtol=1e-9)
    # both sides recompute the same spectrum
    assert np.allclose(res.sdv.sigma[:8], res.sdu.sigma, rtol=1e-9, atol=1e-9)
    # same sign convention on both routes: columns agree for distinct sigma
    assert np.allclose(res.sdu.vectors, oracle.U, atol=1e-8)
    U, V = res.sdu.vectors, res.sdv.vectors
    assert np.max(np.abs(U.T @ U - np.eye(8))) < 1e-9
    assert np.max(np.abs(V.T @ V - np.eye(32))) < 1e-9


def test_rank_one(key1024):
    p = sysparams.init_system(6, 4, 30, keypair=key1024, seed=1)
    u, v = [1, 2, 3, 4], [1, 0, 2, 5, 3, 1]
    A = [[a * b for b in v] for a in u]
    res = protocol.run_protocol(p, A, seed=0)
    assert res.rank == 1
    assert res.sigma[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))


def test_deterministic_and_worker_independent(toy_key):
    rng = random.Random(1)
    p = sysparams.init_system(10, 3, 15, attack_resistant=False, kappa1=2,
                              mask_mode="independent", keypair=toy_key, seed=0)
    A = random_matrix(rng, 3, 10, 15)
    a = protocol.run_protocol(p, A, seed=5)
    b = protocol.run_protocol(p, A, seed=5, workers=2)
    assert a.masked == b.masked and a.to_dict() == b.to_dict()


def test_identical_plaintexts_masked_differently(params832):
    A = [[7] * 32 for _ in range(8)]
    res = protocol.run_protocol(params832, A, seed=0)
    values = [x for row in res.masked.entries for x in row]
    assert len(set(values)) == len(values)


def test_coordinated_masks_are_distinct(params832):
    rng = random.Random(2)
    res = protocol.run_protocol(params832, random_matrix(rng, 8, 32, 15), seed=9)
    zs = [z for rec in res.masks for z in rec.z]
    assert len(set(zs)) == len(zs) == 8 * 32


def test_transcript_closed_forms(params832):
    rng = random.Random(3)
    res = protocol.run_protocol(params832, random_matrix(rng, 8, 32, 15), seed=1)
    tr, p = res.transcript, params832
    n2 = 2 * p.modulus_bits
    assert all(m.bits == p.n_ciphertexts * n2 for m in tr.messages
               if m.sender.startswith("ED"))
    assert tr.bits("FD", "SD_d") == p.N * p.n_ciphertexts * n2
    assert tr.bits("SD_d", "SD_u") == p.l ** 2 * (2 * p.kappa1 + 2 * p.kappa3 + p.kappa_N)
    assert tr.bits("SD_d", "SD_v") == p.N ** 2 * (2 * p.kappa1 + 2 * p.kappa3 + p.kappa_l)
    assert tr.ops_for("ED", "exp") == 2 * p.N * p.n_ciphertexts
    assert tr.ops_for("SD_d", "exp") == p.N * p.n_ciphertexts


def test_rejects_bad_matrix(toy):
    with pytest.raises(protocol.DataRangeError):
        protocol.run_protocol(toy, [[1, 2, 3], [4, 5, 6]], seed=0)
    with pytest.raises(protocol.DataRangeError):
        protocol.run_protocol(toy, [[1, 2, 3], [4, 5, 6], [7, 8, 1]], seed=0)
