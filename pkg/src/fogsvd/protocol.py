"""The five roles of the fog SVD protocol and an in-process orchestrator.

Data flow for an ``l x N`` matrix ``A`` (column ``i`` belongs to ED ``i``)::

    ED_i   --E(packed column)-->  FD_j   --E(packed column + masks)-->  SD_d
    SD_d   --A'A'^T-->  SD_u   (U, sigma)
    SD_d   --A'^T A'-->  SD_v  (V, sigma)

Every masked value has the form ``d + z*W + r*S`` with ``z, r`` in ``[1, t]``;
``mod S mod W`` strips the masks from a Gram entry.
"""
from __future__ import annotations

import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import crypto
from .crypto import Ciphertext, PaillierKeypair
from .eigen import jacobi_eigen, numerical_rank, singular_values
from .packing import decode, encode
from .sysparams import PublicParams, SystemParams


class ProtocolError(Exception):
    pass


class DataRangeError(ProtocolError, ValueError):
    pass


class ProtocolViolationError(ProtocolError):
    def __init__(self, msg: str, ed_id: int | None = None):
        super().__init__(msg)
        self.ed_id = ed_id


class MissingDataError(ProtocolError):
    pass


class BoundViolationError(ProtocolError):
    pass


def role_rng(seed, role: str) -> random.Random:
    """Independent, reproducible stream for one entity."""
    return random.Random(None if seed is None else f"{seed}:{role}")


@dataclass(frozen=True)
class EdUpload:
    ed_id: int
    ciphertexts: tuple[Ciphertext, ...]


@dataclass(frozen=True)
class MaskRecord:
    ed_id: int
    z: tuple[int, ...]
    r: tuple[int, ...]


@dataclass(frozen=True)
class MaskedMatrix:
    entries: tuple[tuple[int, ...], ...]   # l rows, N columns

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0]) if self.entries else 0

    def column(self, i: int) -> list[int]:
        return [row[i] for row in self.entries]


@dataclass(frozen=True)
class GramPair:
    gu: list[list[int]]
    gv: list[list[int]]


@dataclass
class Message:
    sender: str
    receiver: str
    kind: str
    bits: int


@dataclass
class Transcript:
    messages: list[Message] = field(default_factory=list)
    ops: dict[str, Counter] = field(default_factory=dict)

    def send(self, sender: str, receiver: str, kind: str, bits: int) -> None:
        self.messages.append(Message(sender, receiver, kind, bits))

    def count(self, entity: str, exp: int = 0, mul: int = 0) -> None:
        c = self.ops.setdefault(entity, Counter())
        c["exp"] += exp
        c["mul"] += mul

    def bits(self, sender_prefix: str, receiver_prefix: str) -> int:
        return sum(m.bits for m in self.messages
                   if m.sender.startswith(sender_prefix) and m.receiver.startswith(receiver_prefix))

    def ops_for(self, prefix: str, op: str) -> int:
        return sum(c[op] for name, c in self.ops.items() if name.startswith(prefix))

    def to_dict(self) -> dict:
        return {
            "messages": [{"from": m.sender, "to": m.receiver, "kind": m.kind, "bits": m.bits}
                         for m in self.messages],
            "operations": {k: dict(sorted(v.items())) for k, v in sorted(self.ops.items())},
        }


def ciphertext_bits(pub: PublicParams) -> int:
    return 2 * pub.modulus_bits


def gram_entry_bits(pub: PublicParams, side: str) -> int:
    """Nominal width of one masked Gram entry: ``2k1 + 2k3 + k_N`` (U side)."""
    k = pub.N.bit_length() if side == "u" else pub.l.bit_length()
    return 2 * pub.kappa1 + 2 * pub.kappa3 + k


# --- ED -------------------------------------------------------------------

def ed_upload(pub: PublicParams, data: Sequence[int], rng: random.Random,
              ed_id: int = 0, transcript: Transcript | None = None) -> EdUpload:
    """Pack each chunk of the column with the public sequence and encrypt it."""
    if len(data) != pub.l:
        raise DataRangeError(f"ED{ed_id}: expected {pub.l} values, got {len(data)}")
    for k, x in enumerate(data):
        if isinstance(x, bool) or not isinstance(x, (int, np.integer)) or not 0 <= x <= pub.d:
            raise DataRangeError(f"ED{ed_id}: dimension {k} value {x!r} outside [0, {pub.d}]")
    cts = []
    for ch in pub.chunks():
        m = encode(pub.seq.prefix(len(ch)), [int(data[k]) for k in ch])
        cts.append(crypto.encrypt(pub.public_key, m, rng=rng))
    if transcript is not None:
        me = f"ED{ed_id}"
        transcript.count(me, exp=2 * len(cts), mul=len(cts))
        transcript.send(me, f"FD{ed_id // pub.fd_fanout}", "ciphertexts",
                        len(cts) * ciphertext_bits(pub))
    return EdUpload(ed_id, tuple(cts))


# --- FD -------------------------------------------------------------------

def draw_masks(pub: PublicParams, ed_id: int, rng: random.Random,
               z: Sequence[int] | None = None) -> MaskRecord:
    t = pub.t
    zs = tuple(z) if z is not None else tuple(rng.randint(1, t) for _ in range(pub.l))
    rs = tuple(rng.randint(1, t) for _ in range(pub.l))
    return MaskRecord(ed_id, zs, rs)


def fd_randomize(upload: EdUpload, W: int, S: int, pub: PublicParams,
                 rng: random.Random, masks: MaskRecord | None = None,
                 transcript: Transcript | None = None) -> tuple[EdUpload, MaskRecord]:
    """Homomorphically add ``sum_k a_k (z_k W + r_k S)`` to every packed chunk."""
    if len(upload.ciphertexts) != pub.n_ciphertexts:
        raise ProtocolViolationError(
            f"ED{upload.ed_id} sent {len(upload.ciphertexts)} ciphertexts, "
            f"expected {pub.n_ciphertexts}", upload.ed_id)
    if masks is None:
        masks = draw_masks(pub, upload.ed_id, rng)
    pk = pub.public_key
    out = []
    for c, ch in zip(upload.ciphertexts, pub.chunks()):
        rz = sum(a * (masks.z[k] * W + masks.r[k] * S) for a, k in zip(pub.seq.a, ch))
        # g^rz is an encryption of rz with unit randomness
        out.append(crypto.mul(c, crypto.encrypt(pk, rz % pk.n, r=1), pk))
    if transcript is not None:
        transcript.count(f"FD{upload.ed_id // pub.fd_fanout}", exp=len(out), mul=len(out))
    return EdUpload(upload.ed_id, tuple(out)), masks


# --- SD_d -----------------------------------------------------------------

def _decrypt_all(keypair: PaillierKeypair, values: list[int], workers: int) -> list[int]:
    if workers <= 1 or len(values) < 2:
        return [crypto.decrypt(keypair, Ciphertext(v)) for v in values]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_decrypt_one, [keypair] * len(values), values,
                             chunksize=max(1, len(values) // (4 * workers))))


def _decrypt_one(keypair: PaillierKeypair, value: int) -> int:
    return crypto.decrypt(keypair, Ciphertext(value))


def sdd_unpack(uploads: Sequence[EdUpload], keypair: PaillierKeypair, pub: PublicParams,
               workers: int = 1, transcript: Transcript | None = None) -> MaskedMatrix:
    """Decrypt and unpack every upload into the masked ``l x N`` matrix.

    Results are ordered by ED index, so the worker count never changes them.
    """
    ids = sorted(u.ed_id for u in uploads)
    if ids != list(range(pub.N)):
        missing = sorted(set(range(pub.N)) - set(ids))
        raise MissingDataError(f"expected uploads from {pub.N} EDs; missing {missing[:10]}, "
                               f"got {len(uploads)}")
    ordered = sorted(uploads, key=lambda u: u.ed_id)
    for u in ordered:
        if len(u.ciphertexts) != pub.n_ciphertexts:
            raise ProtocolViolationError(f"ED{u.ed_id}: wrong ciphertext count", u.ed_id)
    flat = [c.value for u in ordered for c in u.ciphertexts]
    plain = _decrypt_all(keypair, flat, workers)
    if transcript is not None:
        transcript.count("SD_d", exp=len(flat))
    bound = pub.seq.bound
    columns = []
    pos = 0
    for u in ordered:
        col = []
        for ch in pub.chunks():
            slots = decode(pub.seq.prefix(len(ch)), plain[pos])
            pos += 1
            for v in slots:
                if not 0 <= v <= bound:
                    raise ProtocolViolationError(
                        f"ED{u.ed_id}: unpacked slot value exceeds the slot bound", u.ed_id)
            col.extend(slots)
        columns.append(col)
    return MaskedMatrix(tuple(tuple(col[k] for col in columns) for k in range(pub.l)))


def int_gram(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Exact ``X X^T`` for a list of integer rows (symmetric fill)."""
    n = len(rows)
    out = [[0] * n for _ in range(n)]
    for i in range(n):
        ri = rows[i]
        for j in range(i, n):
            out[i][j] = out[j][i] = sum(x * y for x, y in zip(ri, rows[j]))
    return out


def sdd_gram(M: MaskedMatrix, which: str = "both") -> GramPair:
    rows = [list(r) for r in M.entries]
    gu = int_gram(rows) if which in ("both", "u") else []
    gv = int_gram([list(c) for c in zip(*rows)]) if which in ("both", "v") else []
    return GramPair(gu, gv)


# --- SD_u / SD_v --------------------------------------------------------------

def derandomize_entry(e: int, W: int, S: int, limit: int | None = None) -> int:
    """``(e mod S) mod W``; ``limit`` is the largest legitimate result."""
    x = e % S % W
    if limit is not None and x > limit:
        raise BoundViolationError(f"derandomized entry {x} exceeds {limit}; parameters misconfigured")
    return x


def derandomize_gram(G: Sequence[Sequence[int]], W: int, S: int,
                     limit: int | None = None) -> list[list[int]]:
    return [[derandomize_entry(e, W, S, limit) for e in row] for row in G]


@dataclass(frozen=True)
class SideView:
    """What SD_u (vectors = U) or SD_v (vectors = V) ends up holding."""

    vectors: np.ndarray
    sigma: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    gram: list[list[int]]
    sweeps: int


def _decompose(G: list[list[int]], size: int) -> SideView:
    eig = jacobi_eigen(np.array(G, dtype=np.float64))
    rank = numerical_rank(eig.values, size)
    sigma = singular_values(eig.values)
    sigma[rank:] = 0.0
    return SideView(eig.vectors, sigma, eig.values, rank, G, eig.sweeps)


def sdu_decompose(gu_masked, W: int, S: int, pub: PublicParams) -> SideView:
    G = derandomize_gram(gu_masked, W, S, limit=pub.N * pub.d * pub.d)
    return _decompose(G, max(pub.l, pub.N))


def sdv_decompose(gv_masked, W: int, S: int, pub: PublicParams) -> SideView:
    G = derandomize_gram(gv_masked, W, S, limit=pub.l * pub.d * pub.d)
    return _decompose(G, max(pub.l, pub.N))


# --- orchestration ----------------------------------------------------------

@dataclass
class RunResult:
    sdu: SideView
    sdv: SideView
    transcript: Transcript
    masked: MaskedMatrix
    grams: GramPair
    masks: list[MaskRecord]

    @property
    def sigma(self) -> np.ndarray:
        k = min(len(self.sdu.sigma), len(self.sdv.sigma))
        return self.sdu.sigma[:k]

    @property
    def rank(self) -> int:
        return self.sdu.rank

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma.tolist(),
            "rank": self.rank,
            "U": self.sdu.vectors.tolist(),
            "V": self.sdv.vectors.tolist(),
            "transcript": self.transcript.to_dict(),
        }


def validate_matrix(A, pub: PublicParams) -> list[list[int]]:
    rows = [list(r) for r in A]
    if len(rows) != pub.l or any(len(r) != pub.N for r in rows):
        raise DataRangeError(f"matrix must be {pub.l} x {pub.N}")
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            if isinstance(x, bool) or not isinstance(x, (int, np.integer)) or not 0 <= x <= pub.d:
                raise DataRangeError(f"entry ({i}, {j}) = {x!r} outside [0, {pub.d}]")
    return [[int(x) for x in r] for r in rows]


def collect_masked(params: SystemParams, A, seed, workers: int = 1,
                   transcript: Transcript | None = None,
                   masks: Sequence[MaskRecord] | None = None):
    """Take every column through ED upload and FD randomization to SD_d."""
    pub = params.public()
    rows = validate_matrix(A, pub)
    transcript = transcript if transcript is not None else Transcript()
    coordinated = None
    if masks is None and pub.mask_mode == "coordinated":
        pool = role_rng(seed, "FD-coordination").sample(range(1, pub.t + 1), pub.l * pub.N)
        coordinated = [pool[i * pub.l:(i + 1) * pub.l] for i in range(pub.N)]
    randomized, records = [], []
    for fd in range(-(-pub.N // pub.fd_fanout)):
        fd_rng = role_rng(seed, f"FD{fd}")
        members = range(fd * pub.fd_fanout, min((fd + 1) * pub.fd_fanout, pub.N))
        for i in members:
            up = ed_upload(pub, [r[i] for r in rows], role_rng(seed, f"ED{i}"), i, transcript)
            rec = masks[i] if masks is not None else draw_masks(
                pub, i, fd_rng, coordinated[i] if coordinated else None)
            up2, rec = fd_randomize(up, params.W, params.S, pub, fd_rng, rec, transcript)
            randomized.append(up2)
            records.append(rec)
        transcript.send(f"FD{fd}", "SD_d", "ciphertexts",
                        len(members) * pub.n_ciphertexts * ciphertext_bits(pub))
    masked = sdd_unpack(randomized, params.keypair, pub, workers, transcript)
    return masked, records, transcript


def run_protocol(params: SystemParams, A, seed=None, *, workers: int = 1,
                 masks: Sequence[MaskRecord] | None = None) -> RunResult:
    """Run all five roles in-process; deterministic for a fixed seed."""
    pub = params.public()
    masked, records, transcript = collect_masked(params, A, seed, workers, masks=masks)
    grams = sdd_gram(masked)
    transcript.send("SD_d", "SD_u", "gram", pub.l ** 2 * gram_entry_bits(pub, "u"))
    transcript.send("SD_d", "SD_v", "gram", pub.N ** 2 * gram_entry_bits(pub, "v"))
    sdu = sdu_decompose(grams.gu, params.W, params.S, pub)
    sdv = sdv_decompose(grams.gv, params.W, params.S, pub)
    return RunResult(sdu, sdv, transcript, masked, grams, records)
