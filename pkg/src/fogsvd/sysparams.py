"""System initialization: masking moduli and packing, plus capacity math."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .crypto import PaillierKeypair, PublicKey, is_probable_prime, keygen
from .packing import SuperSeq, build_superseq, max_slots

ATTACK_S_BITS = 80
MASK_MODES = ("independent", "coordinated")


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ProductBound:
    """Recovery bound for a sum of ``terms`` products of masked values.

    Each factor has the form ``x + z*W + r*S`` with ``|x| <= x_max`` and
    ``|z| <= zx``.  Unsigned recovery (``mod S mod W``) needs ``W > w_floor``
    and ``S > s_floor(W)``; signed recovery doubles both so the positive
    half-ranges can be told apart from wrapped negatives.
    """

    terms: int
    x: int
    y: int
    zx: int
    zy: int
    signed: bool = False

    def w_threshold(self) -> int:
        return self.terms * self.x * self.y

    def s_threshold(self, W: int) -> int:
        return self.terms * (self.x * self.y + (self.x * self.zy + self.y * self.zx) * W
                             + self.zx * self.zy * W * W)

    def w_floor(self) -> int:
        return self.w_threshold() * (2 if self.signed else 1)

    def s_floor(self, W: int) -> int:
        return self.s_threshold(W) * (2 if self.signed else 1)

    def holds(self, W: int, S: int) -> bool:
        return W > self.w_floor() and S > self.s_floor(W)

    def to_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, int) and not isinstance(v, bool) else v)
                for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ProductBound":
        return cls(int(d["terms"]), int(d["x"]), int(d["y"]), int(d["zx"]), int(d["zy"]),
                   bool(d["signed"]))


def gram_bound(N: int, l: int, d: int, t: int) -> ProductBound:
    """W > max(N,l) d^2 and S > max(N,l)(d^2 + 2tWd + t^2 W^2)."""
    return ProductBound(max(N, l), d, d, t, t)


def centered_gram_bounds(N: int, l: int, d: int, t: int, axis: str) -> list[ProductBound]:
    """Signed bounds for both Grams of a mean-centered masked matrix.

    Centering rows multiplies every value and mask by up to ``N`` (columns:
    ``l``); the U-side Gram sums ``N`` products and the V-side Gram ``l``.
    """
    c = N if axis == "rows" else l
    return [ProductBound(L, c * d, c * d, c * t, c * t, signed=True) for L in (N, l)]


@dataclass(frozen=True)
class PublicParams:
    """What the server publishes: the public key and packing layout."""

    N: int
    l: int
    d: int
    kappa1: int
    kappa3: int
    public_key: PublicKey
    seq: SuperSeq
    n_ciphertexts: int
    mask_mode: str
    fd_fanout: int = 8

    @property
    def t(self) -> int:
        return 1 << self.kappa1

    @property
    def modulus_bits(self) -> int:
        return self.public_key.n.bit_length()

    def chunks(self) -> list[range]:
        s = len(self.seq)
        return [range(i, min(i + s, self.l)) for i in range(0, self.l, s)]


@dataclass
class SystemParams:
    N: int
    l: int
    d: int
    kappa1: int
    kappa2: int
    kappa3: int
    W: int
    S: int
    seq: SuperSeq
    n_ciphertexts: int
    keypair: PaillierKeypair
    mask_mode: str = "coordinated"
    attack_resistant: bool = True
    bounds: list[ProductBound] = field(default_factory=list)
    fd_fanout: int = 8
    normalize: str | None = None

    @property
    def t(self) -> int:
        return 1 << self.kappa1

    @property
    def kappa(self) -> int:
        return self.keypair.p.bit_length()

    @property
    def public_key(self) -> PublicKey:
        return self.keypair.public

    @property
    def modulus_bits(self) -> int:
        return self.keypair.n.bit_length()

    @property
    def chunk_size(self) -> int:
        return len(self.seq)

    @property
    def slot_bound(self) -> int:
        return self.seq.bound

    @property
    def kappa_N(self) -> int:
        return self.N.bit_length()

    @property
    def kappa_l(self) -> int:
        return self.l.bit_length()

    @property
    def n_fds(self) -> int:
        return -(-self.N // self.fd_fanout)

    def chunks(self) -> list[range]:
        return self.public().chunks()

    def public(self) -> PublicParams:
        return PublicParams(self.N, self.l, self.d, self.kappa1, self.kappa3,
                            self.keypair.public, self.seq, self.n_ciphertexts,
                            self.mask_mode, self.fd_fanout)

    def violations(self) -> list[str]:
        out = []
        t = self.t
        if math.gcd(self.W, self.S) != 1:
            out.append("gcd(W, S) != 1")
        for b in self.bounds:
            if not self.W > b.w_floor():
                out.append(f"W too small for {b}")
            if not self.S > b.s_floor(self.W):
                out.append(f"S too small for {b}")
        if self.seq.bound != self.d + t * self.W + t * self.S:
            out.append("slot bound != d + tW + tS")
        try:
            self.seq.check(self.keypair.n)
        except ValueError as e:
            out.append(f"packing sequence: {e}")
        if self.n_ciphertexts != -(-self.l // self.chunk_size):
            out.append("n_ciphertexts inconsistent with chunk size")
        if self.attack_resistant and self.kappa3 < ATTACK_S_BITS:
            out.append(f"kappa3 = {self.kappa3} < {ATTACK_S_BITS}")
        if self.mask_mode == "coordinated" and t < self.l * self.N:
            out.append("coordinated masks need t >= l*N")
        return out

    def validate(self) -> None:
        bad = self.violations()
        if bad:
            raise ConfigurationError("; ".join(bad))

    # key distribution mirrors the server handing out separate secrets
    def public_dict(self) -> dict:
        return {
            "N": self.N, "l": self.l, "d": self.d,
            "kappa1": self.kappa1, "kappa2": self.kappa2, "kappa3": self.kappa3,
            "n_ciphertexts": self.n_ciphertexts, "mask_mode": self.mask_mode,
            "attack_resistant": self.attack_resistant, "fd_fanout": self.fd_fanout,
            "normalize": self.normalize,
            "public_key": self.keypair.public.to_dict(),
            "seq": self.seq.to_dict(),
            "bounds": [b.to_dict() for b in self.bounds],
        }

    def sdd_secret(self) -> dict:
        return {"role": "SD_d", "key": self.keypair.to_dict(private=True)}

    def mask_secret(self, role: str) -> dict:
        return {"role": role, "W": str(self.W), "S": str(self.S)}

    def save(self, path: str | Path) -> dict[str, Path]:
        path = Path(path)
        files = secret_paths(path)
        path.write_text(json.dumps(self.public_dict(), indent=2, sort_keys=True))
        files["sdd"].write_text(json.dumps(self.sdd_secret(), indent=2, sort_keys=True))
        files["fd"].write_text(json.dumps(self.mask_secret("FD"), indent=2, sort_keys=True))
        files["sduv"].write_text(json.dumps(self.mask_secret("SD_u/SD_v"), indent=2, sort_keys=True))
        return {"params": path, **files}

    @classmethod
    def load(cls, path: str | Path) -> "SystemParams":
        path = Path(path)
        files = secret_paths(path)
        pub = json.loads(path.read_text())
        kp = PaillierKeypair.from_dict(json.loads(files["sdd"].read_text())["key"])
        if kp.public != PublicKey.from_dict(pub["public_key"]):
            raise ConfigurationError("SD_d key does not match the public key")
        ws = json.loads(files["fd"].read_text())
        params = cls(
            N=pub["N"], l=pub["l"], d=pub["d"], kappa1=pub["kappa1"], kappa2=pub["kappa2"],
            kappa3=pub["kappa3"], W=int(ws["W"]), S=int(ws["S"]),
            seq=SuperSeq.from_dict(pub["seq"]), n_ciphertexts=pub["n_ciphertexts"],
            keypair=kp, mask_mode=pub["mask_mode"], attack_resistant=pub["attack_resistant"],
            bounds=[ProductBound.from_dict(b) for b in pub["bounds"]],
            fd_fanout=pub["fd_fanout"], normalize=pub.get("normalize"),
        )
        params.validate()
        return params


def secret_paths(path: Path) -> dict[str, Path]:
    stem = path.with_suffix("")
    return {k: Path(f"{stem}.{k}.json") for k in ("sdd", "fd", "sduv")}


def _random_in(lo: int, hi: int, rng: random.Random) -> int:
    return rng.randrange(lo, hi + 1)


def _random_prime_in(lo: int, hi: int, rng: random.Random) -> int:
    for _ in range(1_000_000):
        c = _random_in(lo, hi, rng) | 1
        if c <= hi and is_probable_prime(c):
            return c
    raise ConfigurationError(f"no prime found in [{lo}, {hi}]")


def _draw_W(floor: int, kappa2: int, rng: random.Random) -> tuple[int, int]:
    kappa2 = max(kappa2, (floor + 1).bit_length())
    lo = max(floor + 1, 1 << (kappa2 - 1))
    return _random_in(lo, (1 << kappa2) - 1, rng), kappa2


def init_system(N: int, l: int, d: int, modulus_bits: int = 1024,
                attack_resistant: bool = True, seed=None, *,
                mask_mode: str = "coordinated", kappa1: int | None = None,
                keypair: PaillierKeypair | None = None,
                extra_bounds: list[ProductBound] = (),
                normalize: str | None = None, fd_fanout: int = 8) -> SystemParams:
    """Choose the masking moduli, the packing sequence and the Paillier key.

    ``kappa1`` defaults to ``kappa_N + kappa_l + 1``.  W and S are drawn at
    the smallest bit lengths allowed by every recovery bound (S is prime, so
    it is coprime to the smaller W).  ``normalize`` ("rows" or "columns")
    adds the strengthened bounds needed to recover Grams of centered data.
    """
    if N < 1 or l < 1 or d < 1:
        raise ConfigurationError("N, l and d must be >= 1")
    if mask_mode not in MASK_MODES:
        raise ConfigurationError(f"mask_mode must be one of {MASK_MODES}")
    if normalize not in (None, "rows", "columns"):
        raise ConfigurationError("normalize must be None, 'rows' or 'columns'")
    rng = random.Random(None if seed is None else f"setup:{seed}")
    kN, kl, kd = N.bit_length(), l.bit_length(), d.bit_length()
    if kappa1 is None:
        kappa1 = kN + kl + 1
    t = 1 << kappa1
    if mask_mode == "coordinated" and t < l * N:
        raise ConfigurationError(f"coordinated masks need t >= l*N, got t = {t}")

    bounds = [gram_bound(N, l, d, t)]
    if normalize:
        bounds += centered_gram_bounds(N, l, d, t, normalize)
    bounds += list(extra_bounds)

    if keypair is None:
        if modulus_bits % 2 or modulus_bits < 16:
            raise ConfigurationError("modulus_bits must be even and >= 16")
        keypair = keygen(modulus_bits // 2, rng)

    W, kappa2 = _draw_W(max(b.w_floor() for b in bounds), max(kN, kl) + 2 * kd + 1, rng)
    s_floor = max(b.s_floor(W) for b in bounds)
    kappa3 = max(max(kN, kl) + 2 * kappa1 + 2 * kappa2 + 1, (s_floor + 1).bit_length())
    if attack_resistant:
        kappa3 = max(kappa3, ATTACK_S_BITS)
    S = _random_prime_in(max(s_floor + 1, 1 << (kappa3 - 1)), (1 << kappa3) - 1, rng)

    B = d + t * W + t * S
    slots = max_slots(B, keypair.n)
    if slots == 0:
        need = (B.bit_length() + 1)
        raise ConfigurationError(
            f"one slot (bound of {B.bit_length()} bits) does not fit a "
            f"{keypair.n.bit_length()}-bit modulus; need at least {need} bits")
    chunk = min(slots, l)
    params = SystemParams(
        N=N, l=l, d=d, kappa1=kappa1, kappa2=kappa2, kappa3=kappa3, W=W, S=S,
        seq=build_superseq(chunk, B, keypair.n), n_ciphertexts=-(-l // chunk),
        keypair=keypair, mask_mode=mask_mode, attack_resistant=attack_resistant,
        bounds=bounds, fd_fanout=fd_fanout, normalize=normalize,
    )
    params.validate()
    return params


def from_values(N: int, l: int, d: int, W: int, S: int, kappa1: int,
                keypair: PaillierKeypair, *, mask_mode: str = "independent",
                attack_resistant: bool = False, normalize: str | None = None,
                extra_bounds: list[ProductBound] = (), fd_fanout: int = 8) -> SystemParams:
    """Assemble parameters from hand-picked W and S (toy configurations)."""
    t = 1 << kappa1
    bounds = [gram_bound(N, l, d, t)]
    if normalize:
        bounds += centered_gram_bounds(N, l, d, t, normalize)
    bounds += list(extra_bounds)
    B = d + t * W + t * S
    chunk = min(max(max_slots(B, keypair.n), 1), l)
    params = SystemParams(
        N=N, l=l, d=d, kappa1=kappa1, kappa2=W.bit_length(), kappa3=S.bit_length(),
        W=W, S=S, seq=build_superseq(chunk, B), n_ciphertexts=-(-l // chunk),
        keypair=keypair, mask_mode=mask_mode, attack_resistant=attack_resistant,
        bounds=bounds, fd_fanout=fd_fanout, normalize=normalize,
    )
    params.validate()
    return params


@dataclass(frozen=True)
class CapacityReport:
    aggregate_bits: int
    bits_per_slot: int
    slots_per_ciphertext: int
    n_ciphertexts: int
    max_users_exponent: int


def aggregate_bits(kappa_d: int, l: int, kappa_N: int) -> int:
    """Bit length of one ED's packed, masked aggregate (closed form)."""
    kl = l.bit_length()
    m = max(kappa_N, kl)
    k1 = kappa_N + kl + 1
    k2 = m + 2 * kappa_d + 1
    if m + 2 * k1 + 2 * k2 > ATTACK_S_BITS:
        return l * (3 * m + 4 * kappa_d + 3 * kappa_N + 3 * kl + 3)
    return l * (ATTACK_S_BITS + kappa_N + kl + 1)


def capacity(kappa_d: int, l: int, kappa_N: int, modulus_bits: int = 1024) -> CapacityReport:
    """Packing capacity of one ED aggregate under a ``modulus_bits`` key.

    ``max_users_exponent`` is the largest user-count exponent for which all
    ``l`` dimensions fit in one ciphertext.

    Slot counts are floored so the packed value never reaches ``n``.  Plots
    that round slot widths instead of flooring them land a few units away
    from ``max_users_exponent``; allow about 3 when comparing.
    """
    if min(kappa_d, l, kappa_N, modulus_bits) < 1:
        raise ValueError("all inputs must be >= 1")
    total = aggregate_bits(kappa_d, l, kappa_N)
    per_slot = total // l
    usable = modulus_bits - 1
    slots = usable // per_slot
    n_ct = -(-l // slots) if slots else 0
    best = 0
    for kN in range(1, 4 * modulus_bits):
        if aggregate_bits(kappa_d, l, kN) <= usable:
            best = kN
    return CapacityReport(total, per_slot, slots, n_ct, best)


def collision_probability(l: int, N: int, kappa1: int) -> float:
    """Chance that two of ``l*N`` uniform draws from ``[1, 2**kappa1]`` match."""
    x = (l * N) ** 2 / (2.0 * 2.0 ** kappa1)
    return -math.expm1(-x)
