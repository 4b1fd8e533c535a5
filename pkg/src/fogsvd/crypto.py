"""Paillier cryptosystem over Python integers.

Keys use the ``g = n + 1`` generator, so ``g**m mod n**2`` reduces to
``1 + m*n mod n**2``.  Randomness is always drawn from an explicitly passed
``random.Random`` so that key generation and encryption are reproducible
under a seed.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import gmpy2

# 40 Miller-Rabin rounds keep the composite-acceptance probability below 2**-80
MR_ROUNDS = 40
MAX_PRIME_CANDIDATES = 100_000


class PaillierError(Exception):
    pass


class KeyGenerationError(PaillierError):
    pass


class PlaintextRangeError(PaillierError, ValueError):
    pass


class MalformedCiphertextError(PaillierError, ValueError):
    pass


def powmod(base: int, exp: int, mod: int) -> int:
    return int(gmpy2.powmod(base, exp, mod))


def is_probable_prime(x: int) -> bool:
    return x >= 2 and bool(gmpy2.is_prime(x, MR_ROUNDS))


def random_prime(bits: int, rng: random.Random) -> int:
    """Random prime with exactly ``bits`` bits and its two top bits set.

    Setting the second bit as well guarantees that the product of two such
    primes has exactly ``2 * bits`` bits.
    """
    if bits < 3:
        raise KeyGenerationError(f"cannot draw a {bits}-bit prime with two top bits set")
    top = (1 << (bits - 1)) | (1 << (bits - 2))
    for _ in range(MAX_PRIME_CANDIDATES):
        cand = rng.getrandbits(bits) | top | 1
        if is_probable_prime(cand):
            return cand
    raise KeyGenerationError(f"no {bits}-bit prime found after {MAX_PRIME_CANDIDATES} candidates")


@dataclass(frozen=True)
class PublicKey:
    n: int
    g: int

    @property
    def nsquare(self) -> int:
        return self.n * self.n

    @property
    def bits(self) -> int:
        return self.n.bit_length()

    def to_dict(self) -> dict:
        return {"n": str(self.n), "g": str(self.g)}

    @classmethod
    def from_dict(cls, d: dict) -> "PublicKey":
        return cls(int(d["n"]), int(d["g"]))


@dataclass(frozen=True)
class PaillierKeypair:
    p: int
    q: int
    n: int
    g: int
    lam: int
    mu: int
    public: PublicKey = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "public", PublicKey(self.n, self.g))

    @classmethod
    def from_primes(cls, p: int, q: int) -> "PaillierKeypair":
        """Build a keypair from explicit primes (desk-scale tests, e.g. 5 and 7)."""
        if p == q:
            raise KeyGenerationError("p and q must differ")
        if not (is_probable_prime(p) and is_probable_prime(q)):
            raise KeyGenerationError("p and q must be prime")
        n = p * q
        if math.gcd(n, (p - 1) * (q - 1)) != 1:
            raise KeyGenerationError("gcd(pq, (p-1)(q-1)) != 1")
        g = n + 1
        lam = math.lcm(p - 1, q - 1)
        u = pow(g, lam, n * n)
        mu = pow((u - 1) // n, -1, n)
        return cls(p, q, n, g, lam, mu)

    def to_dict(self, private: bool = True) -> dict:
        d = self.public.to_dict()
        if private:
            d.update({"lambda": str(self.lam), "mu": str(self.mu),
                      "p": str(self.p), "q": str(self.q)})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PaillierKeypair":
        kp = cls.from_primes(int(d["p"]), int(d["q"]))
        if kp.n != int(d["n"]) or kp.lam != int(d["lambda"]) or kp.mu != int(d["mu"]):
            raise PaillierError("inconsistent private key document")
        return kp

    def to_json(self, private: bool = True) -> str:
        return json.dumps(self.to_dict(private), sort_keys=True)


@dataclass(frozen=True)
class Ciphertext:
    value: int


def keygen(kappa: int, rng: random.Random | None = None) -> PaillierKeypair:
    """Generate a keypair with ``|p| = |q| = kappa`` (so ``|n| = 2*kappa``)."""
    if kappa < 8:
        raise KeyGenerationError("kappa must be at least 8")
    rng = rng or random.Random()
    for _ in range(100):
        p = random_prime(kappa, rng)
        q = random_prime(kappa, rng)
        if p != q and math.gcd(p * q, (p - 1) * (q - 1)) == 1:
            return PaillierKeypair.from_primes(p, q)
    raise KeyGenerationError("could not find a valid prime pair")


def random_unit(pk: PublicKey, rng: random.Random) -> int:
    while True:
        r = rng.randrange(1, pk.n)
        if math.gcd(r, pk.n) == 1:
            return r


def encrypt(pk: PublicKey, m: int, r: int | None = None,
            rng: random.Random | None = None) -> Ciphertext:
    if not 0 <= m < pk.n:
        raise PlaintextRangeError(f"plaintext outside [0, n): {m}")
    if r is None:
        r = random_unit(pk, rng or random.Random())
    elif math.gcd(r, pk.n) != 1:
        raise ValueError("r must be a unit mod n")
    n2 = pk.nsquare
    if pk.g == pk.n + 1:
        gm = (1 + m * pk.n) % n2
    else:
        gm = powmod(pk.g, m, n2)
    return Ciphertext(gm * powmod(r, pk.n, n2) % n2)


def _check(pk: PublicKey, c: Ciphertext) -> None:
    if not 0 < c.value < pk.nsquare or math.gcd(c.value, pk.n) != 1:
        raise MalformedCiphertextError("ciphertext is not a unit mod n^2")


def decrypt(kp: PaillierKeypair, c: Ciphertext) -> int:
    pk = kp.public
    _check(pk, c)
    u = powmod(c.value, kp.lam, pk.nsquare)
    return (u - 1) // pk.n * kp.mu % pk.n


def mul(c1: Ciphertext, c2: Ciphertext, pk: PublicKey) -> Ciphertext:
    """Ciphertext product; decrypts to ``(m1 + m2) mod n``."""
    _check(pk, c1)
    _check(pk, c2)
    return Ciphertext(c1.value * c2.value % pk.nsquare)


def pow_const(c: Ciphertext, k: int, pk: PublicKey) -> Ciphertext:
    """Raise a ciphertext to a constant; decrypts to ``k*m mod n``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    _check(pk, c)
    return Ciphertext(powmod(c.value, k, pk.nsquare))
