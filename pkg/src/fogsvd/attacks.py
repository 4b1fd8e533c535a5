"""Adversary models against the masking layer and a parameter certifier.

An SD_d that knows some plaintexts can turn their masked values into
residuals ``z*W + r*S``.  Two ways to exploit them are implemented here:
exhaustive search over ``S`` confirmed by a common factor, and the
difference attack that works whenever two residuals share a ``z``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

from . import kernels
from .sysparams import ATTACK_S_BITS, SystemParams, collision_probability


@dataclass(frozen=True)
class LeakSet:
    """Residuals ``masked - plain`` for the entries SD_d knows."""

    values: tuple[int, ...]

    def __post_init__(self):
        if any(v <= 0 for v in self.values):
            raise ValueError("leak residuals must be positive")

    @classmethod
    def from_pairs(cls, masked: Sequence[int], plain: Sequence[int]) -> "LeakSet":
        if len(masked) != len(plain):
            raise ValueError("masked and plain lists differ in length")
        return cls(tuple(int(m) - int(p) for m, p in zip(masked, plain)))

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class BruteForceResult:
    S: int | None
    W: int | None
    tries: int
    seconds: float
    rejected: int = 0

    @property
    def found(self) -> bool:
        return self.S is not None

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "S": None if self.S is None else str(self.S),
            "W": None if self.W is None else str(self.W),
            "tries": self.tries,
            "rejected_candidates": self.rejected,
            "seconds": self.seconds,
        }


def _consistent(masked, plain, lc, S: int, W: int, t: int | None) -> bool:
    if W <= max(plain) or any(m % S % W != p for m, p in zip(masked, plain)):
        return False
    if t is None:
        return True
    for x in lc:
        r, rest = divmod(x, S)
        if not (1 <= r <= t and 1 <= rest // W <= t):
            return False
    return True


def brute_force_s(masked: Sequence[int], plain: Sequence[int], s_bits_max: int,
                  t: int | None = None, start: int = 3) -> BruteForceResult:
    """Scan odd ``S`` upward until the residuals mod ``S`` share a factor.

    A candidate is kept only if ``masked mod S mod W`` gives back every known
    plaintext and, when the public mask bound ``t`` is supplied, every
    residual splits as ``z*W + r*S`` with ``z, r`` in ``[1, t]``.  Rejected
    candidates are counted and the scan resumes after them.
    """
    masked, plain = [int(m) for m in masked], [int(p) for p in plain]
    leak = LeakSet.from_pairs(masked, plain)
    if len(leak) < 3:
        raise ValueError("need at least three known pairs")
    lc = list(leak.values)
    stop = 1 << s_bits_max
    t0 = time.perf_counter()
    tries = rejected = 0
    S = start
    while S < stop:
        cand, g, n = kernels.scan_moduli(lc, S, stop)
        tries += n
        if cand == 0:
            break
        if _consistent(masked, plain, lc, cand, g, t):
            return BruteForceResult(cand, g, tries, time.perf_counter() - t0, rejected)
        rejected += 1
        S = cand + 2
    return BruteForceResult(None, None, tries, time.perf_counter() - t0, rejected)


@dataclass
class DiffGcdResult:
    S: int | None
    W: int | None

    @property
    def found(self) -> bool:
        return self.S is not None


def diff_gcd_attack(lc: Sequence[int], t: int) -> DiffGcdResult:
    """Two residuals with equal ``z`` differ by ``(r_i - r_j) * S``.

    Every pairwise difference is split into candidate ``S`` values and the
    whole leak set must then decompose as ``z*W + r*S`` with ``z, r`` in
    ``[1, t]``.
    """
    values = [int(x) for x in lc]
    if len(values) < 2:
        raise ValueError("need at least two residuals")
    S, W = kernels.scan_differences(values, t)
    return DiffGcdResult(S, W) if S else DiffGcdResult(None, None)


@dataclass
class RuleCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class CertificationReport:
    rules: list[RuleCheck] = field(default_factory=list)
    collision_probability: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rules)

    def failures(self) -> list[str]:
        return [r.name for r in self.rules if not r.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "collision_probability": self.collision_probability,
            "rules": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in self.rules],
        }


def certify(params: SystemParams) -> CertificationReport:
    """Check a parameter set against both attacks and the recovery bounds."""
    rep = CertificationReport()
    add = rep.rules.append
    add(RuleCheck("s_bits", params.kappa3 >= ATTACK_S_BITS,
                  f"kappa3 = {params.kappa3}, need >= {ATTACK_S_BITS}"))
    need = params.kappa_N + params.kappa_l + 1
    if params.mask_mode == "coordinated":
        ok = params.t >= params.l * params.N
        detail = f"coordinated masks: t = {params.t}, lN = {params.l * params.N}"
    else:
        ok = params.kappa1 >= need
        detail = f"kappa1 = {params.kappa1}, need >= {need}"
    add(RuleCheck("birthday", ok, detail))
    for i, b in enumerate(params.bounds):
        add(RuleCheck(f"W_bound[{i}]", params.W > b.w_floor(), f"W > {b.w_floor()}"))
        add(RuleCheck(f"S_bound[{i}]", params.S > b.s_floor(params.W), "S above recovery floor"))
    add(RuleCheck("coprime", math.gcd(params.W, params.S) == 1, "gcd(W, S) = 1"))
    try:
        params.seq.check(params.keypair.n)
        add(RuleCheck("packing", True, f"{len(params.seq)} slots fit the modulus"))
    except ValueError as e:
        add(RuleCheck("packing", False, str(e)))
    rep.collision_probability = (0.0 if params.mask_mode == "coordinated"
                                 else collision_probability(params.l, params.N, params.kappa1))
    return rep
