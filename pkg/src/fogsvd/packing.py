"""Superincreasing-sequence packing of integer vectors into one scalar."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class CapacityExceededError(ValueError):
    """The packed maximum does not fit below the modulus.

    ``required_bits`` is the smallest modulus bit length that would hold it.
    """

    def __init__(self, msg: str, required_bits: int):
        super().__init__(msg)
        self.required_bits = required_bits


class SlotRangeError(ValueError):
    pass


@dataclass(frozen=True)
class SuperSeq:
    """Weights ``a`` with ``a[0] == 1`` and inclusive per-slot maximum ``bound``."""

    a: tuple[int, ...]
    bound: int

    def __len__(self) -> int:
        return len(self.a)

    @property
    def packed_max(self) -> int:
        return sum(self.a) * self.bound

    def prefix(self, k: int) -> "SuperSeq":
        return SuperSeq(self.a[:k], self.bound)

    def check(self, n: int | None = None) -> None:
        run = 0
        for i, ai in enumerate(self.a):
            if i == 0 and ai != 1:
                raise ValueError("first weight must be 1")
            if i and run * self.bound >= ai:
                raise ValueError(f"weight {i} is not superincreasing")
            run += ai
        if n is not None and run * self.bound >= n:
            raise CapacityExceededError("packed maximum >= n", (run * self.bound).bit_length() + 1)

    def to_dict(self) -> dict:
        return {"a": [str(x) for x in self.a], "bound": str(self.bound)}

    @classmethod
    def from_dict(cls, d: dict) -> "SuperSeq":
        return cls(tuple(int(x) for x in d["a"]), int(d["bound"]))


def build_superseq(l: int, bound: int, n: int | None = None) -> SuperSeq:
    """Tightest legal sequence: ``a[i+1] = sum(a[:i+1]) * bound + 1``."""
    if l < 1 or bound < 1:
        raise ValueError("l and bound must be >= 1")
    a = [1]
    run = 1
    for _ in range(l - 1):
        nxt = run * bound + 1
        a.append(nxt)
        run += nxt
    seq = SuperSeq(tuple(a), bound)
    if n is not None and run * bound >= n:
        need = (run * bound).bit_length() + 1
        raise CapacityExceededError(
            f"{l} slots of bound {bound} need a {need}-bit modulus, have {n.bit_length()}", need)
    return seq


def max_slots(bound: int, n: int) -> int:
    """Largest slot count whose packed maximum stays below ``n`` (0 if none)."""
    if bound >= n:
        return 0
    k, run = 1, 1
    while True:
        run += run * bound + 1
        if run * bound >= n:
            return k
        k += 1


def encode(seq: SuperSeq, v: Sequence[int]) -> int:
    if len(v) != len(seq.a):
        raise SlotRangeError(f"expected {len(seq.a)} slots, got {len(v)}")
    total = 0
    for ai, x in zip(seq.a, v):
        if not 0 <= x <= seq.bound:
            raise SlotRangeError(f"slot value {x} outside [0, {seq.bound}]")
        total += ai * x
    return total


def decode(seq: SuperSeq, m: int) -> list[int]:
    """Peel slots from the top weight down (modular reduction by each weight)."""
    out = [0] * len(seq.a)
    x = m
    for k in range(len(seq.a) - 1, 0, -1):
        rest = x % seq.a[k]
        out[k] = (x - rest) // seq.a[k]
        x = rest
    out[0] = x
    return out


def chunk(values: Sequence[int], size: int) -> list[list[int]]:
    return [list(values[i:i + size]) for i in range(0, len(values), size)]
