"""Smoothing a 3-query code into disjoint decoding triples.

The code is padded to length 3n with constant +1 coordinates.  For each
message bit, exact biases of every nonempty subset of every decoder query's
support are computed on clean codewords, good subsets are packed greedily
into a disjoint family, short sets are filled up with padding coordinates,
and the family is written as three permutations plus signs.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from ._numeric import frac_str, to_fraction
from .errors import DimensionError, FamilyShortfallWarning, InvariantError, PreconditionError
from .hypercube import sign_vectors
from .ldc import BinaryCode, LocalDecoder, encode

_MOD = "smoothing"
MAX_EXACT_M = 20


@dataclass(frozen=True)
class PaddedCode:
    inner: BinaryCode

    @property
    def m(self) -> int:
        return self.inner.m

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def three_n(self) -> int:
        return 3 * self.inner.n

    def encode(self, eps: Sequence[int]) -> np.ndarray:
        return np.concatenate([encode(self.inner, eps), np.ones(2 * self.n, dtype=np.int64)])

    @cached_property
    def table(self) -> np.ndarray:
        """Padded codewords for all messages, canonical order, shape (2^m, 3n)."""
        if self.m > MAX_EXACT_M:
            raise PreconditionError(f"exact enumeration refused for m={self.m}", module=_MOD)
        inner = self.inner.table()
        return np.concatenate([inner, np.ones((inner.shape[0], 2 * self.n), dtype=np.int64)], axis=1)


def pad_code(code: BinaryCode) -> PaddedCode:
    return PaddedCode(code)


@dataclass(frozen=True)
class Candidate:
    """A subset S of positions with its exact bias toward +-eps_t."""

    indices: tuple
    sign: int
    bias: Fraction


def triple_bias(pc: PaddedCode, t: int, S) -> tuple[int, Fraction]:
    """(delta, P) with P = max(p, 1 - p), p = Prob[prod_{s in S} C'(eps)_s = eps_t]."""
    S = tuple(sorted(set(int(s) for s in S)))
    if not S:
        raise PreconditionError("empty index set", module=_MOD)
    if len(S) > 3:
        raise PreconditionError(f"index set {S} has more than 3 elements", module=_MOD)
    if not all(1 <= s <= pc.three_n for s in S):
        raise DimensionError(f"indices {S} outside 1..{pc.three_n}", module=_MOD)
    if not 1 <= t <= pc.m:
        raise DimensionError(f"bit {t} outside 1..{pc.m}", module=_MOD)
    table = pc.table
    prod = np.prod(table[:, [s - 1 for s in S]], axis=1)
    eps_t = sign_vectors(pc.m)[:, t - 1]
    p = Fraction(int(np.count_nonzero(prod == eps_t)), table.shape[0])
    if p >= Fraction(1, 2):
        return 1, p
    return -1, 1 - p


def threshold(theta) -> Fraction:
    return Fraction(1, 2) + to_fraction(theta) / 16


def harvest_triples(code: BinaryCode, dec: LocalDecoder, theta) -> list[list[Candidate]]:
    """Per bit, every subset of a query support with clean bias >= 1/2 + theta/16."""
    if (code.m, code.n) != (dec.m, dec.n):
        raise DimensionError("code and decoder disagree on (m, n)", module=_MOD)
    pc = pad_code(code)
    cut = threshold(theta)
    pools = []
    for t in range(1, code.m + 1):
        seen = {}
        for q, _ in dec.queries(t):
            support = sorted(set(q.support))
            for size in range(1, len(support) + 1):
                for S in itertools.combinations(support, size):
                    if S not in seen:
                        seen[S] = triple_bias(pc, t, S)
        pools.append([Candidate(S, sg, P) for S, (sg, P) in sorted(seen.items()) if P >= cut])
    return pools


def required_family_size(phi, theta, n: int) -> int:
    return math.ceil(to_fraction(phi) * to_fraction(theta) * n / 9)


@dataclass(frozen=True)
class FamilyEntry:
    """Disjoint 3-sets for one bit, with the originally harvested sets."""

    bit: int
    triples: tuple
    signs: tuple
    biases: tuple
    harvested: tuple
    required: int

    @property
    def J(self) -> int:
        return len(self.triples)


def build_family(pool: Sequence[Candidate], t: int, theta, phi, n: int) -> FamilyEntry:
    """Greedy disjoint packing, then completion of short sets with padding indices.

    Candidates are taken by bias descending, ties broken by the sorted index
    tuple.  A warning is emitted when fewer than ceil(phi theta n / 9) sets
    are found.
    """
    ordered = sorted(pool, key=lambda c: (-c.bias, c.indices))
    used: set[int] = set()
    chosen: list[Candidate] = []
    for cand in ordered:
        if used.isdisjoint(cand.indices):
            chosen.append(cand)
            used.update(cand.indices)
    if not chosen:
        raise PreconditionError(f"bit {t}: no decoding set reaches the bias threshold", module=_MOD)
    padding = iter(range(n + 1, 3 * n + 1))
    triples = []
    for cand in chosen:
        filled = list(cand.indices)
        while len(filled) < 3:
            filled.append(next(padding))
        triples.append(tuple(sorted(filled)))
    need = required_family_size(phi, theta, n)
    if len(chosen) < need:
        warnings.warn(FamilyShortfallWarning(t, len(chosen), need), stacklevel=2)
    return FamilyEntry(
        bit=t,
        triples=tuple(triples),
        signs=tuple(c.sign for c in chosen),
        biases=tuple(c.bias for c in chosen),
        harvested=tuple(c.indices for c in chosen),
        required=need,
    )


@dataclass(frozen=True)
class BitPermutations:
    pi: tuple
    sigma: tuple
    tau: tuple
    signs: tuple
    biases: tuple

    @property
    def J(self) -> int:
        return len(self.signs)

    def triple(self, j: int) -> tuple[int, int, int]:
        return (self.pi[j - 1], self.sigma[j - 1], self.tau[j - 1])

    def triples(self) -> list[tuple[int, int, int]]:
        return [self.triple(j) for j in range(1, self.J + 1)]


@dataclass(frozen=True)
class SmoothedCode:
    padded: PaddedCode
    per_bit: tuple
    theta: Fraction
    phi: Fraction

    @property
    def m(self) -> int:
        return self.padded.m

    @property
    def n(self) -> int:
        return self.padded.n

    @property
    def three_n(self) -> int:
        return self.padded.three_n

    @property
    def J_min(self) -> int:
        return min(b.J for b in self.per_bit)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "three_n": self.three_n,
            "theta": frac_str(self.theta),
            "phi": frac_str(self.phi),
            "code": self.padded.inner.to_json(),
            "per_bit": [
                {
                    "pi": list(b.pi),
                    "sigma": list(b.sigma),
                    "tau": list(b.tau),
                    "signs": list(b.signs),
                    "J": b.J,
                    "biases": [frac_str(x) for x in b.biases],
                }
                for b in self.per_bit
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping, verify: bool = True) -> "SmoothedCode":
        code = BinaryCode.from_json(obj["code"])
        if (code.m, code.n) != (int(obj["m"]), int(obj["n"])) or int(obj["three_n"]) != 3 * code.n:
            raise DimensionError("smoothed code header disagrees with embedded code", module=_MOD)
        per_bit = []
        for b in obj["per_bit"]:
            J = int(b["J"])
            entry = BitPermutations(
                tuple(int(x) for x in b["pi"]),
                tuple(int(x) for x in b["sigma"]),
                tuple(int(x) for x in b["tau"]),
                tuple(int(x) for x in b["signs"]),
                tuple(to_fraction(x) for x in b["biases"]),
            )
            if entry.J != J or len(entry.biases) != J:
                raise DimensionError("per-bit J disagrees with signs/biases", module=_MOD)
            per_bit.append(entry)
        sc = cls(pad_code(code), tuple(per_bit), to_fraction(obj["theta"]), to_fraction(obj.get("phi", 0)))
        if verify:
            verify_smoothed(sc)
        return sc


def _complete_permutation(head: Sequence[int], size: int) -> tuple:
    rest = sorted(set(range(1, size + 1)) - set(head))
    return tuple(head) + tuple(rest)


def to_smoothed(families: Sequence[FamilyEntry], pc: PaddedCode, theta, phi=0) -> SmoothedCode:
    """Package per-bit families as permutations of {1..3n} and verify them."""
    if len(families) != pc.m:
        raise DimensionError(f"{len(families)} families for m={pc.m} bits", module=_MOD)
    per_bit = []
    for fam in families:
        flat = [s for trip in fam.triples for s in trip]
        if len(set(flat)) != len(flat):
            raise PreconditionError(f"bit {fam.bit}: family is not disjoint", module=_MOD)
        heads = list(zip(*fam.triples))
        perms = [_complete_permutation(h, pc.three_n) for h in heads]
        per_bit.append(BitPermutations(perms[0], perms[1], perms[2], fam.signs, fam.biases))
    sc = SmoothedCode(pc, tuple(per_bit), to_fraction(theta), to_fraction(phi))
    verify_smoothed(sc)
    return sc


def verify_smoothed(sc: SmoothedCode) -> None:
    """Recompute every bias message by message through ``encode`` (not the cached table)."""
    size = sc.three_n
    cut = threshold(sc.theta)
    messages = [tuple(int(e) for e in row) for row in sign_vectors(sc.m)]
    words = [sc.padded.encode(eps) for eps in messages]
    for t, b in enumerate(sc.per_bit, start=1):
        for perm in (b.pi, b.sigma, b.tau):
            if sorted(perm) != list(range(1, size + 1)):
                raise InvariantError("permutation", f"bit {t}: not a bijection of 1..{size}", module=_MOD)
        heads = [s for j in range(1, b.J + 1) for s in b.triple(j)]
        if len(set(heads)) != len(heads):
            raise InvariantError("disjointness", f"bit {t}: triples overlap", module=_MOD)
        for j in range(1, b.J + 1):
            u, v, w = b.triple(j)
            hits = sum(
                1
                for eps, word in zip(messages, words)
                if word[u - 1] * word[v - 1] * word[w - 1] == b.signs[j - 1] * eps[t - 1]
            )
            P = Fraction(hits, len(messages))
            if P != b.biases[j - 1] or P < cut:
                raise InvariantError(
                    "soundness", f"(t={t}, j={j}) bias {P} (recorded {b.biases[j - 1]}, threshold {cut})", module=_MOD
                )


def smooth(code: BinaryCode, dec: LocalDecoder, theta, phi) -> SmoothedCode:
    """Full pipeline: harvest, pack, complete, package, verify."""
    pools = harvest_triples(code, dec, theta)
    families = [build_family(pool, t, theta, phi, code.n) for t, pool in enumerate(pools, start=1)]
    return to_smoothed(families, pad_code(code), theta, phi)
