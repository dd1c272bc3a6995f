"""Binary codes with 3-query local decoders and their decoding quality.

Positions and message bits are 1-based throughout.  A decoder's truth table
``g`` lists g(x, y, z) at the 8 sign triples in canonical order: entry ``r``
has x = -1 iff bit 0 of r is set, y iff bit 1, z iff bit 2.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ._numeric import frac_str, to_fraction
from .errors import BudgetExceeded, DimensionError, PreconditionError
from .hypercube import check_signs, sign_index, sign_vectors

MAX_HADAMARD_M = 16
_MOD = "ldc"


@dataclass(frozen=True)
class BinaryCode:
    """C: {-1,1}^m -> {-1,1}^n, either an explicit table or the Walsh generator.

    In ``walsh`` form, position a+1 (a = 0..2^m-1) evaluates W over the index
    set encoded by the bits of a, so n = 2^m and positions follow the
    canonical subset order (empty set, {1}, {2}, {1,2}, ...).
    """

    m: int
    n: int
    form: str = "explicit"
    codewords: np.ndarray | None = None

    def __post_init__(self):
        if self.m < 1:
            raise DimensionError(f"message length m={self.m} < 1", module=_MOD)
        if self.form == "walsh":
            if self.n != 1 << self.m:
                raise DimensionError(f"walsh form needs n = 2^m, got n={self.n}", module=_MOD)
            object.__setattr__(self, "codewords", None)
        elif self.form == "explicit":
            words = np.asarray(self.codewords, dtype=np.int64)
            if words.shape != (1 << self.m, self.n):
                raise DimensionError(
                    f"explicit table has shape {words.shape}, expected {(1 << self.m, self.n)}", module=_MOD
                )
            if not np.all(np.abs(words) == 1):
                raise DimensionError("codeword entries must be -1 or +1", module=_MOD)
            words.setflags(write=False)
            object.__setattr__(self, "codewords", words)
        else:
            raise PreconditionError(f"unknown code form {self.form!r}", module=_MOD)

    def table(self) -> np.ndarray:
        """All codewords, row r = C(canonical sign vector r)."""
        if self.form == "explicit":
            return self.codewords
        rows = np.arange(1 << self.m, dtype=np.int64)
        parity = np.zeros((1 << self.m, self.n), dtype=np.int64)
        for i in range(self.m):
            eps_bit = (rows >> i) & 1
            pos_bit = (np.arange(self.n, dtype=np.int64) >> i) & 1
            parity ^= eps_bit[:, None] & pos_bit[None, :]
        return 1 - 2 * parity

    def to_json(self) -> dict:
        out = {"m": self.m, "n": self.n, "form": self.form}
        if self.form == "explicit":
            out["codewords"] = self.codewords.tolist()
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "BinaryCode":
        form = obj.get("form", "explicit")
        words = obj.get("codewords") if form == "explicit" else None
        return cls(int(obj["m"]), int(obj["n"]), form, None if words is None else np.array(words))


@dataclass(frozen=True)
class DecodingQuery:
    i: int
    j: int
    k: int
    g: tuple

    def __post_init__(self):
        g = tuple(int(x) for x in self.g)
        if len(g) != 8 or any(x not in (-1, 1) for x in g):
            raise PreconditionError(f"truth table must have 8 sign entries, got {g}", module=_MOD)
        object.__setattr__(self, "g", g)

    @property
    def support(self) -> tuple[int, int, int]:
        return (self.i, self.j, self.k)

    def evaluate(self, x: int, y: int, z: int) -> int:
        return self.g[(x == -1) | ((y == -1) << 1) | ((z == -1) << 2)]


def truth_table(fn) -> tuple:
    """Tabulate g: {-1,1}^3 -> {-1,1} in canonical order."""
    return tuple(int(fn(*(int(v) for v in trip))) for trip in sign_vectors(3))


@dataclass(frozen=True)
class LocalDecoder:
    """Per bit t, a distribution over queries: list of (DecodingQuery, weight)."""

    m: int
    n: int
    per_bit: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.per_bit) != self.m:
            raise DimensionError(f"decoder lists {len(self.per_bit)} bits, expected {self.m}", module=_MOD)
        cleaned = []
        for t, dist in enumerate(self.per_bit, start=1):
            entries = tuple((q, to_fraction(w)) for q, w in dist)
            if not entries:
                raise PreconditionError(f"bit {t} has an empty query distribution", module=_MOD)
            for q, w in entries:
                if w <= 0:
                    raise PreconditionError(f"bit {t}: nonpositive weight {w}", module=_MOD)
                if not all(1 <= s <= self.n for s in q.support):
                    raise DimensionError(f"bit {t}: query indices {q.support} outside 1..{self.n}", module=_MOD)
            total = sum(w for _, w in entries)
            if total != 1:
                raise PreconditionError(f"bit {t}: weights sum to {total}, not 1", module=_MOD)
            cleaned.append(entries)
        object.__setattr__(self, "per_bit", tuple(cleaned))

    def queries(self, t: int):
        if not 1 <= t <= self.m:
            raise DimensionError(f"bit {t} outside 1..{self.m}", module=_MOD)
        return self.per_bit[t - 1]

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "per_bit": [
                [{"i": q.i, "j": q.j, "k": q.k, "g": list(q.g), "w": frac_str(w)} for q, w in dist]
                for dist in self.per_bit
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "LocalDecoder":
        per_bit = []
        for dist in obj["per_bit"]:
            per_bit.append(
                [(DecodingQuery(int(e["i"]), int(e["j"]), int(e["k"]), tuple(e["g"])), to_fraction(e["w"])) for e in dist]
            )
        return cls(int(obj["m"]), int(obj["n"]), tuple(per_bit))


@dataclass(frozen=True)
class QualityReport:
    phi: Fraction
    radius: int
    theta_margin: Fraction
    regime: str
    tested_count: int
    seed: int | None = None
    worst_case: dict | None = None

    def to_json(self) -> dict:
        return {
            "phi": frac_str(self.phi),
            "radius": self.radius,
            "theta_margin": frac_str(self.theta_margin),
            "regime": self.regime,
            "guarantee": self.regime == "exhaustive",
            "tested_count": self.tested_count,
            "seed": self.seed,
            "worst_case": self.worst_case,
        }


def hadamard_code(m: int) -> tuple[BinaryCode, LocalDecoder]:
    """Walsh-character code with the two-query-product decoder.

    For bit t the decoder reads (pos(a), pos(a xor e_t), pos(a)) for uniform a
    and outputs the product of the first two reads.
    """
    if not 1 <= m <= MAX_HADAMARD_M:
        raise PreconditionError(f"hadamard code needs 1 <= m <= {MAX_HADAMARD_M}, got {m}", module=_MOD)
    n = 1 << m
    code = BinaryCode(m, n, "walsh")
    g = truth_table(lambda x, y, z: x * y)
    w = Fraction(1, n)
    per_bit = []
    for t in range(1, m + 1):
        flip = 1 << (t - 1)
        per_bit.append(tuple((DecodingQuery(a + 1, (a ^ flip) + 1, a + 1, g), w) for a in range(n)))
    return code, LocalDecoder(m, n, tuple(per_bit))


def repetition_decoder(code: BinaryCode, positions: Sequence[int]) -> LocalDecoder:
    """Decoder reading one coordinate per bit: query (s, s, s) with g(x,y,z) = x."""
    g = truth_table(lambda x, y, z: x)
    return LocalDecoder(code.m, code.n, tuple(((DecodingQuery(s, s, s, g), Fraction(1)),) for s in positions))


def identity_code(m: int) -> tuple[BinaryCode, LocalDecoder]:
    """C(eps) = eps; the smallest code, useful for downsized pipelines."""
    code = BinaryCode(m, m, "explicit", sign_vectors(m))
    return code, repetition_decoder(code, range(1, m + 1))


def encode(code: BinaryCode, eps: Sequence[int]) -> np.ndarray:
    eps = check_signs(eps)
    if len(eps) != code.m:
        raise DimensionError(f"message length {len(eps)} != m={code.m}", module=_MOD)
    if code.form == "explicit":
        return code.codewords[sign_index(eps)].copy()
    word = np.empty(code.n, dtype=np.int64)
    for a in range(code.n):
        val = 1
        for i in range(code.m):
            if a >> i & 1:
                val *= eps[i]
        word[a] = val
    return word


def corrupt(word: Sequence[int], S) -> np.ndarray:
    """Negate the (1-based) positions in S."""
    out = np.array(word, dtype=np.int64, copy=True)
    for s in set(int(x) for x in S):
        if not 1 <= s <= out.size:
            raise DimensionError(f"position {s} outside 1..{out.size}", module=_MOD)
        out[s - 1] = -out[s - 1]
    return out


def decode_success_prob(dec: LocalDecoder, t: int, delta: Sequence[int], target: int) -> Fraction:
    """Probability over the decoder's distribution that g(delta_i, delta_j, delta_k) = target."""
    delta = check_signs(delta, dec.n)
    if target not in (-1, 1):
        raise PreconditionError(f"target must be a sign, got {target}", module=_MOD)
    total = Fraction(0)
    for q, w in dec.queries(t):
        if q.evaluate(delta[q.i - 1], delta[q.j - 1], delta[q.k - 1]) == target:
            total += w
    return total


class _BitKernel:
    """Vectorized success probabilities for one bit over many received words."""

    def __init__(self, dec: LocalDecoder, t: int):
        dist = dec.queries(t)
        den = math.lcm(*(w.denominator for _, w in dist))
        self.den = den
        self.weights = np.array([w.numerator * (den // w.denominator) for _, w in dist], dtype=object)
        self.idx = np.array([[q.i - 1, q.j - 1, q.k - 1] for q, _ in dist], dtype=np.int64)
        self.g = np.array([q.g for q, _ in dist], dtype=np.int64)
        self._int_weights = self.weights.astype(np.int64) if den < 2**40 else None

    def success_numerators(self, words: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Numerators (over ``den``) of P[g = target] for each row of ``words``."""
        reads = words[:, self.idx]  # (W, Q, 3)
        code = (reads[..., 0] == -1) | ((reads[..., 1] == -1) << 1) | ((reads[..., 2] == -1) << 2)
        outs = self.g[np.arange(self.g.shape[0])[None, :], code]
        hit = outs == targets[:, None]
        if self._int_weights is not None:
            return hit.astype(np.int64) @ self._int_weights
        return hit.astype(object) @ self.weights


def _corruption_sets(n: int, radius: int):
    for w in range(radius + 1):
        yield from itertools.combinations(range(n), w)


def exhaustive_budget(code: BinaryCode, phi) -> int:
    radius = math.floor(to_fraction(phi) * code.n)
    return (1 << code.m) * sum(math.comb(code.n, w) for w in range(radius + 1)) * code.m


def evaluate_quality(
    code: BinaryCode,
    dec: LocalDecoder,
    phi,
    mode: str = "exhaustive",
    budget: int = 10**7,
    seed: int = 0,
) -> QualityReport:
    """Worst observed margin min (P[g = eps_t] - 1/2) over corruptions of weight <= floor(phi n).

    ``exhaustive`` visits every (message, corruption, bit) and returns the true
    worst case.  ``sampled`` draws ``budget`` random (message, corruption)
    pairs, each checked for all bits; its margin is only an upper bound on the
    true worst case.
    """
    phi = to_fraction(phi)
    if not 0 <= phi < Fraction(1, 2):
        raise PreconditionError(f"phi must lie in [0, 1/2), got {phi}", module=_MOD)
    if (code.m, code.n) != (dec.m, dec.n):
        raise DimensionError("code and decoder disagree on (m, n)", module=_MOD)
    radius = math.floor(phi * code.n)
    words = code.table()
    messages = sign_vectors(code.m)
    kernels = [_BitKernel(dec, t) for t in range(1, code.m + 1)]
    best = None
    worst = None

    def consider(received, msg_rows, sets):
        nonlocal best, worst
        for t, kern in enumerate(kernels, start=1):
            nums = kern.success_numerators(received, messages[msg_rows, t - 1])
            pos = int(np.argmin(nums)) if nums.dtype != object else min(range(len(nums)), key=lambda r: nums[r])
            margin = Fraction(int(nums[pos]), kern.den) - Fraction(1, 2)
            if best is None or margin < best:
                best = margin
                worst = {
                    "bit": t,
                    "message": [int(x) for x in messages[msg_rows[pos]]],
                    "corrupted": [s + 1 for s in sets[pos]],
                }

    if mode == "exhaustive":
        required = exhaustive_budget(code, phi)
        if required > budget:
            raise BudgetExceeded(required, budget, module=_MOD)
        sets = list(_corruption_sets(code.n, radius))
        flips = np.ones((len(sets), code.n), dtype=np.int64)
        for r, S in enumerate(sets):
            flips[r, list(S)] = -1
        for msg in range(1 << code.m):
            received = words[msg][None, :] * flips
            consider(received, np.full(len(sets), msg), sets)
        return QualityReport(phi, radius, best, "exhaustive", required, None, worst)
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        count = max(1, int(budget))
        msg_rows = rng.integers(0, 1 << code.m, size=count)
        sets = [tuple(sorted(rng.choice(code.n, size=radius, replace=False).tolist())) for _ in range(count)]
        received = words[msg_rows].copy()
        for r, S in enumerate(sets):
            received[r, list(S)] *= -1
        consider(received, msg_rows, sets)
        return QualityReport(phi, radius, best, "sampled", count * code.m, int(seed), worst)
    raise PreconditionError(f"unknown mode {mode!r}", module=_MOD)
