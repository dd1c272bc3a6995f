"""Walsh–Fourier analysis of vector-valued functions on {-1,1}^m.

Sign vectors are enumerated canonically: row ``r`` has coordinate ``i``
(1-based) equal to -1 iff bit ``i-1`` of ``r`` is set, so coordinate 1 varies
fastest.  Index sets are iterables of 1-based coordinates; in tables they are
stored as frozensets, and internally as bitmasks in the same convention.

Exact mode stores values as numpy object arrays of ``Fraction``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ._numeric import as_float_array, fraction_array, frac_str, to_fraction
from .errors import DimensionError, IncompleteTableError, PreconditionError

MAX_FULL_TABLE_M = 12
ARITHMETICS = ("rational", "float")


def sign_vectors(m: int) -> np.ndarray:
    """All 2^m sign vectors in canonical order, shape (2^m, m), dtype int64."""
    if m < 0:
        raise DimensionError(f"dimension {m} < 0", module="hypercube")
    rows = np.arange(1 << m, dtype=np.int64)[:, None]
    bits = (rows >> np.arange(m, dtype=np.int64)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int64)


def sign_index(eps: Sequence[int]) -> int:
    """Row of ``eps`` in the canonical order."""
    return sum(1 << i for i, e in enumerate(eps) if e == -1)


def check_signs(eps, m: int | None = None) -> tuple[int, ...]:
    """Validate a sign vector and return it as a tuple of ints."""
    coords = tuple(int(e) for e in eps)
    if any(e not in (-1, 1) for e in coords):
        raise DimensionError(f"sign vector has entries outside {{-1,+1}}: {coords}", module="hypercube")
    if not coords:
        raise DimensionError("sign vector of length 0", module="hypercube")
    if m is not None and len(coords) != m:
        raise DimensionError(f"sign vector has length {len(coords)}, expected {m}", module="hypercube")
    return coords


def subset_mask(A: Iterable[int], m: int) -> int:
    mask = 0
    for i in A:
        i = int(i)
        if not 1 <= i <= m:
            raise DimensionError(f"index {i} outside 1..{m}", module="hypercube")
        mask |= 1 << (i - 1)
    return mask


def mask_subset(mask: int) -> frozenset:
    out, i = [], 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def walsh_eval(A: Iterable[int], eps: Sequence[int]) -> int:
    """W_A(eps) = prod_{i in A} eps_i; +1 for the empty set."""
    eps = check_signs(eps)
    out = 1
    for i in A:
        i = int(i)
        if not 1 <= i <= len(eps):
            raise DimensionError(f"index {i} outside 1..{len(eps)}", module="hypercube")
        out *= eps[i - 1]
    return out


def walsh_column(A: Iterable[int], m: int) -> np.ndarray:
    """W_A evaluated at every sign vector in canonical order."""
    mask = subset_mask(A, m)
    rows = np.arange(1 << m, dtype=np.int64)
    parity = np.zeros(1 << m, dtype=np.int64)
    for i in range(m):
        if mask >> i & 1:
            parity ^= (rows >> i) & 1
    return 1 - 2 * parity


@dataclass(frozen=True)
class CubeFunction:
    """A total map {-1,1}^m -> R^d, rows in canonical sign order."""

    m: int
    d: int
    values: np.ndarray
    arithmetic: str = "rational"

    def __post_init__(self):
        if self.m < 1:
            raise DimensionError(f"cube dimension m={self.m} < 1", module="hypercube")
        if self.arithmetic not in ARITHMETICS:
            raise PreconditionError(f"unknown arithmetic {self.arithmetic!r}", module="hypercube")
        vals = np.asarray(self.values, dtype=object if self.arithmetic == "rational" else float)
        if vals.shape != (1 << self.m, self.d):
            raise DimensionError(
                f"table shape {vals.shape}, expected {(1 << self.m, self.d)}", module="hypercube"
            )
        if self.arithmetic == "rational":
            vals = fraction_array(vals)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, m: int, d: int, fn: Callable[[tuple], Sequence], arithmetic: str = "rational"):
        rows = [list(fn(tuple(int(e) for e in eps))) for eps in sign_vectors(m)]
        return cls(m, d, np.array(rows, dtype=object), arithmetic)

    def __call__(self, eps: Sequence[int]) -> np.ndarray:
        eps = check_signs(eps, self.m)
        return self.values[sign_index(eps)]

    def _combine(self, other: "CubeFunction", a, b) -> "CubeFunction":
        if (self.m, self.d) != (other.m, other.d):
            raise DimensionError("mismatched cube functions", module="hypercube")
        arith = "rational" if self.arithmetic == other.arithmetic == "rational" else "float"
        if arith == "rational":
            vals = self.values * to_fraction(a) + other.values * to_fraction(b)
        else:
            vals = as_float_array(self.values) * float(a) + as_float_array(other.values) * float(b)
        return CubeFunction(self.m, self.d, vals, arith)

    def linear_combination(self, a, other: "CubeFunction", b) -> "CubeFunction":
        """a·self + b·other."""
        return self._combine(other, a, b)

    def equals(self, other: "CubeFunction") -> bool:
        if (self.m, self.d) != (other.m, other.d):
            return False
        return bool(np.all(self.values == other.values))

    def to_json(self) -> dict:
        if self.arithmetic == "rational":
            rows = [[frac_str(v) for v in row] for row in self.values]
        else:
            rows = [[float(v) for v in row] for row in self.values]
        return {"m": self.m, "d": self.d, "arithmetic": self.arithmetic, "values": rows}

    @classmethod
    def from_json(cls, obj: Mapping) -> "CubeFunction":
        arith = obj.get("arithmetic", "rational")
        conv = to_fraction if arith == "rational" else float
        rows = [[conv(v) for v in row] for row in obj["values"]]
        return cls(int(obj["m"]), int(obj["d"]), np.array(rows, dtype=object), arith)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class FourierTable:
    m: int
    d: int
    coefficients: dict = field(default_factory=dict)
    level_cap: int | None = None
    arithmetic: str = "rational"

    def __getitem__(self, A: Iterable[int]) -> np.ndarray:
        key = frozenset(int(i) for i in A)
        if key in self.coefficients:
            return self.coefficients[key]
        if self.level_cap is not None and len(key) > self.level_cap:
            raise IncompleteTableError(f"coefficient {sorted(key)} above level cap", module="hypercube")
        return _zero_vector(self.d, self.arithmetic)


def _zero_vector(d: int, arithmetic: str) -> np.ndarray:
    if arithmetic == "rational":
        return fraction_array(np.zeros(d, dtype=object))
    return np.zeros(d)


def fourier_coefficient(f: CubeFunction, A: Iterable[int]) -> np.ndarray:
    """f^(A) = 2^-m sum_eps W_A(eps) f(eps), by direct summation."""
    col = walsh_column(A, f.m)
    if f.arithmetic == "rational":
        total = (col.astype(object)[:, None] * f.values).sum(axis=0)
        return total / Fraction(1 << f.m) if f.d else total
    return (col[:, None] * f.values).sum(axis=0) / (1 << f.m)


def _butterfly(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh–Hadamard transform along axis 0 (Sylvester order)."""
    out = values.copy()
    size = out.shape[0]
    h = 1
    while h < size:
        view = out.reshape(size // (2 * h), 2, h, *out.shape[1:])
        lo = view[:, 0].copy()
        hi = view[:, 1].copy()
        view[:, 0] = lo + hi
        view[:, 1] = lo - hi
        h *= 2
    return out


def fourier_transform(f: CubeFunction, level_cap: int | None = None) -> FourierTable:
    """All Walsh coefficients (or those with |A| <= level_cap).

    The full table is materialized only for m <= 12; above that a level cap is
    required and coefficients are computed by direct summation.
    """
    if f.m > MAX_FULL_TABLE_M:
        if level_cap is None:
            raise PreconditionError(
                f"full Fourier table refused for m={f.m} > {MAX_FULL_TABLE_M}; pass level_cap",
                module="hypercube",
            )
        coeffs = {}
        for mask in _masks_up_to(f.m, level_cap):
            A = mask_subset(mask)
            coeffs[A] = fourier_coefficient(f, A)
        return FourierTable(f.m, f.d, coeffs, level_cap, f.arithmetic)
    raw = _butterfly(f.values)
    scale = Fraction(1 << f.m) if f.arithmetic == "rational" else float(1 << f.m)
    coeffs = {}
    for mask in range(1 << f.m):
        if level_cap is not None and bin(mask).count("1") > level_cap:
            continue
        coeffs[mask_subset(mask)] = raw[mask] / scale
    return FourierTable(f.m, f.d, coeffs, level_cap, f.arithmetic)


def _masks_up_to(m: int, level: int):
    from itertools import combinations

    for k in range(min(level, m) + 1):
        for combo in combinations(range(m), k):
            yield sum(1 << i for i in combo)


def reconstruct(t: FourierTable) -> CubeFunction:
    """Walsh expansion f(eps) = sum_A W_A(eps) f^(A) of a full table."""
    if t.level_cap is not None and t.level_cap < t.m:
        raise IncompleteTableError(
            f"table is capped at level {t.level_cap} < m={t.m}; cannot reconstruct", module="hypercube"
        )
    if t.m > MAX_FULL_TABLE_M:
        raise PreconditionError(f"reconstruction refused for m={t.m}", module="hypercube")
    dtype = object if t.arithmetic == "rational" else float
    coeff = np.empty((1 << t.m, t.d), dtype=dtype)
    for mask in range(1 << t.m):
        coeff[mask] = t[mask_subset(mask)]
    return CubeFunction(t.m, t.d, _butterfly(coeff), t.arithmetic)


def level_one(f: CubeFunction) -> list[np.ndarray]:
    """[f^({1}), ..., f^({m})]."""
    return [fourier_coefficient(f, (i,)) for i in range(1, f.m + 1)]


def rademacher_projection(f: CubeFunction) -> CubeFunction:
    """eps -> sum_i eps_i f^({i})."""
    signs = sign_vectors(f.m)
    hats = level_one(f)
    if f.arithmetic == "rational":
        stack = np.array(hats, dtype=object).reshape(f.m, f.d)
        vals = signs.astype(object) @ stack if f.d else np.empty((1 << f.m, 0), dtype=object)
        vals = fraction_array(vals)
    else:
        stack = np.array(hats, dtype=float).reshape(f.m, f.d)
        vals = signs @ stack
    return CubeFunction(f.m, f.d, vals, f.arithmetic)


def parseval_sides(f: CubeFunction) -> tuple[np.ndarray, np.ndarray]:
    """Per coordinate: (sum_A f^(A)_c^2, 2^-m sum_eps f(eps)_c^2)."""
    table = fourier_transform(f)
    coeffs = np.array([table.coefficients[A] for A in table.coefficients], dtype=f.values.dtype)
    lhs = (coeffs * coeffs).sum(axis=0)
    rhs = (f.values * f.values).sum(axis=0)
    rhs = rhs / (Fraction(1 << f.m) if f.arithmetic == "rational" else float(1 << f.m))
    return lhs, rhs


def rademacher_ratio(f: CubeFunction, norm: Callable[[np.ndarray], float]) -> float:
    """sqrt(E‖Rad f‖^2) / sqrt(E‖f‖^2) for a user-supplied norm on R^d.

    Reported in place of a K-convexity inequality, whose constant is not known.
    """
    rad = rademacher_projection(f)
    num = np.mean([float(norm(as_float_array(np.asarray(row)))) ** 2 for row in rad.values])
    den = np.mean([float(norm(as_float_array(np.asarray(row)))) ** 2 for row in f.values])
    if den == 0:
        return 0.0
    return float(np.sqrt(num / den))
