"""Shared numeric plumbing: exponents, rational I/O, one-sided rounding, seeds."""
from __future__ import annotations

import functools
import hashlib
import json
import math
from fractions import Fraction
from typing import Iterable, Union

import numpy as np
import sympy

from .errors import PreconditionError

INF = math.inf
Exponent = Union[Fraction, float]  # Fraction, or math.inf
Number = Union[Fraction, float, int]

_EPS = 2.0 ** -52


# -- exponents ---------------------------------------------------------------

def parse_exponent(value) -> Exponent:
    """Parse ``3``, ``"5/2"``, ``"inf"`` or ``math.inf`` into an exponent."""
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "oo"):
        return INF
    if isinstance(value, float) and math.isinf(value):
        if value < 0:
            raise PreconditionError("negative infinite exponent", module="numeric")
        return INF
    if isinstance(value, float):
        value = Fraction(value).limit_denominator(10**6)
    p = Fraction(value)
    if p < 1:
        raise PreconditionError(f"exponent {p} below 1", module="numeric")
    return p


@functools.lru_cache(maxsize=256)
def conjugate(p: Exponent) -> Exponent:
    """Hölder conjugate, computed symbolically (1 <-> inf)."""
    if p == INF:
        return Fraction(1)
    if p == 1:
        return INF
    return p / (p - 1)


def inverse(p: Exponent) -> Fraction:
    """1/p as an exact rational (0 for p = inf)."""
    return Fraction(0) if p == INF else 1 / Fraction(p)


def exponent_str(p: Exponent) -> str:
    return "inf" if p == INF else str(Fraction(p))


def sympy_exponent(p: Exponent):
    return sympy.oo if p == INF else sympy.Rational(p.numerator, p.denominator)


# -- rationals ---------------------------------------------------------------

def to_fraction(x) -> Fraction:
    """Exact conversion; strings may be ``"p/q"`` or decimals."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    if isinstance(x, sympy.Rational):
        return Fraction(int(x.p), int(x.q))
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def frac_str(x: Fraction) -> str:
    x = to_fraction(x)
    return f"{x.numerator}/{x.denominator}"


def dyadic(x: float, bits: int = 30) -> Fraction:
    """Round a float onto the 2^-bits grid; keeps denominators small and powers of two."""
    scale = 1 << bits
    return Fraction(int(round(float(x) * scale)), scale)


def object_array(values, shape=None) -> np.ndarray:
    """Numpy object array of Fractions."""
    arr = np.empty(len(values) if shape is None else int(np.prod(shape)), dtype=object)
    for idx, v in enumerate(values):
        arr[idx] = to_fraction(v)
    return arr if shape is None else arr.reshape(shape)


def fraction_array(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat_in, flat_out = arr.reshape(-1), out.reshape(-1)
    for idx in range(flat_in.size):
        flat_out[idx] = to_fraction(flat_in[idx])
    return out


def is_exact_array(arr: np.ndarray) -> bool:
    return arr.dtype == object


def as_float_array(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == object:
        return np.vectorize(float, otypes=[float])(arr) if arr.size else np.zeros(arr.shape)
    return np.asarray(arr, dtype=float)


def common_denominator(arr: np.ndarray) -> tuple[np.ndarray, int]:
    """Integer numerators (object dtype, unbounded) and the common denominator."""
    flat = arr.reshape(-1)
    den = 1
    for x in flat:
        den = math.lcm(den, to_fraction(x).denominator)
    nums = np.empty(flat.shape, dtype=object)
    for idx, x in enumerate(flat):
        x = to_fraction(x)
        nums[idx] = x.numerator * (den // x.denominator)
    return nums.reshape(arr.shape), den


# -- exact norms -------------------------------------------------------------

def exact_lp_norm(vec: Iterable, p: Exponent):
    """‖v‖_p as a sympy expression for rational entries."""
    vals = [abs(to_fraction(v)) for v in vec]
    if not vals:
        return sympy.Integer(0)
    if p == INF:
        return sympy.Rational(max(vals))
    p = Fraction(p)
    if p.denominator == 1:
        total = sum((v ** int(p) for v in vals), Fraction(0))
        return sympy.Rational(total.numerator, total.denominator) ** sympy.Rational(1, int(p))
    sp_p = sympy.Rational(p.numerator, p.denominator)
    total = sympy.Add(*[sympy.Rational(v.numerator, v.denominator) ** sp_p for v in vals if v])
    return total ** (1 / sp_p)


def float_lp_norms(rows: np.ndarray, p: Exponent) -> np.ndarray:
    """Row-wise ‖·‖_p in floats, invariant under permutation and sign of entries.

    Entries are sorted by magnitude before summation so that reordered rows give
    bit-identical results.
    """
    a = np.sort(np.abs(np.asarray(rows, dtype=float)), axis=-1)
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1])
    top = a[..., -1]
    if p == INF:
        return top
    safe = np.where(top > 0, top, 1.0)
    s = np.sum((a / safe[..., None]) ** float(p), axis=-1)
    return np.where(top > 0, safe * s ** (1.0 / float(p)), 0.0)


# -- one-sided rounding ------------------------------------------------------

def to_mpf(value, dps: int = 50):
    """High-precision evaluation of a float, Fraction or sympy expression."""
    import mpmath

    with mpmath.workdps(dps):
        if isinstance(value, Fraction):
            return mpmath.mpf(value.numerator) / value.denominator
        if isinstance(value, sympy.Basic):
            return mpmath.mpf(sympy.N(value, dps))
        return mpmath.mpf(value)


def _rational_or_none(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, sympy.Rational):
        return Fraction(int(value.p), int(value.q))
    return None


def round_up(value, n_ops: int = 0) -> float:
    """A float >= value.

    Exact/symbolic values are evaluated at 50 digits and nudged one ulp up.
    Float values produced by ``n_ops`` nonnegative float operations get the
    a-priori relative error bound (n_ops + 8)·2^-52 added first.
    """
    if isinstance(value, (Fraction, sympy.Basic)):
        exact = _rational_or_none(value)
        if exact is not None:
            f = float(exact)
            return f if Fraction(f) >= exact else math.nextafter(f, math.inf)
        return math.nextafter(float(to_mpf(value)), math.inf)
    v = float(value)
    if v == 0.0:
        return 0.0
    v = v + abs(v) * (n_ops + 8) * _EPS
    return math.nextafter(v, math.inf)


def round_down(value, n_ops: int = 0) -> float:
    """A float <= value (mirror of :func:`round_up`)."""
    if isinstance(value, (Fraction, sympy.Basic)):
        exact = _rational_or_none(value)
        if exact is not None:
            f = float(exact)
            return f if Fraction(f) <= exact else math.nextafter(f, -math.inf)
        return math.nextafter(float(to_mpf(value)), -math.inf)
    v = float(value)
    if v == 0.0:
        return 0.0
    v = v - abs(v) * (n_ops + 8) * _EPS
    return math.nextafter(v, -math.inf)


def expr_str(value) -> str | None:
    """Serialize an exact value: ``"p/q"`` for rationals, sympy string otherwise."""
    if value is None:
        return None
    if isinstance(value, Fraction):
        return frac_str(value)
    value = sympy.nsimplify(value) if not isinstance(value, sympy.Basic) else value
    if isinstance(value, sympy.Rational):
        return f"{value.p}/{value.q}"
    return sympy.sstr(value)


def exact_equal(a, b) -> bool:
    """Exact equality of two sympy/rational values."""
    a, b = sympy.sympify(a), sympy.sympify(b)
    if a == b:
        return True
    return sympy.simplify(a - b) == 0


# -- seeds and hashing ---------------------------------------------------------

def stage_seed(seed: int, stage: str) -> int:
    """Fan a 64-bit run seed out to a named stage."""
    digest = hashlib.sha256(f"{int(seed) & (2**64 - 1)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def canonical_hash(obj) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()
