"""Order-3 tensors in l_p1^n (x) l_p2^n (x) l_p3^n with certified norm bounds.

Upper bounds come from explicit decompositions into rank-one terms, lower
bounds from trilinear functionals with a known dual-norm bound.  Values are
floats rounded toward the safe side; ``exact`` carries a sympy value when one
is cheap to get (closed forms, polished rank-one functionals).

Indices and permutations are 1-based in the public API (``pi[i-1]`` is
pi(i)); tensor entries live in a 0-based numpy array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy

from ._numeric import (
    INF,
    Exponent,
    as_float_array,
    conjugate,
    dyadic,
    exact_equal,
    exact_lp_norm,
    exponent_str,
    expr_str,
    float_lp_norms,
    frac_str,
    fraction_array,
    inverse,
    parse_exponent,
    round_down,
    round_up,
    to_fraction,
    to_mpf,
)
from .errors import DimensionError, InvariantError, PreconditionError
from .hypercube import sign_vectors

_MOD = "tensor_space"
DIAGONAL_FLOAT_TOL = 1e-14


# -- spaces -----------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceSpec:
    p1: Exponent
    p2: Exponent
    p3: Exponent
    n: int

    def __post_init__(self):
        for name in ("p1", "p2", "p3"):
            p = parse_exponent(getattr(self, name))
            if p == 1:
                raise PreconditionError(f"{name} must exceed 1", module=_MOD)
            object.__setattr__(self, name, p)
        if int(self.n) < 1:
            raise DimensionError(f"n={self.n} < 1", module=_MOD)
        object.__setattr__(self, "n", int(self.n))

    @property
    def exponents(self) -> tuple:
        return (self.p1, self.p2, self.p3)

    @property
    def r_inv(self) -> Fraction:
        """1/r = 1/p1 + 1/p2 + 1/p3."""
        return sum((inverse(p) for p in self.exponents), Fraction(0))

    @property
    def r(self) -> Exponent:
        return INF if self.r_inv == 0 else 1 / self.r_inv

    @property
    def satisfies_assumption(self) -> bool:
        return self.r_inv <= 1

    def require_assumption(self, override: bool = False) -> None:
        if not override and not self.satisfies_assumption:
            raise PreconditionError(
                f"1/p1 + 1/p2 + 1/p3 = {self.r_inv} > 1; certification needs <= 1", module=_MOD
            )

    def with_n(self, n: int) -> "SpaceSpec":
        return replace(self, n=n)

    def to_json(self) -> dict:
        return {"p": [exponent_str(p) for p in self.exponents], "n": self.n, "r_inv": frac_str(self.r_inv)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SpaceSpec":
        p1, p2, p3 = obj["p"]
        return cls(p1, p2, p3, int(obj["n"]))


# -- tensors ----------------------------------------------------------------------

def outer3(a, b, c) -> np.ndarray:
    a, b, c = (np.asarray(v) for v in (a, b, c))
    return a[:, None, None] * b[None, :, None] * c[None, None, :]


class Tensor3:
    """Dense n x n x n tensor; ``rational`` (Fraction objects) or ``float``."""

    __slots__ = ("entries",)

    def __init__(self, entries, arithmetic: str | None = None):
        arr = np.asarray(entries)
        if arithmetic is None:
            arithmetic = "rational" if arr.dtype == object or np.issubdtype(arr.dtype, np.integer) else "float"
        if arr.ndim != 3 or not (arr.shape[0] == arr.shape[1] == arr.shape[2]):
            raise DimensionError(f"tensor shape {arr.shape} is not n x n x n", module=_MOD)
        if arithmetic == "rational":
            arr = arr if arr.dtype == object and _all_fractions(arr) else fraction_array(arr)
        elif arithmetic == "float":
            arr = as_float_array(arr)
        else:
            raise PreconditionError(f"unknown arithmetic {arithmetic!r}", module=_MOD)
        self.entries = arr

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def arithmetic(self) -> str:
        return "rational" if self.entries.dtype == object else "float"

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object

    # constructors
    @classmethod
    def zeros(cls, n: int, arithmetic: str = "rational") -> "Tensor3":
        return cls(np.zeros((n, n, n), dtype=np.int64), arithmetic)

    @classmethod
    def basis(cls, n: int, i: int, j: int, k: int, arithmetic: str = "rational") -> "Tensor3":
        arr = np.zeros((n, n, n), dtype=np.int64)
        arr[i - 1, j - 1, k - 1] = 1
        return cls(arr, arithmetic)

    @classmethod
    def rank_one(cls, a, b, c, arithmetic: str | None = None) -> "Tensor3":
        vecs = [np.asarray(v) for v in (a, b, c)]
        if arithmetic is None:
            arithmetic = "float" if any(np.issubdtype(v.dtype, np.floating) for v in vecs) else "rational"
        if arithmetic == "rational":
            vecs = [fraction_array(v) for v in vecs]
        if not (vecs[0].size == vecs[1].size == vecs[2].size):
            raise DimensionError("rank-one factors differ in length", module=_MOD)
        return cls(outer3(*vecs), arithmetic)

    @classmethod
    def diagonal(cls, d, arithmetic: str | None = None) -> "Tensor3":
        d = np.asarray(d)
        if arithmetic is None:
            arithmetic = "float" if np.issubdtype(d.dtype, np.floating) else "rational"
        n = d.size
        arr = np.zeros((n, n, n), dtype=object if arithmetic == "rational" else float)
        if arithmetic == "rational":
            arr[...] = Fraction(0)
            d = fraction_array(d)
        for i in range(n):
            arr[i, i, i] = d[i]
        return cls(arr, arithmetic)

    @classmethod
    def from_flat(cls, n: int, flat: Sequence, arithmetic: str = "rational") -> "Tensor3":
        if len(flat) != n ** 3:
            raise DimensionError(f"{len(flat)} entries, expected n^3 = {n ** 3}", module=_MOD)
        conv = to_fraction if arithmetic == "rational" else float
        arr = np.empty(n ** 3, dtype=object if arithmetic == "rational" else float)
        for idx, v in enumerate(flat):
            arr[idx] = conv(v)
        return cls(arr.reshape(n, n, n), arithmetic)

    # arithmetic
    def _coerce(self, other: "Tensor3"):
        if self.n != other.n:
            raise DimensionError(f"dimension mismatch {self.n} vs {other.n}", module=_MOD)
        if self.exact and other.exact:
            return self.entries, other.entries, "rational"
        return as_float_array(self.entries), as_float_array(other.entries), "float"

    def __add__(self, other: "Tensor3") -> "Tensor3":
        a, b, arith = self._coerce(other)
        return Tensor3(a + b, arith)

    def __sub__(self, other: "Tensor3") -> "Tensor3":
        a, b, arith = self._coerce(other)
        return Tensor3(a - b, arith)

    def __neg__(self) -> "Tensor3":
        return Tensor3(-self.entries, self.arithmetic)

    def __mul__(self, scalar) -> "Tensor3":
        if self.exact and not isinstance(scalar, (float, np.floating)):
            return Tensor3(self.entries * to_fraction(scalar), "rational")
        return Tensor3(as_float_array(self.entries) * float(scalar), "float")

    __rmul__ = __mul__

    def equals(self, other: "Tensor3") -> bool:
        return self.n == other.n and bool(np.all(self.entries == other.entries))

    def to_float(self) -> np.ndarray:
        return as_float_array(self.entries)

    def to_rational(self) -> "Tensor3":
        return self if self.exact else Tensor3(fraction_array(self.entries), "rational")

    def is_diagonal(self) -> bool:
        n = self.n
        mask = np.ones((n, n, n), dtype=bool)
        mask[np.arange(n), np.arange(n), np.arange(n)] = False
        if self.exact:
            return all(x == 0 for x in self.entries[mask])
        arr = self.to_float()
        top = np.max(np.abs(arr)) if arr.size else 0.0
        return bool(np.all(np.abs(arr[mask]) <= DIAGONAL_FLOAT_TOL * top))

    def diag(self) -> np.ndarray:
        idx = np.arange(self.n)
        return self.entries[idx, idx, idx]

    def to_json(self) -> dict:
        flat = self.entries.reshape(-1)
        entries = [frac_str(x) for x in flat] if self.exact else [float(x) for x in flat]
        return {"n": self.n, "order": "ijk-row-major-k-fastest", "arithmetic": self.arithmetic, "entries": entries}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Tensor3":
        order = obj.get("order", "ijk-row-major-k-fastest")
        if order != "ijk-row-major-k-fastest":
            raise PreconditionError(f"unsupported entry order {order!r}", module=_MOD)
        return cls.from_flat(int(obj["n"]), obj["entries"], obj.get("arithmetic", "rational"))

    def __repr__(self) -> str:
        return f"Tensor3(n={self.n}, arithmetic={self.arithmetic!r})"


def _all_fractions(arr: np.ndarray) -> bool:
    return all(type(x) is Fraction for x in arr.reshape(-1))


# -- certificates ----------------------------------------------------------------

@dataclass
class RankOneTerm:
    coef: object
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def tensor(self) -> np.ndarray:
        return outer3(self.a, self.b, self.c) * self.coef


@dataclass
class NormBound:
    """A certified one-sided bound on a tensor norm.

    ``side`` is ``upper`` (decomposition certificate), ``lower`` (functional
    certificate) or ``exact`` (exhaustive evaluation of a user oracle).
    """

    value: float
    side: str
    method: str
    exact: object = None
    certificate: dict = field(default_factory=dict)
    terms: list | None = None
    terms_factory: Callable[[], list] | None = field(default=None, repr=False)
    functional: np.ndarray | None = field(default=None, repr=False)
    functional_norm: object = None
    pairing: object = None

    def materialize_terms(self) -> list:
        if self.terms is None and self.terms_factory is not None:
            self.terms = self.terms_factory()
        return self.terms

    def verify(self, T: Tensor3, rel_tol: float = 1e-12) -> bool:
        """Re-check the certificate against T."""
        if self.side == "upper":
            terms = self.materialize_terms()
            if terms is None:
                return False
            exact = T.exact and all(_is_exact_term(t) for t in terms)
            if exact:
                total = np.empty_like(T.entries)
                total[...] = Fraction(0)
                for term in terms:
                    total = total + term.tensor()
                return bool(np.all(total == T.entries))
            total = np.zeros((T.n,) * 3)
            for term in terms:
                total += as_float_array(np.asarray(term.tensor()))
            ref = T.to_float()
            scale = max(1.0, float(np.max(np.abs(ref)))) if ref.size else 1.0
            return bool(np.max(np.abs(total - ref)) <= rel_tol * scale * max(1, len(terms)))
        if self.side == "lower":
            if self.functional is None or self.functional_norm is None:
                return False
            pairing = _pair(T.entries, self.functional)
            if T.exact and self.functional.dtype == object:
                if self.exact is None:
                    return True
                ratio = sympy.Abs(sympy.sympify(pairing)) / sympy.sympify(self.functional_norm)
                lhs, rhs = to_mpf(ratio, 60), to_mpf(sympy.sympify(self.exact), 60)
                return abs(lhs - rhs) <= 1e-40 * max(1, abs(rhs))
            expected = abs(float(pairing)) / float(sympy.N(self.functional_norm, 30))
            return self.value <= expected * (1 + rel_tol) + 1e-300
        return True

    def to_json(self) -> dict:
        out = {
            "value": self.value,
            "side": self.side,
            "method": self.method,
            "exact": expr_str(self.exact),
            "certificate": self.certificate,
        }
        terms = self.terms
        if terms is not None:
            out["terms"] = [
                {
                    "coef": _num_json(t.coef),
                    "a": [_num_json(x) for x in t.a],
                    "b": [_num_json(x) for x in t.b],
                    "c": [_num_json(x) for x in t.c],
                }
                for t in terms
            ]
        if self.functional is not None:
            out["functional"] = [_num_json(x) for x in self.functional.reshape(-1)]
            out["functional_norm"] = expr_str(self.functional_norm) if not isinstance(self.functional_norm, float) else self.functional_norm
            out["pairing"] = _num_json(self.pairing)
        return out


def _num_json(x):
    if isinstance(x, Fraction):
        return frac_str(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def _is_exact_term(t: RankOneTerm) -> bool:
    return isinstance(t.coef, (Fraction, int)) and all(np.asarray(v).dtype == object for v in (t.a, t.b, t.c))


def _pair(entries: np.ndarray, functional: np.ndarray):
    if entries.dtype == object and functional.dtype == object:
        return sum((x * y for x, y in zip(entries.reshape(-1), functional.reshape(-1))), Fraction(0))
    return float(np.sum(as_float_array(entries) * as_float_array(functional)))


# -- closed forms ----------------------------------------------------------------

def _vec_norm(v, p: Exponent):
    """Exact sympy norm for rational vectors, float otherwise."""
    v = np.asarray(v)
    if v.dtype == object or np.issubdtype(v.dtype, np.integer):
        return exact_lp_norm(v, p)
    return float(float_lp_norms(v[None, :], p)[0])


def rank_one_norm(a, b, c, spec: SpaceSpec):
    """‖a‖_p1 ‖b‖_p2 ‖c‖_p3, the projective norm of a (x) b (x) c."""
    norms = [_vec_norm(v, p) for v, p in zip((a, b, c), spec.exponents)]
    if all(isinstance(x, sympy.Basic) for x in norms):
        return norms[0] * norms[1] * norms[2]
    return float(np.prod([float(x) for x in norms]))


def diagonal_norm(n: int, spec: SpaceSpec):
    """n^(1/r), the projective norm of sum_i e_i (x) e_i (x) e_i."""
    if spec.r_inv > 1:
        raise PreconditionError(f"closed form needs 1/r <= 1, got {spec.r_inv}", module=_MOD)
    return sympy.Integer(n) ** sympy.Rational(spec.r_inv.numerator, spec.r_inv.denominator)


def omega(spec: SpaceSpec):
    """max_eps ‖eps (x) eps (x) eps‖ = n^(1/r) for the l_p projective norm."""
    return sympy.Integer(spec.n) ** sympy.Rational(spec.r_inv.numerator, spec.r_inv.denominator)


def omega_oracle(norm_oracle: Callable[[Tensor3], object], n: int, budget: int = 1 << 16, seed: int = 0) -> NormBound:
    """max over sign vectors of oracle(eps (x) eps (x) eps).

    Exhaustive over the 2^(n-1) classes eps ~ -eps when within budget (flagged
    exact); otherwise a random sample, which only bounds Omega from below.
    """
    classes = 1 << (n - 1)
    if classes <= budget:
        signs = sign_vectors(n)[: classes]
        regime = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        signs = rng.choice([-1, 1], size=(int(budget), n))
        signs[:, 0] = 1
        regime = "sampled"
    best, best_exact, best_eps = -math.inf, None, None
    for eps in signs:
        val = norm_oracle(Tensor3.rank_one(eps, eps, eps, "rational"))
        fval = float(sympy.N(val, 30)) if isinstance(val, sympy.Basic) else float(val)
        if fval > best:
            best, best_exact, best_eps = fval, val, [int(e) for e in eps]
    side = "exact" if regime == "exhaustive" else "lower"
    exact = best_exact if isinstance(best_exact, (sympy.Basic, Fraction)) else None
    return NormBound(best, side, "omega_oracle", exact, {"regime": regime, "evaluated": len(signs), "argmax": best_eps, "seed": seed if regime == "sampled" else None})


# -- group action ----------------------------------------------------------------

def _perm0(perm, n: int) -> np.ndarray:
    perm = [int(x) for x in perm]
    if sorted(perm) != list(range(1, n + 1)):
        raise DimensionError(f"{perm} is not a permutation of 1..{n}", module=_MOD)
    return np.array(perm, dtype=np.int64) - 1


def _signs(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    if v.shape != (n,) or not np.all(np.abs(v) == 1):
        raise DimensionError(f"sign vector of length {n} expected", module=_MOD)
    return v


def apply_symmetry(T: Tensor3, pi, sigma, tau, eps, delta, eta) -> Tensor3:
    """Entry (i,j,k) of the result is eps_i delta_j eta_k a[pi(i), sigma(j), tau(k)]."""
    n = T.n
    p, s, t = (_perm0(x, n) for x in (pi, sigma, tau))
    e, d, h = (_signs(x, n) for x in (eps, delta, eta))
    moved = T.entries[np.ix_(p, s, t)]
    signs = outer3(e, d, h)
    if T.exact:
        signs = signs.astype(object)
    return Tensor3(moved * signs, T.arithmetic)


def inverse_symmetry(n: int, pi, sigma, tau, eps, delta, eta):
    """Data undoing :func:`apply_symmetry` with the given data."""
    out = []
    for perm in (pi, sigma, tau):
        p = _perm0(perm, n)
        inv = np.empty(n, dtype=np.int64)
        inv[p] = np.arange(n)
        out.append(tuple(int(x) + 1 for x in inv))
    for perm, sg in zip(out, (eps, delta, eta)):
        sg = _signs(sg, n)
        out.append(tuple(int(sg[q - 1]) for q in perm))
    return tuple(out)


def embed(T: Tensor3, N: int) -> Tensor3:
    """Zero-pad T into dimension N >= n."""
    if N < T.n:
        raise PreconditionError(f"cannot embed dimension {T.n} into {N}", module=_MOD)
    if T.exact:
        arr = np.empty((N, N, N), dtype=object)
        arr[...] = Fraction(0)
    else:
        arr = np.zeros((N, N, N))
    arr[: T.n, : T.n, : T.n] = T.entries
    return Tensor3(arr, T.arithmetic)


# -- parameters ------------------------------------------------------------------

UPPER_STRATEGIES = ("rank_one", "diagonal", "slicing", "peeling", "lp_vertex")
LOWER_METHODS = ("rank_one_ascent", "diagonal_functional", "entry_functional", "lp_dual")


@dataclass(frozen=True)
class BoundParams:
    strategies: tuple = UPPER_STRATEGIES
    seed: int = 0
    starts: int = 32
    max_iter: int = 500
    tol: float = 1e-12
    max_peels: int = 8
    lp_max_n: int = 6
    extra: tuple = ()


# -- float helpers ---------------------------------------------------------------

def _quick_norms(rows: np.ndarray, p: Exponent) -> np.ndarray:
    """Unsorted row norms for the ascent, where bit-level reproducibility under reordering is not needed."""
    pf = float(p)
    a = np.abs(rows)
    top = a.max(axis=-1)
    if pf == INF:
        return top
    safe = np.where(top > 0, top, 1.0)
    return np.where(top > 0, safe * ((a / safe[:, None]) ** pf).sum(axis=-1) ** (1.0 / pf), 0.0)


def _norming_rows(G: np.ndarray, p: Exponent) -> np.ndarray:
    """Rows x with ‖x‖_{p'} = 1 and <g, x> = ‖g‖_p (zero rows stay zero)."""
    G = np.asarray(G, dtype=float)
    pf = float(p)
    if pf == 1:
        return np.sign(G)
    out = np.zeros_like(G)
    top = np.max(np.abs(G), axis=-1)
    live = top > 0
    if pf == INF:
        k = np.argmax(np.abs(G), axis=-1)
        rows = np.arange(G.shape[0])
        out[rows, k] = np.sign(G[rows, k])
        out[~live] = 0.0
        return out
    scaled = G[live] / top[live, None]
    x = np.sign(scaled) * np.abs(scaled) ** (pf - 1.0)
    x /= _quick_norms(x, pf / (pf - 1.0))[:, None]
    out[live] = x
    return out


def _batched_ascent(T: np.ndarray, spec: SpaceSpec, params: BoundParams, rng: np.random.Generator):
    """Multi-start alternating maximization of <T, u (x) v (x) w> over dual unit balls."""
    p1, p2, p3 = (float(p) for p in spec.exponents)
    n = T.shape[0]
    S = max(1, params.starts)
    V = _norming_rows(rng.standard_normal((S, n)), float(conjugate(spec.p2)))
    W = _norming_rows(rng.standard_normal((S, n)), float(conjugate(spec.p3)))
    prev = None
    vals = np.zeros(S)
    U = np.zeros((S, n))
    for _ in range(max(1, params.max_iter)):
        U = _norming_rows(np.einsum("ijk,sj,sk->si", T, V, W), p1)
        V = _norming_rows(np.einsum("ijk,si,sk->sj", T, U, W), p2)
        G = np.einsum("ijk,si,sj->sk", T, U, V)
        W = _norming_rows(G, p3)
        vals = _quick_norms(G, p3)
        if prev is not None and np.all(np.abs(vals - prev) <= params.tol * np.maximum(np.abs(vals), 1e-300)):
            break
        prev = vals
    best = int(np.argmax(vals))
    return U[best], V[best], W[best], float(vals[best]), best


def _slicing_parts(arr: np.ndarray, spec: SpaceSpec):
    """(value, leg) of the three fiber slicings of a float array."""
    n = arr.shape[0]
    fibers = {
        3: (arr.reshape(n * n, n), spec.p3),
        1: (arr.transpose(1, 2, 0).reshape(n * n, n), spec.p1),
        2: (arr.transpose(0, 2, 1).reshape(n * n, n), spec.p2),
    }
    out = []
    for leg in (1, 2, 3):
        rows, p = fibers[leg]
        out.append((math.fsum(float_lp_norms(rows, p).tolist()), leg))
    return out


def _slicing_value(arr: np.ndarray, spec: SpaceSpec) -> tuple[float, int]:
    vals = _slicing_parts(arr, spec)
    return min(vals)


def _slicing_exact(entries: np.ndarray, leg: int, spec: SpaceSpec):
    """Exact slicing value when the fiber norms are rational (p = inf on that leg)."""
    p = spec.exponents[leg - 1]
    if p != INF or entries.dtype != object:
        return None
    moved = np.moveaxis(entries, leg - 1, -1).reshape(-1, entries.shape[0])
    return sum((max(abs(x) for x in row) for row in moved), Fraction(0))


def _slicing_terms(T: Tensor3, leg: int) -> list:
    n = T.n
    one = Fraction(1) if T.exact else 1.0
    zero = Fraction(0) if T.exact else 0.0
    terms = []
    for x in range(n):
        for y in range(n):
            ex = np.full(n, zero, dtype=object if T.exact else float)
            ey = ex.copy()
            ex[x] = one
            ey[y] = one
            if leg == 3:
                fiber = T.entries[x, y, :]
                vecs = (ex, ey, fiber)
            elif leg == 1:
                fiber = T.entries[:, x, y]
                vecs = (fiber, ex, ey)
            else:
                fiber = T.entries[x, :, y]
                vecs = (ex, fiber, ey)
            if any(v != 0 for v in fiber):
                terms.append(RankOneTerm(one, *[np.array(v) for v in vecs]))
    return terms


def _n_ops(n: int) -> int:
    return 4 * n ** 3 + 64


# -- upper strategies ------------------------------------------------------------

def slicing_bound(T: Tensor3, spec: SpaceSpec, leg: int | None = None) -> NormBound:
    """Sum of fiber norms along one leg (the best leg when ``leg`` is None).

    With a fixed leg this is a seminorm, hence subadditive; the best-leg
    minimum need not be.
    """
    _check_dims(T, spec)
    if leg is None:
        return _upper_slicing(T, spec)
    if leg not in (1, 2, 3):
        raise DimensionError(f"leg must be 1, 2 or 3, got {leg}", module=_MOD)
    raw = dict((lg, v) for v, lg in _slicing_parts(T.to_float(), spec))[leg]
    return _slicing_bound(T, spec, raw, leg)


def _upper_slicing(T: Tensor3, spec: SpaceSpec) -> NormBound:
    raw, leg = _slicing_value(T.to_float(), spec)
    return _slicing_bound(T, spec, raw, leg)


def _slicing_bound(T: Tensor3, spec: SpaceSpec, raw: float, leg: int) -> NormBound:
    exact = _slicing_exact(T.entries, leg, spec)
    value = round_up(exact) if exact is not None else round_up(raw, _n_ops(T.n))
    return NormBound(
        value, "upper", "slicing", exact, {"leg": leg}, terms_factory=lambda: _slicing_terms(T, leg)
    )


def _exact_rank_one_factors(T: Tensor3):
    """(a, b, c) with T = a (x) b (x) c exactly, or None."""
    nz = np.argwhere(T.entries != 0) if T.exact else np.argwhere(T.to_float() != 0)
    if nz.size == 0:
        return None
    i0, j0, k0 = (int(x) for x in nz[0])
    E = T.entries
    pivot = E[i0, j0, k0]
    a = E[:, j0, k0].copy()
    b = E[i0, :, k0] / pivot
    c = E[i0, j0, :] / pivot
    if T.exact:
        return (a, b, c) if bool(np.all(outer3(a, b, c) == E)) else None
    arr = T.to_float()
    recon = outer3(a.astype(float), b.astype(float), c.astype(float))
    top = float(np.max(np.abs(arr)))
    return (a, b, c) if np.max(np.abs(recon - arr)) <= 1e-14 * top else None


def _upper_rank_one(T: Tensor3, spec: SpaceSpec) -> NormBound | None:
    factors = _exact_rank_one_factors(T)
    if factors is None:
        return None
    a, b, c = factors
    one = Fraction(1) if T.exact else 1.0
    terms = [RankOneTerm(one, a, b, c)]
    if T.exact:
        exact = rank_one_norm(a, b, c, spec)
        return NormBound(round_up(exact), "upper", "rank_one", exact, {"terms": 1}, terms=terms)
    value = rank_one_norm(a.astype(float), b.astype(float), c.astype(float), spec)
    resid = T.to_float() - outer3(a.astype(float), b.astype(float), c.astype(float))
    value += _slicing_value(resid, spec)[0]
    return NormBound(round_up(value, _n_ops(T.n)), "upper", "rank_one", None, {"terms": 1}, terms=terms)


def _diag_legs(spec: SpaceSpec) -> tuple:
    """Exponents gamma_l (sum 1) splitting |d_i| across the legs."""
    if spec.r_inv == 0:
        return (Fraction(1), Fraction(0), Fraction(0))
    r = 1 / spec.r_inv
    return tuple(r * inverse(p) for p in spec.exponents)


def _orthogonal_signs(n: int) -> np.ndarray:
    """H x n sign rows with orthogonal columns (Walsh characters), H the least power of two >= n."""
    H = 1 << max(0, (n - 1).bit_length())
    s = np.arange(H)[:, None] & np.arange(n)[None, :]
    parity = np.array([[bin(int(v)).count("1") & 1 for v in row] for row in s])
    return 1 - 2 * parity


def _upper_diagonal(T: Tensor3, spec: SpaceSpec) -> NormBound | None:
    """Sign-averaging identity sum_i d_i e_i e_i e_i = E_{delta,eta}[(delta eta a) (x) (delta b) (x) (eta c)].

    With |a_i| |b_i| |c_i| = |d_i| split by the exponents r/p_l the cost is ‖d‖_r.  Only
    E[delta_i delta_j] = [i = j] is used, so delta and eta range over the rows of a
    Hadamard matrix instead of all of {-1,1}^n.
    """
    if spec.r_inv > 1 or not T.is_diagonal():
        return None
    d = T.diag()
    r = spec.r
    gammas = _diag_legs(spec)
    if T.exact:
        exact = exact_lp_norm(d, r)
        value = round_up(exact)
    else:
        exact = None
        value = round_up(float(float_lp_norms(np.asarray(d, dtype=float)[None, :], r)[0]), 8 * T.n + 64)
    n = T.n

    def factory():
        df = np.asarray(d, dtype=float) if not T.exact else d
        exact_vecs = T.exact and all(_rational_power(x, g) is not None for x in df for g in gammas)
        vecs = []
        for g in gammas:
            if exact_vecs:
                vecs.append(np.array([_rational_power(x, g) for x in df], dtype=object))
            else:
                vecs.append(np.array([abs(float(x)) ** float(g) if x != 0 else 0.0 for x in df]))
        sgn = np.array([1 if x >= 0 else -1 for x in df])
        vecs[0] = vecs[0] * sgn
        rows = _orthogonal_signs(n)
        H = len(rows)
        weight = Fraction(1, H * H) if exact_vecs else 1.0 / (H * H)
        terms = []
        for dl in rows:
            for et in rows:
                terms.append(RankOneTerm(weight, vecs[0] * dl * et, vecs[1] * dl, vecs[2] * et))
        return terms

    return NormBound(value, "upper", "diagonal", exact, {"closed_form": "sign_average", "r": exponent_str(r)}, terms_factory=factory)


def _rational_power(x, g: Fraction):
    """|x|^g as a Fraction when exact, else None."""
    x = abs(to_fraction(x))
    if x == 0:
        return Fraction(0) if g > 0 else Fraction(1)
    if g == 0:
        return Fraction(1)
    val = sympy.Rational(x.numerator, x.denominator) ** sympy.Rational(g.numerator, g.denominator)
    return Fraction(int(val.p), int(val.q)) if isinstance(val, sympy.Rational) else None


def _upper_peeling(T: Tensor3, spec: SpaceSpec, params: BoundParams, rng: np.random.Generator) -> NormBound:
    """Greedy rank-one peeling followed by slicing of the residual.

    Each peel takes the ascent's dual maximizer, turns it into unit primal
    directions, subtracts the least-squares multiple, and is kept only if the
    total bound improves.  Directions and coefficients are rounded to dyadic
    rationals in exact mode so the residual stays exact.
    """
    n = T.n
    residual = T.entries.copy()
    terms: list[RankOneTerm] = []
    peel_cost = 0.0
    best_val, _ = _slicing_value(T.to_float(), spec)
    best_k, best_cost = 0, 0.0
    stale = 0
    for _ in range(max(0, params.max_peels)):
        R = as_float_array(residual)
        if not np.any(R):
            break
        u, v, w, _, _ = _batched_ascent(R, spec, params, rng)
        a = _norming_rows(u[None, :], conjugate(spec.p1))[0]
        b = _norming_rows(v[None, :], conjugate(spec.p2))[0]
        c = _norming_rows(w[None, :], conjugate(spec.p3))[0]
        denom = float(np.dot(a, a) * np.dot(b, b) * np.dot(c, c))
        if denom == 0:
            break
        lam = float(np.einsum("ijk,i,j,k->", R, a, b, c)) / denom
        if T.exact:
            a, b, c = (np.array([dyadic(x) for x in vec], dtype=object) for vec in (a, b, c))
            lam = dyadic(lam, 40)
            residual = residual - outer3(a, b, c) * lam
        else:
            residual = residual - lam * outer3(a, b, c)
        terms.append(RankOneTerm(lam, a, b, c))
        norms = [float(float_lp_norms(np.asarray(vec, dtype=float)[None, :], p)[0]) for vec, p in zip((a, b, c), spec.exponents)]
        peel_cost += abs(float(lam)) * norms[0] * norms[1] * norms[2]
        sl, leg = _slicing_value(as_float_array(residual), spec)
        if peel_cost + sl < best_val:
            best_val, best_k, best_cost = peel_cost + sl, len(terms), peel_cost
            best_residual = residual
            stale = 0
        else:
            stale += 1
            if stale >= 2:
                break
    kept = terms[:best_k]
    final_residual = best_residual if best_k else T.entries
    slice_val, leg = _slicing_value(as_float_array(final_residual), spec)
    value = round_up(best_cost + slice_val, _n_ops(n) + 16 * n * max(1, best_k))

    def factory():
        return kept + _slicing_terms(Tensor3(final_residual, T.arithmetic), leg)

    return NormBound(value, "upper", "peeling", None, {"peels": best_k, "residual_leg": leg, "seed": params.seed}, terms_factory=factory)


def _upper_explicit(T: Tensor3, spec: SpaceSpec, terms: Sequence) -> NormBound:
    """Caller-supplied decomposition; must re-sum to T (exactly in rational mode)."""
    parsed = [t if isinstance(t, RankOneTerm) else RankOneTerm(*t) for t in terms]
    bound = NormBound(0.0, "upper", "explicit", terms=parsed)
    if not bound.verify(T):
        raise PreconditionError("explicit decomposition does not sum to the tensor", module=_MOD)
    exact_ok = T.exact and all(_is_exact_term(t) for t in parsed)
    if exact_ok and len(parsed) <= 64:
        total = sympy.Integer(0)
        for t in parsed:
            coef = to_fraction(t.coef)
            total += sympy.Rational(abs(coef.numerator), coef.denominator) * rank_one_norm(t.a, t.b, t.c, spec)
        bound.exact = total
        bound.value = round_up(total)
    else:
        acc = 0.0
        for t in parsed:
            acc += abs(float(t.coef)) * float(
                np.prod([float_lp_norms(np.asarray(v, dtype=float)[None, :], p)[0] for v, p in zip((t.a, t.b, t.c), spec.exponents)])
            )
        bound.value = round_up(acc, 16 * T.n * len(parsed) + 64)
    bound.certificate = {"terms": len(parsed)}
    return bound


# -- l_inf vertex LP ----------------------------------------------------------------

def _lp_applicable(spec: SpaceSpec, n: int, params: BoundParams) -> bool:
    return all(p == INF for p in spec.exponents) and n <= params.lp_max_n


def _half_signs(n: int) -> np.ndarray:
    """Sign vectors with first coordinate +1."""
    return sign_vectors(n)[: 1 << (n - 1)]


_LP_CACHE: dict = {}
_LP_CACHE_SIZE = 64


def _lp_vertex_solve(T: Tensor3, max_rounds: int = 200, batch: int = 64):
    key = (T.n, T.to_float().tobytes(), max_rounds, batch)
    if key not in _LP_CACHE:
        if len(_LP_CACHE) >= _LP_CACHE_SIZE:
            _LP_CACHE.pop(next(iter(_LP_CACHE)))
        _LP_CACHE[key] = _lp_vertex_uncached(T, max_rounds, batch)
    return _LP_CACHE[key]


def _lp_vertex_uncached(T: Tensor3, max_rounds: int, batch: int):
    """Column generation for min sum|lambda| over sign atoms eps (x) delta (x) eta.

    In l_inf^n (x) l_inf^n (x) l_inf^n the unit ball is the convex hull of the
    sign atoms, so the LP value is the projective norm; its duals give a
    functional whose norm is an exhaustive max over atoms.
    """
    from scipy.optimize import linprog

    n = T.n
    S = _half_signs(n)
    target = T.to_float().reshape(-1)
    basis = [0] + [1 << (i - 1) for i in range(1, n)]  # all-ones and single flips: a basis of R^n
    atoms = {(a, b, c) for a in basis for b in basis for c in basis}
    y = None
    lam = None
    atom_list: list = []
    for _ in range(max_rounds):
        atom_list = sorted(atoms)
        A = np.stack([outer3(S[a], S[b], S[c]).reshape(-1) for a, b, c in atom_list], axis=1).astype(float)
        K = A.shape[1]
        res = linprog(np.ones(2 * K), A_eq=np.hstack([A, -A]), b_eq=target, bounds=(0, None), method="highs")
        if res.status != 0:
            raise InvariantError("lp_feasible", f"vertex LP failed: {res.message}", module=_MOD)
        lam = res.x[:K] - res.x[K:]
        y = np.asarray(res.eqlin.marginals, dtype=float)
        Y = y.reshape(n, n, n)
        Z = np.einsum("ai,bj,ijk,ck->abc", S, S, Y, S)
        viol = np.abs(Z)
        order = np.argsort(viol, axis=None)[::-1][:batch]
        added = 0
        for flat in order:
            if viol.reshape(-1)[flat] <= 1 + 1e-9:
                break
            key = tuple(int(x) for x in np.unravel_index(flat, viol.shape))
            if key not in atoms:
                atoms.add(key)
                added += 1
        if not added:
            break
    return S, atom_list, lam, y


def _upper_lp(T: Tensor3, spec: SpaceSpec, params: BoundParams, solved=None) -> NormBound:
    S, atom_list, lam, _ = solved or _lp_vertex_solve(T)
    exact_T = T.to_rational()
    residual = exact_T.entries.copy()
    terms = []
    total = Fraction(0)
    for (a, b, c), l in zip(atom_list, lam):
        if abs(l) < 1e-13:
            continue
        q = dyadic(l, 40)
        if q == 0:
            continue
        va, vb, vc = (np.array([Fraction(int(x)) for x in S[idx]], dtype=object) for idx in (a, b, c))
        residual = residual - outer3(va, vb, vc) * q
        terms.append(RankOneTerm(q, va, vb, vc))
        total += abs(q)
    slice_exact = min(_slicing_exact(residual, leg, spec) for leg in (1, 2, 3))
    exact = total + slice_exact
    resid_T = Tensor3(residual, "rational")
    leg = min((1, 2, 3), key=lambda lg: _slicing_exact(residual, lg, spec))

    def factory():
        return terms + _slicing_terms(resid_T, leg)

    return NormBound(
        round_up(exact), "upper", "lp_vertex", exact, {"atoms": len(terms), "residual_slicing": frac_str(slice_exact)}, terms_factory=factory
    )


def _lower_lp(T: Tensor3, spec: SpaceSpec, params: BoundParams, solved=None) -> NormBound:
    S, _, _, y = solved or _lp_vertex_solve(T)
    n = T.n
    bits = 40
    phi_int = np.array([int(round(v * (1 << bits))) for v in y], dtype=np.int64).reshape(n, n, n)
    Z = np.einsum("ai,bj,ijk,ck->abc", S.astype(np.int64), S.astype(np.int64), phi_int, S.astype(np.int64))
    dual_norm = Fraction(int(np.max(np.abs(Z))), 1 << bits)
    functional = np.empty(n ** 3, dtype=object)
    for idx, v in enumerate(phi_int.reshape(-1)):
        functional[idx] = Fraction(int(v), 1 << bits)
    functional = functional.reshape(n, n, n)
    pairing = _pair(T.to_rational().entries, functional)
    if dual_norm == 0:
        exact = Fraction(0)
    else:
        exact = abs(pairing) / dual_norm
    return NormBound(
        round_down(exact), "lower", "lp_dual", exact, {"dual_norm": frac_str(dual_norm), "atoms_checked": int(Z.size)},
        functional=functional, functional_norm=sympy.Rational(dual_norm.numerator, dual_norm.denominator), pairing=pairing,
    )


# -- public bounds ----------------------------------------------------------------

def _check_dims(T: Tensor3, spec: SpaceSpec) -> None:
    if T.n != spec.n:
        raise DimensionError(f"tensor dimension {T.n} != space dimension {spec.n}", module=_MOD)


def upper_candidates(T: Tensor3, spec: SpaceSpec, params: BoundParams = BoundParams()) -> list[NormBound]:
    """Every enabled strategy's upper bound (strategies that do not apply are skipped)."""
    _check_dims(T, spec)
    out = []
    if not np.any(T.entries != 0):
        zero = Fraction(0) if T.exact else 0.0
        return [NormBound(0.0, "upper", "zero", zero if T.exact else None, {}, terms=[])]
    rng = np.random.default_rng(params.seed)
    for name in params.strategies:
        if name == "rank_one":
            b = _upper_rank_one(T, spec)
        elif name == "diagonal":
            b = _upper_diagonal(T, spec)
        elif name == "slicing":
            b = _upper_slicing(T, spec)
        elif name == "peeling":
            b = _upper_peeling(T, spec, params, rng)
        elif name == "lp_vertex":
            b = _upper_lp(T, spec, params) if _lp_applicable(spec, T.n, params) else None
        else:
            raise PreconditionError(f"unknown upper strategy {name!r}", module=_MOD)
        if b is not None:
            out.append(b)
    for terms in params.extra:
        out.append(_upper_explicit(T, spec, terms))
    return out


def projective_upper(T: Tensor3, spec: SpaceSpec, params: BoundParams = BoundParams()) -> NormBound:
    """Smallest certified upper bound over the enabled strategies."""
    cands = upper_candidates(T, spec, params)
    if not cands:
        raise PreconditionError(f"no enabled strategy applies (enabled: {', '.join(params.strategies)})", module=_MOD)
    best = min(enumerate(cands), key=lambda ic: (ic[1].value, ic[0]))[1]
    best.certificate = dict(best.certificate, candidates={c.method: c.value for c in cands})
    return best


def _lower_entry(T: Tensor3) -> NormBound:
    flat = T.entries.reshape(-1)
    if T.exact:
        idx = max(range(flat.size), key=lambda r: (abs(flat[r]), -r))
        exact = abs(flat[idx])
        value = round_down(exact)
    else:
        arr = np.abs(as_float_array(flat))
        idx = int(np.argmax(arr))
        exact = None
        value = float(arr[idx])
    functional = np.zeros(flat.size, dtype=object if T.exact else float)
    if T.exact:
        functional[...] = Fraction(0)
    functional[idx] = (Fraction(1) if T.exact else 1.0) * (1 if flat[idx] >= 0 else -1)
    i, j, k = np.unravel_index(idx, T.entries.shape)
    return NormBound(
        value, "lower", "entry_functional", exact, {"entry": [int(i) + 1, int(j) + 1, int(k) + 1]},
        functional=functional.reshape(T.entries.shape), functional_norm=sympy.Integer(1), pairing=abs(flat[idx]),
    )


def _norming_vector_exact(g: np.ndarray, p: Exponent) -> np.ndarray:
    """Unnormalized x with <g, x> = ‖g‖_p ‖x‖_{p'}, rational when p is an integer or inf."""
    if p == INF:
        k = max(range(len(g)), key=lambda r: (abs(g[r]), -r))
        x = np.array([Fraction(0)] * len(g), dtype=object)
        x[k] = Fraction(1 if g[k] >= 0 else -1)
        return x
    p = Fraction(p)
    if p.denominator == 1:
        e = int(p) - 1
        return np.array([Fraction(1 if v >= 0 else -1) * abs(to_fraction(v)) ** e if v != 0 else Fraction(0) for v in g], dtype=object)
    gf = np.array([float(v) for v in g])
    x = _norming_rows(gf[None, :], p)[0]
    return np.array([dyadic(v, 40) for v in x], dtype=object)


def _lower_rank_one(T: Tensor3, spec: SpaceSpec, params: BoundParams) -> NormBound:
    """Rank-one functional u (x) v (x) w from multi-start ascent.

    In exact mode one more alternating round is done in rational arithmetic
    with unnormalized norming vectors; for a rank-one tensor this lands on the
    exact Hölder maximizer and the bound equals the norm.
    """
    rng = np.random.default_rng(params.seed)
    arr = T.to_float()
    u, v, w, fval, start = _batched_ascent(arr, spec, params, rng)
    if not T.exact:
        norms = [float_lp_norms(x[None, :], conjugate(p))[0] for x, p in zip((u, v, w), spec.exponents)]
        pairing = float(np.einsum("ijk,i,j,k->", arr, u, v, w))
        denom = float(np.prod(norms))
        value = 0.0 if denom == 0 else round_down(abs(pairing) / denom, _n_ops(T.n))
        return NormBound(value, "lower", "rank_one_ascent", None, {"start": start, "seed": params.seed},
                         functional=outer3(u, v, w), functional_norm=denom, pairing=pairing)
    factors = _exact_rank_one_factors(T)
    if factors is not None:
        return _lower_rank_one_closed(T, spec, factors, start)
    E = T.entries
    uq, vq, wq = (np.array([dyadic(x, 40) for x in vec], dtype=object) for vec in (u, v, w))
    pairing = to_fraction(np.einsum("ijk,i,j,k->", E, uq, vq, wq))
    fnorm = 1.0
    for x, p in zip((uq, vq, wq), spec.exponents):
        fnorm *= _norm_upper(x, conjugate(p))
    if fnorm == 0:
        return NormBound(0.0, "lower", "rank_one_ascent", None, {"degenerate": True})
    value = _ratio_down(abs(pairing), fnorm)
    return NormBound(
        value, "lower", "rank_one_ascent", None, {"start": start, "seed": params.seed, "float_value": fval},
        functional=outer3(uq, vq, wq), functional_norm=round_up(fnorm, 4), pairing=pairing,
    )


def _norm_upper(x, p: Exponent) -> float:
    """A float >= ‖x‖_p for a rational vector, via 60-digit evaluation."""
    import mpmath

    vals = [abs(to_fraction(v)) for v in x]
    if not vals:
        return 0.0
    if p == INF:
        return round_up(max(vals))
    if p == 1:
        return round_up(sum(vals, Fraction(0)))
    with mpmath.workdps(60):
        pf = mpmath.mpf(Fraction(p).numerator) / Fraction(p).denominator
        total = mpmath.fsum(mpmath.power(mpmath.mpf(v.numerator) / v.denominator, pf) for v in vals if v)
        val = mpmath.power(total, 1 / pf)
        return math.nextafter(math.nextafter(float(val), math.inf), math.inf)


def _ratio_down(num: Fraction, den: float) -> float:
    """A float <= num / den (den already an upper bound)."""
    exact = num / Fraction(den)
    return round_down(exact)


def _sympy_norming(vec, p: Exponent) -> np.ndarray:
    """Symbolic norming vector sign(a)|a|^(p-1) of a rational vector."""
    if p == INF:
        return _norming_vector_exact(vec, p)
    e = sympy.Rational(Fraction(p).numerator, Fraction(p).denominator) - 1
    out = np.empty(len(vec), dtype=object)
    for idx, x in enumerate(vec):
        x = to_fraction(x)
        mag = sympy.Rational(abs(x.numerator), x.denominator) ** e if x else sympy.Integer(0)
        out[idx] = mag if x >= 0 else -mag
    return out


def _lower_rank_one_closed(T: Tensor3, spec: SpaceSpec, factors, start: int) -> NormBound:
    """Exact Hölder functional for an exactly rank-one tensor."""
    a, b, c = factors
    exact = rank_one_norm(a, b, c, spec)
    vecs = [_sympy_norming(v, p) for v, p in zip((a, b, c), spec.exponents)]
    fnorm = sympy.Integer(1)
    pairing = sympy.Integer(1)
    for v, x, p in zip((a, b, c), vecs, spec.exponents):
        fnorm = fnorm * exact_lp_norm_sym(x, conjugate(p))
        pairing = pairing * sympy.Add(*[sympy.sympify(to_fraction(y)) * z for y, z in zip(v, x)])
    return NormBound(
        round_down(exact), "lower", "rank_one_ascent", exact, {"start": start, "closed_form": "rank_one"},
        functional=outer3(*vecs), functional_norm=fnorm, pairing=pairing,
    )


def exact_lp_norm_sym(vec, p: Exponent):
    """‖v‖_p for entries that may be symbolic."""
    vals = [sympy.Abs(sympy.sympify(v)) for v in vec]
    if p == INF:
        return sympy.Max(*vals)
    sp_p = sympy.Rational(Fraction(p).numerator, Fraction(p).denominator)
    return sympy.Add(*[v ** sp_p for v in vals]) ** (1 / sp_p)


def _lower_diagonal(T: Tensor3, spec: SpaceSpec) -> NormBound:
    """Diagonal functional sum_i c_i e_i* (x) e_i* (x) e_i*.

    Its norm is at most ‖c‖_{r'} when 1/r <= 1 (Hölder) and at most ‖c‖_inf
    otherwise.  The weights c norm the tensor's diagonal in l_r; for the
    identity diagonal c is all ones and the norm bound is n^(1 - 1/r).
    """
    n = T.n
    d = T.diag()
    s = spec.r if spec.r_inv <= 1 else Fraction(1)
    s_conj = conjugate(s)
    if T.exact:
        c = _norming_vector_exact(d, s)
        if all(x == 0 for x in c):
            c = np.array([Fraction(1)] * n, dtype=object)
        fnorm = exact_lp_norm(c, s_conj)
        pairing = sum((x * y for x, y in zip(c, d)), Fraction(0))
        exact = sympy.Rational(abs(pairing.numerator), pairing.denominator) / fnorm
        value = round_down(exact)
    else:
        df = np.asarray(d, dtype=float)
        c = _norming_rows(df[None, :], s)[0] if np.any(df) else np.ones(n)
        fnorm = float(float_lp_norms(c[None, :], s_conj)[0])
        pairing = float(np.dot(c, df))
        exact = None
        value = round_down(abs(pairing) / fnorm, 8 * n + 64)
    functional = Tensor3.diagonal(c, T.arithmetic).entries
    return NormBound(value, "lower", "diagonal_functional", exact, {"weights_norm_exponent": exponent_str(s_conj)},
                     functional=functional, functional_norm=fnorm, pairing=pairing)


def dual_lower(T: Tensor3, spec: SpaceSpec, method: str = "rank_one_ascent", params: BoundParams = BoundParams()) -> NormBound:
    """Lower bound |<T, phi>| / ‖phi‖ from a functional with a known norm bound."""
    _check_dims(T, spec)
    if method == "entry_functional":
        return _lower_entry(T)
    if method == "diagonal_functional":
        return _lower_diagonal(T, spec)
    if method == "rank_one_ascent":
        return _lower_rank_one(T, spec, params)
    if method == "lp_dual":
        if not _lp_applicable(spec, T.n, params):
            raise PreconditionError(f"lp_dual needs p = (inf, inf, inf) and n <= {params.lp_max_n}", module=_MOD)
        return _lower_lp(T, spec, params)
    raise PreconditionError(f"unknown lower-bound method {method!r}; choose from {LOWER_METHODS}", module=_MOD)


def best_lower(T: Tensor3, spec: SpaceSpec, params: BoundParams = BoundParams(), methods=None) -> NormBound:
    if methods is None:
        methods = ["entry_functional", "diagonal_functional", "rank_one_ascent"]
        if _lp_applicable(spec, T.n, params):
            methods.append("lp_dual")
    cands = [dual_lower(T, spec, m, params) for m in methods]
    best = max(enumerate(cands), key=lambda ic: (ic[1].value, -ic[0]))[1]
    best.certificate = dict(best.certificate, candidates={c.method: c.value for c in cands})
    return best


@dataclass
class Sandwich:
    upper: NormBound
    lower: NormBound

    @property
    def gap(self) -> float:
        return self.upper.value - self.lower.value

    @property
    def rel_gap(self) -> float:
        return self.gap / max(self.upper.value, 1e-300)

    def closed(self, rel_tol: float = 1e-9) -> bool:
        return self.rel_gap <= rel_tol

    def exactly_closed(self) -> bool:
        if self.upper.exact is None or self.lower.exact is None:
            return False
        return exact_equal(self.upper.exact, self.lower.exact)


def sandwich(T: Tensor3, spec: SpaceSpec, params: BoundParams = BoundParams()) -> Sandwich:
    return Sandwich(projective_upper(T, spec, params), best_lower(T, spec, params))


def lp_norm_oracle(spec: SpaceSpec, params: BoundParams = BoundParams(), rel_tol: float = 1e-6) -> Callable[[Tensor3], float]:
    """Norm oracle that insists on a closed sandwich (within ``rel_tol``)."""

    def oracle(T: Tensor3) -> float:
        sw = sandwich(T, spec.with_n(T.n), params)
        if not sw.closed(rel_tol):
            raise InvariantError("sandwich_closed", f"gap {sw.rel_gap:.3g} exceeds {rel_tol}", module=_MOD)
        return sw.upper.value

    return oracle
