"""Witness tensors from a smoothed code and sound cotype lower-bound certificates.

For a smoothed code C' of length N = 3n the witness for bit t is the
level-one coefficient x_t = E_eps[eps_t C'(eps) (x) C'(eps) (x) C'(eps)].
Its norm is bounded below through the symmetrization averaging argument, the
norms of its Rademacher sums are bounded above, and the two combine into a
lower bound on the cotype-q constant.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import sympy

from ._numeric import (
    as_float_array,
    canonical_hash,
    expr_str,
    frac_str,
    round_down,
    round_up,
    to_fraction,
)
from .errors import BudgetExceeded, DimensionError, InvariantError, MembershipError, PreconditionError
from .hypercube import CubeFunction, level_one, sign_vectors
from .smoothing import SmoothedCode
from .tensors import (
    BoundParams,
    NormBound,
    SpaceSpec,
    Tensor3,
    diagonal_norm,
    dual_lower,
    omega,
    projective_upper,
    upper_candidates,
)

_MOD = "cotype"
MAX_HAT_M = 12
MAX_HAT_ENTRIES = 1 << 21
FOURIER_CROSS_CHECK_N = 16
MAX_EXACT_SYM_N = 6
MAX_RATIO_M = 16


# -- witnesses --------------------------------------------------------------------

@dataclass
class WitnessFamily:
    tensors: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = {T.n for T in self.tensors}
        if len(dims) > 1:
            raise DimensionError(f"witness tensors have dimensions {sorted(dims)}", module=_MOD)

    @property
    def m(self) -> int:
        return len(self.tensors)

    @property
    def N(self) -> int:
        return self.tensors[0].n

    def scaled(self, lam) -> "WitnessFamily":
        return WitnessFamily([T * lam for T in self.tensors], dict(self.provenance, scaled=str(lam)))


def build_hat(sc: SmoothedCode) -> WitnessFamily:
    """Level-one coefficients of eps -> C'(eps)^(x3), one entry at a time by direct summation."""
    m, N = sc.m, sc.three_n
    if m > MAX_HAT_M:
        raise BudgetExceeded(1 << m, 1 << MAX_HAT_M, module=_MOD)
    if N ** 3 > MAX_HAT_ENTRIES:
        raise BudgetExceeded(N ** 3, MAX_HAT_ENTRIES, module=_MOD)
    table = sc.padded.table.astype(np.int64)
    signs = sign_vectors(m)
    scale = Fraction(1, 1 << m)
    tensors = []
    for t in range(m):
        sums = np.einsum("e,eu,ev,ew->uvw", signs[:, t], table, table, table, optimize=True)
        tensors.append(Tensor3(_scaled_fractions(sums, scale), "rational"))
    if N <= FOURIER_CROSS_CHECK_N:
        _cross_check_fourier(table, m, tensors)
    code_id = canonical_hash(sc.to_json())
    return WitnessFamily(tensors, {"smoothed_code": code_id, "arithmetic": "rational", "route": "direct_sum"})


def _scaled_fractions(ints: np.ndarray, scale: Fraction) -> np.ndarray:
    out = np.empty(ints.shape, dtype=object)
    flat_in, flat_out = ints.reshape(-1), out.reshape(-1)
    for idx in range(flat_in.size):
        flat_out[idx] = Fraction(int(flat_in[idx])) * scale
    return out


def _cross_check_fourier(table: np.ndarray, m: int, tensors: list) -> None:
    """Recompute the witnesses through the hypercube module's level-one coefficients."""
    N = table.shape[1]
    rows = [np.einsum("u,v,w->uvw", c, c, c).reshape(-1) for c in table]
    f = CubeFunction(m, N ** 3, np.array(rows, dtype=object), "rational")
    for t, coeff in enumerate(level_one(f)):
        if not np.array_equal(coeff.reshape(N, N, N), tensors[t].entries):
            raise InvariantError("witness_fourier", f"bit {t + 1}: direct sum disagrees with Fourier route", module=_MOD)


# -- membership -------------------------------------------------------------------

@dataclass
class SMembershipReport:
    margins: list          # margins[t-1][j-1], exact
    J: list
    alpha_min: Fraction
    alpha: Fraction
    passed: bool
    consistent: bool       # margin == 2P - 1 against the recorded biases

    def to_json(self) -> dict:
        return {
            "margins": [[frac_str(x) for x in row] for row in self.margins],
            "J": self.J,
            "alpha_min": frac_str(self.alpha_min),
            "alpha": frac_str(self.alpha),
            "pass": self.passed,
            "consistent": self.consistent,
        }


def signed_triples(sc: SmoothedCode, t: int) -> list[tuple]:
    """[(u, v, w, delta)] for bit t, 1-based."""
    b = sc.per_bit[t - 1]
    return [(*b.triple(j), b.signs[j - 1]) for j in range(1, b.J + 1)]


def s_membership(w: WitnessFamily, sc: SmoothedCode, alpha) -> SMembershipReport:
    """Exact margins delta_t^j x_t[pi_t(j), sigma_t(j), tau_t(j)] read off the raw entries."""
    if w.m != sc.m or w.N != sc.three_n:
        raise DimensionError(f"witness family ({w.m}, {w.N}) vs code ({sc.m}, {sc.three_n})", module=_MOD)
    alpha = to_fraction(alpha)
    margins, Js, consistent = [], [], True
    for t, x in enumerate(w.tensors, start=1):
        row = []
        for (u, v, ww, d), P in zip(signed_triples(sc, t), sc.per_bit[t - 1].biases):
            margin = d * x.entries[u - 1, v - 1, ww - 1]
            row.append(margin)
            consistent &= margin == 2 * P - 1
        margins.append(row)
        Js.append(len(row))
    flat = [x for row in margins for x in row]
    alpha_min = min(flat) if flat else Fraction(0)
    passed = bool(flat) and alpha_min >= alpha and all(Js)
    return SMembershipReport(margins, Js, alpha_min, alpha, passed, bool(consistent))


def _check_triples(triples: Sequence[tuple], N: int) -> None:
    for leg in range(3):
        coords = [tr[leg] for tr in triples]
        if len(set(coords)) != len(coords):
            raise PreconditionError(f"triples repeat an index in leg {leg + 1}", module=_MOD)
        if any(not 1 <= c <= N for c in coords):
            raise DimensionError(f"triple index outside 1..{N}", module=_MOD)


def s_lower_bound(x: Tensor3, triples: Sequence[tuple], K, spec: SpaceSpec, alpha=None) -> NormBound:
    """alpha * (J/N) * N^(1/r) / K for a tensor with margins >= alpha on J leg-disjoint triples.

    ``triples`` holds (u, v, w, delta) with 1-based indices; alpha defaults to
    the smallest achieved margin.
    """
    N = x.n
    if spec.n != N:
        raise DimensionError(f"space dimension {spec.n} != tensor dimension {N}", module=_MOD)
    if not triples:
        raise MembershipError("no triples: membership not established", module=_MOD)
    _check_triples(triples, N)
    margins = [to_fraction(d) * to_fraction(x.entries[u - 1, v - 1, w - 1]) for u, v, w, d in triples]
    achieved = min(margins)
    a = achieved if alpha is None else to_fraction(alpha)
    if a <= 0 or achieved < a:
        raise MembershipError(f"margin {achieved} does not reach alpha={a} > 0", module=_MOD)
    J = len(triples)
    K = to_fraction(K)
    coef = a * Fraction(J, N) / K
    exact = sympy.Rational(coef.numerator, coef.denominator) * diagonal_norm(N, spec)
    return NormBound(
        round_down(exact), "lower", "symmetrization", exact,
        {"alpha": frac_str(a), "J": J, "N": N, "K": frac_str(K)},
    )


# -- symmetrization ---------------------------------------------------------------

def _pinned_sign(x: np.ndarray, p, s, t, k: int) -> int:
    val = x[p[k], s[k], t[k]]
    return -1 if val < 0 else 1  # sign(0) taken as +1


def symmetrize(x: Tensor3, pi, sigma, tau, eps, delta, eta, rho, pinned: int) -> Tensor3:
    """eps_i delta_j s_k a[pi(rho(i)), sigma(rho(j)), tau(rho(k))].

    s_k = eta_k when rho(k) > pinned, else eps_k delta_k sign(a at the k-th
    composed diagonal), which makes the diagonal entry |a| regardless of signs.
    """
    n = x.n
    perms = [np.asarray(q, dtype=np.int64) - 1 for q in (pi, sigma, tau, rho)]
    if any(sorted(q.tolist()) != list(range(n)) for q in perms):
        raise DimensionError(f"permutations must be of 1..{n}", module=_MOD)
    if not 0 <= pinned <= n:
        raise DimensionError(f"pinned prefix {pinned} outside 0..{n}", module=_MOD)
    e, d, h = (np.asarray(v, dtype=np.int64) for v in (eps, delta, eta))
    if any(v.shape != (n,) or not np.all(np.abs(v) == 1) for v in (e, d, h)):
        raise DimensionError(f"sign vectors of length {n} expected", module=_MOD)
    P, S, T, R = perms
    pr, sr, tr = P[R], S[R], T[R]
    a = x.entries[np.ix_(pr, sr, tr)]
    s = np.array([
        e[k] * d[k] * _pinned_sign(x.entries, pr, sr, tr, k) if R[k] < pinned else h[k]
        for k in range(n)
    ], dtype=np.int64)
    signs = e[:, None, None] * d[None, :, None] * s[None, None, :]
    if x.exact:
        signs = signs.astype(object)
    return Tensor3(a * signs, x.arithmetic)


def symmetrization_closed_form(x: Tensor3, pi, sigma, tau, pinned: int) -> Tensor3:
    """(sum_{i <= pinned} |a[pi(i), sigma(i), tau(i)]| / n) * sum_j e_j (x) e_j (x) e_j."""
    n = x.n
    total = sum((abs(x.entries[pi[i] - 1, sigma[i] - 1, tau[i] - 1]) for i in range(pinned)),
                Fraction(0) if x.exact else 0.0)
    c = total / n
    return Tensor3.diagonal([c] * n, x.arithmetic)


@lru_cache(maxsize=None)
def _local_factor(i_eq_k: bool, j_eq_k: bool, pinned_k: bool, sgn: int) -> Fraction:
    """E[eps_i delta_j s_k] over the at most five sign coordinates involved."""
    # coordinates: eps_i, delta_j, eps_k, delta_k, eta_k, identified when indices coincide
    total = 0
    for ei, dj, ek, dk, hk in itertools.product((-1, 1), repeat=5):
        if i_eq_k and ei != ek:
            continue
        if j_eq_k and dj != dk:
            continue
        sk = ek * dk * sgn if pinned_k else hk
        total += ei * dj * sk
    count = 32 // (2 if i_eq_k else 1) // (2 if j_eq_k else 1)
    return Fraction(total, count)


def symmetrize_mean(x: Tensor3, pi, sigma, tau, pinned: int, mode: str = "exact",
                    seed: int = 0, samples: int = 100_000) -> Tensor3:
    """E over eps, delta, eta and rho in S_n of :func:`symmetrize`.

    ``exact`` enumerates rho and, per entry, the few sign coordinates that
    enter it; ``monte_carlo`` averages ``samples`` draws (see
    :func:`symmetrize_monte_carlo` for standard errors).
    """
    if mode == "monte_carlo":
        mean, _ = symmetrize_monte_carlo(x, pi, sigma, tau, pinned, seed, samples)
        return Tensor3(mean, "float")
    if mode != "exact":
        raise PreconditionError(f"unknown mode {mode!r}", module=_MOD)
    n = x.n
    if n > MAX_EXACT_SYM_N:
        raise BudgetExceeded(math.factorial(n), math.factorial(MAX_EXACT_SYM_N), module=_MOD)
    if not 0 <= pinned <= n:
        raise DimensionError(f"pinned prefix {pinned} outside 0..{n}", module=_MOD)
    P, S, T = (np.asarray(q, dtype=np.int64) - 1 for q in (pi, sigma, tau))
    exact = x.exact
    zero = Fraction(0) if exact else 0.0
    acc = np.full((n, n, n), zero, dtype=object if exact else float)
    idx = range(n)
    for rho in itertools.permutations(range(n)):
        R = np.array(rho)
        pr, sr, tr = P[R], S[R], T[R]
        a = x.entries[np.ix_(pr, sr, tr)]
        factor = np.empty((n, n, n), dtype=object)
        for k in idx:
            pinned_k = rho[k] < pinned
            sgn = _pinned_sign(x.entries, pr, sr, tr, k) if pinned_k else 1
            for i in idx:
                for j in idx:
                    factor[i, j, k] = _local_factor(i == k, j == k, pinned_k, sgn)
        if not exact:
            factor = factor.astype(float)
        acc = acc + a * factor
    count = math.factorial(n)
    return Tensor3(acc / (Fraction(count) if exact else float(count)), x.arithmetic)


def symmetrize_monte_carlo(x: Tensor3, pi, sigma, tau, pinned: int, seed: int = 0, samples: int = 100_000,
                           chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and standard error per entry of :func:`symmetrize`."""
    n = x.n
    rng = np.random.default_rng(seed)
    arr = x.to_float()
    P, S, T = (np.asarray(q, dtype=np.int64) - 1 for q in (pi, sigma, tau))
    total = np.zeros((n, n, n))
    total_sq = np.zeros((n, n, n))
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        R = np.argsort(rng.random((b, n)), axis=1)
        e, d, h = (rng.choice([-1.0, 1.0], size=(b, n)) for _ in range(3))
        pr, sr, tr = P[R], S[R], T[R]
        a = arr[pr[:, :, None, None], sr[:, None, :, None], tr[:, None, None, :]]
        diag = arr[pr, sr, tr]
        sgn = np.where(diag < 0, -1.0, 1.0)
        s = np.where(R < pinned, e * d * sgn, h)
        vals = a * e[:, :, None, None] * d[:, None, :, None] * s[:, None, None, :]
        total += vals.sum(axis=0)
        total_sq += (vals * vals).sum(axis=0)
        done += b
    mean = total / samples
    var = np.maximum(total_sq / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    return mean, np.sqrt(var / samples)


# -- Rademacher sums ---------------------------------------------------------------

def expected_abs_sum(m: int) -> Fraction:
    """E|delta_1 + ... + delta_m| from binomial weights."""
    return Fraction(sum(math.comb(m, k) * abs(m - 2 * k) for k in range(m + 1)), 1 << m)


def rademacher_sum(w: WitnessFamily, eps) -> Tensor3:
    eps = [int(e) for e in eps]
    if len(eps) != w.m or any(e not in (-1, 1) for e in eps):
        raise DimensionError(f"sign vector of length {w.m} expected", module=_MOD)
    total = w.tensors[0] * eps[0]
    for e, T in zip(eps[1:], w.tensors[1:]):
        total = total + T * e
    return total


def rad_sum_upper(w: WitnessFamily, eps, spec: SpaceSpec, params: BoundParams = BoundParams(),
                  omega_value=None) -> NormBound:
    """min of a decomposition bound on sum eps_t x_t and E|sum delta| * Omega.

    The averaging bound holds because sum_t eps_t x_t = E_delta[(sum_t eps_t
    delta_t) C'(delta)^(x3)] and every C'(delta)^(x3) has norm at most Omega.
    """
    spec = spec.with_n(w.N)
    om = omega(spec) if omega_value is None else omega_value
    avg_exact = sympy.Rational(*_pair_of(expected_abs_sum(w.m))) * sympy.sympify(om)
    averaging = NormBound(round_up(avg_exact), "upper", "averaging", avg_exact,
                          {"E_abs_sum": frac_str(expected_abs_sum(w.m)), "omega": expr_str(om)})
    cands = upper_candidates(rademacher_sum(w, eps), spec, params) + [averaging]
    best = min(enumerate(cands), key=lambda ic: (ic[1].value, ic[0]))[1]
    best.certificate = dict(best.certificate, candidates={c.method: c.value for c in cands})
    return best


def _pair_of(x: Fraction) -> tuple[int, int]:
    return x.numerator, x.denominator


# -- certificates -----------------------------------------------------------------

@dataclass
class CotypeCertificate:
    q: Fraction
    spec: SpaceSpec
    per_witness: list       # NormBound per bit
    per_sign: list          # (eps, NormBound) over all 2^m patterns
    value: float
    inputs_hash: str
    alpha_min: Fraction
    theta: Fraction
    J_min: int
    m: int
    n: int
    runtime: float = 0.0
    membership: SMembershipReport | None = None

    def to_json(self) -> dict:
        return {
            "q": frac_str(self.q),
            "spec": self.spec.to_json(),
            "m": self.m,
            "n": self.n,
            "J_min": self.J_min,
            "alpha_min": frac_str(self.alpha_min),
            "theta_over_8": frac_str(self.theta / 8),
            "per_witness": [
                {"L": expr_str(b.exact) if b.exact is not None else None, "L_float": b.value, "method": b.method}
                for b in self.per_witness
            ],
            "per_sign": [
                {"eps": list(eps), "U": b.value, "method": b.method} for eps, b in self.per_sign
            ],
            "value": self.value,
            "inputs_hash": self.inputs_hash,
            "runtime": self.runtime,
        }


def _lower_for_witness(x: Tensor3, triples, spec: SpaceSpec, methods, params: BoundParams) -> NormBound:
    cands = [s_lower_bound(x, triples, 1, spec)]
    for method in methods:
        cands.append(dual_lower(x, spec, method, params))
    best = max(enumerate(cands), key=lambda ic: (ic[1].value, -ic[0]))[1]
    return best


def certify(sc: SmoothedCode, spec: SpaceSpec, q, theta, params: BoundParams = BoundParams(),
            lower_methods: Sequence[str] = (), override: bool = False) -> CotypeCertificate:
    """Sound lower bound on the cotype-q constant of l_p1 (x) l_p2 (x) l_p3 in dimension 3n."""
    start = time.perf_counter()
    q = to_fraction(q)
    theta = to_fraction(theta)
    if q < 2:
        raise PreconditionError(f"q={q} < 2", module=_MOD)
    spec = spec.with_n(sc.three_n)
    spec.require_assumption(override)
    w = build_hat(sc)
    report = s_membership(w, sc, theta / 8)
    if not report.consistent:
        raise InvariantError("margin_consistency", "witness margins differ from 2P - 1", module=_MOD)
    if report.alpha_min <= 0:
        raise MembershipError(f"alpha_min = {report.alpha_min} is not positive", module=_MOD)
    per_witness = [
        _lower_for_witness(x, signed_triples(sc, t), spec, lower_methods, params)
        for t, x in enumerate(w.tensors, start=1)
    ]
    om = omega(spec)
    per_sign = []
    mirrored: dict = {}
    for eps in sign_vectors(sc.m):
        key = tuple(int(e) for e in eps)
        neg = tuple(-e for e in key)
        bound = mirrored.get(neg) or rad_sum_upper(w, key, spec, params, om)
        mirrored[key] = bound
        per_sign.append((key, bound))
    value = _certificate_value(per_witness, [b for _, b in per_sign], q)
    inputs = {"smoothed": sc.to_json(), "spec": spec.to_json(), "q": frac_str(q), "theta": frac_str(theta)}
    return CotypeCertificate(
        q, spec, per_witness, per_sign, value, canonical_hash(inputs), report.alpha_min, theta,
        sc.J_min, sc.m, sc.n, time.perf_counter() - start, report,
    )


def _certificate_value(lowers: Sequence[NormBound], uppers: Sequence[NormBound], q: Fraction) -> float:
    """(sum L^q)^(1/q) rounded down over sqrt(mean U^2) rounded up."""
    sq = sympy.Rational(q.numerator, q.denominator)
    if all(b.exact is not None for b in lowers):
        num = round_down(sympy.Add(*[sympy.sympify(b.exact) ** sq for b in lowers]) ** (1 / sq))
    else:
        num = round_down(math.fsum(b.value ** float(q) for b in lowers) ** (1 / float(q)), 4 * len(lowers) + 16)
    mean_sq = sum((Fraction(b.value) ** 2 for b in uppers), Fraction(0)) / len(uppers)
    den = round_up(sympy.sqrt(sympy.Rational(mean_sq.numerator, mean_sq.denominator)))
    if den == 0:
        raise InvariantError("nonzero_denominator", "all Rademacher sums bounded by 0", module=_MOD)
    return round_down(num / den, 1)


def cotype_ratio(vectors: Sequence, q, norm_oracle: Callable) -> float:
    """(sum ‖x_i‖^q)^(1/q) / sqrt(E‖sum eps_i x_i‖^2) with oracle norms, exhaustively over signs."""
    m = len(vectors)
    if m == 0:
        raise PreconditionError("empty vector family", module=_MOD)
    if m > MAX_RATIO_M:
        raise BudgetExceeded(1 << m, 1 << MAX_RATIO_M, module=_MOD)
    q = float(to_fraction(q))
    norms = [float(norm_oracle(v)) for v in vectors]
    num = math.fsum(x ** q for x in norms) ** (1 / q)
    sq = []
    for eps in sign_vectors(m)[: 1 << (m - 1)]:
        total = _combine(vectors, eps)
        sq.append(float(norm_oracle(total)) ** 2)
    den = math.sqrt(math.fsum(sq) / len(sq))
    if den == 0:
        raise PreconditionError("all Rademacher sums vanish", module=_MOD)
    return num / den


def _combine(vectors: Sequence, eps) -> object:
    if isinstance(vectors[0], Tensor3):
        total = vectors[0] * int(eps[0])
        for e, v in zip(eps[1:], vectors[1:]):
            total = total + v * int(e)
        return total
    arr = [np.asarray(v) for v in vectors]
    if any(a.dtype == object for a in arr):
        return sum((a * int(e) for a, e in zip(arr, eps)), np.zeros_like(arr[0]))
    return np.tensordot(np.asarray(eps, dtype=float), np.stack([as_float_array(a) for a in arr]), axes=1)


def chain_check(w: WitnessFamily, sc: SmoothedCode, spec: SpaceSpec, params: BoundParams = BoundParams()) -> list[tuple]:
    """Per witness: (symmetrization lower bound, projective upper bound); the first must not exceed the second."""
    spec = spec.with_n(w.N)
    out = []
    for t, x in enumerate(w.tensors, start=1):
        low = s_lower_bound(x, signed_triples(sc, t), 1, spec)
        up = projective_upper(x, spec, params)
        out.append((low, up))
    return out


__all__ = [
    "WitnessFamily", "build_hat", "SMembershipReport", "s_membership", "signed_triples", "s_lower_bound",
    "symmetrize", "symmetrization_closed_form", "symmetrize_mean", "symmetrize_monte_carlo",
    "expected_abs_sum", "rademacher_sum", "rad_sum_upper", "CotypeCertificate", "certify", "cotype_ratio",
    "chain_check",
]
