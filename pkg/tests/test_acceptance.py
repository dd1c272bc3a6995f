"""Acceptance criteria, each timed against its budget.

Every criterion records one PASS/FAIL line; the lines are printed at the end
of the pytest run (see ``conftest.py``) or directly when this file is run as
a script.
"""
import itertools
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import sympy

from conftest import ACCEPTANCE, brute_signs, random_fractions
from cotypelab._numeric import INF
from cotypelab.cotype import (
    build_hat,
    certify,
    cotype_ratio,
    rademacher_sum,
    s_membership,
    symmetrize_mean,
    symmetrize_monte_carlo,
)
from cotypelab.hypercube import CubeFunction, fourier_transform, parseval_sides, reconstruct
from cotypelab.ldc import encode, evaluate_quality, hadamard_code, identity_code
from cotypelab.smoothing import smooth
from cotypelab.tensors import (
    BoundParams,
    SpaceSpec,
    Tensor3,
    dual_lower,
    lp_norm_oracle,
    projective_upper,
    sandwich,
)

THETA = Fraction(1, 16)
PHI = Fraction(1, 16)


@contextmanager
def criterion(number: int, title: str, budget: float):
    """Run a block, then record PASS only if it raised nothing and met its time budget."""
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        ACCEPTANCE.append(f"FAIL  {number}. {title} ({elapsed:.2f} s): {type(exc).__name__}: {exc}")
        raise
    elapsed = time.perf_counter() - start
    ok = elapsed < budget
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {number}. {title} ({elapsed:.2f} s, budget {budget:g} s)")
    assert ok, f"criterion {number} took {elapsed:.2f} s, budget {budget} s"


def same(a, b) -> bool:
    return sympy.simplify(sympy.sympify(a) - sympy.sympify(b)) == 0


def agree(a, b, digits: int = 60) -> bool:
    """Equal to `digits` significant digits; nested radicals defeat symbolic simplification."""
    x, y = sympy.N(sympy.sympify(a), digits), sympy.N(sympy.sympify(b), digits)
    return abs(x - y) <= sympy.Float(10, digits) ** (10 - digits) * max(1, abs(y))


def permutation(rng, n):
    return tuple(int(v) + 1 for v in rng.permutation(n))


def test_diagonal_norm_identity():
    with criterion(1, "diagonal-norm identity", 5):
        for n in (2, 4, 8):
            for ps in ((3, 3, 3), (6, 6, 6), (4, 4, 4)):
                spec = SpaceSpec(*ps, n)
                target = sympy.Integer(n) ** sum(sympy.Rational(1, p) for p in ps)
                T = Tensor3.diagonal([1] * n)
                up = projective_upper(T, spec)
                lo = dual_lower(T, spec, "diagonal_functional")
                assert same(up.exact, target) and same(lo.exact, target), (n, ps)
                assert up.verify(T) and lo.verify(T)
                f = float(target)
                for b in (up, lo):
                    assert abs(b.value - f) <= 1e-9 * f
                F = Tensor3.diagonal([1.0] * n, arithmetic="float")
                assert abs(projective_upper(F, spec).value - f) <= 1e-9 * f
                assert abs(dual_lower(F, spec, "diagonal_functional").value - f) <= 1e-9 * f


def test_rank_one_identity():
    rng = np.random.default_rng(2)
    exps = [Fraction(3, 2), Fraction(2), Fraction(3), Fraction(4), INF]
    with criterion(2, "rank-one identity", 5):
        for _ in range(20):
            n = int(rng.integers(1, 9))
            a, b, c = (random_fractions(rng, (n,)) for _ in range(3))
            for v in (a, b, c):
                v[int(rng.integers(n))] = Fraction(int(rng.integers(1, 6)), int(rng.integers(1, 4)))
            ps = [exps[int(i)] for i in rng.integers(0, len(exps), 3)]
            spec = SpaceSpec(*ps, n)
            # product of factor norms, each summed independently with sympy
            target = sympy.Integer(1)
            for v, p in zip((a, b, c), ps):
                vals = [sympy.Rational(x.numerator, x.denominator) for x in v]
                if p == INF:
                    target *= max(abs(x) for x in vals)
                else:
                    sp = sympy.Rational(p.numerator, p.denominator)
                    target *= sympy.Add(*[abs(x) ** sp for x in vals]) ** (1 / sp)
            T = Tensor3.rank_one(a, b, c)
            up = projective_upper(T, spec, BoundParams(strategies=("rank_one",)))
            lo = dual_lower(T, spec, "rank_one_ascent")
            assert up.exact is not None and lo.exact is not None
            assert same(up.exact, lo.exact), (n, ps)
            assert agree(up.exact, target), (n, ps)


def test_hadamard_quality():
    with criterion(3, "Hadamard quality", 1):
        code, dec = hadamard_code(3)
        rep = evaluate_quality(code, dec, Fraction(1, 8))
        assert rep.regime == "exhaustive" and rep.theta_margin == Fraction(1, 4)
        code, dec = hadamard_code(2)
        rep = evaluate_quality(code, dec, Fraction(1, 4))
        assert rep.regime == "exhaustive" and rep.theta_margin == 0


def recomputed_bias(code, t, S):
    """Agreement probability of the product over S with eps_t, by direct encoding."""
    hits = 0
    msgs = brute_signs(code.m)
    for eps in msgs:
        word = list(encode(code, eps)) + [1] * (2 * code.n)
        hits += math.prod(word[s - 1] for s in S) == eps[t - 1]
    return Fraction(hits, len(msgs))


def test_smoothing_pipeline():
    with criterion(4, "smoothing pipeline", 2):
        for m in (2, 3):
            code, dec = hadamard_code(m)
            n = code.n
            sc = smooth(code, dec, THETA, PHI)
            assert sc.three_n == 3 * n
            need = math.ceil(PHI * THETA * n / 9)
            for t, b in enumerate(sc.per_bit, start=1):
                assert b.J >= n / 2 and b.J >= need
                for perm in (b.pi, b.sigma, b.tau):
                    assert sorted(perm) == list(range(1, 3 * n + 1))
                triples = [(b.pi[j], b.sigma[j], b.tau[j]) for j in range(b.J)]
                flat = [s for tr in triples for s in tr]
                assert len(flat) == len(set(flat))
                for j, tr in enumerate(triples):
                    P = recomputed_bias(code, t, tr)
                    sign = 1 if P >= Fraction(1, 2) else -1
                    P = max(P, 1 - P)
                    assert P == 1 and P >= Fraction(1, 2) + THETA / 16
                    assert (b.signs[j], b.biases[j]) == (sign, P)


def test_s_membership():
    with criterion(5, "S-membership of the witnesses", 10):
        code, dec = hadamard_code(3)
        sc = smooth(code, dec, THETA, PHI)
        w = build_hat(sc)
        rep = s_membership(w, sc, THETA / 8)
        assert rep.passed and rep.consistent
        for t, row in enumerate(rep.margins, start=1):
            b = sc.per_bit[t - 1]
            assert len(row) == b.J
            for j, margin in enumerate(row):
                u, v, x = b.pi[j], b.sigma[j], b.tau[j]
                assert margin == b.signs[j] * w.tensors[t - 1].entries[u - 1, v - 1, x - 1]
                assert margin == 1 == 2 * b.biases[j] - 1


def closed_form(x: Tensor3, pi, sigma, tau, pinned):
    n = x.n
    d = sum((abs(x.entries[pi[i] - 1, sigma[i] - 1, tau[i] - 1]) for i in range(pinned)), Fraction(0)) / n
    out = np.full((n, n, n), Fraction(0), dtype=object)
    for j in range(n):
        out[j, j, j] = d
    return out


def test_symmetrization_identity():
    rng = np.random.default_rng(6)
    with criterion(6, "symmetrization identity", 30):
        for k in range(50):
            n = k % 4 + 1
            x = Tensor3(random_fractions(rng, (n, n, n)))
            pi, sigma, tau = (permutation(rng, n) for _ in range(3))
            for pinned in range(n + 1):
                got = symmetrize_mean(x, pi, sigma, tau, pinned).entries
                assert np.array_equal(got, closed_form(x, pi, sigma, tau, pinned)), (k, pinned)
        n = 5
        x = Tensor3(random_fractions(rng, (n, n, n)))
        pi, sigma, tau = (permutation(rng, n) for _ in range(3))
        for pinned in (0, 2, 5):
            mean, se = symmetrize_monte_carlo(x, pi, sigma, tau, pinned, seed=2, samples=100_000)
            target = closed_form(x, pi, sigma, tau, pinned).astype(float)
            assert np.all(np.abs(mean - target) <= 3 * se + 1e-12), pinned
            # the standard errors are calibrated: squared z-scores average close to 1
            z2 = ((mean - target) / se) ** 2
            assert 0.7 <= z2.mean() <= 1.3, (pinned, z2.mean())


def test_certificate_soundness():
    with criterion(7, "certificate soundness", 60):
        for m in (1, 2):
            code, dec = identity_code(m)
            sc = smooth(code, dec, THETA, 0)
            assert sc.three_n <= 6
            spec = SpaceSpec(INF, INF, INF, sc.three_n)
            w = build_hat(sc)
            # every tensor the certificate bounds must have a closed sandwich
            for T in list(w.tensors) + [rademacher_sum(w, eps) for eps in brute_signs(m)]:
                assert sandwich(T, spec).closed(1e-6)
            oracle = lp_norm_oracle(spec)
            for q in (2, 3):
                cert = certify(sc, spec, q, THETA)
                ratio = cotype_ratio(list(w.tensors), q, oracle)
                assert cert.value <= ratio + 1e-9, (m, q, cert.value, ratio)


def test_fourier_suite():
    rng = np.random.default_rng(8)
    with criterion(8, "Fourier inversion and Parseval", 5):
        for _ in range(100):
            m = int(rng.integers(1, 7))
            d = int(rng.integers(1, 9))
            f = CubeFunction(m, d, random_fractions(rng, (1 << m, d)))
            assert np.array_equal(reconstruct(fourier_transform(f)).values, f.values)
            lhs, rhs = parseval_sides(f)
            assert np.array_equal(lhs, rhs)


def test_property_suites():
    import test_properties as tp

    suites = (
        tp.test_sandwich,
        tp.test_homogeneity,
        tp.test_symmetry_group_action,
        tp.test_slicing_triangle_inequality,
        tp.test_quality_monotone_in_phi,
    )
    with criterion(9, "property suites, 1000 cases each", 60):
        for suite in suites:
            assert suite._hypothesis_internal_use_settings.max_examples == 1000
            suite()


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except BaseException:
                pass
    print("\n".join(ACCEPTANCE))
