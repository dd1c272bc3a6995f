import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from conftest import random_fractions
from cotypelab._numeric import INF
from cotypelab.errors import DimensionError, InvariantError, PreconditionError
from cotypelab.tensors import (
    BoundParams,
    SpaceSpec,
    Tensor3,
    apply_symmetry,
    best_lower,
    diagonal_norm,
    dual_lower,
    embed,
    inverse_symmetry,
    lp_norm_oracle,
    omega,
    omega_oracle,
    projective_upper,
    rank_one_norm,
    sandwich,
    upper_candidates,
)

FAST = BoundParams(strategies=("rank_one", "diagonal", "slicing", "peeling"), starts=8, max_iter=100)


def lp(v, p):
    v = [abs(float(x)) for x in v]
    return max(v) if p == INF else sum(x ** float(p) for x in v) ** (1 / float(p))


def brute_slicing(arr, ps):
    """Best of the three fiber sums, each written out with loops."""
    n = arr.shape[0]
    sums = []
    for leg in range(3):
        total = 0.0
        for u in range(n):
            for v in range(n):
                idx = [u, v]
                idx.insert(leg, slice(None))
                total += lp(arr[tuple(idx)], ps[leg])
        sums.append(total)
    return min(sums)


def test_space_spec():
    spec = SpaceSpec(3, 3, 3, 4)
    assert spec.r_inv == 1 and spec.r == 1 and spec.satisfies_assumption
    assert SpaceSpec("inf", "inf", "inf", 2).r == INF
    assert SpaceSpec(6, 6, 6, 2).r == 2
    with pytest.raises(PreconditionError):
        SpaceSpec(2, 2, 2, 2).require_assumption()
    SpaceSpec(2, 2, 2, 2).require_assumption(override=True)
    with pytest.raises(PreconditionError):
        SpaceSpec(1, 2, 2, 2)
    assert SpaceSpec.from_json(SpaceSpec(3, "inf", Fraction(5, 2), 3).to_json()) == SpaceSpec(3, INF, Fraction(5, 2), 3)


def test_rank_one_norm_examples():
    spec = SpaceSpec(3, 3, 3, 8)
    e1 = [1] + [0] * 7
    assert rank_one_norm(e1, e1, e1, spec) == 1
    ones = [1] * 8
    assert sympy.simplify(rank_one_norm(ones, ones, ones, spec) - 8) == 0
    eps = [1, -1, 1, 1, -1, -1, 1, -1]
    assert sympy.simplify(rank_one_norm(eps, eps, eps, spec) - 8) == 0
    spec6 = SpaceSpec(6, 6, 6, 4)
    assert sympy.simplify(rank_one_norm([1, -1, 1, 1], [1] * 4, [-1] * 4, spec6) - 2) == 0


def test_closed_forms():
    assert diagonal_norm(1, SpaceSpec(3, 3, 3, 1)) == 1
    assert diagonal_norm(8, SpaceSpec(3, 3, 3, 8)) == 8
    assert diagonal_norm(4, SpaceSpec(6, 6, 6, 4)) == 2
    with pytest.raises(PreconditionError):
        diagonal_norm(4, SpaceSpec(2, 2, 2, 4))
    assert omega(SpaceSpec(3, 3, 3, 1)) == 1
    assert omega(SpaceSpec(3, 3, 3, 24)) == 24
    assert omega(SpaceSpec(6, 6, 6, 4)) == 2


def test_omega_oracle_examples():
    spec = SpaceSpec(6, 6, 6, 4)
    seen = []

    def lp_oracle(T):
        val = projective_upper(T, spec, FAST).exact
        seen.append(val)
        return val

    res = omega_oracle(lp_oracle, 4)
    assert res.side == "exact" and res.certificate["evaluated"] == 8
    assert all(sympy.simplify(v - 2) == 0 for v in seen)
    res = omega_oracle(lambda T: max(abs(x) for x in T.entries.reshape(-1)), 5)
    assert res.value == 1
    res = omega_oracle(lambda T: math.sqrt(sum(float(x) ** 2 for x in T.entries.reshape(-1))), 3)
    assert res.value == pytest.approx(3 ** 1.5, rel=1e-15) and res.certificate["evaluated"] == 4
    sampled = omega_oracle(lambda T: 1.0, 30, budget=16, seed=3)
    assert sampled.side == "lower" and sampled.certificate["regime"] == "sampled"


def test_apply_symmetry_examples():
    T = Tensor3.basis(2, 1, 1, 1)
    ident, ones = (1, 2), (1, 1)
    assert apply_symmetry(T, ident, ident, ident, ones, ones, ones).equals(T)
    assert apply_symmetry(T, (2, 1), ident, ident, ones, ones, ones).equals(Tensor3.basis(2, 2, 1, 1))
    with pytest.raises(DimensionError):
        apply_symmetry(T, (1, 1), ident, ident, ones, ones, ones)


def test_apply_symmetry_matches_index_chase(rng):
    n = 3
    T = Tensor3(random_fractions(rng, (n, n, n)))
    perms = list(itertools.permutations(range(1, n + 1)))
    for _ in range(10):
        pi, sigma, tau = (perms[int(rng.integers(len(perms)))] for _ in range(3))
        eps, delta, eta = (tuple(int(x) for x in rng.choice([-1, 1], n)) for _ in range(3))
        out = apply_symmetry(T, pi, sigma, tau, eps, delta, eta)
        for i, j, k in itertools.product(range(n), repeat=3):
            want = eps[i] * delta[j] * eta[k] * T.entries[pi[i] - 1, sigma[j] - 1, tau[k] - 1]
            assert out.entries[i, j, k] == want
        back = apply_symmetry(out, *inverse_symmetry(n, pi, sigma, tau, eps, delta, eta))
        assert back.equals(T)


def test_embed_examples(rng):
    T = Tensor3(random_fractions(rng, (2, 2, 2)))
    assert embed(T, 2).equals(T)
    E = embed(Tensor3.basis(1, 1, 1, 1), 5)
    assert E.n == 5 and E.entries[0, 0, 0] == 1 and sum(1 for x in E.entries.reshape(-1) if x) == 1
    with pytest.raises(PreconditionError):
        embed(T, 1)
    spec = SpaceSpec(3, 4, 5, 2)
    small = projective_upper(T, spec, FAST).value
    big = projective_upper(embed(T, 4), spec.with_n(4), FAST).value
    assert big <= small * (1 + 1e-12)


def test_entry_functional_example():
    T = Tensor3.basis(3, 1, 2, 3) * 5
    b = dual_lower(T, SpaceSpec(3, 3, 3, 3), "entry_functional")
    assert b.value == 5 and b.exact == 5 and b.verify(T)


def test_rank_one_ascent_hits_holder_maximum():
    spec = SpaceSpec(3, 3, 3, 8)
    T = Tensor3.rank_one([1] * 8, [1] * 8, [1] * 8)
    b = dual_lower(T, spec, "rank_one_ascent")
    assert sympy.simplify(b.exact - 8) == 0 and b.verify(T)
    assert b.value == pytest.approx(8, rel=1e-15) and b.value <= 8


def test_diagonal_functional_example():
    spec = SpaceSpec(3, 3, 3, 4)
    T = Tensor3.diagonal([1, 1, 1, 1])
    b = dual_lower(T, spec, "diagonal_functional")
    assert b.pairing == 4 and sympy.simplify(b.functional_norm - 1) == 0 and b.value == 4


@pytest.mark.parametrize("ps", [(3, 3, 3), (6, 6, 6), (4, 4, 4), (3, 4, 12)])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_diagonal_sandwich_is_exact(ps, n):
    spec = SpaceSpec(*ps, n)
    T = Tensor3.diagonal([1] * n)
    up = projective_upper(T, spec, FAST)
    lo = dual_lower(T, spec, "diagonal_functional")
    target = diagonal_norm(n, spec)
    assert exact_eq(up.exact, target) and exact_eq(lo.exact, target)
    assert up.verify(T)


def exact_eq(a, b):
    return sympy.simplify(sympy.sympify(a) - sympy.sympify(b)) == 0


def test_zero_tensor():
    spec = SpaceSpec(3, 3, 3, 3)
    Z = Tensor3.zeros(3)
    assert projective_upper(Z, spec).value == 0
    assert dual_lower(Z, spec, "entry_functional").value == 0


def test_rank_one_upper_is_product_of_norms(rng):
    spec = SpaceSpec(3, Fraction(5, 2), INF, 3)
    a, b, c = (random_fractions(rng, (3,)) for _ in range(3))
    a[0] = Fraction(1)
    T = Tensor3.rank_one(a, b, c)
    up = projective_upper(T, spec, FAST)
    assert exact_eq(up.exact, rank_one_norm(a, b, c, spec))
    assert up.verify(T)


def test_slicing_matches_brute_force(rng):
    for ps in [(3, 3, 3), (2, 5, INF), (INF, INF, INF)]:
        spec = SpaceSpec(*ps, 3)
        T = Tensor3(random_fractions(rng, (3, 3, 3)))
        b = [c for c in upper_candidates(T, spec, BoundParams(strategies=("slicing",))) if c.method == "slicing"][0]
        ref = brute_slicing(T.to_float(), ps)
        assert ref <= b.value <= ref * (1 + 1e-12)
        assert b.verify(T)


def test_upper_certificates_resum(rng):
    spec = SpaceSpec(3, 4, 5, 3)
    T = Tensor3(random_fractions(rng, (3, 3, 3)))
    for cand in upper_candidates(T, spec, FAST):
        assert cand.verify(T), cand.method


def test_lower_certificates_verify(rng):
    spec = SpaceSpec(3, 4, 5, 3)
    T = Tensor3(random_fractions(rng, (3, 3, 3)))
    up = projective_upper(T, spec, FAST).value
    for method in ("entry_functional", "diagonal_functional", "rank_one_ascent"):
        b = dual_lower(T, spec, method, FAST)
        assert b.verify(T), method
        assert b.value <= up


def test_float_mode(rng):
    spec = SpaceSpec(3, 3, 3, 3)
    arr = rng.normal(size=(3, 3, 3))
    T = Tensor3(arr, "float")
    sw = sandwich(T, spec, FAST)
    assert sw.lower.value <= sw.upper.value
    assert sw.upper.verify(T)
    D = Tensor3.diagonal(np.array([1.0, 1.0, 1.0]))
    assert D.is_diagonal()
    assert projective_upper(D, spec, FAST).value == pytest.approx(3, rel=1e-12)


def test_unknown_method():
    with pytest.raises(PreconditionError):
        dual_lower(Tensor3.zeros(2), SpaceSpec(3, 3, 3, 2), "nope")
    with pytest.raises(DimensionError):
        dual_lower(Tensor3.zeros(2), SpaceSpec(3, 3, 3, 3), "entry_functional")


def test_tensor_json_round_trip(rng):
    T = Tensor3(random_fractions(rng, (2, 2, 2)))
    obj = T.to_json()
    assert obj["order"] == "ijk-row-major-k-fastest"
    assert Tensor3.from_json(obj).equals(T)
    flat = list(range(8))
    assert Tensor3.from_flat(2, flat).entries[1, 0, 1] == 5
    with pytest.raises(DimensionError):
        Tensor3.from_flat(2, flat[:7])


def test_lp_sandwich_closes_for_max_norm(rng):
    spec = SpaceSpec(INF, INF, INF, 3)
    for _ in range(3):
        T = Tensor3(random_fractions(rng, (3, 3, 3)))
        sw = sandwich(T, spec)
        assert sw.closed(1e-6), sw.rel_gap
        assert sw.upper.verify(T) and sw.lower.verify(T)
    oracle = lp_norm_oracle(spec)
    assert oracle(Tensor3.basis(3, 1, 2, 3)) == 1


def test_lp_norm_oracle_refuses_open_gap():
    spec = SpaceSpec(3, 4, 5, 3)
    rng = np.random.default_rng(0)
    T = Tensor3(random_fractions(rng, (3, 3, 3)))
    with pytest.raises(InvariantError):
        lp_norm_oracle(spec, FAST, rel_tol=1e-15)(T)


def test_best_lower_picks_maximum(rng):
    spec = SpaceSpec(3, 3, 3, 2)
    T = Tensor3(random_fractions(rng, (2, 2, 2)))
    best = best_lower(T, spec, FAST)
    assert best.value == max(best.certificate["candidates"].values())
