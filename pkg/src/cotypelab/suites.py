"""Self-contained verification suites run by ``lab verify``.

Each check returns (name, passed, detail); suites are seeded and small enough
to run in a few seconds.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Callable

import numpy as np

from ._numeric import exact_equal
from .hypercube import CubeFunction, fourier_transform, parseval_sides, reconstruct
from .ldc import evaluate_quality, hadamard_code
from .tensors import (
    BoundParams,
    SpaceSpec,
    Tensor3,
    best_lower,
    diagonal_norm,
    dual_lower,
    projective_upper,
    rank_one_norm,
)

Check = tuple[str, bool, str]


def _random_fractions(rng: np.random.Generator, shape, bound: int = 5, den: int = 4) -> np.ndarray:
    nums = rng.integers(-bound, bound + 1, size=shape)
    dens = rng.integers(1, den + 1, size=shape)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        out[idx] = Fraction(int(nums[idx]), int(dens[idx]))
    return out


def identities(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    ok = True
    for _ in range(10):
        m, d = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        f = CubeFunction(m, d, _random_fractions(rng, (1 << m, d)))
        lhs, rhs = parseval_sides(f)
        ok &= reconstruct(fourier_transform(f)).equals(f) and bool(np.all(lhs == rhs))
    out.append(("fourier inversion and parseval", ok, "10 random rational functions"))
    ok = True
    for n in (2, 4):
        for p in (3, 4, 6):
            spec = SpaceSpec(p, p, p, n)
            T = Tensor3.diagonal([1] * n)
            up = projective_upper(T, spec, BoundParams(strategies=("diagonal", "slicing")))
            lo = dual_lower(T, spec, "diagonal_functional")
            ok &= exact_equal(up.exact, diagonal_norm(n, spec)) and exact_equal(lo.exact, diagonal_norm(n, spec))
    out.append(("diagonal norm closed form", ok, "n in {2,4}, p in {3,4,6}"))
    ok = True
    for _ in range(5):
        n = int(rng.integers(1, 5))
        a, b, c = (_random_fractions(rng, (n,)) for _ in range(3))
        spec = SpaceSpec(3, 3, "inf", n)
        T = Tensor3.rank_one(a, b, c)
        if not np.any(T.entries != 0):
            continue
        up = projective_upper(T, spec, BoundParams(strategies=("rank_one", "slicing")))
        lo = dual_lower(T, spec, "rank_one_ascent")
        target = rank_one_norm(a, b, c, spec)
        ok &= exact_equal(up.exact, target) and exact_equal(lo.exact, target)
    out.append(("rank-one norm closed form", ok, "5 random rational rank-one tensors"))
    code, dec = hadamard_code(3)
    q3 = evaluate_quality(code, dec, Fraction(1, 8))
    code2, dec2 = hadamard_code(2)
    q2 = evaluate_quality(code2, dec2, Fraction(1, 4))
    ok = q3.theta_margin == Fraction(1, 4) and q2.theta_margin == 0
    out.append(("hadamard decoding margins", ok, f"m=3: {q3.theta_margin}, m=2: {q2.theta_margin}"))
    return out


def symmetrization(seed: int = 0) -> list[Check]:
    from .cotype import symmetrization_closed_form, symmetrize_mean

    rng = np.random.default_rng(seed)
    ok = True
    cases = 0
    for _ in range(6):
        n = int(rng.integers(1, 4))
        T = Tensor3(_random_fractions(rng, (n, n, n)))
        perms = [tuple(int(v) + 1 for v in rng.permutation(n)) for _ in range(3)]
        for pinned in range(n + 1):
            mean = symmetrize_mean(T, *perms, pinned)
            ok &= mean.equals(symmetrization_closed_form(T, *perms, pinned))
            cases += 1
    return [("symmetrization mean equals closed form", ok, f"{cases} exact cases")]


def sandwich(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for _ in range(6):
        n = int(rng.integers(1, 4))
        p = [int(x) for x in rng.integers(3, 7, size=3)]
        spec = SpaceSpec(*p, n)
        T = Tensor3(_random_fractions(rng, (n, n, n)))
        params = BoundParams(seed=seed, max_peels=2)
        up = projective_upper(T, spec, params)
        lo = best_lower(T, spec, params)
        ok &= lo.value <= up.value and up.verify(T) and lo.verify(T)
        worst = max(worst, (up.value - lo.value) / max(up.value, 1e-300))
    return [("lower <= upper with verified certificates", ok, f"worst relative gap {worst:.3g}")]


SUITES: dict[str, Callable[[int], list[Check]]] = {
    "identities": identities,
    "symmetrization": symmetrization,
    "sandwich": sandwich,
}
