from typing import Dict, Tuple

import numpy as np
import pytest

from ncpick.errors import ShapeError, TruncationExceededError
from ncpick.linalg import operator_norm
from ncpick.points import random_tuple, scalar_point
from ncpick.schur import (
    SchurElement,
    apply,
    assemble_truncation,
    evaluate,
    from_colligation,
    lemma_defect,
    multiply,
    norm_lower_bound,
    random_colligation,
    random_schur,
)
from ncpick.words import enumerate_words


def scalar_element(N: int, K: int, coeffs: Dict[Tuple[int, ...], complex]) -> SchurElement:
    """Build a d = 1 element from a word -> number mapping."""
    return SchurElement.from_coefficients(N, 1, K, {w: [[c]] for w, c in coeffs.items()})


def test_assemble_truncation_blocks() -> None:
    t = scalar_element(2, 1, {(): 1.0, (1,): 2.0, (2,): 3.0})
    bm = assemble_truncation(t, 1)
    expected = np.array([[1, 2, 3], [0, 1, 0], [0, 0, 1]])
    assert np.allclose(bm.matrix, expected)
    assert bm.row_dims == (1, 2)
    assert np.allclose(assemble_truncation(t, 0).matrix, [[1]])
    with pytest.raises(TruncationExceededError):
        assemble_truncation(t, 2)


def test_assemble_truncation_block_recursion() -> None:
    t = random_schur(1, 2, 2, 3, 0.9)
    bm = assemble_truncation(t, 3)
    for i in range(1, 4):
        for j in range(i, 4):
            inner = bm.block(i - 1, j - 1)
            assert np.allclose(bm.block(i, j), np.kron(np.eye(2), inner))


def test_norm_lower_bound() -> None:
    half = SchurElement.constant(0.5 * np.eye(2), N=2, K=3)
    for m in range(4):
        assert norm_lower_bound(half, m) == pytest.approx(0.5)
    shift = scalar_element(1, 3, {(1,): 1.0})
    assert norm_lower_bound(shift, 0) == 0.0
    for m in range(1, 4):
        assert norm_lower_bound(shift, m) == pytest.approx(1.0)
    assert norm_lower_bound(SchurElement.zero(2, 2, 2), 2) == 0.0


def test_norm_lower_bound_monotone() -> None:
    t = random_schur(3, 2, 1, 4, 0.8)
    bounds = [norm_lower_bound(t, m) for m in range(5)]
    assert all(a <= b + 1e-12 for a, b in zip(bounds, bounds[1:]))


def test_evaluate() -> None:
    c = np.array([[1, 2j], [0, -1]])
    const = SchurElement.constant(c, N=2, K=2)
    rng = np.random.default_rng(2)
    assert np.allclose(evaluate(const, random_tuple(rng, 2, 2, 0.5)).value, c)
    t = scalar_element(2, 1, {(2,): 1.0})
    assert evaluate(t, scalar_point([0.3, 0.4])).value[0, 0] == pytest.approx(0.4)
    u = random_schur(4, 2, 2, 3, 0.9)
    zero = scalar_point([0.0, 0.0], d=2)
    assert np.allclose(evaluate(u, zero).value, u.coefficient(()))


def test_evaluate_is_linear() -> None:
    rng = np.random.default_rng(15)
    for seed in range(5):
        t = random_schur(20 + seed, 2, 2, 3, 0.9)
        s = random_schur(40 + seed, 2, 2, 3, 0.9)
        a, b = complex(rng.standard_normal(), rng.standard_normal()), 0.5 - 0.25j
        combo = SchurElement(2, 2, 3, tuple(a * x + b * y for x, y in zip(t.levels, s.levels)))
        z = random_tuple(rng, 2, 2, float(rng.uniform(0.1, 0.8)))
        expected = a * evaluate(t, z).value + b * evaluate(s, z).value
        assert operator_norm(evaluate(combo, z).value - expected) <= 1e-12


def test_evaluate_shape_mismatch() -> None:
    with pytest.raises(ShapeError):
        evaluate(SchurElement.zero(2, 1, 1), scalar_point([0.1, 0.1, 0.1]))


def test_multiply() -> None:
    t = random_schur(5, 2, 2, 3, 0.9)
    one = SchurElement.constant(np.eye(2), N=2, K=3)
    product = multiply(t, one)
    for a, b in zip(product.levels, t.levels):
        assert np.allclose(a, b)
    x = scalar_element(1, 2, {(1,): 1.0})
    xx = multiply(x, x)
    assert xx.coefficients().keys() == {(1, 1)}
    assert xx.coefficient((1, 1))[0, 0] == pytest.approx(1.0)


def test_multiply_at_zero_point() -> None:
    zero = scalar_point([0.0, 0.0], d=2)
    for seed in range(5):
        t = random_schur(60 + seed, 2, 2, 3, 0.9)
        s = random_schur(80 + seed, 2, 2, 3, 0.9)
        product = evaluate(multiply(t, s), zero).value
        assert np.allclose(product, evaluate(t, zero).value @ evaluate(s, zero).value)


def test_multiply_matches_assembled_product() -> None:
    t = random_schur(6, 2, 2, 4, 0.9)
    s = random_schur(7, 2, 2, 4, 0.9)
    product = multiply(t, s)
    for m in range(5):
        dense = assemble_truncation(t, m).matrix @ assemble_truncation(s, m).matrix
        assert np.allclose(dense[:2, :], assemble_truncation(product, m).matrix[:2, :])


def test_random_schur() -> None:
    t = random_schur(8, 3, 2, 3, 0.9)
    for m in range(4):
        assert norm_lower_bound(t, m) <= 0.9 + 1e-9
    again = random_schur(8, 3, 2, 3, 0.9)
    for a, b in zip(t.levels, again.levels):
        assert np.array_equal(a, b)
    other = random_schur(9, 3, 2, 3, 0.9)
    assert not np.allclose(t.levels[1], other.levels[1])
    with pytest.raises(ValueError):
        random_schur(1, 2, 2, 2, 1.0)


def test_colligation_is_nilpotent() -> None:
    rng = np.random.default_rng(10)
    col = random_colligation(rng, 2, 2, 3, 0.7)
    assert operator_norm(col.matrix()) == pytest.approx(0.7)
    longer = from_colligation(col.x, col.zb, col.y, col.w, 6)
    for j in range(4, 7):
        assert not np.any(longer.levels[j])


def test_apply_matches_assembled() -> None:
    t = random_schur(12, 2, 2, 2, 0.9)
    rng = np.random.default_rng(12)
    depth = 3
    x = [rng.standard_normal((2**j, 2, 1)) + 0j for j in range(depth + 1)]
    image = apply(t, x)
    dense = assemble_truncation(t.truncate(depth), depth).matrix
    flat = np.concatenate([lv.reshape(-1, 1) for lv in x])
    expected = dense @ flat
    got = np.concatenate([lv.reshape(-1, 1) for lv in image])
    assert np.allclose(got, expected)


@pytest.mark.parametrize("seed", range(10))
def test_lemma_defect(seed: int) -> None:
    rng = np.random.default_rng(500 + seed)
    t = random_schur(500 + seed, 2, 2, 3, 0.9)
    z = random_tuple(rng, 2, 2, float(rng.uniform(0.1, 0.8)))
    check = lemma_defect(t, z, 5)
    assert check.ok
    # rows that see every coefficient level are exact
    for i in range(3):
        assert check.defects[i] <= 1e-10


def test_coefficients_round_trip() -> None:
    t = random_schur(14, 2, 1, 2, 0.9)
    rebuilt = SchurElement.from_coefficients(2, 1, 2, t.coefficients())
    for w in [w for k in range(3) for w in enumerate_words(2, k)]:
        assert np.array_equal(rebuilt.coefficient(w), t.coefficient(w))
