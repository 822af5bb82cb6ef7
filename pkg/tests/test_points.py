import concurrent.futures
import math

import numpy as np
import pytest

from ncpick.errors import DepthExceededError, NotInBallError, ShapeError
from ncpick.linalg import adjoint, is_psd, operator_norm
from ncpick.points import (
    OperatorTuple,
    WordProductCache,
    ball_margin,
    check_in_ball,
    gram_counterexample_search,
    inner,
    kernel_gram,
    certified_depth,
    random_tuple,
    resolvent_gram,
    scalar_point,
    szego_kernel,
    word_product,
    word_product_levels,
)
from ncpick.words import enumerate_words


def test_ball_margin() -> None:
    assert ball_margin(OperatorTuple(np.zeros((2, 2, 2)))) == 0.0
    assert ball_margin(OperatorTuple.from_components([[[0.5]]])) == pytest.approx(0.25)
    half = 0.5 * np.eye(2)
    assert ball_margin(OperatorTuple.from_components([half, half])) == pytest.approx(0.5)


def test_check_in_ball() -> None:
    with pytest.raises(NotInBallError):
        check_in_ball(scalar_point([1.0]))
    with pytest.raises(NotInBallError):
        check_in_ball(scalar_point([0.8, 0.8]))


def test_operator_tuple_validation() -> None:
    with pytest.raises(ShapeError):
        OperatorTuple(np.zeros((2, 2, 3)))
    with pytest.raises(ShapeError):
        OperatorTuple.from_components([np.eye(2), np.eye(3)])
    with pytest.raises(ValueError):
        OperatorTuple.from_components([[[np.nan]]])
    z = scalar_point([0.1, 0.2], d=2)
    with pytest.raises(ValueError):
        z.mats[0, 0, 0] = 1.0


def test_inner() -> None:
    z = scalar_point([0.3, 0.4j])
    w = scalar_point([0.2, 0.1])
    assert inner(z, w)[0, 0] == pytest.approx(0.3 * 0.2 + (-0.4j) * 0.1)


def test_word_product() -> None:
    z = scalar_point([0.3, 0.4j], d=2)
    assert np.array_equal(word_product(z, ()), np.eye(2))
    scalar = scalar_point([0.3, 0.4j])
    assert word_product(scalar, (1, 2))[0, 0] == pytest.approx(-0.12j)


def test_word_product_is_not_adjoint_of_product() -> None:
    rng = np.random.default_rng(3)
    z = random_tuple(rng, 2, 3, 0.5)
    starred = word_product(z, (2, 1))
    assert np.allclose(starred, adjoint(z.component(2)) @ adjoint(z.component(1)))
    assert not np.allclose(starred, adjoint(z.component(2) @ z.component(1)))


def test_word_product_levels_order() -> None:
    rng = np.random.default_rng(4)
    z = random_tuple(rng, 2, 2, 0.6)
    levels = word_product_levels(z, 3)
    cache = WordProductCache(z, max_level=3)
    for k in range(4):
        for offset, w in enumerate(enumerate_words(2, k)):
            assert np.allclose(levels[k][offset], word_product(z, w))
            assert np.allclose(cache[w], word_product(z, w))
    with pytest.raises(ShapeError):
        cache.level(4)
    assert not levels[2].flags.writeable


def test_word_product_levels_share_the_point_cache() -> None:
    z = scalar_point([0.3, 0.4j], d=2)
    first = word_product_levels(z, 2)
    assert z.word_cache.filled == 2
    again = word_product_levels(z, 4)
    assert z.word_cache.filled == 4
    assert all(a is b for a, b in zip(first, again))


def test_word_product_cache_concurrent_fill() -> None:
    rng = np.random.default_rng(21)
    z = random_tuple(rng, 2, 2, 0.5)
    for _ in range(20):
        cache = WordProductCache(z)
        with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(cache.level, [6, 5, 6, 3, 6, 4, 6, 2]))
        assert cache.filled == 6
        assert results[0] is results[2] is cache.level(6)
        for m in range(7):
            assert cache.level(m).shape == (2**m, 2, 2)
        for offset, w in enumerate(enumerate_words(2, 6)):
            assert np.allclose(results[0][offset], word_product(z, w))


def test_szego_kernel_closed_forms() -> None:
    zero = OperatorTuple(np.zeros((2, 2, 2)))
    assert np.allclose(szego_kernel(zero, zero).kernel, np.eye(2))
    z, w = scalar_point([0.3, 0.4]), scalar_point([0.2, 0.1])
    assert szego_kernel(z, w).kernel[0, 0] == pytest.approx(1 / 0.9, abs=1e-9)
    half = scalar_point([0.5])
    result = szego_kernel(half, half)
    assert result.kernel[0, 0] == pytest.approx(4 / 3, abs=1e-9)
    assert result.tail_bound <= 1e-9


def test_szego_kernel_depth_cap() -> None:
    z = scalar_point([0.999])
    with pytest.raises(DepthExceededError):
        szego_kernel(z, z, tol=1e-12, depth_cap=10)


def test_certified_depth_is_smallest() -> None:
    for r in (0.1, 0.5, 0.81, 0.9, 0.99):
        for tol in (1e-6, 1e-8, 1e-12):
            depth = certified_depth(r, 1.0, tol, 100000)
            assert r ** (depth + 1) / (1 - r) <= tol
            assert depth == 0 or r**depth / (1 - r) > tol
    assert certified_depth(0.0, 1.0, 1e-9, 0) == 0
    assert certified_depth(0.5, 0.0, 1e-9, 0) == 0
    with pytest.raises(DepthExceededError):
        certified_depth(0.99, 1.0, 1e-12, 100)


def test_szego_kernel_at_margin_point_eight() -> None:
    z = scalar_point([math.sqrt(0.8)])
    result = szego_kernel(z, z, tol=1e-8)
    assert result.kernel[0, 0] == pytest.approx(5.0, abs=1e-8 + 1e-12)
    assert result.tail_bound <= 1e-8
    rng = np.random.default_rng(12)
    w = random_tuple(rng, 2, 2, 0.8)
    assert szego_kernel(w, w, tol=1e-8).tail_bound <= 1e-8


def test_szego_kernel_hermitian_symmetry() -> None:
    rng = np.random.default_rng(13)
    for _ in range(10):
        z = random_tuple(rng, 2, 2, float(rng.uniform(0.1, 0.8)))
        w = random_tuple(rng, 2, 2, float(rng.uniform(0.1, 0.8)))
        kzw = szego_kernel(z, w, tol=1e-10).kernel
        kwz = szego_kernel(w, z, tol=1e-10).kernel
        assert operator_norm(kzw - adjoint(kwz)) <= 1e-9


def test_szego_kernel_scalar_sweep() -> None:
    rng = np.random.default_rng(14)
    for trial in range(100):
        N = 1 + trial % 3
        z = random_tuple(rng, N, 1, float(rng.uniform(0.0, 0.8)))
        w = random_tuple(rng, N, 1, float(rng.uniform(0.0, 0.8)))
        expected = 1 / (1 - np.vdot(z.mats.ravel(), w.mats.ravel()))
        assert abs(szego_kernel(z, w, tol=1e-8).kernel[0, 0] - expected) <= 1e-8 + 1e-12


def test_szego_kernel_scalar_diagonal() -> None:
    z, w = scalar_point([0.3, -0.2j], d=2), scalar_point([0.1j, 0.4], d=2)
    expected = 1 / (1 - (0.3 * 0.1j + 0.2j * 0.4))
    assert np.allclose(szego_kernel(z, w).kernel, expected * np.eye(2), atol=1e-9)


def test_kernel_gram_is_positive() -> None:
    rng = np.random.default_rng(8)
    points = [random_tuple(rng, 2, 2, 0.6) for _ in range(3)]
    gram = kernel_gram(points)
    assert operator_norm(gram - adjoint(gram)) <= 1e-9
    assert is_psd(gram, 1e-9).verdict


def test_random_tuple_margin() -> None:
    rng = np.random.default_rng(1)
    assert ball_margin(random_tuple(rng, 3, 2, 0.7)) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        random_tuple(rng, 2, 2, 1.0)


def test_resolvent_gram_differs_from_kernel() -> None:
    scalars = [scalar_point([0.3, -0.2j]), scalar_point([0.1j, 0.5])]
    assert operator_norm(resolvent_gram(scalars) - kernel_gram(scalars)) <= 1e-8
    rng = np.random.default_rng(9)
    points = [random_tuple(rng, 2, 2, 0.6) for _ in range(2)]
    assert operator_norm(resolvent_gram(points) - kernel_gram(points)) > 1e-3
    assert resolvent_gram([]).shape == (0, 0)


def test_gram_counterexample_search() -> None:
    # for d = 1 the formula is the kernel itself, so it stays positive
    scalar = gram_counterexample_search(5, d=1, trials=50)
    assert not scalar.found_negative and scalar.min_eig > 0
    report = gram_counterexample_search(5, d=2, trials=200)
    assert report.trials == 200
    assert report.found_negative == (report.min_eig < 0)
    assert report == gram_counterexample_search(5, d=2, trials=200)
