import numpy as np
import pytest
import scipy.linalg

from ncpick.displacement import (
    DisplacementSystem,
    decay_check,
    level_norms,
    residual,
    solve_exact,
    solve_series,
    wave_operators,
)
from ncpick.errors import DecayNotEstablishedError, ShapeError
from ncpick.linalg import adjoint, is_psd, operator_norm
from ncpick.points import kernel_gram, random_tuple


def random_system(seed: int, rho: float = 0.6, g: int = 4) -> DisplacementSystem:
    """Return a system whose F_k = Z_k* satisfy ‖Σ F_k F_k*‖ = rho."""
    rng = np.random.default_rng(seed)
    p, q = 2, 1
    fs = random_tuple(rng, 2, g, rho).adjoints()
    u = rng.standard_normal((g, p)) + 1j * rng.standard_normal((g, p))
    v = 0.3 * (rng.standard_normal((g, q)) + 1j * rng.standard_normal((g, q)))
    return DisplacementSystem(fs, u, v)


def test_zero_tuple_gives_rhs() -> None:
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal((3, 2)), rng.standard_normal((3, 1))
    system = DisplacementSystem.build([np.zeros((3, 3))] * 2, u, v)
    expected = u @ u.T - v @ v.T
    assert np.allclose(solve_series(system).a, expected)
    assert np.allclose(solve_exact(system), expected)


def test_scalar_geometric_series() -> None:
    system = DisplacementSystem.build([[[0.5]]], [[1.0]])
    assert solve_series(system).a[0, 0] == pytest.approx(4 / 3, abs=1e-8)
    assert solve_exact(system)[0, 0] == pytest.approx(4 / 3, abs=1e-12)


def test_kernel_oracle() -> None:
    rng = np.random.default_rng(5)
    points = [random_tuple(rng, 2, 2, 0.5) for _ in range(3)]
    fs = [scipy.linalg.block_diag(*[z.adjoints()[k] for z in points]) for k in range(2)]
    u = np.vstack([np.eye(2)] * 3)
    system = DisplacementSystem.build(fs, u)
    a = solve_series(system).a
    assert operator_norm(a - kernel_gram(points)) <= 1e-8
    assert is_psd(a, 1e-9).verdict


def test_series_and_exact_agree() -> None:
    for seed in range(4):
        system = random_system(seed)
        series = solve_series(system)
        exact = solve_exact(system)
        scale = 1 + operator_norm(system.rhs())
        assert operator_norm(series.a - exact) <= 1e-8 * scale
        assert residual(system, exact) <= 1e-10 * (1 + operator_norm(system.rhs()))
        assert operator_norm(series.a - adjoint(series.a)) <= 1e-10 * (1 + operator_norm(series.a))


@pytest.mark.parametrize("seed", range(50))
def test_series_and_exact_agree_sweep(seed: int) -> None:
    rng = np.random.default_rng(400 + seed)
    N = int(rng.integers(1, 4))
    g = int(rng.integers(1, 13))
    p, q = (int(x) for x in rng.integers(1, 4, size=2))
    fs = random_tuple(rng, N, g, float(rng.uniform(0.0, 0.7))).adjoints()
    u = rng.standard_normal((g, p)) + 1j * rng.standard_normal((g, p))
    v = rng.standard_normal((g, q)) + 1j * rng.standard_normal((g, q))
    system = DisplacementSystem(fs, u, v)
    series = solve_series(system)
    exact = solve_exact(system)
    assert operator_norm(series.a - exact) <= 1e-8 * (1 + operator_norm(system.rhs()))
    assert residual(system, exact) <= 1e-9 * (1 + operator_norm(system.rhs()))


def test_series_reports_no_decay() -> None:
    system = DisplacementSystem.build([[[1.0]]], [[1.0]])
    with pytest.raises(DecayNotEstablishedError):
        solve_series(system, depth_cap=20)


def test_level_norms_and_decay() -> None:
    rng = np.random.default_rng(6)
    z = random_tuple(rng, 2, 3, 0.5)
    norms = level_norms(z.adjoints(), 6)
    assert all(norms[m] <= 0.5**m + 1e-12 for m in range(7))
    assert decay_check(z.adjoints(), 6).verdict
    unitary = decay_check([[[1j]]], 5)
    assert unitary.norms == pytest.approx([1.0] * 6)
    assert not unitary.verdict
    zero = decay_check([np.zeros((2, 2))], 3)
    assert zero.norms[1] == 0.0 and zero.verdict


def test_wave_operators() -> None:
    system = random_system(7, rho=0.1)
    w0 = wave_operators(system, 0)
    assert np.allclose(w0.u_infinity(), adjoint(system.u))
    assert np.allclose(w0.v_infinity(), adjoint(system.v))
    deep = wave_operators(system, 10)
    assert operator_norm(deep.reconstruct() - solve_exact(system)) <= 1e-8


def test_wave_operators_nilpotent() -> None:
    nil = np.array([[0, 0], [1, 0]], dtype=complex)
    system = DisplacementSystem.build([nil], np.eye(2))
    wave = wave_operators(system, 4)
    assert not np.any(wave.u_levels[2]) and not np.any(wave.u_levels[3])
    assert np.allclose(wave.reconstruct(), solve_exact(system))


def test_shape_validation() -> None:
    with pytest.raises(ShapeError):
        DisplacementSystem.build([np.eye(2)], np.ones((3, 1)))
