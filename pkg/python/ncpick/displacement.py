"""Displacement equations A − Σ F_k A F_k* = G J G* and their wave operators.

G = [U V] and J = I_p ⊕ −I_q, so the right-hand side is U U* − V V*. Under
the decay hypothesis the unique solution is

    A = Σ_σ F_σ G J G* F_σ* = U∞* U∞ − V∞* V∞,

where the wave operators U∞, V∞ stack the rows (F_σ U)*, (F_σ V)* in word order.
"""

import dataclasses
import logging
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DecayNotEstablishedError, DepthExceededError, ShapeError
from .linalg import CMatrix, adjoint, as_cmatrix, displacement_map, operator_norm, vec_solve

__all__ = [
    "DisplacementSystem",
    "SeriesSolution",
    "DecayReport",
    "WaveOperators",
    "level_norms",
    "decay_check",
    "solve_series",
    "solve_exact",
    "wave_operators",
    "residual",
]

logger = logging.getLogger(__name__)

# number of trailing level ratios used to judge geometric decay
DECAY_WINDOW = 3


@dataclasses.dataclass(frozen=True)
class DisplacementSystem:
    """F_1..F_N (g×g), U (g×p) and V (g×q) of a displacement equation."""

    fs: npt.NDArray[np.complex128]
    u: CMatrix
    v: CMatrix

    def __post_init__(self) -> None:
        fs = np.asarray(self.fs, dtype=np.complex128)
        if fs.ndim != 3 or fs.shape[1] != fs.shape[2]:
            raise ShapeError(f"F must be a stack of square matrices, got shape {fs.shape}")
        g = fs.shape[1]
        u = as_cmatrix(self.u, "U") if np.size(self.u) else np.zeros((g, 0), np.complex128)
        v = as_cmatrix(self.v, "V") if np.size(self.v) else np.zeros((g, 0), np.complex128)
        for name, m in (("U", u), ("V", v)):
            if m.shape[0] != g:
                raise ShapeError(f"{name} has {m.shape[0]} rows, expected {g}")
        object.__setattr__(self, "fs", fs)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def build(
        cls, fs: Sequence[npt.ArrayLike], u: npt.ArrayLike, v: Optional[npt.ArrayLike] = None
    ) -> "DisplacementSystem":
        """Build a system from a list of F_k; V defaults to an empty block."""
        mats = np.stack([as_cmatrix(f, "F") for f in fs])
        umat = as_cmatrix(u, "U")
        vmat = np.zeros((umat.shape[0], 0), np.complex128) if v is None else v
        return cls(mats, umat, np.asarray(vmat, dtype=np.complex128))

    @property
    def N(self) -> int:
        return int(self.fs.shape[0])

    @property
    def g(self) -> int:
        return int(self.fs.shape[1])

    @property
    def signature(self) -> CMatrix:
        """Return J = I_p ⊕ −I_q."""
        p, q = self.u.shape[1], self.v.shape[1]
        return np.diag(np.concatenate([np.ones(p), -np.ones(q)])).astype(np.complex128)

    def rhs(self) -> CMatrix:
        """Return G J G* = U U* − V V*."""
        out: CMatrix = self.u @ adjoint(self.u) - self.v @ adjoint(self.v)
        return out

    def step(self, x: CMatrix) -> CMatrix:
        """Return Σ_k F_k x F_k*."""
        out: CMatrix = np.sum(self.fs @ x @ np.conj(np.swapaxes(self.fs, 1, 2)), axis=0)
        return out


class SeriesSolution(NamedTuple):
    a: CMatrix
    depth: int
    tail_estimate: float


class DecayReport(NamedTuple):
    norms: List[float]
    ratio: float
    verdict: bool


def _trailing_ratio(norms: Sequence[float]) -> float:
    window = list(norms[-(DECAY_WINDOW + 1) :])
    ratios = [b / a for a, b in zip(window, window[1:]) if a > 0]
    return max(ratios) if ratios else float("inf")


def level_norms(fs: npt.ArrayLike, depth: int) -> List[float]:
    """Return ‖S_m‖ for m = 0..depth, where S_0 = I and S_m = Σ_k F_k S_{m−1} F_k*."""
    mats = np.asarray(fs, dtype=np.complex128)
    g = mats.shape[1]
    stars = np.conj(np.swapaxes(mats, 1, 2))
    s = np.eye(g, dtype=np.complex128)
    norms = [operator_norm(s)]
    for _ in range(depth):
        s = np.sum(mats @ s @ stars, axis=0)
        norms.append(operator_norm(s))
    return norms


def decay_check(fs: npt.ArrayLike, depth: int) -> DecayReport:
    """Report ‖S_m‖ per level and whether geometric decay is observed.

    >>> decay_check([[[0.5]]], 4).verdict
    True
    >>> decay_check([[[1.0]]], 4).verdict
    False
    """
    norms = level_norms(fs, depth)
    if norms[-1] == 0.0:
        return DecayReport(norms, 0.0, True)
    ratio = _trailing_ratio(norms)
    return DecayReport(norms, ratio, ratio < 1.0)


def residual(system: DisplacementSystem, a: npt.ArrayLike) -> float:
    """Return ‖A − Σ F_k A F_k* − G J G*‖."""
    amat = as_cmatrix(a, "A")
    return operator_norm(displacement_map(list(system.fs), amat) - system.rhs())


def _symmetrize(a: CMatrix) -> CMatrix:
    out: CMatrix = (a + adjoint(a)) / 2
    return out


def solve_series(
    system: DisplacementSystem, tol: float = 1e-9, depth_cap: int = 200
) -> SeriesSolution:
    """Sum A = Σ_m A_m with A_0 = GJG* and A_m = Σ_k F_k A_{m−1} F_k*.

    Summation stops once the trailing level ratio r̄ of ‖S_m‖ is below one and
    the geometric tail ‖GJG*‖·‖S_m‖·r̄/(1 − r̄) is within tol·(1 + ‖GJG*‖).

    >>> sol = solve_series(DisplacementSystem.build([[[0.5]]], [[1.0]]))
    >>> round(sol.a[0, 0].real, 6)
    1.333333
    """
    m0 = system.rhs()
    scale = operator_norm(m0)
    bound = tol * (1.0 + scale)
    if system.g == 0 or scale == 0.0:
        return SeriesSolution(np.zeros_like(m0), 0, 0.0)
    a = m0.copy()
    level = m0
    s = np.eye(system.g, dtype=np.complex128)
    norms = [1.0]
    tail = float("inf")
    ratio = float("inf")
    depth = 0
    while True:
        if depth >= depth_cap:
            if not ratio < 1.0:
                raise DecayNotEstablishedError(
                    f"Level norms show no geometric decay after {depth_cap} levels "
                    f"(ratio {ratio:.4g}); try the exact solver",
                    {"norms": norms[-DECAY_WINDOW - 1 :], "depth_cap": depth_cap},
                )
            raise DepthExceededError(
                f"Series tail {tail:.3e} still above {bound:.3e} at depth cap {depth_cap}",
                {"tail": tail, "depth_cap": depth_cap},
            )
        depth += 1
        level = system.step(level)
        s = system.step(s)
        a += level
        norms.append(operator_norm(s))
        if norms[-1] == 0.0:
            tail = 0.0
            break
        if depth >= DECAY_WINDOW:
            ratio = _trailing_ratio(norms)
            if ratio < 1.0:
                tail = scale * norms[-1] * ratio / (1.0 - ratio)
                if tail <= bound:
                    break
    a = _symmetrize(a)
    res = residual(system, a)
    if res > bound:
        raise DepthExceededError(
            f"Series residual {res:.3e} exceeds {bound:.3e} at depth {depth}",
            {"residual": res, "depth": depth},
        )
    logger.debug(
        "solve_series: depth %d ratio %.4g tail %.3e residual %.3e", depth, ratio, tail, res
    )
    return SeriesSolution(a, depth, tail)


def solve_exact(
    system: DisplacementSystem, cond_cap: float = 1e12, dim_cap: int = 4000
) -> CMatrix:
    """Solve the displacement equation through the vectorized linear system."""
    a = vec_solve(list(system.fs), system.rhs(), cond_cap=cond_cap, dim_cap=dim_cap)
    return _symmetrize(a)


@dataclasses.dataclass(frozen=True)
class WaveOperators:
    """Levels of F_σ U and F_σ V in word order, up to a depth.

    u_levels[m] has shape (N**m, g, p); the row of U∞ for σ is its adjoint.
    """

    u_levels: List[npt.NDArray[np.complex128]]
    v_levels: List[npt.NDArray[np.complex128]]
    norms: List[float]

    @property
    def depth(self) -> int:
        return len(self.u_levels) - 1

    @staticmethod
    def _stack(levels: Sequence[npt.NDArray[np.complex128]]) -> CMatrix:
        rows = [np.conj(np.swapaxes(lv, 1, 2)).reshape(-1, lv.shape[1]) for lv in levels]
        out: CMatrix = np.vstack(rows)
        return out

    def u_infinity(self) -> CMatrix:
        """Return the truncated U∞, rows (F_σ U)* stacked in word order."""
        return self._stack(self.u_levels)

    def v_infinity(self) -> CMatrix:
        return self._stack(self.v_levels)

    def reconstruct(self) -> CMatrix:
        """Return U∞* U∞ − V∞* V∞ over the stored levels."""
        u, v = self.u_infinity(), self.v_infinity()
        out: CMatrix = adjoint(u) @ u - adjoint(v) @ v
        return out


def _column_levels(
    fs: npt.NDArray[np.complex128], x: CMatrix, depth: int
) -> List[npt.NDArray[np.complex128]]:
    levels = [x[None, :, :]]
    for _ in range(depth):
        prev = levels[-1]
        levels.append(np.concatenate([f @ prev for f in fs], axis=0))
    return levels


def wave_operators(system: DisplacementSystem, depth: int) -> WaveOperators:
    """Compute F_σ U and F_σ V for |σ| ≤ depth using F_{kτ} = F_k F_τ."""
    if depth < 0:
        raise ValueError(f"Depth must be nonnegative, got {depth}")
    return WaveOperators(
        _column_levels(system.fs, system.u, depth),
        _column_levels(system.fs, system.v, depth),
        level_norms(system.fs, depth),
    )
