"""Truncated Schur-class elements: noncommutative power series with matrix coefficients.

An element is stored by its row-0 coefficients c_σ, |σ| ≤ K, one (N**j, d, d)
array per level j in word order. The upper-triangular operator it represents
has blocks T_{0j} = [c_σ]_{|σ|=j} and T_{ij} = T_{i−1,j−1}^{⊕N}, so on
word-indexed vectors it acts as

    (T x)_α = Σ_β c_β x_{αβ}.
"""

import dataclasses
import logging
import math
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .errors import ShapeError, TruncationExceededError
from .linalg import BlockMatrix, CMatrix, as_cmatrix, operator_norm
from .points import OperatorTuple, check_in_ball, word_product_levels
from .words import LevelIndex, Word, index_word, validate_word, word_index

__all__ = [
    "SchurElement",
    "Colligation",
    "EvaluationResult",
    "LemmaCheck",
    "Levels",
    "assemble_truncation",
    "norm_lower_bound",
    "evaluate",
    "multiply",
    "apply",
    "lemma_defect",
    "from_colligation",
    "random_colligation",
    "random_schur",
]

logger = logging.getLogger(__name__)

# word-indexed stacks: entry m has shape (N**m, rows, cols)
Levels = List[npt.NDArray[np.complex128]]


@dataclasses.dataclass(frozen=True)
class SchurElement:
    """Row-0 coefficients {c_σ}_{|σ|≤K} of an upper-triangular Toeplitz-structured operator."""

    N: int
    d: int
    K: int
    levels: Tuple[npt.NDArray[np.complex128], ...]

    def __post_init__(self) -> None:
        if self.N < 1 or self.d < 1 or self.K < 0:
            raise ShapeError(f"Invalid element dimensions N={self.N} d={self.d} K={self.K}")
        if len(self.levels) != self.K + 1:
            raise ShapeError(f"Expected {self.K + 1} coefficient levels, got {len(self.levels)}")
        frozen = []
        for j, level in enumerate(self.levels):
            arr = np.array(level, dtype=np.complex128)
            if arr.shape != (self.N**j, self.d, self.d):
                raise ShapeError(
                    f"Level {j} has shape {arr.shape}, expected {(self.N**j, self.d, self.d)}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"Level {j} has non-finite coefficients")
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "levels", tuple(frozen))

    @classmethod
    def zero(cls, N: int, d: int, K: int) -> "SchurElement":
        return cls(N, d, K, tuple(np.zeros((N**j, d, d)) for j in range(K + 1)))

    @classmethod
    def constant(cls, c: npt.ArrayLike, N: int, K: int = 0) -> "SchurElement":
        """The element with c_∅ = c and every other coefficient zero."""
        mat = as_cmatrix(c, "constant")
        d = mat.shape[0]
        levels = [mat[None, :, :]] + [np.zeros((N**j, d, d)) for j in range(1, K + 1)]
        return cls(N, d, K, tuple(levels))

    @classmethod
    def from_coefficients(
        cls, N: int, d: int, K: int, coeffs: Mapping[Word, npt.ArrayLike]
    ) -> "SchurElement":
        """Build an element from a word → matrix mapping; absent words are zero."""
        levels = [np.zeros((N**j, d, d), dtype=np.complex128) for j in range(K + 1)]
        for word, matrix in coeffs.items():
            level, offset = word_index(validate_word(word, N), N)
            if level > K:
                raise TruncationExceededError(
                    f"Coefficient word {list(word)} is longer than K={K}", {"K": K}
                )
            mat = as_cmatrix(matrix, "coefficient")
            if mat.shape != (d, d):
                raise ShapeError(f"Coefficient of {list(word)} has shape {mat.shape}")
            levels[level][offset] = mat
        return cls(N, d, K, tuple(levels))

    def coefficient(self, word: Sequence[int]) -> CMatrix:
        level, offset = word_index(word, self.N)
        if level > self.K:
            return np.zeros((self.d, self.d), dtype=np.complex128)
        return np.array(self.levels[level][offset])

    def coefficients(self) -> Dict[Word, CMatrix]:
        """Return the nonzero coefficients keyed by word."""
        out: Dict[Word, CMatrix] = {}
        for j, level in enumerate(self.levels):
            for offset in np.flatnonzero(np.any(level != 0, axis=(1, 2))):
                out[index_word(LevelIndex(j, int(offset)), self.N)] = np.array(level[offset])
        return out

    def row_block(self, j: int) -> CMatrix:
        """Return T_{0j} = [c_σ]_{|σ|=j}, a d × d·N**j matrix."""
        if j > self.K:
            return np.zeros((self.d, self.d * self.N**j), dtype=np.complex128)
        level = self.levels[j]
        row: CMatrix = np.transpose(level, (1, 0, 2)).reshape(self.d, -1)
        return row

    def truncate(self, K: int) -> "SchurElement":
        """Keep coefficients up to level K (padding with zeros when K exceeds the degree)."""
        levels = list(self.levels[: K + 1])
        levels += [np.zeros((self.N**j, self.d, self.d)) for j in range(len(levels), K + 1)]
        return SchurElement(self.N, self.d, K, tuple(levels))


def _check_same_space(t: SchurElement, s: SchurElement) -> None:
    if (t.N, t.d) != (s.N, s.d):
        raise ShapeError(f"Elements live on different spaces: {(t.N, t.d)} vs {(s.N, s.d)}")


class EvaluationResult(NamedTuple):
    value: CMatrix
    depth: int
    tail_bound: float


def assemble_truncation(t: SchurElement, m: int) -> BlockMatrix:
    """Return T^(m) = [T_{ij}]_{i,j=0..m} as a dense block matrix."""
    if m > t.K:
        raise TruncationExceededError(
            f"Truncation level {m} exceeds the stored degree K={t.K}", {"m": m, "K": t.K}
        )
    dims = tuple(t.d * t.N**i for i in range(m + 1))
    blocks: List[List[CMatrix]] = []
    for i in range(m + 1):
        row = []
        for j in range(m + 1):
            if j < i:
                row.append(np.zeros((dims[i], dims[j]), dtype=np.complex128))
            else:
                row.append(np.kron(np.eye(t.N**i), t.row_block(j - i)))
        blocks.append(row)
    return BlockMatrix.from_blocks(blocks)


def norm_lower_bound(t: SchurElement, m: int) -> float:
    """Return ‖T^(m)‖, a lower bound for ‖T‖ that is nondecreasing in m."""
    return operator_norm(assemble_truncation(t, m).matrix)


def evaluate(t: SchurElement, z: OperatorTuple, tol: float = 1e-9) -> EvaluationResult:
    """Return T(Z) = Σ_{|σ|≤K} c_σ (Z*_σ)*.

    The reported tail bound is what coefficients beyond K could contribute if
    the element is contractive: Σ_{j>K} ρ(Z)^{j/2}.
    """
    if (z.N, z.d) != (t.N, t.d):
        raise ShapeError(f"Point {(z.N, z.d)} does not match element {(t.N, t.d)}")
    rho = check_in_ball(z)
    stars = word_product_levels(z, t.K)
    value = np.zeros((t.d, t.d), dtype=np.complex128)
    for coeff, zs in zip(t.levels, stars):
        value += np.einsum("wab,wcb->ac", coeff, zs.conj())
    root = math.sqrt(rho)
    tail = root ** (t.K + 1) / (1.0 - root)
    if tail > tol:
        logger.debug("evaluate: unknown-coefficient tail %.3e exceeds %.1e", tail, tol)
    return EvaluationResult(value, t.K, tail)


def multiply(t: SchurElement, s: SchurElement) -> SchurElement:
    """Return T·S, whose coefficients are (T·S)_σ = Σ_{σ=βγ} t_β s_γ."""
    _check_same_space(t, s)
    K = min(t.K, s.K)
    N, d = t.N, t.d
    levels = []
    for m in range(K + 1):
        out = np.zeros((N**m, d, d), dtype=np.complex128)
        for i in range(m + 1):
            part = np.einsum("bxy,gyz->bgxz", t.levels[i], s.levels[m - i])
            out += part.reshape(N**m, d, d)
        levels.append(out)
    return SchurElement(N, d, K, tuple(levels))


def apply(t: SchurElement, x: Sequence[npt.NDArray[np.complex128]]) -> Levels:
    """Apply the truncation T^(D) to a word-indexed vector with levels 0..D.

    x[j] has shape (N**j, d, c); row level i of the result sums coefficient
    levels j ≤ min(K, D − i), so rows with i ≤ D − K are exact rows of T·x.
    """
    depth = len(x) - 1
    out: Levels = []
    for i in range(depth + 1):
        acc = np.zeros((t.N**i,) + x[i].shape[1:], dtype=np.complex128)
        for j in range(min(t.K, depth - i) + 1):
            block = x[i + j].reshape((t.N**i, t.N**j) + x[i + j].shape[1:])
            acc += np.einsum("bxy,abyc->axc", t.levels[j], block)
        out.append(acc)
    return out


class LemmaCheck(NamedTuple):
    """Per-row comparison of T^(m)L(Z)* with diag[T(Z)]L(Z)*."""

    defects: List[float]
    bounds: List[float]

    @property
    def ok(self) -> bool:
        return all(dft <= bnd + 1e-10 for dft, bnd in zip(self.defects, self.bounds))


def lemma_defect(t: SchurElement, z: OperatorTuple, m: int) -> LemmaCheck:
    """Compare the finite blocks of T^(m)L(Z)* and diag[T(Z)]L(Z)* row level by row level.

    The bound for row i is Σ_{m−i<j≤K} ‖T_{0j}‖ ρ(Z)^{(i+j)/2}, the size of the
    coefficient levels that the truncation cuts from that row.
    """
    rho = check_in_ball(z)
    column = [lv.conj().transpose(0, 2, 1) for lv in word_product_levels(z, m)]
    lhs = apply(t, column)
    tz = evaluate(t, z).value
    row_norms = [operator_norm(t.row_block(j)) for j in range(t.K + 1)]
    defects, bounds = [], []
    for i in range(m + 1):
        rhs = np.einsum("xy,ayc->axc", tz, column[i])
        defects.append(operator_norm((lhs[i] - rhs).reshape(-1, t.d)))
        bounds.append(
            sum(row_norms[j] * rho ** ((i + j) / 2) for j in range(m - i + 1, t.K + 1))
        )
    return LemmaCheck(defects, bounds)


def from_colligation(
    x: npt.ArrayLike, zb: npt.ArrayLike, y: npt.ArrayLike, w: npt.ArrayLike, K: int
) -> SchurElement:
    """Transfer-function coefficients c_∅ = W and c_{kσ} = Y_k X_σ Zb up to level K.

    x has shape (N, f, f), zb (f, d), y (N, d, f), w (d, d); X_σ = X_{i_1}···X_{i_n}.
    """
    xs = np.asarray(x, dtype=np.complex128)
    ys = np.asarray(y, dtype=np.complex128)
    zmat = np.asarray(zb, dtype=np.complex128)
    wmat = as_cmatrix(w, "W")
    N, d = ys.shape[0], wmat.shape[0]
    levels = [wmat[None, :, :]]
    states = zmat[None, :, :]
    for _ in range(K):
        levels.append(np.concatenate([ys[k] @ states for k in range(N)], axis=0))
        states = np.concatenate([xs[k] @ states for k in range(N)], axis=0)
    return SchurElement(N, d, K, tuple(levels))


class Colligation(NamedTuple):
    x: npt.NDArray[np.complex128]
    zb: CMatrix
    y: npt.NDArray[np.complex128]
    w: CMatrix

    def matrix(self) -> CMatrix:
        """Return [[X_1 … X_N, Zb], [Y_1 … Y_N, W]]."""
        top = np.hstack(list(self.x) + [self.zb])
        bottom = np.hstack(list(self.y) + [self.w])
        out: CMatrix = np.vstack([top, bottom])
        return out


def random_colligation(
    rng: np.random.Generator, N: int, d: int, f: int, margin: float
) -> Colligation:
    """Draw a colligation of norm `margin` whose state blocks are jointly nilpotent.

    Every X_k is strictly lower triangular, so X_σ = 0 once |σ| ≥ f and the
    transfer function is a polynomial of degree ≤ f.
    """
    shape = (f + d, N * f + d)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    for k in range(N):
        c[:f, k * f : (k + 1) * f] = np.tril(c[:f, k * f : (k + 1) * f], -1)
    # weight the feedthrough so the constant term is of the same order as the norm
    c[f:, N * f :] *= math.sqrt(N * f + d)
    c *= margin / operator_norm(c)
    xs = np.stack([c[:f, k * f : (k + 1) * f] for k in range(N)])
    ys = np.stack([c[f:, k * f : (k + 1) * f] for k in range(N)])
    return Colligation(xs, c[:f, N * f :], ys, c[f:, N * f :])


def random_schur(
    seed: int,
    N: int,
    d: int,
    K: int,
    margin: float = 0.9,
    rng: Optional[np.random.Generator] = None,
) -> SchurElement:
    """Return a deterministic random element of degree ≤ K and norm ≤ margin.

    The element is the transfer function of a nilpotent colligation of norm
    `margin`, so ‖T‖ ≤ margin holds for the untruncated operator and in
    particular norm_lower_bound(T, m) ≤ margin for every m.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError(f"Margin must lie in (0, 1), got {margin}")
    gen = rng if rng is not None else np.random.default_rng(seed)
    col = random_colligation(gen, N, d, K, margin)
    return from_colligation(col.x, col.zb, col.y, col.w, K)
