"""Points of the operator unit ball, word products and the Szegő-type kernel.

A point Z = (Z_1, ..., Z_N) is a tuple of d×d matrices with
ρ(Z) = ‖Σ Z_k* Z_k‖ < 1. Word products are Z*_σ = Z*_{i_1}···Z*_{i_k}, which
is not the adjoint of Z_σ. The kernel row L(Z) has entries Z*_σ, so that

    K(Z, W) = L(Z) L(W)* = Σ_σ Z*_σ (W*_σ)*,

which for d = 1 is (1 − (z|w))⁻¹.
"""

import dataclasses
import functools
import logging
import math
import threading
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .errors import DepthExceededError, NotInBallError, ShapeError
from .linalg import CMatrix, adjoint, as_cmatrix, operator_norm
from .words import Word, validate_word

__all__ = [
    "OperatorTuple",
    "WordProductCache",
    "KernelResult",
    "GramSearchReport",
    "inner",
    "ball_margin",
    "check_in_ball",
    "word_product",
    "word_product_levels",
    "certified_depth",
    "szego_kernel",
    "kernel_gram",
    "scalar_point",
    "random_tuple",
    "resolvent_gram",
    "gram_counterexample_search",
]

logger = logging.getLogger(__name__)

KERNEL_DEPTH_CAP = 5000


@dataclasses.dataclass(frozen=True)
class OperatorTuple:
    """An N-tuple of d×d complex matrices, stored as an (N, d, d) array."""

    mats: npt.NDArray[np.complex128]

    def __post_init__(self) -> None:
        m = np.array(self.mats, dtype=np.complex128)
        if m.ndim != 3 or m.shape[1] != m.shape[2] or m.shape[0] < 1:
            raise ShapeError(f"Point components must be N square matrices, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("Point has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "mats", m)

    @classmethod
    def from_components(cls, components: Sequence[npt.ArrayLike]) -> "OperatorTuple":
        """Build a point from its N components."""
        mats = [as_cmatrix(c, "component") for c in components]
        shapes = {m.shape for m in mats}
        if len(shapes) != 1:
            raise ShapeError(f"Point components have differing shapes {sorted(shapes)}")
        return cls(np.stack(mats))

    @property
    def N(self) -> int:
        return int(self.mats.shape[0])

    @property
    def d(self) -> int:
        return int(self.mats.shape[1])

    def component(self, k: int) -> CMatrix:
        """Return Z_k for a letter k in [1..N]."""
        return np.array(self.mats[k - 1])

    def adjoints(self) -> npt.NDArray[np.complex128]:
        """Return the (N, d, d) array of Z_k*."""
        return np.conj(np.swapaxes(self.mats, 1, 2))

    @functools.cached_property
    def word_cache(self) -> "WordProductCache":
        """Shared, lazily filled table of Z*_σ for this point."""
        return WordProductCache(self)

    def same_as(self, other: "OperatorTuple", tol: float = 0.0) -> bool:
        return self.mats.shape == other.mats.shape and bool(
            np.max(np.abs(self.mats - other.mats), initial=0.0) <= tol
        )


def _check_conformal(z: OperatorTuple, w: OperatorTuple) -> None:
    if z.mats.shape != w.mats.shape:
        raise ShapeError(f"Points have shapes {z.mats.shape} and {w.mats.shape}")


def inner(z: OperatorTuple, w: OperatorTuple) -> CMatrix:
    """Return (Z|W) = Σ Z_k* W_k."""
    _check_conformal(z, w)
    out: CMatrix = np.einsum("kji,kjl->il", z.mats.conj(), w.mats)
    return out


def ball_margin(z: OperatorTuple) -> float:
    """Return ρ(Z) = ‖Σ Z_k* Z_k‖; Z is in the ball iff ρ(Z) < 1."""
    return operator_norm(inner(z, z))


def check_in_ball(z: OperatorTuple) -> float:
    rho = ball_margin(z)
    if not rho < 1.0:
        raise NotInBallError(f"Point has margin {rho:.6g} >= 1", {"margin": rho})
    return rho


def word_product(z: OperatorTuple, sigma: Sequence[int]) -> CMatrix:
    """Return Z*_σ = Z*_{i_1}···Z*_{i_k} (identity for the empty word)."""
    word = validate_word(sigma, z.N)
    out: CMatrix = np.eye(z.d, dtype=np.complex128)
    stars = z.adjoints()
    for letter in word:
        out = out @ stars[letter - 1]
    return out


def word_product_levels(z: OperatorTuple, depth: int) -> List[npt.NDArray[np.complex128]]:
    """Return read-only arrays of shape (N**m, d, d) holding Z*_σ for |σ| = m ≤ depth.

    Levels come from the point's shared cache, so repeated evaluations at the
    same point reuse them.
    """
    cache = z.word_cache
    return [cache.level(m) for m in range(depth + 1)]


class WordProductCache:
    """Table of Z*_σ filled level by level, optionally up to a bound.

    Level m holds the N**m products of length m in word order; level m + 1 is
    built from level m as [Z*_1 S_m; ...; Z*_N S_m]. Filling is serialized by a
    lock, so concurrent readers see the same levels.
    """

    def __init__(self, z: OperatorTuple, max_level: Optional[int] = None):
        self.z = z
        self.max_level = max_level
        self._lock = threading.Lock()
        first = np.eye(z.d, dtype=np.complex128)[None, :, :]
        first.setflags(write=False)
        self._levels: List[npt.NDArray[np.complex128]] = [first]

    @property
    def filled(self) -> int:
        """Deepest level computed so far."""
        return len(self._levels) - 1

    def level(self, m: int) -> npt.NDArray[np.complex128]:
        if self.max_level is not None and m > self.max_level:
            raise ShapeError(f"Level {m} exceeds cache bound {self.max_level}")
        with self._lock:
            if len(self._levels) <= m:
                stars = self.z.adjoints()
                while len(self._levels) <= m:
                    prev = self._levels[-1]
                    nxt = np.concatenate([stars[k] @ prev for k in range(self.z.N)], axis=0)
                    nxt.setflags(write=False)
                    self._levels.append(nxt)
            return self._levels[m]

    def get(self, sigma: Sequence[int]) -> CMatrix:
        word = validate_word(sigma, self.z.N)
        offset = 0
        for letter in word:
            offset = offset * self.z.N + letter - 1
        return np.array(self.level(len(word))[offset])

    def __getitem__(self, sigma: Word) -> CMatrix:
        return self.get(sigma)


class KernelResult(NamedTuple):
    kernel: CMatrix
    depth: int
    tail_bound: float


def certified_depth(r: float, scale: float, tol: float, depth_cap: int) -> int:
    """Smallest D with scale·r^(D+1)/(1 − r) ≤ tol, or DepthExceededError past the cap.

    >>> certified_depth(0.5, 1.0, 1e-3, 100)
    10
    """
    if r <= 0.0 or scale == 0.0:
        return 0
    if not 0.0 < tol:
        raise ValueError(f"Kernel tolerance must be positive, got {tol}")

    def tail(depth: int) -> float:
        return scale * r ** (depth + 1) / (1.0 - r)

    depth = max(0, math.ceil(math.log(tol * (1.0 - r) / scale) / math.log(r) - 1.0))
    while depth > 0 and tail(depth - 1) <= tol:
        depth -= 1
    while tail(depth) > tol:
        depth += 1
    if depth > depth_cap:
        raise DepthExceededError(
            f"Kernel tail needs {depth} levels, more than {depth_cap} (r = {r:.6g})",
            {"r": r, "depth": depth, "depth_cap": depth_cap},
        )
    return depth


def szego_kernel(
    z: OperatorTuple,
    w: OperatorTuple,
    tol: float = 1e-9,
    depth_cap: int = KERNEL_DEPTH_CAP,
    middle: Optional[npt.ArrayLike] = None,
) -> KernelResult:
    """Return K(Z, W) = Σ_σ Z*_σ M (W*_σ)* with M = I unless `middle` is given.

    Levels follow S_m = Σ_k Z*_k S_{m−1} W_k and the truncation depth is chosen
    so that ‖M‖·Σ_{m>depth} r^m ≤ tol with r = sqrt(ρ(Z)ρ(W)).

    >>> z = OperatorTuple.from_components([[[0.5]]])
    >>> round(szego_kernel(z, z).kernel[0, 0].real, 9)
    1.333333333
    """
    _check_conformal(z, w)
    r = math.sqrt(check_in_ball(z) * check_in_ball(w))
    m0 = np.eye(z.d, dtype=np.complex128) if middle is None else as_cmatrix(middle, "middle")
    if m0.shape != (z.d, z.d):
        raise ShapeError(f"Middle factor has shape {m0.shape}, expected {(z.d, z.d)}")
    scale = operator_norm(m0)
    depth = certified_depth(r, scale, tol, depth_cap)
    stars = z.adjoints()
    level = m0
    total = m0.copy()
    for _ in range(depth):
        level = np.sum(stars @ level @ w.mats, axis=0)
        total += level
    tail = scale * r ** (depth + 1) / (1.0 - r) if r > 0 else 0.0
    logger.debug("szego_kernel: r %.4g depth %d tail %.3e", r, depth, tail)
    return KernelResult(total, depth, tail)


def kernel_gram(
    points: Sequence[OperatorTuple],
    tol: float = 1e-9,
    depth_cap: int = KERNEL_DEPTH_CAP,
    middles: Optional[Dict[Tuple[int, int], CMatrix]] = None,
) -> CMatrix:
    """Return the block matrix [K(Z_j, Z_k)] (optionally with middle factors per pair)."""
    n = len(points)
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    d = points[0].d
    gram = np.zeros((n * d, n * d), dtype=np.complex128)
    for j in range(n):
        for k in range(n):
            middle = None if middles is None else middles[(j, k)]
            block = szego_kernel(points[j], points[k], tol, depth_cap, middle).kernel
            gram[j * d : (j + 1) * d, k * d : (k + 1) * d] = block
    return gram


def scalar_point(z: Sequence[complex], d: int = 1) -> OperatorTuple:
    """Embed a scalar point as (z_1 I_d, ..., z_N I_d)."""
    eye = np.eye(d, dtype=np.complex128)
    return OperatorTuple(np.stack([complex(c) * eye for c in z]))


def random_tuple(rng: np.random.Generator, N: int, d: int, rho: float) -> OperatorTuple:
    """Draw a Gaussian point rescaled so that ball_margin is exactly rho."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"Point margin must lie in [0, 1), got {rho}")
    raw = rng.standard_normal((N, d, d)) + 1j * rng.standard_normal((N, d, d))
    margin = operator_norm(np.einsum("kji,kjl->il", raw.conj(), raw))
    return OperatorTuple(raw * math.sqrt(rho / margin))


class GramSearchReport(NamedTuple):
    min_eig: float
    trials: int
    found_negative: bool


def resolvent_gram(points: Sequence[OperatorTuple]) -> CMatrix:
    """Return the block matrix [(I − (Z_j|Z_k))⁻¹].

    This agrees with kernel_gram when d = 1 and in general differs from it.
    """
    n = len(points)
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    d = points[0].d
    eye = np.eye(d, dtype=np.complex128)
    gram = np.zeros((n * d, n * d), dtype=np.complex128)
    for j in range(n):
        for k in range(n):
            gram[j * d : (j + 1) * d, k * d : (k + 1) * d] = np.linalg.inv(
                eye - inner(points[j], points[k])
            )
    return gram


def gram_counterexample_search(
    seed: int, d: int = 2, n: int = 2, trials: int = 200, N: int = 2, rho: float = 0.8
) -> GramSearchReport:
    """Search for points whose resolvent_gram is not positive.

    For d = 1 this formula is the kernel and always positive; for d > 1 it is
    not, which this diagnostic exhibits numerically.
    """
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(trials):
        pts = [random_tuple(rng, N, d, rho * float(rng.uniform(0.2, 1.0))) for _ in range(n)]
        gram = resolvent_gram(pts)
        herm = (gram + adjoint(gram)) / 2
        worst = min(worst, float(scipy.linalg.eigvalsh(herm)[0]))
    return GramSearchReport(worst, trials, worst < 0.0)

