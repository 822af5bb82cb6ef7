"""Dense complex matrix plumbing: norms, positivity, factorizations, unitary completion.

Everything here works on `numpy` arrays of dtype complex128. Block matrices are
dense arrays paired with their block dimensions.
"""

import dataclasses
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .errors import (
    GramMismatchError,
    NotHermitianError,
    NotPSDError,
    ShapeError,
    SingularMapError,
)

__all__ = [
    "CMatrix",
    "BlockMatrix",
    "PSDVerdict",
    "Completion",
    "as_cmatrix",
    "adjoint",
    "operator_norm",
    "is_psd",
    "psd_factor",
    "unitary_completion",
    "unitarity_defect",
    "displacement_map",
    "vec_solve",
]

logger = logging.getLogger(__name__)

CMatrix = npt.NDArray[np.complex128]

SINGULAR_COND = 1e12


def as_cmatrix(value: npt.ArrayLike, name: str = "matrix") -> CMatrix:
    """Return value as a finite 2-D complex array (copying only when needed)."""
    m = np.asarray(value, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def adjoint(m: CMatrix) -> CMatrix:
    return m.conj().T


def operator_norm(m: npt.ArrayLike) -> float:
    """Largest singular value.

    >>> operator_norm([[3, 0], [0, 4]])
    4.0
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(a)[0])


@dataclasses.dataclass(frozen=True)
class BlockMatrix:
    """A dense matrix together with its row and column block dimensions."""

    matrix: CMatrix
    row_dims: Tuple[int, ...]
    col_dims: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.matrix.shape != (sum(self.row_dims), sum(self.col_dims)):
            raise ShapeError(
                f"Block dimensions {self.row_dims} x {self.col_dims} "
                f"do not match matrix shape {self.matrix.shape}"
            )

    def block(self, i: int, j: int) -> CMatrix:
        r0 = sum(self.row_dims[:i])
        c0 = sum(self.col_dims[:j])
        return self.matrix[r0 : r0 + self.row_dims[i], c0 : c0 + self.col_dims[j]]

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[CMatrix]]) -> "BlockMatrix":
        """Assemble a block matrix from a grid of conformal blocks."""
        row_dims = tuple(row[0].shape[0] for row in blocks)
        col_dims = tuple(b.shape[1] for b in blocks[0])
        for i, row in enumerate(blocks):
            for j, b in enumerate(row):
                if b.shape != (row_dims[i], col_dims[j]):
                    raise ShapeError(f"Block ({i}, {j}) has shape {b.shape}")
        return cls(np.block([list(row) for row in blocks]), row_dims, col_dims)


class PSDVerdict(NamedTuple):
    verdict: bool
    min_eig: float


def _check_square(m: CMatrix, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")


def hermitian_part(m: CMatrix, tol: float) -> CMatrix:
    """Return (m + m*)/2 after checking ‖m − m*‖ ≤ tol·(1 + ‖m‖)."""
    _check_square(m, "matrix")
    scale = 1.0 + operator_norm(m)
    asym = operator_norm(m - adjoint(m))
    if asym > tol * scale:
        raise NotHermitianError(
            f"Matrix is not Hermitian: asymmetry {asym:.3e} exceeds {tol * scale:.3e}",
            {"asymmetry": asym},
        )
    return (m + adjoint(m)) / 2


def is_psd(m: npt.ArrayLike, tol: float) -> PSDVerdict:
    """Decide positivity with a relative eigenvalue floor.

    >>> verdict, min_eig = is_psd([[1, 0.5], [0.5, 1]], 1e-9)
    >>> verdict, round(min_eig, 12)
    (True, 0.5)
    >>> is_psd([[-3]], 1e-9).verdict
    False
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"matrix must be square, got shape {a.shape}")
    if a.size == 0:
        return PSDVerdict(True, 0.0)
    h = hermitian_part(a, tol)
    min_eig = float(scipy.linalg.eigvalsh(h)[0])
    floor = -tol * (1.0 + operator_norm(a))
    return PSDVerdict(min_eig >= floor, min_eig)


def psd_factor(
    m: npt.ArrayLike, rank_tol: float = 1e-10, neg_tol: Optional[float] = None
) -> CMatrix:
    """Return L with m ≈ L L*, keeping eigenvalues above rank_tol·λ_max.

    Negative eigenvalues below -neg_tol·(1 + ‖m‖) (neg_tol defaults to rank_tol)
    raise NotPSDError.
    """
    a = as_cmatrix(m)
    _check_square(a, "matrix")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    neg_tol = rank_tol if neg_tol is None else neg_tol
    h = hermitian_part(a, max(neg_tol, 1e-12))
    w, v = scipy.linalg.eigh(h)
    floor = -neg_tol * (1.0 + float(np.max(np.abs(w))))
    if w[0] < floor:
        raise NotPSDError(
            f"Matrix has eigenvalue {w[0]:.3e} below {floor:.3e}", {"min_eig": float(w[0])}
        )
    lam_max = float(w[-1])
    if lam_max <= 0:
        return np.zeros((n, 0), dtype=np.complex128)
    # descending order keeps the factor deterministic
    order = np.argsort(w)[::-1]
    keep = [i for i in order if w[i] > rank_tol * lam_max]
    factor: CMatrix = v[:, keep] * np.sqrt(w[keep])
    logger.debug("psd_factor: rank %d of %d (lambda_max %.3e)", len(keep), n, lam_max)
    return factor


class Completion(NamedTuple):
    """A unitary Θ with Θ[Bcol; 0_r1] = [Acol; 0_r2]."""

    theta: CMatrix
    r1: int
    r2: int
    rank: int
    intertwining_defect: float


def _orthonormal_complement(q: CMatrix) -> CMatrix:
    dim, rank = q.shape
    if rank == dim:
        return np.zeros((dim, 0), dtype=np.complex128)
    projector = np.eye(dim, dtype=np.complex128) - q @ adjoint(q)
    basis, _, _ = scipy.linalg.qr(projector, pivoting=True)
    complement: CMatrix = basis[:, : dim - rank]
    return complement


def unitary_completion(
    bcol: npt.ArrayLike, acol: npt.ArrayLike, tol: float = 1e-8, rank_tol: float = 1e-8
) -> Completion:
    """Extend the isometry Bcol·x ↦ Acol·x to a unitary on padded spaces.

    Bcol and Acol share their column space (the domain G) and must satisfy
    Bcol*Bcol = Acol*Acol within tol·(1 + ‖Bcol*Bcol‖). The padding is minimal:
    r1 = max(0, rows(Acol) − rows(Bcol)) and r2 = max(0, rows(Bcol) − rows(Acol)).

    >>> c = unitary_completion([[1], [0]], [[1]])
    >>> c.r1, c.r2
    (0, 1)
    """
    b = as_cmatrix(bcol, "Bcol")
    a = as_cmatrix(acol, "Acol")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"Bcol has {b.shape[1]} columns but Acol has {a.shape[1]}")
    gram_b = adjoint(b) @ b
    mismatch = operator_norm(gram_b - adjoint(a) @ a)
    if mismatch > tol * (1.0 + operator_norm(gram_b)):
        raise GramMismatchError(
            f"Gram matrices differ by {mismatch:.3e}", {"mismatch": mismatch}
        )
    nb, na = b.shape[0], a.shape[0]
    r1 = max(0, na - nb)
    r2 = max(0, nb - na)
    dim = nb + r1

    ub, s, vh = scipy.linalg.svd(b, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    ub_r = ub[:, :rank]
    if rank:
        ua_raw = (a @ adjoint(vh[:rank])) / s[:rank]
        ua_r, _ = scipy.linalg.polar(ua_raw)
    else:
        ua_r = np.zeros((na, 0), dtype=np.complex128)

    qb = np.vstack([ub_r, np.zeros((r1, rank), dtype=np.complex128)])
    qa = np.vstack([ua_r, np.zeros((r2, rank), dtype=np.complex128)])
    theta = qa @ adjoint(qb) + _orthonormal_complement(qa) @ adjoint(
        _orthonormal_complement(qb)
    )
    lhs = theta @ np.vstack([b, np.zeros((r1, b.shape[1]), dtype=np.complex128)])
    rhs = np.vstack([a, np.zeros((r2, a.shape[1]), dtype=np.complex128)])
    defect = operator_norm(lhs - rhs)
    logger.debug(
        "unitary_completion: dim %d rank %d r1 %d r2 %d defect %.3e", dim, rank, r1, r2, defect
    )
    return Completion(theta, r1, r2, rank, defect)


def unitarity_defect(theta: npt.ArrayLike) -> float:
    """Return ‖ΘΘ* − I‖."""
    t = as_cmatrix(theta)
    _check_square(t, "theta")
    return operator_norm(t @ adjoint(t) - np.eye(t.shape[0]))


def displacement_map(fs: Sequence[CMatrix], x: CMatrix) -> CMatrix:
    """Apply X ↦ X − Σ F_k X F_k*."""
    out = x.copy()
    for f in fs:
        out -= f @ x @ adjoint(f)
    return out


def vec_solve(
    fs: Sequence[npt.ArrayLike],
    rhs: npt.ArrayLike,
    cond_cap: float = SINGULAR_COND,
    dim_cap: int = 4000,
) -> CMatrix:
    """Solve X − Σ F_k X F_k* = RHS exactly through the vectorized system.

    vec(F X F*) = (conj(F) ⊗ F) vec(X) with column-major vec.
    """
    r = as_cmatrix(rhs, "RHS")
    _check_square(r, "RHS")
    g = r.shape[0]
    mats: List[CMatrix] = [as_cmatrix(f, "F") for f in fs]
    for f in mats:
        if f.shape != (g, g):
            raise ShapeError(f"F has shape {f.shape}, expected {(g, g)}")
    if g * g > dim_cap:
        raise ShapeError(
            f"Vectorized system of side {g * g} exceeds the cap {dim_cap}",
            {"side": g * g, "cap": dim_cap},
        )
    if g == 0:
        return r.copy()
    big = np.eye(g * g, dtype=np.complex128)
    for f in mats:
        big -= np.kron(f.conj(), f)

    getrf, getrs, gecon, lange = scipy.linalg.get_lapack_funcs(
        ("getrf", "getrs", "gecon", "lange"), (big,)
    )
    anorm = lange("1", big)
    lu, piv, info = getrf(big)
    rcond = 0.0
    if info == 0:
        rcond, _ = gecon(lu, anorm, norm="1")
    if info != 0 or rcond * cond_cap < 1.0:
        raise SingularMapError(
            f"Displacement map is singular to working precision (rcond {rcond:.3e})",
            {"rcond": float(rcond)},
        )
    sol, info = getrs(lu, piv, r.reshape(-1, order="F"))
    x: CMatrix = np.asarray(sol).reshape((g, g), order="F")
    residual = operator_norm(displacement_map(mats, x) - r)
    if residual > 1e-10 * (1.0 + operator_norm(r)):
        raise SingularMapError(
            f"Vectorized solve residual {residual:.3e} is too large", {"residual": residual}
        )
    return x
