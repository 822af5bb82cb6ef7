"""Partial and total derivatives of Schur elements and the Carathéodory problems.

The lowered tuple F_k^(l) acts on G = E_0 ⊕ E_1 ⊕ … ⊕ E_l with E_m = E^{⊕N^m}.
It is block lower bidiagonal: (Z_k*)^{⊕N^i} on the diagonal and E_k^{⊕N^(i−1)}
below it, where E_k injects E as block k of E^{⊕N}. With U = [I, 0, …, 0]*
the row

    Σ_τ c_τ (F_τ U)* = [D_σ T_Z]_{|σ|≤l}

lists every partial derivative, D_∅ T_Z being T(Z). The total tuple TF_k^(l)
has Z_k* on the diagonal and I on the subdiagonal of E^{l+1}; the same row
built from it lists the total derivatives D^k T_Z = Σ_{|σ|=k} D_σ T_Z.
"""

import dataclasses
import enum
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .config import DEFAULT_SETTINGS, Settings
from .displacement import DisplacementSystem, solve_exact, solve_series
from .errors import (
    CrossCheckError,
    DecayNotEstablishedError,
    DepthExceededError,
    EmptyWordError,
    InfeasibleError,
    OrderTooSmallError,
    ShapeError,
)
from .interpolate import (
    FeasibilityReport,
    InterpolantCertificate,
    certified_norm,
    synthesize_system,
    wave_residual,
)
from .linalg import CMatrix, adjoint, as_cmatrix, is_psd, operator_norm, unitarity_defect
from .points import OperatorTuple, check_in_ball
from .schur import SchurElement
from .words import Word, validate_word, word_index

__all__ = [
    "Variant",
    "LoweredTuple",
    "TotalTuple",
    "CaraProblem",
    "PQReport",
    "injection",
    "build_lowered",
    "build_total",
    "word_matrix",
    "derivative_row",
    "partial_derivative",
    "total_derivative_direct",
    "total_derivative_mk",
    "pq_check",
    "cara_targets",
    "cara_feasible",
    "cara_synthesize",
]

logger = logging.getLogger(__name__)


class Variant(str, enum.Enum):
    PARTIAL = "partial"
    TOTAL = "total"


def injection(N: int, d: int, k: int) -> CMatrix:
    """Return E_k, the dN×d matrix with I_d in block row k and zeros elsewhere."""
    out = np.zeros((N * d, d), dtype=np.complex128)
    out[(k - 1) * d : k * d, :] = np.eye(d)
    return out


@dataclasses.dataclass(frozen=True)
class LoweredTuple:
    z: OperatorTuple
    order: int
    fs: npt.NDArray[np.complex128]

    @property
    def level_dims(self) -> Tuple[int, ...]:
        return tuple(self.z.d * self.z.N**m for m in range(self.order + 1))

    def level_offset(self, m: int) -> int:
        """Column offset of level m inside G."""
        return sum(self.level_dims[:m])

    @property
    def g(self) -> int:
        return int(self.fs.shape[1])

    @property
    def u(self) -> CMatrix:
        out = np.zeros((self.g, self.z.d), dtype=np.complex128)
        out[: self.z.d, :] = np.eye(self.z.d)
        return out


@dataclasses.dataclass(frozen=True)
class TotalTuple:
    z: OperatorTuple
    order: int
    fs: npt.NDArray[np.complex128]

    @property
    def g(self) -> int:
        return int(self.fs.shape[1])

    @property
    def u(self) -> CMatrix:
        out = np.zeros((self.g, self.z.d), dtype=np.complex128)
        out[: self.z.d, :] = np.eye(self.z.d)
        return out


def _check_order(order: int) -> None:
    if not isinstance(order, int) or order < 0:
        raise ShapeError(f"Order must be a nonnegative int, got {order}")


def build_lowered(z: OperatorTuple, order: int) -> LoweredTuple:
    """Build F_1^(l)..F_N^(l).

    >>> from ncpick.points import scalar_point
    >>> build_lowered(scalar_point([0.5]), 1).fs[0].real
    array([[0.5, 0. ],
           [1. , 0.5]])
    """
    _check_order(order)
    check_in_ball(z)
    N, d = z.N, z.d
    dims = [d * N**m for m in range(order + 1)]
    offsets = np.concatenate([[0], np.cumsum(dims)])
    g = int(offsets[-1])
    stars = z.adjoints()
    fs = np.zeros((N, g, g), dtype=np.complex128)
    for k in range(N):
        for i in range(order + 1):
            r0 = offsets[i]
            fs[k, r0 : r0 + dims[i], r0 : r0 + dims[i]] = np.kron(np.eye(N**i), stars[k])
            if i:
                c0 = offsets[i - 1]
                fs[k, r0 : r0 + dims[i], c0 : c0 + dims[i - 1]] = np.kron(
                    np.eye(N ** (i - 1)), injection(N, d, k + 1)
                )
    return LoweredTuple(z, order, fs)


def build_total(z: OperatorTuple, order: int) -> TotalTuple:
    """Build TF_1^(l)..TF_N^(l) on E^{l+1}."""
    _check_order(order)
    check_in_ball(z)
    shift = np.eye(order + 1, k=-1)
    fs = np.stack(
        [
            np.kron(np.eye(order + 1), star) + np.kron(shift, np.eye(z.d))
            for star in z.adjoints()
        ]
    )
    return TotalTuple(z, order, fs.astype(np.complex128))


def word_matrix(fs: npt.NDArray[np.complex128], sigma: Sequence[int]) -> CMatrix:
    """Return F_σ = F_{i_1}···F_{i_k}."""
    word = validate_word(sigma, fs.shape[0])
    out: CMatrix = np.eye(fs.shape[1], dtype=np.complex128)
    for letter in word:
        out = out @ fs[letter - 1]
    return out


def derivative_row(t: SchurElement, fs: npt.ArrayLike, u: npt.ArrayLike) -> CMatrix:
    """Return Σ_{|τ|≤K} c_τ (F_τ U)*, a d×g row.

    T has finitely many coefficients, so the sum is exact.
    """
    mats = np.asarray(fs, dtype=np.complex128)
    umat = as_cmatrix(u, "U")
    if mats.shape[0] != t.N or umat.shape[1] != t.d:
        raise ShapeError(f"Tuple {mats.shape} and U {umat.shape} do not fit the element")
    level = umat[None, :, :]
    row = np.zeros((t.d, umat.shape[0]), dtype=np.complex128)
    for j in range(t.K + 1):
        if j:
            level = np.concatenate([f @ level for f in mats], axis=0)
        row += np.einsum("wab,wgb->ag", t.levels[j], level.conj())
    return row


def _lowered_row(t: SchurElement, z: OperatorTuple, order: int) -> Tuple[LoweredTuple, CMatrix]:
    if (z.N, z.d) != (t.N, t.d):
        raise ShapeError(f"Point {(z.N, z.d)} does not match element {(t.N, t.d)}")
    lowered = build_lowered(z, order)
    return lowered, derivative_row(t, lowered.fs, lowered.u)


def partial_derivative(
    t: SchurElement, z: OperatorTuple, sigma: Sequence[int], order: Optional[int] = None
) -> CMatrix:
    """Return D_σ T_Z, read from the derivative row of the order-l lowered tuple."""
    word = validate_word(sigma, t.N)
    order = len(word) if order is None else order
    if len(word) > order:
        raise OrderTooSmallError(
            f"Word of length {len(word)} needs order at least {len(word)}, got {order}",
            {"word": list(word), "l": order},
        )
    lowered, row = _lowered_row(t, z, order)
    level, offset = word_index(word, t.N)
    c0 = lowered.level_offset(level) + offset * t.d
    return row[:, c0 : c0 + t.d]


def total_derivative_direct(
    t: SchurElement, z: OperatorTuple, k: int, order: Optional[int] = None
) -> CMatrix:
    """Return D^k T_Z as the sum of D_σ T_Z over the N**k words of length k."""
    order = k if order is None else order
    if k > order:
        raise OrderTooSmallError(f"Total derivative {k} exceeds order {order}", {"k": k})
    lowered, row = _lowered_row(t, z, order)
    c0 = lowered.level_offset(k)
    block = row[:, c0 : c0 + lowered.level_dims[k]]
    out: CMatrix = block.reshape(t.d, t.N**k, t.d).sum(axis=1)
    return out


def total_derivative_mk(
    t: SchurElement, z: OperatorTuple, k: int, order: Optional[int] = None
) -> CMatrix:
    """Return D^k T_Z from the row Σ_τ c_τ (TF_τ U)* of the total tuple."""
    order = k if order is None else order
    if k > order:
        raise OrderTooSmallError(f"Total derivative {k} exceeds order {order}", {"k": k})
    if (z.N, z.d) != (t.N, t.d):
        raise ShapeError(f"Point {(z.N, z.d)} does not match element {(t.N, t.d)}")
    total = build_total(z, order)
    row = derivative_row(t, total.fs, total.u)
    return row[:, k * t.d : (k + 1) * t.d]


class PQReport(NamedTuple):
    """First block columns of F_σ^(l) (P_j) and TF_σ^(l) (Q_j), with defects."""

    p_blocks: List[CMatrix]
    q_blocks: List[CMatrix]
    defect: float
    recursion_defect: float


def pq_check(z: OperatorTuple, sigma: Sequence[int], order: int) -> PQReport:
    """Compare Σ_s P_j^s(σ) with Q_j(σ) for j = 0..l.

    Also reports how far the blocks are from the first-letter recursions
    P_j(kτ) = E_k^{⊕N^(j−1)} P_{j−1}(τ) + (Z_k*)^{⊕N^j} P_j(τ) and
    Q_j(kτ) = Q_{j−1}(τ) + Z_k* Q_j(τ).
    """
    word = validate_word(sigma, z.N)
    if not word:
        raise EmptyWordError("pq_check needs a nonempty word")
    N, d = z.N, z.d
    lowered = build_lowered(z, order)
    total = build_total(z, order)

    def columns(sig: Word) -> Tuple[List[CMatrix], List[CMatrix]]:
        fp = word_matrix(lowered.fs, sig)
        fq = word_matrix(total.fs, sig)
        ps = [
            fp[lowered.level_offset(j) : lowered.level_offset(j) + lowered.level_dims[j], :d]
            for j in range(order + 1)
        ]
        qs = [fq[j * d : (j + 1) * d, :d] for j in range(order + 1)]
        return ps, qs

    ps, qs = columns(word)
    defect = max(
        operator_norm(p.reshape(-1, d, d).sum(axis=0) - q) for p, q in zip(ps, qs)
    )

    first, rest = word[0], word[1:]
    ps_rest, qs_rest = columns(rest)
    star = z.adjoints()[first - 1]
    recursion = 0.0
    for j in range(order + 1):
        p_rec = np.kron(np.eye(N**j), star) @ ps_rest[j]
        q_rec = star @ qs_rest[j]
        if j:
            p_rec = p_rec + np.kron(np.eye(N ** (j - 1)), injection(N, d, first)) @ ps_rest[j - 1]
            q_rec = q_rec + qs_rest[j - 1]
        recursion = max(
            recursion, operator_norm(p_rec - ps[j]), operator_norm(q_rec - qs[j])
        )
    return PQReport(ps, qs, defect, recursion)


@dataclasses.dataclass(frozen=True)
class CaraProblem:
    """Prescribed derivatives B_0..B_l of a contractive T at one point Z.

    Partial targets have shape d×dN^m (the row [D_σ T_Z]_{|σ|=m} in word order);
    total targets are d×d.
    """

    z: OperatorTuple
    order: int
    variant: Variant
    targets: Tuple[CMatrix, ...]

    def __post_init__(self) -> None:
        _check_order(self.order)
        check_in_ball(self.z)
        variant = Variant(self.variant)
        targets = tuple(as_cmatrix(b, "target") for b in self.targets)
        if len(targets) != self.order + 1:
            raise ShapeError(
                f"Order {self.order} needs {self.order + 1} targets, got {len(targets)}"
            )
        d, N = self.z.d, self.z.N
        for m, b in enumerate(targets):
            want = (d, d * N**m) if variant is Variant.PARTIAL else (d, d)
            if b.shape != want:
                raise ShapeError(f"Target {m} has shape {b.shape}, expected {want}")
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_element(
        cls, t: SchurElement, z: OperatorTuple, order: int, variant: Variant
    ) -> "CaraProblem":
        return cls(z, order, Variant(variant), tuple(cara_targets(t, z, order, variant)))

    def tuple_(self) -> npt.NDArray[np.complex128]:
        if self.variant is Variant.PARTIAL:
            return build_lowered(self.z, self.order).fs
        return build_total(self.z, self.order).fs

    def system(self) -> DisplacementSystem:
        """Return F = F^(l) or TF^(l), U = [I, 0, …]* and V = [B_0 … B_l]*."""
        fs = self.tuple_()
        g, d = fs.shape[1], self.z.d
        u = np.zeros((g, d), dtype=np.complex128)
        u[:d, :] = np.eye(d)
        v = adjoint(np.hstack(self.targets))
        return DisplacementSystem(fs, u, v)


def cara_targets(
    t: SchurElement, z: OperatorTuple, order: int, variant: Variant
) -> List[CMatrix]:
    """Return the derivatives B_0..B_l of T at Z for the given variant."""
    d = t.d
    if Variant(variant) is Variant.PARTIAL:
        lowered, row = _lowered_row(t, z, order)
        return [
            row[:, lowered.level_offset(m) : lowered.level_offset(m) + lowered.level_dims[m]]
            for m in range(order + 1)
        ]
    total = build_total(z, order)
    row = derivative_row(t, total.fs, total.u)
    return [row[:, m * d : (m + 1) * d] for m in range(order + 1)]


def cara_feasible(prob: CaraProblem, settings: Settings = DEFAULT_SETTINGS) -> FeasibilityReport:
    """Decide feasibility through A = U∞*U∞ − V∞*V∞, using both solvers where possible."""
    system = prob.system()
    exact: Optional[CMatrix] = None
    series: Optional[CMatrix] = None
    if system.g**2 <= settings.vec_dim_cap:
        exact = solve_exact(system, dim_cap=settings.vec_dim_cap)
    try:
        series = solve_series(system, settings.tol_series, settings.depth_cap).a
    except (DecayNotEstablishedError, DepthExceededError) as exc:
        if exact is None:
            raise
        logger.info("cara_feasible: series path unavailable (%s), using the exact solve", exc)
    gap: Optional[float] = None
    if exact is not None and series is not None:
        gap = operator_norm(exact - series)
        # series truncation is measured against the right-hand side
        scale = 1.0 + max(operator_norm(exact), operator_norm(system.rhs()))
        if gap > settings.cross_check_tol * scale:
            raise CrossCheckError(f"Displacement solvers disagree by {gap:.3e}", {"gap": gap})
    a = exact if exact is not None else series
    assert a is not None
    verdict, min_eig = is_psd(a, settings.tol_psd)
    logger.info(
        "cara_feasible: %s order %d min_eig %.3e verdict %s",
        prob.variant.value,
        prob.order,
        min_eig,
        verdict,
    )
    return FeasibilityReport(verdict, a, min_eig, gap)


def cara_synthesize(
    prob: CaraProblem, k_out: Optional[int] = None, settings: Settings = DEFAULT_SETTINGS
) -> InterpolantCertificate:
    """Construct a contractive T whose derivatives at Z are the targets."""
    k_out = settings.k_out if k_out is None else k_out
    report = cara_feasible(prob, settings)
    if not report.verdict:
        raise InfeasibleError(
            f"Carathéodory matrix is not positive (min eigenvalue {report.min_eig:.3e})",
            {"min_eig": report.min_eig},
        )
    system = prob.system()
    synth = synthesize_system(system, report.pick, k_out, settings)
    t = synth.element
    if prob.variant is Variant.PARTIAL:
        got = cara_targets(t, prob.z, prob.order, Variant.PARTIAL)
    else:
        got = [total_derivative_direct(t, prob.z, m, prob.order) for m in range(prob.order + 1)]
    residuals = [operator_norm(a - b) for a, b in zip(got, prob.targets)]
    norm_bound, norm_level = certified_norm(t, settings.norm_dim_cap)
    cert = InterpolantCertificate(
        element=t,
        colligation=synth.colligation,
        residuals=residuals,
        norm_bound=norm_bound,
        norm_level=norm_level,
        unitarity_defect=unitarity_defect(synth.completion.theta),
        intertwining_defect=synth.completion.intertwining_defect,
        wave_residual=wave_residual(t, system),
        rank=synth.rank,
    )
    if not cert.passed(settings.tol_interp):
        logger.warning(
            "cara_synthesize: certificate outside tolerance (max residual %.3e)",
            max(residuals),
        )
    return cert
