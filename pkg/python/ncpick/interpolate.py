"""The Nevanlinna-Pick problem on the operator ball: feasibility and synthesis.

Given points Z_1..Z_n and targets B_1..B_n, a contractive T with T(Z_k) = B_k
exists iff the Pick matrix

    P = [Σ_σ Z*_{j,σ} (I − B_j* B_k) (Z*_{k,σ})*]_{j,k}

is positive. P solves the displacement equation with F_k = ⊕_l Z*_{l,k},
U = [I; …; I] and V = [B_1*; …; B_n*]. Synthesis factors P = L L*, completes
the isometry [L*F_1*; …; L*F_N*; U*] ↦ [L*; V*] to a unitary colligation and
reads off T as its transfer function.
"""

import dataclasses
import logging
import math
import sys
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .config import DEFAULT_SETTINGS, Settings
from .displacement import DisplacementSystem, solve_exact, solve_series, wave_operators
from .errors import (
    CrossCheckError,
    DecayNotEstablishedError,
    DepthExceededError,
    DuplicatePointsError,
    InfeasibleError,
    ShapeError,
)
from .linalg import (
    CMatrix,
    Completion,
    adjoint,
    as_cmatrix,
    is_psd,
    operator_norm,
    psd_factor,
    unitarity_defect,
    unitary_completion,
)
from .points import OperatorTuple, ball_margin, certified_depth, check_in_ball, szego_kernel
from .schur import Colligation, SchurElement, apply, evaluate, from_colligation, norm_lower_bound
from .words import fock_dim

__all__ = [
    "NPProblem",
    "FeasibilityReport",
    "SystemSynthesis",
    "InterpolantCertificate",
    "VerificationReport",
    "pick_matrix",
    "pick_from_wave",
    "np_feasible",
    "solve_pick_system",
    "synthesize_system",
    "synthesize",
    "wave_residual",
    "certified_norm",
    "residual_tail_bound",
    "required_k_out",
    "verify_certificate",
]

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class NPProblem:
    """Interpolation nodes Z_1..Z_n in the ball and d×d targets B_1..B_n."""

    points: Tuple[OperatorTuple, ...]
    targets: Tuple[CMatrix, ...]

    def __post_init__(self) -> None:
        points = tuple(self.points)
        targets = tuple(as_cmatrix(b, "target") for b in self.targets)
        if not points:
            raise ShapeError("A problem needs at least one point")
        if len(points) != len(targets):
            raise ShapeError(f"{len(points)} points but {len(targets)} targets")
        shape = points[0].mats.shape
        for z in points:
            if z.mats.shape != shape:
                raise ShapeError(f"Points have shapes {shape} and {z.mats.shape}")
            check_in_ball(z)
        d = shape[1]
        for b in targets:
            if b.shape != (d, d):
                raise ShapeError(f"Target has shape {b.shape}, expected {(d, d)}")
        for j in range(len(points)):
            for k in range(j):
                if points[j].same_as(points[k]):
                    raise DuplicatePointsError(
                        f"Points {k} and {j} coincide", {"indices": [k, j]}
                    )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_element(cls, t: SchurElement, points: Sequence[OperatorTuple]) -> "NPProblem":
        """Use the values of T at the points as targets."""
        return cls(tuple(points), tuple(evaluate(t, z).value for z in points))

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def N(self) -> int:
        return self.points[0].N

    @property
    def d(self) -> int:
        return self.points[0].d

    def system(self) -> DisplacementSystem:
        """Return F_k = ⊕_l Z*_{l,k}, U = [I; …; I], V = [B_1*; …; B_n*]."""
        fs = np.stack(
            [
                scipy.linalg.block_diag(*[z.adjoints()[k] for z in self.points])
                for k in range(self.N)
            ]
        )
        u = np.vstack([np.eye(self.d, dtype=np.complex128)] * self.n)
        v = np.vstack([adjoint(b) for b in self.targets])
        return DisplacementSystem(fs, u, v)


class FeasibilityReport(NamedTuple):
    verdict: bool
    pick: CMatrix
    min_eig: float
    cross_check: Optional[float]


def solve_pick_system(
    system: DisplacementSystem, settings: Settings = DEFAULT_SETTINGS
) -> CMatrix:
    """Solve a displacement system exactly when it is small enough, else by series."""
    if system.g**2 <= settings.vec_dim_cap:
        return solve_exact(system, dim_cap=settings.vec_dim_cap)
    logger.debug("solve_pick_system: side %d above cap, summing the series", system.g**2)
    return solve_series(system, settings.tol_series, settings.depth_cap).a


def _pick_by_kernel(prob: NPProblem, settings: Settings) -> CMatrix:
    d = prob.d
    eye = np.eye(d, dtype=np.complex128)
    pick = np.zeros((prob.n * d, prob.n * d), dtype=np.complex128)
    for j, (zj, bj) in enumerate(zip(prob.points, prob.targets)):
        for k, (zk, bk) in enumerate(zip(prob.points, prob.targets)):
            middle = eye - adjoint(bj) @ bk
            block = szego_kernel(
                zj, zk, settings.tol_series, settings.kernel_depth_cap, middle
            ).kernel
            pick[j * d : (j + 1) * d, k * d : (k + 1) * d] = block
    return pick


def _pick_with_check(
    prob: NPProblem, settings: Settings
) -> Tuple[CMatrix, Optional[float]]:
    """Return the Pick matrix and the gap between the two paths (None if only one ran).

    When one path cannot certify its truncation the other is used alone.
    """
    try:
        direct: Optional[CMatrix] = _pick_by_kernel(prob, settings)
    except DepthExceededError as exc:
        logger.warning("pick_matrix: kernel series skipped, %s", exc)
        direct = None
    try:
        solved = solve_pick_system(prob.system(), settings)
    except (DepthExceededError, DecayNotEstablishedError) as exc:
        if direct is None:
            raise
        logger.warning("pick_matrix: displacement solve skipped, %s", exc)
        return direct, None
    if direct is None:
        return solved, None
    gap = operator_norm(direct - solved)
    if gap > settings.cross_check_tol * (1.0 + operator_norm(solved)):
        raise CrossCheckError(f"Pick matrix paths disagree by {gap:.3e}", {"gap": gap})
    return solved, gap


def pick_matrix(prob: NPProblem, settings: Settings = DEFAULT_SETTINGS) -> CMatrix:
    """Return the Pick matrix, computed by the kernel series and the displacement solve.

    >>> from ncpick.points import scalar_point
    >>> prob = NPProblem((scalar_point([0.0]),), (np.array([[0.5]]),))
    >>> pick_matrix(prob).real
    array([[0.75]])
    """
    return _pick_with_check(prob, settings)[0]


def pick_from_wave(prob: NPProblem, depth: int) -> CMatrix:
    """Recompute P as U∞*U∞ − V∞*V∞ from wave operators truncated at `depth`."""
    return wave_operators(prob.system(), depth).reconstruct()


def np_feasible(prob: NPProblem, settings: Settings = DEFAULT_SETTINGS) -> FeasibilityReport:
    pick, gap = _pick_with_check(prob, settings)
    verdict, min_eig = is_psd(pick, settings.tol_psd)
    logger.info("np_feasible: n %d min_eig %.3e verdict %s", prob.n, min_eig, verdict)
    return FeasibilityReport(verdict, pick, min_eig, gap)


class SystemSynthesis(NamedTuple):
    element: SchurElement
    colligation: Colligation
    completion: Completion
    rank: int


def synthesize_system(
    system: DisplacementSystem,
    a: npt.ArrayLike,
    k_out: int,
    settings: Settings = DEFAULT_SETTINGS,
) -> SystemSynthesis:
    """Build T with V* = Σ_τ c_τ (F_τ U)* from a positive solution A of the system.

    U and V must both have d columns, d being the coefficient size of T.
    """
    u, v = system.u, system.v
    d = u.shape[1]
    if v.shape[1] != d:
        raise ShapeError(f"U has {d} columns but V has {v.shape[1]}")
    N = system.N
    factor = psd_factor(a, rank_tol=settings.rank_tol, neg_tol=settings.tol_psd)
    f = factor.shape[1]
    lstar = adjoint(factor)
    acol = np.vstack([lstar, adjoint(v)])
    bcol = np.vstack([lstar @ adjoint(fk) for fk in system.fs] + [adjoint(u)])
    gram_tol = 10.0 * max(settings.tol_psd, settings.tol_series, settings.rank_tol)
    completion = unitary_completion(bcol, acol, tol=gram_tol, rank_tol=settings.rank_tol)
    theta = completion.theta
    xs = np.stack([theta[:f, k * f : (k + 1) * f] for k in range(N)])
    ys = np.stack([theta[f : f + d, k * f : (k + 1) * f] for k in range(N)])
    colligation = Colligation(
        xs, theta[:f, N * f : N * f + d], ys, theta[f : f + d, N * f : N * f + d]
    )
    element = from_colligation(
        colligation.x, colligation.zb, colligation.y, colligation.w, k_out
    )
    logger.debug(
        "synthesize_system: rank %d theta %s defect %.3e",
        f,
        theta.shape,
        completion.intertwining_defect,
    )
    return SystemSynthesis(element, colligation, completion, f)


def wave_residual(t: SchurElement, system: DisplacementSystem, extra: int = 1) -> float:
    """Return ‖V∞ − T U∞‖ over the rows that the truncation T^(K+extra) gets exactly."""
    depth = t.K + extra
    wave = wave_operators(system, depth)
    columns = [np.conj(np.swapaxes(lv, 1, 2)) for lv in wave.u_levels]
    image = apply(t, columns)
    worst = 0.0
    for i in range(extra + 1):
        target = np.conj(np.swapaxes(wave.v_levels[i], 1, 2))
        worst = max(worst, operator_norm((image[i] - target).reshape(-1, system.g)))
    return worst


def certified_norm(t: SchurElement, dim_cap: int) -> Tuple[float, int]:
    """Return the largest ‖T^(m)‖ whose assembly stays within dim_cap, and that m."""
    level = 0
    while level < t.K and t.d * fock_dim(t.N, level + 1) <= dim_cap:
        level += 1
    if level < t.K:
        logger.info(
            "certified_norm: levels %d..%d skipped (assembled side above %d)",
            level + 1,
            t.K,
            dim_cap,
        )
    return norm_lower_bound(t, level), level


@dataclasses.dataclass(frozen=True)
class InterpolantCertificate:
    """A synthesized interpolant together with the numbers that certify it."""

    element: SchurElement
    colligation: Colligation
    residuals: List[float]
    norm_bound: float
    norm_level: int
    unitarity_defect: float
    intertwining_defect: float
    wave_residual: float
    rank: int
    # worst-case interpolation error due to truncation at the element's K
    tail_bound: float = 0.0

    def passed(self, tol_interp: float, tol_norm: float = 1e-8) -> bool:
        return (
            max(self.residuals, default=0.0) <= tol_interp
            and self.norm_bound <= 1.0 + tol_norm
            and self.unitarity_defect <= 1e-10
        )


def residual_tail_bound(rho: float, k_out: int) -> float:
    """Bound ‖T_K(Z) − T(Z)‖ for a contractive T truncated at K, at a point of margin rho.

    Levels beyond K contribute at most ρ^(j/2) each, so the bound is
    ρ^((K+1)/2) / (1 − √ρ).

    >>> residual_tail_bound(0.25, 3)
    0.125
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"Point margin must lie in [0, 1), got {rho}")
    root = math.sqrt(rho)
    return float(root ** (k_out + 1) / (1.0 - root))


def required_k_out(rho: float, tol: float, cap: Optional[int] = None) -> int:
    """Smallest K with residual_tail_bound(rho, K) ≤ tol, raising DepthExceededError above cap.

    >>> required_k_out(0.25, 0.125)
    3
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"Point margin must lie in [0, 1), got {rho}")
    return certified_depth(math.sqrt(rho), 1.0, tol, sys.maxsize if cap is None else cap)


def synthesize(
    prob: NPProblem, k_out: Optional[int] = None, settings: Settings = DEFAULT_SETTINGS
) -> InterpolantCertificate:
    """Construct a contractive interpolant, truncated at k_out, for feasible data.

    The untruncated interpolant is exact; truncation leaves residuals of at most
    residual_tail_bound(ρ_max, k_out), ρ_max being the largest point margin.
    """
    k_out = settings.k_out if k_out is None else k_out
    report = np_feasible(prob, settings)
    if not report.verdict:
        raise InfeasibleError(
            f"Pick matrix is not positive (min eigenvalue {report.min_eig:.3e})",
            {"min_eig": report.min_eig},
        )
    system = prob.system()
    synth = synthesize_system(system, report.pick, k_out, settings)
    residuals = [
        operator_norm(evaluate(synth.element, z).value - b)
        for z, b in zip(prob.points, prob.targets)
    ]
    rho_max = max(ball_margin(z) for z in prob.points)
    tail = residual_tail_bound(rho_max, k_out)
    if tail > settings.tol_interp:
        logger.warning(
            "synthesize: K_out %d only guarantees residual %.3e at margin %.3g, "
            "K_out %d would reach %.1e",
            k_out,
            tail,
            rho_max,
            required_k_out(rho_max, settings.tol_interp),
            settings.tol_interp,
        )
    norm_bound, norm_level = certified_norm(synth.element, settings.norm_dim_cap)
    cert = InterpolantCertificate(
        element=synth.element,
        colligation=synth.colligation,
        residuals=residuals,
        norm_bound=norm_bound,
        norm_level=norm_level,
        unitarity_defect=unitarity_defect(synth.completion.theta),
        intertwining_defect=synth.completion.intertwining_defect,
        wave_residual=wave_residual(synth.element, system),
        rank=synth.rank,
        tail_bound=tail,
    )
    if not cert.passed(settings.tol_interp):
        logger.warning(
            "synthesize: certificate outside tolerance (max residual %.3e, norm %.6f)",
            max(residuals),
            norm_bound,
        )
    return cert


class VerificationReport(NamedTuple):
    passed: bool
    residuals: List[float]
    wave_residual: float
    norm_bound: float
    norm_level: int


def verify_certificate(
    cert: InterpolantCertificate, prob: NPProblem, settings: Settings = DEFAULT_SETTINGS
) -> VerificationReport:
    """Recheck a certificate from its coefficients alone."""
    t = cert.element
    residuals = [
        operator_norm(evaluate(t, z).value - b) for z, b in zip(prob.points, prob.targets)
    ]
    wave = wave_residual(t, prob.system())
    norm_bound, norm_level = certified_norm(t, settings.norm_dim_cap)
    passed = (
        max(residuals) <= settings.tol_interp
        and wave <= settings.tol_interp
        and norm_bound <= 1.0 + 1e-8
    )
    return VerificationReport(passed, residuals, wave, norm_bound, norm_level)
