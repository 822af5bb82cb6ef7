"""JSON encoding of the values ncpick reads and writes.

Complex scalars are [re, im] pairs and matrices are row-major nested arrays
of them. Plain numbers are accepted as real scalars on input.

>>> complex_to_json(1 - 2j)
[1.0, -2.0]
>>> json_to_matrix([[[1, 0], 2]])
array([[1.+0.j, 2.+0.j]])
"""

import math
from collections import abc
from typing import Any, Dict, List, Mapping, Sequence, Union, cast

import numpy as np
import numpy.typing as npt

from .derive import CaraProblem, Variant
from .interpolate import InterpolantCertificate, NPProblem
from .linalg import CMatrix
from .points import OperatorTuple
from .schur import SchurElement
from .words import Word, validate_word

__all__ = [
    "JsonValue",
    "complex_to_json",
    "json_to_complex",
    "matrix_to_json",
    "json_to_matrix",
    "matrices_to_json",
    "word_to_json",
    "json_to_word",
    "point_to_json",
    "json_to_point",
    "schur_to_json",
    "json_to_schur",
    "np_problem_to_json",
    "json_to_np_problem",
    "cara_problem_to_json",
    "json_to_cara_problem",
    "certificate_to_json",
    "json_object",
]

JsonValue = Union[None, bool, str, float, int, List["JsonValue"], Dict[str, "JsonValue"]]


def _real(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"{where}: expected a number, found {v!r}")
    out = float(v)
    if not math.isfinite(out):
        raise ValueError(f"{where}: non-finite number {v!r}")
    return out


def complex_to_json(z: complex) -> JsonValue:
    return [float(z.real), float(z.imag)]


def json_to_complex(v: JsonValue, where: str = "scalar") -> complex:
    """Decode [re, im] (or a plain real number)."""
    if isinstance(v, list):
        if len(v) != 2:
            raise ValueError(f"{where}: complex scalars are [re, im] pairs, found {v!r}")
        return complex(_real(v[0], where), _real(v[1], where))
    return complex(_real(v, where), 0.0)


def matrix_to_json(m: npt.ArrayLike) -> JsonValue:
    a = np.asarray(m, dtype=np.complex128)
    return [[complex_to_json(x) for x in row] for row in a]


def json_to_matrix(v: JsonValue, where: str = "matrix") -> CMatrix:
    """Decode a row-major nested array, rejecting ragged rows."""
    if not isinstance(v, list) or not v or not all(isinstance(row, list) for row in v):
        raise TypeError(f"{where}: expected a nonempty list of rows, found {v!r}")
    rows = cast(List[List[JsonValue]], v)
    width = len(rows[0])
    if width == 0 or any(len(row) != width for row in rows):
        raise ValueError(f"{where}: ragged or empty rows")
    return np.array(
        [[json_to_complex(x, where) for x in row] for row in rows], dtype=np.complex128
    )


def matrices_to_json(ms: Sequence[npt.ArrayLike]) -> JsonValue:
    return [matrix_to_json(m) for m in ms]


def word_to_json(w: Word) -> JsonValue:
    return [int(x) for x in w]


def json_to_word(v: JsonValue, N: int) -> Word:
    if not isinstance(v, list):
        raise TypeError(f"Words are arrays of letters, found {v!r}")
    return validate_word(cast(List[int], v), N)


def _field(obj: JsonValue, key: str, where: str) -> JsonValue:
    if not isinstance(obj, dict):
        raise TypeError(f"{where}: expected an object, found {obj!r}")
    if key not in obj:
        raise ValueError(f"{where}: missing field '{key}'")
    return obj[key]


def _int(v: JsonValue, where: str) -> int:
    if isinstance(v, float) and not math.isfinite(v):
        raise ValueError(f"{where}: expected an integer, found {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise TypeError(f"{where}: expected an integer, found {v!r}")
    return int(v)


def point_to_json(z: OperatorTuple) -> JsonValue:
    return {"N": z.N, "dimE": z.d, "Z": matrices_to_json(list(z.mats))}


def json_to_point(v: JsonValue) -> OperatorTuple:
    """Decode {"N", "dimE", "Z": [matrix, ...]}."""
    N = _int(_field(v, "N", "point"), "point.N")
    d = _int(_field(v, "dimE", "point"), "point.dimE")
    comps = _field(v, "Z", "point")
    if not isinstance(comps, list) or len(comps) != N:
        raise ValueError(f"point: expected {N} components")
    z = OperatorTuple.from_components([json_to_matrix(c, "point.Z") for c in comps])
    if z.d != d:
        raise ValueError(f"point: components are {z.d}×{z.d} but dimE is {d}")
    return z


def schur_to_json(t: SchurElement) -> JsonValue:
    """Encode the nonzero coefficients; absent words are zero."""
    coeffs: List[JsonValue] = [
        {"word": word_to_json(w), "matrix": matrix_to_json(m)}
        for w, m in t.coefficients().items()
    ]
    return {"N": t.N, "dimE": t.d, "K": t.K, "coeffs": coeffs}


def json_to_schur(v: JsonValue) -> SchurElement:
    N = _int(_field(v, "N", "schur"), "schur.N")
    d = _int(_field(v, "dimE", "schur"), "schur.dimE")
    K = _int(_field(v, "K", "schur"), "schur.K")
    entries = _field(v, "coeffs", "schur")
    if not isinstance(entries, list):
        raise TypeError("schur.coeffs must be an array")
    coeffs = {}
    for entry in entries:
        word = json_to_word(_field(entry, "word", "schur.coeffs"), N)
        if word in coeffs:
            raise ValueError(f"schur.coeffs: word {list(word)} listed twice")
        coeffs[word] = json_to_matrix(_field(entry, "matrix", "schur.coeffs"))
    return SchurElement.from_coefficients(N, d, K, coeffs)


def np_problem_to_json(prob: NPProblem) -> JsonValue:
    return {
        "points": [point_to_json(z) for z in prob.points],
        "targets": matrices_to_json(list(prob.targets)),
    }


def json_to_np_problem(v: JsonValue) -> NPProblem:
    points = _field(v, "points", "nevpick")
    targets = _field(v, "targets", "nevpick")
    if not isinstance(points, list) or not isinstance(targets, list):
        raise TypeError("nevpick: points and targets must be arrays")
    return NPProblem(
        tuple(json_to_point(p) for p in points),
        tuple(json_to_matrix(b, "nevpick.targets") for b in targets),
    )


def cara_problem_to_json(prob: CaraProblem) -> JsonValue:
    return {
        "Z": point_to_json(prob.z),
        "l": prob.order,
        "variant": prob.variant.value,
        "targets": [
            {"k": k, "matrix": matrix_to_json(b)} for k, b in enumerate(prob.targets)
        ],
    }


def json_to_cara_problem(v: JsonValue) -> CaraProblem:
    """Decode a Carathéodory payload; targets may be listed in any order of k."""
    z = json_to_point(_field(v, "Z", "cara"))
    order = _int(_field(v, "l", "cara"), "cara.l")
    variant = _field(v, "variant", "cara")
    if variant not in {x.value for x in Variant}:
        raise ValueError(f"cara: unknown variant {variant!r}")
    entries = _field(v, "targets", "cara")
    if not isinstance(entries, list):
        raise TypeError("cara.targets must be an array")
    by_k: Dict[int, CMatrix] = {}
    for entry in entries:
        k = _int(_field(entry, "k", "cara.targets"), "cara.targets.k")
        if k in by_k or not 0 <= k <= order:
            raise ValueError(f"cara.targets: bad or repeated index k={k}")
        by_k[k] = json_to_matrix(_field(entry, "matrix", "cara.targets"))
    if len(by_k) != order + 1:
        raise ValueError(f"cara.targets: expected k = 0..{order}")
    targets = tuple(by_k[k] for k in range(order + 1))
    return CaraProblem(z, order, Variant(cast(str, variant)), targets)


def certificate_to_json(cert: InterpolantCertificate) -> JsonValue:
    col = cert.colligation
    return {
        "element": schur_to_json(cert.element),
        "colligation": {
            "X": matrices_to_json(list(col.x)),
            "Zb": matrix_to_json(col.zb),
            "Y": matrices_to_json(list(col.y)),
            "W": matrix_to_json(col.w),
        },
        "residuals": [float(r) for r in cert.residuals],
        "norm_bound": cert.norm_bound,
        "norm_level": cert.norm_level,
        "unitarity_defect": cert.unitarity_defect,
        "intertwining_defect": cert.intertwining_defect,
        "wave_residual": cert.wave_residual,
        "rank": cert.rank,
        "tail_bound": cert.tail_bound,
    }


def json_object(v: Any) -> Mapping[str, Any]:
    """Return v as a mapping, treating a missing value as empty."""
    if v is None:
        return {}
    if not isinstance(v, abc.Mapping):
        raise TypeError(f"Expected an object, found {v!r}")
    return cast(Mapping[str, Any], v)
