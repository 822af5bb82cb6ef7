"""Command-line front end.

Exit codes: 0 feasible (or success), 1 infeasible, 2 input error, 3 numerical
failure or a certificate outside tolerance. Reports go to standard output as
JSON; diagnostics go to standard error.
"""

import argparse
import json
import logging
import os
import sys
import time
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import Settings
from .derive import (
    CaraProblem,
    Variant,
    cara_feasible,
    cara_synthesize,
    cara_targets,
    pq_check,
    total_derivative_direct,
    total_derivative_mk,
)
from .displacement import DisplacementSystem, residual, solve_exact, solve_series
from .errors import InfeasibleError, InvalidInputError, NcPickError, NumericalError
from .interpolate import NPProblem, np_feasible, synthesize, verify_certificate
from .linalg import CMatrix, is_psd, operator_norm, unitarity_defect, unitary_completion
from .points import random_tuple, scalar_point, szego_kernel
from .schur import lemma_defect, norm_lower_bound, random_schur
from .values import (
    JsonValue,
    cara_problem_to_json,
    certificate_to_json,
    json_object,
    json_to_cara_problem,
    json_to_matrix,
    json_to_np_problem,
    json_to_point,
    matrix_to_json,
    np_problem_to_json,
)
from .words import enumerate_words, index_word, word_index

__all__ = ["main", "build_parser", "generate_instance", "run_selftest"]

logger = logging.getLogger(__name__)

INSTANCE_VERSION = 1

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

# derivative tails decay more slowly than evaluation tails, so cara instances sit closer to 0
DEFAULT_POINT_MARGIN = {"nevpick": 0.01, "cara": 1e-4}


def init_logging(verbose: bool) -> None:
    """Send library logs to standard error; NCPICK_LOG_LEVEL overrides the level."""
    level_name = os.environ.get("NCPICK_LOG_LEVEL", "DEBUG" if verbose else "WARNING")
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level_name.upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _emit(report: Mapping[str, Any], args: argparse.Namespace) -> None:
    indent = 2 if args.pretty else None
    sys.stdout.write(json.dumps(report, indent=indent, sort_keys=True) + "\n")


def _load_instance(path: str) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise TypeError("Instance file must hold a JSON object")
    version = data.get("version")
    if version != INSTANCE_VERSION:
        raise ValueError(f"Unrecognized instance version {version!r}")
    if "kind" not in data or "problem" not in data:
        raise ValueError("Instance needs 'kind' and 'problem' fields")
    return data


def _settings(args: argparse.Namespace, instance: Optional[Mapping[str, Any]]) -> Settings:
    settings = Settings.from_env()
    if instance is not None:
        settings = Settings.from_mapping(json_object(instance.get("settings")), settings)
    return settings.replace(
        tol_psd=args.tol_psd,
        tol_interp=args.tol_interp,
        depth_cap=args.depth_cap,
        kernel_depth_cap=args.kernel_depth_cap,
        k_out=args.k_out,
    )


def _problem(instance: Mapping[str, Any]) -> Tuple[str, Any]:
    kind = instance["kind"]
    if kind == "nevpick":
        return kind, json_to_np_problem(instance["problem"])
    if kind == "cara":
        return kind, json_to_cara_problem(instance["problem"])
    raise ValueError(f"Unknown problem kind {kind!r}")


def cmd_feasibility(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    settings = _settings(args, instance)
    kind, prob = _problem(instance)
    start = time.perf_counter()
    report = np_feasible(prob, settings) if kind == "nevpick" else cara_feasible(prob, settings)
    out: Dict[str, Any] = {
        "kind": kind,
        "verdict": report.verdict,
        "min_eig": report.min_eig,
        "cross_check": report.cross_check,
        "settings": settings.to_json(),
    }
    if args.show_matrix:
        out["matrix"] = matrix_to_json(report.pick)
    if args.timing:
        out["timing"] = time.perf_counter() - start
    _emit(out, args)
    return EXIT_OK if report.verdict else EXIT_INFEASIBLE


def cmd_synthesize(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    settings = _settings(args, instance)
    kind, prob = _problem(instance)
    start = time.perf_counter()
    if kind == "nevpick":
        cert = synthesize(prob, settings.k_out, settings)
    else:
        cert = cara_synthesize(prob, settings.k_out, settings)
    out: Dict[str, Any] = {
        "kind": kind,
        "verdict": True,
        "certificate": certificate_to_json(cert),
        "settings": settings.to_json(),
    }
    ok = cert.passed(settings.tol_interp)
    if args.verify:
        out["verification"] = _verify(kind, prob, cert, settings)
        ok = ok and out["verification"]["passed"]
    if args.timing:
        out["timing"] = time.perf_counter() - start
    out["passed"] = ok
    _emit(out, args)
    return EXIT_OK if ok else EXIT_NUMERICAL


def _verify(kind: str, prob: Any, cert: Any, settings: Settings) -> Dict[str, Any]:
    if kind == "nevpick":
        rep = verify_certificate(cert, prob, settings)
        return {
            "passed": rep.passed,
            "residuals": rep.residuals,
            "wave_residual": rep.wave_residual,
            "norm_bound": rep.norm_bound,
            "norm_level": rep.norm_level,
        }
    got = cara_targets(cert.element, prob.z, prob.order, prob.variant)
    residuals = [operator_norm(a - b) for a, b in zip(got, prob.targets)]
    return {"passed": max(residuals) <= settings.tol_interp, "residuals": residuals}


def generate_instance(
    kind: str,
    seed: int,
    n: int = 2,
    order: int = 1,
    N: int = 2,
    d: int = 1,
    margin: float = 0.9,
    variant: str = "total",
    point_margin: Optional[float] = None,
    degree: int = 3,
) -> Dict[str, JsonValue]:
    """Build a feasible instance whose targets come from a random contractive element."""
    if kind not in DEFAULT_POINT_MARGIN:
        raise ValueError(f"Unknown problem kind {kind!r}")
    if min(n, N, d) < 1 or order < 0 or degree < 0:
        raise ValueError("Sizes must be positive and orders nonnegative")
    rho = DEFAULT_POINT_MARGIN[kind] if point_margin is None else point_margin
    rng = np.random.default_rng(seed)
    t = random_schur(seed, N, d, degree, margin, rng=rng)
    problem: JsonValue
    if kind == "nevpick":
        points = [random_tuple(rng, N, d, rho * float(rng.uniform(0.5, 1.0))) for _ in range(n)]
        problem = np_problem_to_json(NPProblem.from_element(t, points))
    else:
        z = random_tuple(rng, N, d, rho)
        problem = cara_problem_to_json(CaraProblem.from_element(t, z, order, Variant(variant)))
    return {
        "version": INSTANCE_VERSION,
        "kind": kind,
        "problem": problem,
        "generator": {"seed": seed, "margin": margin, "point_margin": rho, "degree": degree},
    }


def cmd_generate(args: argparse.Namespace) -> int:
    instance = generate_instance(
        args.kind,
        args.seed,
        n=args.n,
        order=args.l,
        N=args.N,
        d=args.dimE,
        margin=args.margin,
        variant=args.variant,
        point_margin=args.point_margin,
        degree=args.degree,
    )
    _emit(instance, args)
    return EXIT_OK


def cmd_kernel(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    settings = _settings(args, instance)
    payload = json_object(instance["problem"])
    z = json_to_point(payload["Z"])
    w = json_to_point(payload["W"]) if "W" in payload else z
    result = szego_kernel(z, w, settings.tol_series, settings.kernel_depth_cap)
    _emit(
        {
            "kernel": matrix_to_json(result.kernel),
            "depth": result.depth,
            "tail_bound": result.tail_bound,
            "settings": settings.to_json(),
        },
        args,
    )
    return EXIT_OK


def cmd_solve_displacement(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    settings = _settings(args, instance)
    payload = json_object(instance["problem"])
    fs = [json_to_matrix(f, "F") for f in payload["F"]]
    u = json_to_matrix(payload["U"], "U")
    v = json_to_matrix(payload["V"], "V") if payload.get("V") else None
    system = DisplacementSystem.build(fs, u, v)
    out: Dict[str, Any] = {"settings": settings.to_json()}
    solutions: Dict[str, CMatrix] = {}
    if args.method in ("series", "both"):
        sol = solve_series(system, settings.tol_series, settings.depth_cap)
        solutions["series"] = sol.a
        out["depth"] = sol.depth
        out["tail_estimate"] = sol.tail_estimate
    if args.method in ("exact", "both"):
        solutions["exact"] = solve_exact(system, dim_cap=settings.vec_dim_cap)
    if len(solutions) == 2:
        out["agreement"] = operator_norm(solutions["series"] - solutions["exact"])
    a = solutions.get("exact", solutions.get("series"))
    out["A"] = matrix_to_json(a)
    out["residual"] = residual(system, a)
    out["psd"] = is_psd(a, settings.tol_psd).verdict
    _emit(out, args)
    return EXIT_OK


Check = Tuple[str, str, Callable[[], bool]]


def _selftest_checks(quick: bool) -> List[Check]:
    trials = 2 if quick else 6
    rng = np.random.default_rng(2024)

    def words_roundtrip() -> bool:
        return all(
            index_word(word_index(w, 3), 3) == w
            for k in range(4)
            for w in enumerate_words(3, k)
        )

    def completion_unitary() -> bool:
        qb, _ = np.linalg.qr(rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3)))
        qa, _ = np.linalg.qr(rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3)))
        r = rng.standard_normal((3, 3))
        c = unitary_completion(qb @ r, qa @ r)
        return unitarity_defect(c.theta) <= 1e-10 and c.intertwining_defect <= 1e-8

    def scalar_kernel() -> bool:
        z, w = scalar_point([0.3, 0.2j]), scalar_point([-0.1, 0.4])
        expected = 1.0 / (1.0 - (np.conj(0.3) * -0.1 + np.conj(0.2j) * 0.4))
        return abs(szego_kernel(z, w).kernel[0, 0] - expected) <= 1e-9

    def schur_contractive() -> bool:
        return all(
            norm_lower_bound(random_schur(s, 2, 2, 3, 0.9), 3) <= 0.9 + 1e-9
            for s in range(trials)
        )

    def schur_lemma() -> bool:
        t = random_schur(5, 2, 2, 3, 0.9)
        return lemma_defect(t, random_tuple(rng, 2, 2, 0.3), 4).ok

    def solvers_agree() -> bool:
        fs = [random_tuple(rng, 2, 4, 0.5).mats[k] for k in range(2)]
        system = DisplacementSystem.build(fs, rng.standard_normal((4, 2)))
        exact = solve_exact(system)
        gap = operator_norm(solve_series(system).a - exact)
        return gap <= 1e-8 * (1.0 + operator_norm(exact))

    def np_round_trip() -> bool:
        for s in range(trials):
            inst = generate_instance("nevpick", s, n=2, N=2, d=2)
            prob = json_to_np_problem(inst["problem"])
            if not synthesize(prob).passed(1e-6):
                return False
        return True

    def pq_recursions() -> bool:
        z = random_tuple(rng, 2, 2, 0.5)
        reports = [pq_check(z, w, 2) for k in range(1, 4) for w in enumerate_words(2, k)]
        return all(max(rep.defect, rep.recursion_defect) <= 1e-12 for rep in reports)

    def derivative_paths() -> bool:
        t = random_schur(9, 2, 2, 3, 0.9)
        z = random_tuple(rng, 2, 2, 0.3)
        return all(
            operator_norm(total_derivative_direct(t, z, k, 2) - total_derivative_mk(t, z, k, 2))
            <= 1e-9
            for k in range(3)
        )

    def cara_round_trip() -> bool:
        for variant in ("partial", "total"):
            inst = generate_instance("cara", 3, order=1, N=2, d=1, variant=variant)
            prob = json_to_cara_problem(inst["problem"])
            if not cara_synthesize(prob).passed(1e-6):
                return False
        return True

    return [
        ("words", "index round trip", words_roundtrip),
        ("linalg", "unitary completion", completion_unitary),
        ("points", "scalar kernel closed form", scalar_kernel),
        ("schur", "random element is contractive", schur_contractive),
        ("schur", "evaluation lemma bounds", schur_lemma),
        ("displacement", "series and exact solvers agree", solvers_agree),
        ("interpolate", "generator round trip", np_round_trip),
        ("derive", "P/Q recursions", pq_recursions),
        ("derive", "total derivative paths agree", derivative_paths),
        ("derive", "Carathéodory round trip", cara_round_trip),
    ]


def run_selftest(quick: bool = False) -> List[Tuple[str, str, bool]]:
    results = []
    for module, name, check in _selftest_checks(quick):
        try:
            ok = bool(check())
        except NcPickError as exc:
            logger.error("selftest %s/%s raised %s", module, name, exc)
            ok = False
        results.append((module, name, ok))
    return results


def cmd_selftest(args: argparse.Namespace) -> int:
    results = run_selftest(args.quick)
    if args.json:
        rows = [{"module": m, "check": c, "passed": ok} for m, c, ok in results]
        _emit({"results": rows}, args)
    else:
        width = max(len(m) + len(c) for m, c, _ in results) + 3
        for module, name, ok in results:
            print(f"{module + ' / ' + name:<{width}} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if all(ok for _, _, ok in results) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncpick",
        description="Noncommutative Nevanlinna-Pick and Carathéodory interpolation.",
    )
    parser.add_argument("--version", action="version", version=f"ncpick {__version__}")
    parser.add_argument("--tol-psd", type=float, default=None, help="default 1e-9")
    parser.add_argument("--tol-interp", type=float, default=None, help="default 1e-6")
    parser.add_argument("--depth-cap", type=int, default=None, help="default 200")
    parser.add_argument(
        "--kernel-depth-cap", type=int, default=None, help="kernel series levels, default 5000"
    )
    parser.add_argument("--K-out", dest="k_out", type=int, default=None, help="default 8")
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="compact JSON output (default)")
    fmt.add_argument("--pretty", action="store_true", help="indented JSON output")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--show-matrix", action="store_true", help="include P or A in reports")
    parser.add_argument("--timing", action="store_true", help="include wall-clock timing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("feasibility", help="decide feasibility of an instance")
    p.add_argument("instance")
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("synthesize", help="construct and certify an interpolant")
    p.add_argument("instance")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("generate", help="emit a feasible random instance")
    p.add_argument("--kind", choices=sorted(DEFAULT_POINT_MARGIN), default="nevpick")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2, help="number of points")
    p.add_argument("-l", type=int, default=1, help="derivative order")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--dimE", type=int, default=1)
    p.add_argument("--margin", type=float, default=0.9)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="total")
    p.add_argument("--point-margin", type=float, default=None)
    p.add_argument("--degree", type=int, default=3)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("kernel", help="evaluate the kernel K(Z, W)")
    p.add_argument("instance")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("solve-displacement", help="solve A - sum F A F* = UU* - VV*")
    p.add_argument("instance")
    p.add_argument("--method", choices=["series", "exact", "both"], default="both")
    p.set_defaults(func=cmd_solve_displacement)

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    init_logging(args.verbose)
    try:
        code: int = args.func(args)
        return code
    except InfeasibleError as exc:
        logger.error("%s", exc)
        return EXIT_INFEASIBLE
    except (InvalidInputError, ValueError, TypeError, KeyError, OSError) as exc:
        logger.error("input error: %s", exc)
        return EXIT_INPUT
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except Exception:
        logger.exception("unexpected failure")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
