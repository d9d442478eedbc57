"""Command-line front end.

Commands:
    scale         balance a matrix to the target sums and print the result
    factors       additionally print the gauge-normalized scaling factors
    compare       run both the iterative and closed-form routes and report
                  the entrywise gap between them
    degree-check  certify the algebraic-degree table on seeded random
                  exact-rational instances (or on one exact-parsed input)

Inputs are either a JSON document with fields ``matrix``, ``row_sums`` and
``col_sums``, or a matrix-only CSV with targets passed via --rows/--cols.
For degree-check, decimal strings are parsed exactly into rationals
(``0.1`` becomes 1/10), never through binary floats, so the algebra engine
sees the user's literal data.

Reports go to stdout, diagnostics to stderr.  Exit codes: 0 success,
1 cross-method defect, 2 invalid input, 3 inconsistent marginals,
4 not converged, 5 algebra resource limit.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .closedform import (
    DEFAULT_SINGULARITY_THRESHOLD,
    UnsupportedShape,
    WrongShape,
    closed_form_dispatch,
)
from .core import (
    InconsistentMarginals,
    Marginals,
    MatrixBalanceError,
    NonPositiveInput,
    PositiveMatrix,
    ScaledResult,
    ShapeMismatch,
    ValidatedInstance,
    residuals,
    validate_instance,
)
from .exactalgebra import (
    RationalInstance,
    ResourceLimit,
    UnitIdeal,
    buchberger,
    build_scaling_ideal,
    default_gauge,
    elimination_degree,
    random_rational_instance,
)
from .iterative import (
    GaugeFix,
    IterationConfig,
    NotConverged,
    extract_factors,
    sinkhorn_iterate,
)

SCHEMA_VERSION = 1
COMPARE_GAP_TOL = 1e-6
DEGREE_CHECK_SHAPES = ((1, 3), (2, 2), (2, 3), (2, 4))

EXIT_OK = 0
EXIT_DEFECT = 1
EXIT_INVALID_INPUT = 2
EXIT_INCONSISTENT = 3
EXIT_NOT_CONVERGED = 4
EXIT_RESOURCE_LIMIT = 5


class ParseError(MatrixBalanceError, ValueError):
    """Malformed input document; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class JobSpec:
    """One CLI invocation, fully resolved."""

    command: str
    input_path: str | None
    method: str = "auto"
    tolerance: float = 1e-9
    max_iterations: int = 1000
    gauge: GaugeFix | None = None
    seed: int = 42
    count: int = 20
    output_format: str = "json"
    singularity_threshold: float = DEFAULT_SINGULARITY_THRESHOLD
    rows_flag: str | None = None
    cols_flag: str | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


def _parse_number(text: str, exact: bool, line: int, column: int):
    text = text.strip()
    try:
        if exact:
            return Fraction(text)
        try:
            return float(text)
        except ValueError:
            return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a number: {text!r}", line, column) from None


def _parse_vector_flag(flag: str, name: str, exact: bool):
    values = [v for v in flag.split(",") if v.strip()]
    if not values:
        raise ParseError(f"--{name} must list at least one value", 1, 1)
    return [_parse_number(v, exact, 1, k + 1) for k, v in enumerate(values)]


def parse_input(
    path: str,
    rows_flag: str | None = None,
    cols_flag: str | None = None,
    exact: bool = False,
):
    """Read a matrix and its targets from a JSON document or a CSV file.

    Returns ``(matrix_rows, row_sums, col_sums)`` as nested lists of floats,
    or of exact rationals when ``exact`` is set.

    Raises:
        ParseError: malformed document, with 1-based line/column.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}", 1, 1) from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _parse_json_document(text, rows_flag, cols_flag, exact)
    return _parse_csv_matrix(text, rows_flag, cols_flag, exact)


def _parse_json_document(text: str, rows_flag, cols_flag, exact: bool):
    try:
        if exact:
            doc = json.loads(text, parse_float=Fraction, parse_int=Fraction)
        else:
            doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict) or "matrix" not in doc:
        raise ParseError("document must be an object with a 'matrix' field", 1, 1)
    matrix = doc["matrix"]
    if not isinstance(matrix, list) or not all(isinstance(row, list) for row in matrix):
        raise ParseError("'matrix' must be an array of arrays", 1, 1)
    has_doc_sums = "row_sums" in doc or "col_sums" in doc
    if has_doc_sums and (rows_flag or cols_flag):
        raise ParseError("targets given both in the document and via flags", 1, 1)
    if has_doc_sums:
        if "row_sums" not in doc or "col_sums" not in doc:
            raise ParseError("document needs both 'row_sums' and 'col_sums'", 1, 1)
        row_sums, col_sums = doc["row_sums"], doc["col_sums"]
    else:
        if not (rows_flag and cols_flag):
            raise ParseError("matrix-only document requires --rows and --cols", 1, 1)
        row_sums = _parse_vector_flag(rows_flag, "rows", exact)
        col_sums = _parse_vector_flag(cols_flag, "cols", exact)
    return matrix, row_sums, col_sums


def _parse_csv_matrix(text: str, rows_flag, cols_flag, exact: bool):
    matrix = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        row = [
            _parse_number(cell, exact, lineno, colno)
            for colno, cell in enumerate(line.split(","), start=1)
        ]
        matrix.append(row)
    if not matrix:
        raise ParseError("empty matrix", 1, 1)
    if not (rows_flag and cols_flag):
        raise ParseError("CSV input requires --rows and --cols target flags", 1, 1)
    row_sums = _parse_vector_flag(rows_flag, "rows", exact)
    col_sums = _parse_vector_flag(cols_flag, "cols", exact)
    return matrix, row_sums, col_sums


def _parse_gauge(flag: str | None) -> GaugeFix | None:
    """Parse ``r,I`` / ``c,I`` with 1-based index I into a GaugeFix."""
    if flag is None:
        return None
    parts = flag.split(",")
    if len(parts) != 2 or parts[0] not in ("r", "c"):
        raise ParseError(f"--gauge must look like r,1 or c,2, got {flag!r}", 1, 1)
    try:
        index = int(parts[1])
    except ValueError:
        raise ParseError(f"gauge index must be an integer, got {parts[1]!r}", 1, 1) from None
    if index < 1:
        raise ParseError("gauge index is 1-based and must be >= 1", 1, 1)
    kind = "unit_row_factor" if parts[0] == "r" else "unit_col_factor"
    return GaugeFix(kind, index - 1)


def _instance_from_spec(spec: JobSpec) -> ValidatedInstance:
    matrix, row_sums, col_sums = parse_input(spec.input_path, spec.rows_flag, spec.cols_flag)
    return validate_instance(
        PositiveMatrix(np.array(matrix, dtype=float)),
        Marginals(np.array(row_sums, dtype=float), np.array(col_sums, dtype=float)),
    )


def _solve(spec: JobSpec, instance: ValidatedInstance) -> ScaledResult:
    config = IterationConfig(tolerance=spec.tolerance, max_iterations=spec.max_iterations)
    if spec.method == "iterative":
        return sinkhorn_iterate(instance, config)
    if spec.method == "closed-form":
        return closed_form_dispatch(instance, spec.singularity_threshold)
    try:
        return closed_form_dispatch(instance, spec.singularity_threshold)
    except UnsupportedShape:
        return sinkhorn_iterate(instance, config)


def _result_document(spec: JobSpec, instance: ValidatedInstance, result: ScaledResult) -> dict:
    row_res, col_res = residuals(result.matrix, instance.marginals)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": spec.command,
        "method": result.method,
        "matrix": [[float(v) for v in row] for row in result.matrix],
        "row_targets": [float(v) for v in instance.marginals.row_targets],
        "col_targets": [float(v) for v in instance.marginals.col_targets],
        "row_residuals": [float(v) for v in row_res],
        "col_residuals": [float(v) for v in col_res],
        "max_marginal_residual": result.max_marginal_residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "tolerance": spec.tolerance,
    }


def _run_scale(spec: JobSpec) -> tuple[dict, int]:
    instance = _instance_from_spec(spec)
    result = _solve(spec, instance)
    return _result_document(spec, instance, result), EXIT_OK


def _run_factors(spec: JobSpec) -> tuple[dict, int]:
    instance = _instance_from_spec(spec)
    result = _solve(spec, instance)
    if result.factors is None:
        # Singular closed form carries no factors; rerun iteratively.
        config = IterationConfig(tolerance=spec.tolerance, max_iterations=spec.max_iterations)
        result = sinkhorn_iterate(instance, config)
    gauge = spec.gauge if spec.gauge is not None else default_gauge(instance.rows, instance.cols)
    pair = extract_factors(instance, result, gauge)
    doc = _result_document(spec, instance, result)
    doc["gauge"] = {"kind": gauge.kind, "index": gauge.index + 1}
    doc["row_factors"] = [float(v) for v in pair.row_factors]
    doc["col_factors"] = [float(v) for v in pair.col_factors]
    return doc, EXIT_OK


def _run_compare(spec: JobSpec) -> tuple[dict, int]:
    instance = _instance_from_spec(spec)
    config = IterationConfig(tolerance=spec.tolerance, max_iterations=spec.max_iterations)
    iterative_result = sinkhorn_iterate(instance, config)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "compare",
        "iterative": _result_document(spec, instance, iterative_result),
        "closed_form": None,
        "max_entrywise_gap": None,
        "gap_tolerance": COMPARE_GAP_TOL,
        "ok": True,
    }
    try:
        closed = closed_form_dispatch(instance, spec.singularity_threshold)
    except UnsupportedShape:
        return doc, EXIT_OK
    gap = float(np.max(np.abs(closed.matrix - iterative_result.matrix)))
    doc["closed_form"] = _result_document(spec, instance, closed)
    doc["max_entrywise_gap"] = gap
    doc["ok"] = gap <= COMPARE_GAP_TOL
    return doc, EXIT_OK if doc["ok"] else EXIT_DEFECT


def _degree_bound(rows: int, cols: int) -> int:
    return math.comb(rows + cols - 2, rows - 1)


def _run_degree_check(spec: JobSpec) -> tuple[dict, int]:
    if spec.input_path is not None:
        return _degree_check_single(spec)
    shapes = []
    all_within = True
    for rows, cols in DEGREE_CHECK_SHAPES:
        rng = random.Random(f"{spec.seed}:{rows}x{cols}")
        bound = _degree_bound(rows, cols)
        degrees = []
        for _ in range(spec.count):
            inst = random_rational_instance(rows, cols, rng)
            basis = buchberger(build_scaling_ideal(inst))
            degrees.append(elimination_degree(basis, basis.variables[-1]))
        histogram = {str(d): degrees.count(d) for d in sorted(set(degrees))}
        within = max(degrees) <= bound
        all_within = all_within and within
        shapes.append(
            {
                "rows": rows,
                "cols": cols,
                "bound": bound,
                "count": spec.count,
                "degrees": histogram,
                "max_observed": max(degrees),
                "within_bound": within,
            }
        )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "degree-check",
        "seed": spec.seed,
        "count": spec.count,
        "shapes": shapes,
        "all_within_bound": all_within,
    }
    return doc, EXIT_OK if all_within else EXIT_DEFECT


def _degree_check_single(spec: JobSpec) -> tuple[dict, int]:
    matrix, row_sums, col_sums = parse_input(
        spec.input_path, spec.rows_flag, spec.cols_flag, exact=True
    )
    rows, cols = len(matrix), len(matrix[0]) if matrix else 0
    gauge = spec.gauge if spec.gauge is not None else default_gauge(rows, cols)
    instance = RationalInstance(
        entries=tuple(tuple(v for v in row) for row in matrix),
        row_targets=tuple(row_sums),
        col_targets=tuple(col_sums),
        gauge=gauge,
    )
    basis = buchberger(build_scaling_ideal(instance))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "degree-check",
        "rows": rows,
        "cols": cols,
        "bound": _degree_bound(rows, cols),
        "consistent": instance.is_consistent(),
        "unit_ideal": basis.is_unit,
    }
    if basis.is_unit:
        doc["degree"] = None
        doc["within_bound"] = None
        return doc, EXIT_INCONSISTENT
    degree = elimination_degree(basis, basis.variables[-1])
    doc["degree"] = degree
    doc["within_bound"] = degree <= doc["bound"]
    return doc, EXIT_OK if doc["within_bound"] else EXIT_DEFECT


def run_job(spec: JobSpec) -> tuple[dict, int]:
    """Execute one command and return (report document, exit code)."""
    runners = {
        "scale": _run_scale,
        "factors": _run_factors,
        "compare": _run_compare,
        "degree-check": _run_degree_check,
    }
    return runners[spec.command](spec)


def _emit_csv(doc: dict) -> str:
    lines = []
    if "matrix" in doc:
        for row in doc["matrix"]:
            lines.append(",".join(repr(v) for v in row))
    elif "shapes" in doc:
        lines.append("rows,cols,bound,max_observed,within_bound")
        for shape in doc["shapes"]:
            lines.append(
                f"{shape['rows']},{shape['cols']},{shape['bound']},"
                f"{shape['max_observed']},{shape['within_bound']}"
            )
    else:
        lines.append(json.dumps(doc))
    if "row_factors" in doc:
        lines.append("row_factors," + ",".join(repr(v) for v in doc["row_factors"]))
        lines.append("col_factors," + ",".join(repr(v) for v in doc["col_factors"]))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matbalance",
        description="Balance positive matrices to prescribed row/column sums.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_input=True, input_optional=False):
        if with_input:
            if input_optional:
                p.add_argument("input", nargs="?", default=None, help="JSON document or CSV matrix")
            else:
                p.add_argument("input", help="JSON document or CSV matrix")
        p.add_argument("--rows", dest="rows_flag", default=None, help="comma-separated row targets (CSV input)")
        p.add_argument("--cols", dest="cols_flag", default=None, help="comma-separated col targets (CSV input)")
        p.add_argument("--method", choices=["auto", "iterative", "closed-form"], default="auto")
        p.add_argument("--tol", type=float, default=1e-9, help="convergence tolerance")
        p.add_argument("--max-iters", type=int, default=1000)
        p.add_argument("--gauge", default=None, help="factor pinned to 1: r,INDEX or c,INDEX (1-based)")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--count", type=int, default=20, help="instances per shape for degree-check")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument(
            "--singularity-threshold",
            type=float,
            default=DEFAULT_SINGULARITY_THRESHOLD,
            help="route 2x2 to the singular formula when |det| <= threshold * alpha",
        )

    add_common(sub.add_parser("scale", help="balance a matrix"))
    add_common(sub.add_parser("factors", help="balance and report scaling factors"))
    add_common(sub.add_parser("compare", help="iterative vs closed form"))
    add_common(
        sub.add_parser("degree-check", help="certify the algebraic-degree table"),
        input_optional=True,
    )
    return parser


def spec_from_args(args: argparse.Namespace) -> JobSpec:
    return JobSpec(
        command=args.command,
        input_path=args.input,
        method=args.method,
        tolerance=args.tol,
        max_iterations=args.max_iters,
        gauge=_parse_gauge(args.gauge),
        seed=args.seed,
        count=args.count,
        output_format=args.format,
        singularity_threshold=args.singularity_threshold,
        rows_flag=args.rows_flag,
        cols_flag=args.cols_flag,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        doc, code = run_job(spec)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except InconsistentMarginals as exc:
        print(f"error: inconsistent marginals: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ResourceLimit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE_LIMIT
    except (NonPositiveInput, ShapeMismatch, WrongShape, UnsupportedShape, UnitIdeal, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except MatrixBalanceError as exc:
        # Defect-class failures (branch analysis, discriminant) are nonzero
        # but distinct from usage errors.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEFECT
    if spec.output_format == "csv":
        print(_emit_csv(doc))
    else:
        print(json.dumps(doc, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
