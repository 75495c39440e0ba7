"""Command-line interface.

Subcommands: ``eval`` (likelihood statistics at one theta), ``region``
(confidence-region membership; exit status 0 contained / 1 not / 2 error),
``contour`` (statistic grid export for plotting), and ``coverage``
(Monte Carlo coverage study).  Numeric output uses 6 significant digits in
human mode; ``--machine`` emits full-precision key=value records.  Every
error path exits with status 2 after printing a one-line reason of the
form ``error: <code>: <detail>``.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .eel import evaluate
from .exceptions import (
    DataFormatError,
    DomainViolationError,
    ElError,
    InvalidArgumentError,
    NonConvergenceError,
    RankDeficiencyError,
    SurjectivityError,
    UnsupportedConfigurationError,
)
from .inference import contour_grid, make_region_spec, region_contains
from .model import get_model, load_sample, model_names
from .simulation import (
    StudyConfig,
    format_coverage_table,
    report_delimited_lines,
    run_coverage,
)

_ERROR_CODES = (
    (DataFormatError, "data-parse"),
    (DomainViolationError, "domain-violation"),
    (NonConvergenceError, "non-convergence"),
    (RankDeficiencyError, "rank-deficiency"),
    (UnsupportedConfigurationError, "unsupported-configuration"),
    (SurjectivityError, "surjectivity-failure"),
    (InvalidArgumentError, "invalid-argument"),
    (ElError, "internal"),
)


def _error_code(exc: Exception) -> str:
    for klass, code in _ERROR_CODES:
        if isinstance(exc, klass):
            return code
    return "internal"


def _fmt(value, machine: bool) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, (np.ndarray, list, tuple)):
        return ",".join(_fmt(v, machine) for v in np.asarray(value).ravel())
    value = float(value)
    if np.isinf(value):
        return "inf"
    return repr(value) if machine else f"{value:.6g}"


def _parse_vector(text: str, flag: str, expected: int | None = None) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise InvalidArgumentError(f"{flag} expects comma-separated numbers, got '{text}'")
    if expected is not None and values.size != expected:
        raise InvalidArgumentError(
            f"{flag} must have length {expected}, got {values.size}"
        )
    return values


def _parse_levels(text: str) -> tuple[float, ...]:
    levels = tuple(float(v) for v in text.split(","))
    for level in levels:
        if not 0.0 < level < 1.0:
            raise InvalidArgumentError(f"--levels entries must be in (0, 1), got {level}")
    return levels


def _parse_methods(text: str) -> tuple[str, ...]:
    methods = tuple(m.strip() for m in text.split(","))
    for m in methods:
        if m not in ("oel", "eel1", "eel2", "bel"):
            raise InvalidArgumentError(f"--methods entries must be oel/eel1/eel2/bel, got '{m}'")
    return methods


def _load(args):
    sample = load_sample(args.data)
    model = get_model(args.model, sample.d)
    return model, sample


def _emit(lines, output):
    text = "\n".join(lines) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _cmd_eval(args) -> int:
    model, sample = _load(args)
    theta = _parse_vector(args.theta, "--theta", model.p)
    methods = _parse_methods(args.methods)
    result = evaluate(
        model, sample, theta, methods=methods, tol=args.tol, max_iter=args.max_iter
    )
    m = args.machine
    lines = [
        f"theta={_fmt(result.theta, m)}",
        f"inside={'true' if result.inside else 'false'}",
        f"oel={_fmt(result.oel, m)}",
        f"eel1={_fmt(result.eel1, m)}",
        f"eel2={_fmt(result.eel2, m)}",
        f"bel={_fmt(result.bel, m)}",
        f"theta_tilde={_fmt(result.theta_tilde, m)}",
        f"bartlett_b={_fmt(result.bartlett_b, m)}",
        f"preimage={_fmt(result.preimage, m)}",
        f"preimage_residual={_fmt(result.preimage_residual, m)}",
    ]
    _emit(lines, args.output)
    return 0


def _cmd_region(args) -> int:
    model, sample = _load(args)
    theta = _parse_vector(args.theta, "--theta", model.p)
    spec = make_region_spec(model, args.method, args.level)
    contained = region_contains(
        model, sample, spec, theta, tol=args.tol, max_iter=args.max_iter
    )
    m = args.machine
    lines = [
        f"method={spec.method}",
        f"level={_fmt(spec.level, m)}",
        f"critical_value={_fmt(spec.critical_value, m)}",
        f"contained={'true' if contained else 'false'}",
    ]
    _emit(lines, args.output)
    return 0 if contained else 1


def _cmd_contour(args) -> int:
    model, sample = _load(args)
    methods = _parse_methods(args.methods)
    axes_vals = _parse_vector(args.axes, "--axes", 2)
    axes = (int(axes_vals[0]), int(axes_vals[1]))
    bounds_vals = _parse_vector(args.bounds, "--bounds", 4)
    bounds = (
        (bounds_vals[0], bounds_vals[1]),
        (bounds_vals[2], bounds_vals[3]),
    )
    res_vals = _parse_vector(args.resolution, "--resolution", 2)
    resolution = (int(res_vals[0]), int(res_vals[1]))
    fixed = {}
    if args.fixed:
        for item in args.fixed.split(","):
            if "=" not in item:
                raise InvalidArgumentError(
                    f"--fixed expects index=value pairs, got '{item}'"
                )
            key, value = item.split("=", 1)
            fixed[int(key)] = float(value)
    table = contour_grid(
        model,
        sample,
        methods,
        axes,
        bounds,
        resolution,
        fixed=fixed,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    _emit(table.format_lines(), args.output)
    return 0


def _cmd_coverage(args) -> int:
    sizes = [int(v) for v in args.n.split(",")]
    levels = _parse_levels(args.levels)
    methods = _parse_methods(args.methods)
    design_seed = args.design_seed if args.design_seed is not None else args.seed
    reports = []
    for n in sizes:
        config = StudyConfig(
            model_id=args.model,
            n=n,
            levels=levels,
            methods=methods,
            replicates=args.reps,
            seed=args.seed,
            design_seed=design_seed,
            fixed_design=args.fixed_design,
            tol=args.tol,
            max_iter=args.max_iter,
        )
        reports.append(run_coverage(config, workers=args.workers))
    if args.machine:
        lines = report_delimited_lines(reports)
    else:
        lines = format_coverage_table(reports).split("\n")
        total_failures = sum(
            report.cell(m, levels[0]).failures
            for report in reports
            for m in methods
        )
        if total_failures:
            lines.append(f"# excluded solver failures: {total_failures}")
    _emit(lines, None)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write("\n".join(report_delimited_lines(reports)) + "\n")
    return 0


def _add_common(parser):
    parser.add_argument("--tol", type=float, default=1e-8,
                        help="dual-solver residual tolerance")
    parser.add_argument("--max-iter", type=int, default=100,
                        help="dual-solver iteration budget")
    parser.add_argument("--machine", action="store_true",
                        help="full-precision key=value output")
    parser.add_argument("--output", default=None, help="write output to a file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elx",
        description="Empirical likelihood inference for estimating equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="likelihood statistics at one theta")
    p_eval.add_argument("--data", required=True, help="comma-delimited sample file")
    p_eval.add_argument("--model", required=True,
                        help=f"model name ({', '.join(model_names())})")
    p_eval.add_argument("--theta", required=True, help="parameter value, comma-separated")
    p_eval.add_argument("--methods", default="oel,eel1,eel2,bel")
    _add_common(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_region = sub.add_parser("region", help="confidence-region membership")
    p_region.add_argument("--data", required=True)
    p_region.add_argument("--model", required=True)
    p_region.add_argument("--theta", required=True)
    p_region.add_argument("--method", required=True, choices=["oel", "eel1", "eel2", "bel"])
    p_region.add_argument("--level", type=float, required=True)
    _add_common(p_region)
    p_region.set_defaults(func=_cmd_region)

    p_contour = sub.add_parser("contour", help="statistic grid for plotting")
    p_contour.add_argument("--data", required=True)
    p_contour.add_argument("--model", required=True)
    p_contour.add_argument("--methods", default="oel,eel1")
    p_contour.add_argument("--axes", default="0,1", help="two parameter indices")
    p_contour.add_argument("--bounds", required=True,
                           help="lo1,hi1,lo2,hi2 for the two axes")
    p_contour.add_argument("--resolution", default="50,50")
    p_contour.add_argument("--fixed", default="",
                           help="index=value pairs for remaining coordinates")
    _add_common(p_contour)
    p_contour.set_defaults(func=_cmd_contour)

    p_cov = sub.add_parser("coverage", help="Monte Carlo coverage study")
    p_cov.add_argument("--model", required=True, choices=["model1", "model2"])
    p_cov.add_argument("--n", required=True, help="sample size(s), comma-separated")
    p_cov.add_argument("--levels", default="0.9,0.95,0.99")
    p_cov.add_argument("--methods", default="oel,eel1,bel")
    p_cov.add_argument("--reps", type=int, default=1000)
    p_cov.add_argument("--seed", type=int, default=0)
    p_cov.add_argument("--design-seed", type=int, default=None)
    p_cov.add_argument("--fixed-design", action="store_true",
                       help="draw the covariates once and reuse them")
    p_cov.add_argument("--workers", type=int, default=1)
    _add_common(p_cov)
    p_cov.set_defaults(func=_cmd_coverage)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags already; normalize the code
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ElError as exc:
        sys.stderr.write(f"error: {_error_code(exc)}: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: io: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
