"""Chi-square calibration, confidence-region membership, and contour grids.

The chi-square distribution function is computed from the regularized
lower incomplete gamma function P(df/2, x/2), using the power series for
small arguments and the continued fraction for large ones (switching at
x = a + 1); quantiles invert the distribution function by bracketed
bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .eel import (
    DEFAULT_CAP,
    ExpansionFactor,
    bartlett_constant,
    eel_loglik,
    _inverse_full,
)
from .estimator import mele
from .exceptions import InvalidArgumentError, UnsupportedConfigurationError
from .model import EstimatingModel, Sample
from .oel import DEFAULT_MAX_ITER, DEFAULT_TOL, OelEvaluator, oel_loglik

__all__ = [
    "chisq_cdf",
    "chisq_quantile",
    "RegionSpec",
    "make_region_spec",
    "region_contains",
    "contour_grid",
    "GridTable",
]

_EPS = 1e-16
_MAX_TERMS = 500


def _gamma_p_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma by power series (x < a + 1)."""
    if x <= 0.0:
        return 0.0
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_TERMS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    """Regularized upper incomplete gamma by continued fraction (x >= a + 1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_p(a: float, x: float) -> float:
    if x < 0.0 or a <= 0.0:
        raise InvalidArgumentError("incomplete gamma needs a > 0 and x >= 0")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def chisq_cdf(x: float, df: int) -> float:
    """P(chi-square with df degrees of freedom <= x)."""
    if df < 1:
        raise InvalidArgumentError(f"degrees of freedom must be >= 1, got {df}")
    if x <= 0.0:
        return 0.0
    return min(_gamma_p(df / 2.0, x / 2.0), 1.0)


def chisq_quantile(level: float, df: int) -> float:
    """Quantile c with P(chi-square_df <= c) = level, to 1e-10 in the cdf."""
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError(f"level must be in (0, 1), got {level}")
    if df < 1:
        raise InvalidArgumentError(f"degrees of freedom must be >= 1, got {df}")
    lo = 0.0
    hi = df + 10.0 * math.sqrt(2.0 * df)
    while chisq_cdf(hi, df) < level:
        hi *= 2.0
        if hi > 1e10:
            raise InvalidArgumentError(f"quantile bracket failed for level {level}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chisq_cdf(mid, df) < level:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


_METHODS = ("oel", "eel1", "eel2", "bel")


@dataclass(frozen=True)
class RegionSpec:
    """A confidence-region rule: statistic, level, and critical value."""

    method: str
    level: float
    df: int
    critical_value: float

    def __post_init__(self):
        if self.method not in _METHODS:
            raise InvalidArgumentError(
                f"unknown method '{self.method}' (choose from {_METHODS})"
            )
        if not 0.0 < self.level < 1.0:
            raise InvalidArgumentError(f"level must be in (0, 1), got {self.level}")
        if self.critical_value <= 0.0:
            raise InvalidArgumentError("critical value must be positive")


def make_region_spec(model: EstimatingModel, method: str, level: float) -> RegionSpec:
    """Build the region rule for a model: df = q, chi-square critical value."""
    return RegionSpec(
        method=method,
        level=level,
        df=model.q,
        critical_value=chisq_quantile(level, model.q),
    )


def region_contains(
    model: EstimatingModel,
    sample: Sample,
    spec: RegionSpec,
    theta,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> bool:
    """Whether theta lies in the confidence region given by ``spec``.

    Original and Bartlett-corrected regions exclude out-of-domain theta;
    extended regions are defined on the whole parameter space.
    """
    if spec.df != model.q:
        raise InvalidArgumentError(
            f"region spec has df={spec.df} but model '{model.name}' has q={model.q}"
        )
    if spec.method == "eel2" and not model.just_determined:
        raise UnsupportedConfigurationError(
            "second-order extended regions are defined only for "
            "just-determined models"
        )
    c = spec.critical_value
    if spec.method == "oel":
        return oel_loglik(model, sample, theta, tol, max_iter) <= c
    if spec.method == "bel":
        fit = mele(model, sample, tol=tol, max_iter=max_iter)
        b = bartlett_constant(model, sample, fit.theta_tilde)
        factor = max(1.0 - b / sample.n, 0.0)
        loglik = oel_loglik(model, sample, theta, tol, max_iter)
        return bool(np.isfinite(loglik) and factor * loglik <= c)
    order = "first" if spec.method == "eel1" else "second"
    return eel_loglik(model, sample, theta, order, tol=tol, max_iter=max_iter) <= c


@dataclass(frozen=True)
class GridTable:
    """Rectangular statistic table: one row per grid node.

    ``header`` names the columns (theta coordinates first, then one column
    per method); infinite entries render as the token ``inf``.
    """

    header: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def format_lines(self) -> list[str]:
        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(",".join(_format_cell(v) for v in row))
        return lines

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(self.format_lines()) + "\n")


def _format_cell(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return repr(float(value))


def contour_grid(
    model: EstimatingModel,
    sample: Sample,
    methods: Sequence[str],
    axes: tuple[int, int],
    bounds: tuple[tuple[float, float], tuple[float, float]],
    resolution: tuple[int, int],
    fixed: Optional[Mapping[int, float]] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cap: float = DEFAULT_CAP,
) -> GridTable:
    """Evaluate the requested statistics over a rectangular theta grid.

    ``axes`` selects the two parameter indices that vary; ``fixed`` pins
    every remaining coordinate.  Out-of-domain nodes record ``inf`` in the
    original and Bartlett columns while extended columns stay finite.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in _METHODS:
            raise InvalidArgumentError(f"unknown method '{m}'")
    i, j = axes
    if not (0 <= i < model.p and 0 <= j < model.p) or i == j:
        raise InvalidArgumentError(
            f"axes must be two distinct indices in [0, {model.p}), got {axes}"
        )
    if resolution[0] < 2 or resolution[1] < 2:
        raise InvalidArgumentError("resolution must be >= 2 per axis")
    if "eel2" in methods and not model.just_determined:
        raise UnsupportedConfigurationError(
            "second-order extended statistics need a just-determined model"
        )

    template = np.zeros(model.p)
    fixed = dict(fixed or {})
    for k in range(model.p):
        if k in (i, j):
            continue
        if k not in fixed:
            raise InvalidArgumentError(
                f"coordinate {k} is neither an axis nor fixed"
            )
        template[k] = float(fixed[k])

    fit = mele(model, sample, tol=tol, max_iter=max_iter)
    center = fit.theta_tilde
    n = sample.n
    need_b = "bel" in methods or "eel2" in methods
    b = bartlett_constant(model, sample, center) if need_b else None
    bel_factor = max(1.0 - b / n, 0.0) if need_b else None
    first = ExpansionFactor.first(n)
    second = ExpansionFactor.second(n, b) if "eel2" in methods else None
    evaluator = OelEvaluator(model, sample, tol, max_iter)

    xs = np.linspace(bounds[0][0], bounds[0][1], resolution[0])
    ys = np.linspace(bounds[1][0], bounds[1][1], resolution[1])

    header = tuple(f"theta_{k}" for k in range(model.p)) + methods
    rows = []
    for x in xs:
        for y in ys:
            theta = template.copy()
            theta[i] = x
            theta[j] = y
            loglik = evaluator(theta, None)
            values: list[float] = list(theta)
            for m in methods:
                if m == "oel":
                    values.append(loglik)
                elif m == "bel":
                    values.append(
                        bel_factor * loglik if np.isfinite(loglik) else np.inf
                    )
                elif m == "eel1":
                    values.append(
                        _inverse_full(center, first, evaluator, theta, 64, 1e-12, cap)[3]
                    )
                else:
                    values.append(
                        _inverse_full(center, second, evaluator, theta, 64, 1e-12, cap)[3]
                    )
            rows.append(tuple(values))
    return GridTable(header=header, rows=tuple(rows))
