"""Estimating-function models and immutable data samples.

An :class:`EstimatingModel` bundles an estimating function ``g(x, theta)``
with its dimensions and an optional analytic Jacobian.  The moment condition
``E[g(X, theta)] = 0`` defines the parameter; the model is just-determined
when ``q == p`` and over-determined when ``q > p``.  Built-in families cover
the multivariate mean, the linear-regression score, and an over-determined
mean-variance example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    DataFormatError,
    InvalidArgumentError,
    InvalidDimensionError,
)

__all__ = [
    "EstimatingModel",
    "Sample",
    "builtin_mean",
    "builtin_linear_regression",
    "builtin_mean_variance",
    "register_model",
    "get_model",
    "model_names",
    "load_sample",
    "finite_difference_jacobian",
]


@dataclass(frozen=True)
class EstimatingModel:
    """An estimating function with its dimensions.

    Parameters
    ----------
    name : str
        Identifier, used by the registry and in error messages.
    d : int
        Observation dimension (length of each data row).
    p : int
        Parameter dimension.
    q : int
        Estimating-function dimension, ``q >= p``.
    g : callable
        ``g(x, theta) -> ndarray of shape (q,)`` for a single observation.
    dg_dtheta : callable, optional
        ``(x, theta) -> ndarray of shape (q, p)``, the Jacobian of ``g``
        with respect to ``theta``.
    g_batch : callable, optional
        Vectorized form ``(rows (n, d), theta) -> (n, q)``.  Falls back to
        a row loop over ``g`` when absent.
    dg_batch : callable, optional
        Vectorized Jacobian ``(rows, theta) -> (n, q, p)``.
    init_guess : callable, optional
        ``rows -> theta`` giving a method-of-moments style starting value.
    mele_method : str
        Label reported by the estimator for just-determined solves.
    """

    name: str
    d: int
    p: int
    q: int
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dg_dtheta: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    g_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(
        default=None, repr=False
    )
    dg_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(
        default=None, repr=False
    )
    init_guess: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False
    )
    mele_method: str = "root-solve"

    def __post_init__(self):
        for label, value in (("d", self.d), ("p", self.p), ("q", self.q)):
            if int(value) < 1:
                raise InvalidDimensionError(
                    f"model dimension {label} must be a positive integer, got {value}"
                )
        if self.q < self.p:
            raise InvalidDimensionError(
                f"estimating-function dimension q={self.q} must be >= parameter "
                f"dimension p={self.p}"
            )

    @property
    def just_determined(self) -> bool:
        return self.q == self.p

    def g_values(self, rows: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Evaluate ``g`` on every row, returning an (n, q) matrix."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p,):
            raise InvalidArgumentError(
                f"theta must have length p={self.p}, got shape {theta.shape}"
            )
        if self.g_batch is not None:
            out = np.asarray(self.g_batch(rows, theta), dtype=float)
        else:
            out = np.asarray([self.g(x, theta) for x in rows], dtype=float)
        if out.shape != (rows.shape[0], self.q):
            raise InvalidArgumentError(
                f"g returned shape {out.shape}, expected {(rows.shape[0], self.q)}"
            )
        return out

    def jacobian_values(self, rows: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Evaluate the theta-Jacobian on every row as an (n, q, p) array.

        Uses the analytic Jacobian when present, otherwise central finite
        differences of ``g``.
        """
        theta = np.asarray(theta, dtype=float)
        if self.dg_batch is not None:
            return np.asarray(self.dg_batch(rows, theta), dtype=float)
        if self.dg_dtheta is not None:
            return np.asarray(
                [self.dg_dtheta(x, theta) for x in rows], dtype=float
            )
        return np.asarray(
            [finite_difference_jacobian(self, x, theta) for x in rows], dtype=float
        )


@dataclass(frozen=True)
class Sample:
    """An immutable batch of n observations in R^d."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InvalidArgumentError(
                f"sample must be a non-empty 2-d array, got shape {rows.shape}"
            )
        if not np.all(np.isfinite(rows)):
            raise InvalidArgumentError("sample contains non-finite values")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, rows) -> "Sample":
        return cls(np.asarray(rows, dtype=float))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def check_pairing(model: EstimatingModel, sample: Sample) -> None:
    """Validate that a sample can be used with a model (d matches, n > q)."""
    if sample.d != model.d:
        raise InvalidDimensionError(
            f"sample rows have dimension {sample.d} but model '{model.name}' "
            f"expects d={model.d}"
        )
    if sample.n <= model.q:
        raise InvalidArgumentError(
            f"sample size n={sample.n} must exceed q={model.q} for model "
            f"'{model.name}'"
        )


def finite_difference_jacobian(
    model: EstimatingModel, x: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Central-difference Jacobian of ``g`` with step 1e-6 * (1 + |theta_j|)."""
    theta = np.asarray(theta, dtype=float)
    jac = np.empty((model.q, model.p))
    for j in range(model.p):
        h = 1e-6 * (1.0 + abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        jac[:, j] = (
            np.asarray(model.g(x, up), dtype=float)
            - np.asarray(model.g(x, dn), dtype=float)
        ) / (2.0 * h)
    return jac


def builtin_mean(dim: int) -> EstimatingModel:
    """Mean model: g(x, theta) = x - theta, just-determined with d = p = q."""
    dim = int(dim)
    if dim < 1:
        raise InvalidDimensionError(f"dim must be >= 1, got {dim}")
    eye = np.eye(dim)

    return EstimatingModel(
        name=f"mean{dim}",
        d=dim,
        p=dim,
        q=dim,
        g=lambda x, theta: np.asarray(x, dtype=float) - theta,
        dg_dtheta=lambda x, theta: -eye,
        g_batch=lambda rows, theta: rows - theta,
        dg_batch=lambda rows, theta: np.broadcast_to(
            -eye, (rows.shape[0], dim, dim)
        ).copy(),
        init_guess=lambda rows: rows.mean(axis=0),
    )


def builtin_linear_regression(covariate_dim: int) -> EstimatingModel:
    """Linear-regression score model.

    Observations are stored as flat rows (y first, then the covariate
    vector x), so d = covariate_dim + 1.  The estimating function is the
    least-squares score g((y, x), beta) = x * (y - x' beta) with
    p = q = covariate_dim; the root of the summed score is the
    least-squares estimate.
    """
    k = int(covariate_dim)
    if k < 1:
        raise InvalidDimensionError(f"covariate_dim must be >= 1, got {k}")

    def g(row, beta):
        row = np.asarray(row, dtype=float)
        x = row[1:]
        return x * (row[0] - x @ beta)

    def dg(row, beta):
        x = np.asarray(row, dtype=float)[1:]
        return -np.outer(x, x)

    def g_batch(rows, beta):
        x = rows[:, 1:]
        resid = rows[:, 0] - x @ beta
        return x * resid[:, None]

    def dg_batch(rows, beta):
        x = rows[:, 1:]
        return -np.einsum("ij,ik->ijk", x, x)

    def least_squares(rows):
        x = rows[:, 1:]
        beta, *_ = np.linalg.lstsq(x, rows[:, 0], rcond=None)
        return beta

    return EstimatingModel(
        name=f"linreg{k}",
        d=k + 1,
        p=k,
        q=k,
        g=g,
        dg_dtheta=dg,
        g_batch=g_batch,
        dg_batch=dg_batch,
        init_guess=least_squares,
        mele_method="least-squares",
    )


def builtin_mean_variance() -> EstimatingModel:
    """Over-determined scalar model: g(x, theta) = (x - theta, (x - theta)^2 - 1).

    Encodes a unit-variance side condition on top of the mean equation, so
    p = 1 and q = 2.  Used to exercise over-determined code paths.
    """

    def g(x, theta):
        r = float(np.asarray(x, dtype=float).reshape(())) - theta[0]
        return np.array([r, r * r - 1.0])

    def dg(x, theta):
        r = float(np.asarray(x, dtype=float).reshape(())) - theta[0]
        return np.array([[-1.0], [-2.0 * r]])

    def g_batch(rows, theta):
        r = rows[:, 0] - theta[0]
        return np.column_stack([r, r * r - 1.0])

    def dg_batch(rows, theta):
        r = rows[:, 0] - theta[0]
        out = np.empty((rows.shape[0], 2, 1))
        out[:, 0, 0] = -1.0
        out[:, 1, 0] = -2.0 * r
        return out

    return EstimatingModel(
        name="meanvar",
        d=1,
        p=1,
        q=2,
        g=g,
        dg_dtheta=dg,
        g_batch=g_batch,
        dg_batch=dg_batch,
        init_guess=lambda rows: rows.mean(axis=0),
    )


# Name-keyed registry so the CLI can select models by string.  Each factory
# receives the observation dimension d of the data file.
_REGISTRY: dict[str, Callable[[int], EstimatingModel]] = {}


def register_model(name: str, factory: Callable[[int], EstimatingModel]) -> None:
    """Register a model factory under a CLI-selectable name.

    The factory is called with the observation dimension of the loaded
    data and must return an :class:`EstimatingModel` with matching d.
    """
    if name in _REGISTRY:
        raise InvalidArgumentError(f"model name '{name}' is already registered")
    _REGISTRY[name] = factory


def get_model(name: str, d: int) -> EstimatingModel:
    """Build the registered model ``name`` for observation dimension ``d``."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise InvalidArgumentError(
            f"unknown model '{name}' (registered: {known})"
        ) from None
    return factory(d)


def model_names() -> list[str]:
    return sorted(_REGISTRY)


def _mean_factory(d: int) -> EstimatingModel:
    return builtin_mean(d)


def _linreg_factory(d: int) -> EstimatingModel:
    if d < 2:
        raise InvalidDimensionError(
            "linreg needs rows (y, x1, ..., xk) with d >= 2"
        )
    return builtin_linear_regression(d - 1)


def _meanvar_factory(d: int) -> EstimatingModel:
    if d != 1:
        raise InvalidDimensionError(f"meanvar expects scalar observations, got d={d}")
    return builtin_mean_variance()


register_model("mean", _mean_factory)
register_model("linreg", _linreg_factory)
register_model("meanvar", _meanvar_factory)


def load_sample(path: str) -> Sample:
    """Read a comma-separated sample file.

    One observation per line, d numeric fields; lines starting with '#'
    are skipped as headers, as are blank lines.
    """
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: non-numeric field in {fields!r}",
                    path=path,
                    line_number=lineno,
                ) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} fields, got {len(values)}",
                    path=path,
                    line_number=lineno,
                )
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no observations found", path=path)
    return Sample.from_rows(rows)
