"""Extended and Bartlett-corrected empirical log-likelihood ratios.

The likelihood domain is expanded onto the whole parameter space by a
composite similarity mapping centred at the maximum empirical likelihood
estimate: each point moves radially away from the centre by an expansion
factor that grows with its log-likelihood ratio,

    h(theta) = center + gamma(n, l(theta)) * (theta - center).

The extended ratio at an arbitrary theta is the original ratio evaluated
at the generalized-inverse preimage of theta, found as a univariate root
along the segment from the centre to theta.  A first-order factor
``1 + l/(2n)`` and a second-order factor ``1 + b/(2n) * l**(n**-0.5)``
(b the Bartlett constant) are provided; the Bartlett-corrected ratio
``(1 - b/n) * l`` is also computed here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .estimator import mele
from .exceptions import (
    BelClampWarning,
    DomainViolationError,
    InvalidArgumentError,
    RankDeficiencyError,
    SurjectivityError,
    UnsupportedConfigurationError,
)
from .model import EstimatingModel, Sample
from .oel import DEFAULT_MAX_ITER, DEFAULT_TOL, OelEvaluator, oel_loglik

__all__ = [
    "ExpansionFactor",
    "ElEvaluation",
    "forward_map",
    "inverse_map",
    "eel_loglik",
    "bartlett_constant",
    "bel_loglik",
    "evaluate",
    "DEFAULT_CAP",
]

DEFAULT_CAP = 1e6
_GRID_POINTS = 64
_T_TOL = 1e-12
_MAX_RESCANS = 8


@dataclass(frozen=True)
class ExpansionFactor:
    """Expansion factor of the composite similarity mapping.

    ``order`` is 'first' or 'second'.  The first-order factor is
    ``gamma(l) = 1 + l/(2n)``; the second-order factor is
    ``gamma2(l) = 1 + b/(2n) * l**delta_n`` with ``delta_n = n**-0.5``
    and ``gamma2(0) = 1`` taken as the continuous extension.
    """

    order: str
    n: int
    bartlett_b: Optional[float] = None
    delta_n: Optional[float] = None

    def __post_init__(self):
        if self.order not in ("first", "second"):
            raise InvalidArgumentError(f"unknown expansion order '{self.order}'")
        if self.n < 1:
            raise InvalidArgumentError("sample size must be positive")
        if self.order == "second":
            if self.bartlett_b is None:
                raise InvalidArgumentError(
                    "second-order expansion requires the Bartlett constant"
                )
            if self.delta_n is None:
                object.__setattr__(self, "delta_n", self.n ** -0.5)

    @classmethod
    def first(cls, n: int) -> "ExpansionFactor":
        return cls(order="first", n=n)

    @classmethod
    def second(cls, n: int, bartlett_b: float) -> "ExpansionFactor":
        return cls(order="second", n=n, bartlett_b=bartlett_b)

    def gamma(self, loglik: float) -> float:
        if loglik < 0:
            raise InvalidArgumentError("log-likelihood ratio must be >= 0")
        if self.order == "first":
            return 1.0 + loglik / (2.0 * self.n)
        if loglik == 0.0:
            return 1.0
        return 1.0 + (self.bartlett_b / (2.0 * self.n)) * loglik ** self.delta_n

    def threshold_loglik(self, t: float) -> float:
        """Smallest l with gamma(l) * t >= 1, i.e. the l level at which the
        point at ray coordinate t maps at or beyond the target."""
        if t <= 0.0:
            return math.inf
        if t >= 1.0:
            return 0.0
        if self.order == "first":
            return 2.0 * self.n * (1.0 - t) / t
        if self.bartlett_b is None or self.bartlett_b <= 0.0:
            return math.inf
        ratio = 2.0 * self.n * (1.0 - t) / (self.bartlett_b * t)
        if ratio <= 0.0:
            return 0.0
        log_l = math.log(ratio) / self.delta_n
        if log_l > 700.0:
            return math.inf
        return math.exp(log_l)


@dataclass(frozen=True)
class ElEvaluation:
    """All likelihood-ratio statistics at one theta.

    ``oel`` and ``bel`` are +inf outside the likelihood domain; ``eel1``
    (and ``eel2`` for just-determined models) are finite everywhere.
    ``preimage`` is the generalized-inverse point under the first-order
    mapping and ``preimage_residual`` the norm of its forward-mapping
    defect.
    """

    theta: np.ndarray
    oel: float
    eel1: float
    eel2: Optional[float]
    bel: Optional[float]
    preimage: np.ndarray
    preimage_residual: float
    inside: bool
    theta_tilde: np.ndarray
    bartlett_b: Optional[float]


def forward_map(center, factor: ExpansionFactor, oel_fn: Callable, theta) -> np.ndarray:
    """Image of an in-domain theta under the composite similarity mapping.

    ``oel_fn(theta, cap=None)`` must return the log-likelihood ratio,
    +inf outside the domain (see :class:`~elx.oel.OelEvaluator`).
    """
    center = np.asarray(center, dtype=float)
    theta = np.asarray(theta, dtype=float)
    loglik = oel_fn(theta, None)
    if not np.isfinite(loglik):
        raise DomainViolationError(
            "forward mapping is defined only on the likelihood domain"
        )
    return center + factor.gamma(loglik) * (theta - center)


def _probe(point_fn, factor, oel_fn, t, cap):
    """Sign of phi(t) = gamma(l(t)) * t - 1 plus the exact l when negative.

    Points whose (monotonically grown) likelihood value reaches the
    positivity threshold, the evaluation cap, or the domain boundary are
    classified positive without being resolved further.
    """
    threshold = factor.threshold_loglik(t)
    cap_eval = min(cap, threshold)
    loglik = oel_fn(point_fn(t), cap_eval)
    if not np.isfinite(loglik) or loglik >= cap_eval:
        return True, loglik
    return factor.gamma(loglik) * t - 1.0 >= 0.0, loglik


def _bisect(point_fn, factor, oel_fn, t_lo, t_hi, cap, t_tol):
    """Shrink a sign-change bracket; returns (t, l) on the negative side."""
    l_lo = None
    while t_hi - t_lo > t_tol:
        mid = 0.5 * (t_lo + t_hi)
        positive, loglik = _probe(point_fn, factor, oel_fn, mid, cap)
        if positive:
            t_hi = mid
        else:
            t_lo, l_lo = mid, loglik
    return t_lo, l_lo


def _inverse_full(center, factor, oel_fn, theta, grid_points, t_tol, cap):
    """Generalized inverse along the segment [center, theta].

    Returns (preimage, residual, t, loglik_at_preimage).  Implements the
    largest-root rule: after a root of phi is located, the remaining
    interval up to t = 1 is rescanned until no further sign change exists.
    """
    center = np.asarray(center, dtype=float)
    theta = np.asarray(theta, dtype=float)
    delta = theta - center
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        return center.copy(), 0.0, 1.0, oel_fn(center, None)

    def point(t):
        return center + t * delta

    def scan(lo, lo_is_negative, lo_loglik):
        """Scan (lo, 1] for the last sign change; None when phi >= 0 throughout."""
        bracket = None
        prev_t, prev_neg, prev_l = lo, lo_is_negative, lo_loglik
        any_positive = False
        ts = np.linspace(lo, 1.0, grid_points + 1)[1:]
        for t in ts:
            positive, loglik = _probe(point, factor, oel_fn, t, cap)
            any_positive = any_positive or positive
            if prev_neg and positive:
                bracket = (prev_t, t, prev_l)
            prev_t, prev_neg, prev_l = t, not positive, loglik
        return bracket, any_positive, prev_neg

    bracket, any_positive, end_negative = scan(0.0, True, None)
    if bracket is None:
        if not any_positive and end_negative:
            raise SurjectivityError(
                "no root of the inverse equation exists on [0, 1]; the "
                "expansion factor does not reach the requested point"
            )
        # phi >= 0 already at the first grid point: root lies in (0, 1/grid].
        bracket = (0.0, 1.0 / grid_points, None)

    t_root, l_root = _bisect(point, factor, oel_fn, bracket[0], bracket[1], cap, t_tol)
    if l_root is None:
        l_root = bracket[2]

    for _ in range(_MAX_RESCANS):
        if 1.0 - t_root <= t_tol:
            break
        rebracket, _, _ = scan(t_root, False, None)
        if rebracket is None:
            break
        t_root, l_root = _bisect(
            point, factor, oel_fn, rebracket[0], rebracket[1], cap, t_tol
        )
        if l_root is None:
            l_root = rebracket[2]

    if l_root is None:
        l_root = oel_fn(point(t_root), None)
    preimage = point(t_root)
    residual = abs(factor.gamma(l_root) * t_root - 1.0) * dist
    return preimage, residual, t_root, l_root


def inverse_map(
    center,
    factor: ExpansionFactor,
    oel_fn: Callable,
    theta,
    *,
    grid_points: int = _GRID_POINTS,
    t_tol: float = _T_TOL,
    cap: float = DEFAULT_CAP,
):
    """Generalized inverse of the composite similarity mapping.

    Parametrizes candidates as ``center + t * (theta - center)`` for
    t in [0, 1] and returns ``(preimage, residual)`` for the root of
    ``gamma(n, l(t)) * t = 1`` closest to theta, with ``residual`` the
    distance between the forward image of the preimage and theta.
    """
    preimage, residual, _, _ = _inverse_full(
        center, factor, oel_fn, theta, grid_points, t_tol, cap
    )
    return preimage, residual


def bartlett_constant(model: EstimatingModel, sample: Sample, theta_ref) -> float:
    """Moment plug-in estimate of the Bartlett correction constant.

    Standardizes the estimating-function values at ``theta_ref`` (normally
    the maximum empirical likelihood estimate) and combines their third
    and fourth sample moments:

        b = q^-1 * [ (1/2) sum_{j,k} m(jjkk) - (1/3) sum_{j,k,l} m(jkl)^2 ].

    For q = 1 this is ``m4/2 - m3^2/3``.  Raises
    :class:`RankDeficiencyError` when the covariance of the values is
    singular.
    """
    theta_ref = np.asarray(theta_ref, dtype=float)
    gmat = model.g_values(sample.rows, theta_ref)
    n = gmat.shape[0]
    centred = gmat - gmat.mean(axis=0)
    cov = (centred.T @ centred) / n
    eigval, eigvec = np.linalg.eigh(cov)
    if eigval.min() <= 1e-12 * max(eigval.max(), 1.0):
        raise RankDeficiencyError(
            "covariance of the estimating-function values is singular"
        )
    inv_sqrt = eigvec @ np.diag(eigval ** -0.5) @ eigvec.T
    z = centred @ inv_sqrt

    sq_norms = np.einsum("ij,ij->i", z, z)
    fourth = float(np.mean(sq_norms ** 2))  # sum_{j,k} m(jjkk)
    cross = z @ z.T
    third_sq = float(np.sum(cross ** 3)) / (n * n)  # sum_{j,k,l} m(jkl)^2
    return (0.5 * fourth - third_sq / 3.0) / model.q


def bel_loglik(
    model: EstimatingModel,
    sample: Sample,
    theta,
    b: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Bartlett-corrected ratio (1 - b/n) * l(theta); +inf off-domain.

    A factor that would be negative (b >= n) is clamped to zero with a
    :class:`BelClampWarning`.
    """
    n = sample.n
    factor = 1.0 - b / n
    if factor <= 0.0:
        warnings.warn(
            f"Bartlett factor 1 - b/n = {factor:.3g} clamped to 0 (b={b:.3g}, n={n})",
            BelClampWarning,
            stacklevel=2,
        )
        factor = 0.0
    loglik = oel_loglik(model, sample, theta, tol, max_iter)
    if not np.isfinite(loglik):
        return np.inf
    return factor * loglik


def eel_loglik(
    model: EstimatingModel,
    sample: Sample,
    theta,
    order: str = "first",
    *,
    center=None,
    bartlett_b: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cap: float = DEFAULT_CAP,
) -> float:
    """Extended empirical log-likelihood ratio, finite on all of R^p.

    ``order='second'`` is defined for just-determined models only and
    uses the Bartlett constant (estimated at the centre when not given).
    ``center`` may be passed to reuse a precomputed maximum empirical
    likelihood estimate.
    """
    if order not in ("first", "second"):
        raise InvalidArgumentError(f"unknown expansion order '{order}'")
    if order == "second" and not model.just_determined:
        raise UnsupportedConfigurationError(
            "second-order extended likelihood is defined only for "
            f"just-determined models (model '{model.name}' has q={model.q} > "
            f"p={model.p})"
        )
    if center is None:
        center = mele(model, sample, tol=tol, max_iter=max_iter).theta_tilde
    center = np.asarray(center, dtype=float)
    if order == "second":
        if bartlett_b is None:
            bartlett_b = bartlett_constant(model, sample, center)
        factor = ExpansionFactor.second(sample.n, bartlett_b)
    else:
        factor = ExpansionFactor.first(sample.n)
    evaluator = OelEvaluator(model, sample, tol, max_iter)
    _, _, _, loglik = _inverse_full(
        center, factor, evaluator, theta, _GRID_POINTS, _T_TOL, cap
    )
    return loglik


def evaluate(
    model: EstimatingModel,
    sample: Sample,
    theta,
    methods=("oel", "eel1", "eel2", "bel"),
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cap: float = DEFAULT_CAP,
) -> ElEvaluation:
    """Evaluate every requested likelihood-ratio statistic at theta.

    The second-order statistic is reported as None for over-determined
    models.  Used by the command-line ``eval`` subcommand.
    """
    theta = np.asarray(theta, dtype=float)
    fit = mele(model, sample, tol=tol, max_iter=max_iter)
    center = fit.theta_tilde
    evaluator = OelEvaluator(model, sample, tol, max_iter)

    loglik = evaluator(theta, None)
    inside = bool(np.isfinite(loglik))

    b = None
    if ("bel" in methods or "eel2" in methods):
        b = bartlett_constant(model, sample, center)

    preimage, residual, _, eel1 = _inverse_full(
        center, ExpansionFactor.first(sample.n), evaluator, theta,
        _GRID_POINTS, _T_TOL, cap,
    )

    eel2 = None
    if "eel2" in methods and model.just_determined:
        _, _, _, eel2 = _inverse_full(
            center, ExpansionFactor.second(sample.n, b), evaluator, theta,
            _GRID_POINTS, _T_TOL, cap,
        )

    bel = None
    if "bel" in methods:
        factor = 1.0 - b / sample.n
        if factor <= 0.0:
            warnings.warn(
                f"Bartlett factor 1 - b/n = {factor:.3g} clamped to 0",
                BelClampWarning,
                stacklevel=2,
            )
            factor = 0.0
        bel = factor * loglik if inside else np.inf

    return ElEvaluation(
        theta=theta,
        oel=loglik,
        eel1=eel1,
        eel2=eel2,
        bel=bel,
        preimage=preimage,
        preimage_residual=residual,
        inside=inside,
        theta_tilde=center,
        bartlett_b=b,
    )
