"""Maximum empirical likelihood estimation.

The estimate minimizes the empirical log-likelihood ratio.  For
just-determined models it is the root of the summed estimating function,
found by damped Newton; for over-determined models the ratio is minimized
by quasi-Newton using the envelope gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .exceptions import DomainViolationError, NonConvergenceError
from .model import EstimatingModel, Sample, check_pairing
from .oel import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    _gradient_from_solution,
    oel_loglik,
    solve_dual,
)

__all__ = ["MeleResult", "mele"]

_ROOT_TOL_SCALE = 1e-9  # tolerance on ||sum g||_inf is this times n
_GRAD_TOL = 1e-8


@dataclass(frozen=True)
class MeleResult:
    """Result of the maximum empirical likelihood fit.

    ``method`` is one of 'root-solve', 'least-squares', or
    'profile-minimize'.
    """

    theta_tilde: np.ndarray
    loglik_at_tilde: float
    method: str
    converged: bool


def _default_init(model: EstimatingModel, sample: Sample) -> np.ndarray:
    if model.init_guess is not None:
        return np.asarray(model.init_guess(sample.rows), dtype=float)
    return np.zeros(model.p)


def _solve_root(
    model: EstimatingModel, sample: Sample, theta0: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Damped Newton on F(theta) = sum_i g(X_i, theta) for q == p."""
    n = sample.n
    tol = _ROOT_TOL_SCALE * n
    theta = theta0.copy()
    fvec = model.g_values(sample.rows, theta).sum(axis=0)
    for _ in range(60):
        norm = np.abs(fvec).max()
        if norm <= tol:
            return theta, True
        jac = model.jacobian_values(sample.rows, theta).sum(axis=0)
        try:
            step = np.linalg.solve(jac, -fvec)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, -fvec, rcond=None)
        s = 1.0
        while s > 1e-12:
            cand = theta + s * step
            f_cand = model.g_values(sample.rows, cand).sum(axis=0)
            if np.abs(f_cand).max() < norm:
                theta, fvec = cand, f_cand
                break
            s *= 0.5
        else:
            return theta, False
    return theta, np.abs(fvec).max() <= tol


def _profile_minimize(
    model: EstimatingModel,
    sample: Sample,
    theta0: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, bool]:
    """Quasi-Newton minimization of l(theta) for over-determined models.

    Out-of-domain evaluations get a smooth penalty pulling back toward the
    last known feasible anchor, which keeps the line search inside the
    domain.
    """
    anchor = theta0.copy()

    def fun_jac(theta):
        try:
            sol = solve_dual(model, sample, theta, tol, max_iter)
        except DomainViolationError:
            diff = theta - anchor
            return 1e10 * (1.0 + diff @ diff), 2e10 * diff
        grad = _gradient_from_solution(model, sample, theta, sol)
        return sol.loglik_ratio, grad

    res = minimize(
        fun_jac,
        theta0,
        jac=True,
        method="BFGS",
        options={"gtol": _GRAD_TOL, "maxiter": 300},
    )
    theta = np.asarray(res.x, dtype=float)
    value, grad = fun_jac(theta)
    converged = float(np.linalg.norm(grad)) <= 1e-6 * (1.0 + abs(value))
    return theta, converged


def mele(
    model: EstimatingModel,
    sample: Sample,
    init=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MeleResult:
    """Compute the maximum empirical likelihood estimate.

    Parameters
    ----------
    model, sample
        Paired model and data (requires n > q).
    init : array-like, optional
        Starting value; defaults to a method-of-moments style guess
        (least squares for regression, sample mean for mean-type models,
        zeros otherwise).

    Raises
    ------
    NonConvergenceError
        When the root solve or profile minimization fails.
    """
    check_pairing(model, sample)
    theta0 = (
        np.asarray(init, dtype=float) if init is not None else _default_init(model, sample)
    )
    if theta0.shape != (model.p,):
        raise NonConvergenceError(
            f"initial value must have length {model.p}, got shape {theta0.shape}"
        )

    if model.just_determined:
        theta, ok = _solve_root(model, sample, theta0)
        if not ok:
            raise NonConvergenceError(
                f"root solve for model '{model.name}' did not converge",
                diagnostics={"theta": theta},
            )
        value = oel_loglik(model, sample, theta, tol, max_iter)
        return MeleResult(
            theta_tilde=theta,
            loglik_at_tilde=value,
            method=model.mele_method,
            converged=True,
        )

    # Over-determined: make sure the start is feasible, restarting from the
    # root of the first p components of g when it is not.
    if not np.isfinite(oel_loglik(model, sample, theta0, tol, max_iter)):
        sub = EstimatingModel(
            name=f"{model.name}[:p]",
            d=model.d,
            p=model.p,
            q=model.p,
            g=lambda x, th: np.asarray(model.g(x, th), dtype=float)[: model.p],
            g_batch=lambda rows, th: model.g_values(rows, th)[:, : model.p],
        )
        theta0, _ = _solve_root(sub, sample, theta0)
        if not np.isfinite(oel_loglik(model, sample, theta0, tol, max_iter)):
            raise NonConvergenceError(
                "no feasible starting point found for the profile minimization",
                diagnostics={"theta": theta0},
            )

    theta, ok = _profile_minimize(model, sample, theta0, tol, max_iter)
    if not ok:
        raise NonConvergenceError(
            f"profile minimization for model '{model.name}' did not converge",
            diagnostics={"theta": theta},
        )
    value = oel_loglik(model, sample, theta, tol, max_iter)
    return MeleResult(
        theta_tilde=theta,
        loglik_at_tilde=value,
        method="profile-minimize",
        converged=True,
    )
