"""Original empirical log-likelihood ratio via the Lagrange dual.

For a parameter value theta the empirical likelihood ratio maximizes the
product of n multinomial weights subject to the moment constraint
``sum_i w_i g(X_i, theta) = 0``.  By Lagrange duality the log ratio is

    l(theta) = 2 * sum_i log(1 + lam' g_i),

where the multiplier ``lam`` solves ``sum_i g_i / (1 + lam' g_i) = 0``.
The value is defined (finite) exactly when zero is an interior point of
the convex hull of the ``g_i``; outside that domain l is taken to be
+infinity.

The solver is a damped Newton method on the convex dual
``f(lam) = -sum_i log(1 + lam' g_i)`` with a backtracking line search that
keeps every ``1 + lam' g_i >= 1/n`` (the feasibility floor implied by
weights being at most one).  Infeasible theta are detected either by a
separating direction discovered during the iteration or by an exact hull
test based on a small linear program.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

from .exceptions import (
    DomainViolationError,
    NonConvergenceError,
    RankDeficiencyError,
)
from .model import EstimatingModel, Sample, check_pairing, finite_difference_jacobian

__all__ = [
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
    "DualSolution",
    "DomainStatus",
    "in_domain",
    "solve_dual",
    "oel_loglik",
    "oel_gradient",
    "OelEvaluator",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100

# Outcome codes of the raw Newton iteration.
_OK = "ok"
_CAPPED = "capped"
_ESCAPED = "escaped"
_STUCK = "stuck"


@dataclass(frozen=True)
class DualSolution:
    """Converged dual solution at one theta.

    Attributes
    ----------
    lam : ndarray (q,)
        Lagrange multiplier.
    loglik_ratio : float
        l(theta) = 2 * sum log(1 + lam' g_i), always >= 0.
    weights : ndarray (n,)
        Implied probabilities w_i = 1 / (n (1 + lam' g_i)).
    iterations : int
        Newton iterations used.
    converged : bool
    max_residual : float
        Infinity norm of the multiplier equation residual.
    """

    lam: np.ndarray
    loglik_ratio: float
    weights: np.ndarray
    iterations: int
    converged: bool
    max_residual: float


@dataclass(frozen=True)
class DomainStatus:
    """Membership certificate for the likelihood domain.

    Exactly one of the two certificates is present: strictly positive
    witness weights with ``sum w_i g_i = 0`` when inside, or a direction v
    with ``v' g_i >= 0`` for all i when not inside.
    """

    inside: bool
    witness_weights: Optional[np.ndarray] = None
    separating_direction: Optional[np.ndarray] = None

    def __post_init__(self):
        has_w = self.witness_weights is not None
        has_v = self.separating_direction is not None
        if has_w == has_v:
            raise ValueError("exactly one certificate kind must be present")


def _hull_status(gmat: np.ndarray) -> DomainStatus:
    """Exact interior-point test for 0 against the hull of the rows of gmat.

    Solves a small linear program maximizing the minimum weight subject to
    ``sum w_i g_i = 0`` and ``sum w_i = 1``; zero is interior iff the
    optimum is strictly positive.  Otherwise a separating direction is
    produced by a second linear program (or from the null space when the
    g_i span a proper subspace).
    """
    n, q = gmat.shape

    # Degenerate span: any null direction of the g_i separates weakly.
    rank = np.linalg.matrix_rank(gmat)
    if rank < q:
        _, _, vt = np.linalg.svd(gmat)
        v = vt[-1]
        return DomainStatus(inside=False, separating_direction=v / np.linalg.norm(v))

    # max s  s.t.  s <= w_i,  sum w_i g_i = 0,  sum w_i = 1,  w >= 0.
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_eq = np.zeros((q + 1, n + 1))
    a_eq[:q, :n] = gmat.T
    a_eq[q, :n] = 1.0
    b_eq = np.zeros(q + 1)
    b_eq[q] = 1.0
    a_ub = np.zeros((n, n + 1))
    a_ub[:, :n] = -np.eye(n)
    a_ub[:, n] = 1.0
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=np.zeros(n),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0.0, 1.0)] * n + [(0.0, 1.0)],
        method="highs",
    )
    if res.status == 0 and res.x is not None and res.x[-1] > 1e-12:
        w = np.maximum(res.x[:n], 1e-300)
        w = w / w.sum()
        return DomainStatus(inside=True, witness_weights=w)

    # Not interior: find v maximizing the total clearance sum_i v' g_i
    # subject to v' g_i >= 0, |v_j| <= 1.  The optimum is nonzero whenever
    # zero lies on or outside the hull boundary.
    res2 = linprog(
        -gmat.sum(axis=0),
        A_ub=-gmat,
        b_ub=np.zeros(n),
        bounds=[(-1.0, 1.0)] * q,
        method="highs",
    )
    v = None
    if res2.status == 0 and res2.x is not None:
        cand = np.asarray(res2.x, dtype=float)
        if np.linalg.norm(cand) > 1e-9:
            v = cand / np.linalg.norm(cand)
    if v is None:
        # Fall back to the mean direction; valid when all g_i sit in a
        # half space containing the mean.
        gbar = gmat.mean(axis=0)
        v = gbar / np.linalg.norm(gbar)
    return DomainStatus(inside=False, separating_direction=v)


def in_domain(model: EstimatingModel, sample: Sample, theta) -> DomainStatus:
    """Test whether theta lies in the likelihood domain.

    Membership means zero is an interior point of the convex hull of the
    estimating-function values at theta; the returned certificate is
    either a strictly positive witness weight vector or a separating
    direction.
    """
    check_pairing(model, sample)
    gmat = model.g_values(sample.rows, np.asarray(theta, dtype=float))
    if model.q == 1:
        status = _one_dim_outside(gmat)
        if status is not None:
            return status
    return _hull_status(gmat)


def _newton_dual(
    gmat: np.ndarray,
    tol: float,
    max_iter: int,
    warm: Optional[np.ndarray] = None,
    cap: Optional[float] = None,
    on_iterate: Optional[Callable[[float], None]] = None,
):
    """Damped Newton on the convex dual.  Returns (code, payload).

    code _OK      -> payload is a DualSolution
    code _CAPPED  -> payload is a lower bound for l(theta) (>= cap)
    code _ESCAPED -> payload is a separating direction or None
    code _STUCK   -> payload is a diagnostics dict
    """
    n, q = gmat.shape
    floor = 1.0 / n

    lam = np.zeros(q)
    u = np.ones(n)
    if warm is not None:
        u_try = 1.0 + gmat @ warm
        if u_try.min() >= floor:
            lam = np.asarray(warm, dtype=float).copy()
            u = u_try

    fval = -np.sum(np.log(u))
    if on_iterate is not None:
        on_iterate(fval)

    iterations = 0
    for iterations in range(1, max_iter + 1):
        r = gmat.T @ (1.0 / u)
        max_residual = float(np.abs(r).max())
        if max_residual <= tol:
            sum_w = float(np.sum(1.0 / u)) / n
            if abs(sum_w - 1.0) <= 1e-8:
                weights = 1.0 / (n * u)
                loglik = 2.0 * float(np.sum(np.log(u)))
                return _OK, DualSolution(
                    lam=lam,
                    loglik_ratio=max(loglik, 0.0),
                    weights=weights,
                    iterations=iterations - 1,
                    converged=True,
                    max_residual=max_residual,
                )
            # Residual vanished only because the multiplier escaped to
            # infinity; the implied weights no longer sum to one.
            direction = lam / np.linalg.norm(lam) if np.linalg.norm(lam) > 0 else None
            if direction is not None and (gmat @ direction).min() >= 0.0:
                return _ESCAPED, direction
            return _ESCAPED, None

        # A multiplier pointing into the closed polar cone of the g_i is a
        # weak separating direction: conclusive proof theta is outside.
        if iterations > 1 and (u.min() >= 1.0) and np.linalg.norm(lam) > 0:
            direction = lam / np.linalg.norm(lam)
            if (gmat @ direction).min() >= 0.0:
                return _ESCAPED, direction

        loglik_now = -2.0 * fval
        if cap is not None and loglik_now >= cap:
            return _CAPPED, loglik_now

        hw = gmat / u[:, None]
        hess = hw.T @ hw
        try:
            step = np.linalg.solve(hess, r)
        except np.linalg.LinAlgError:
            return _STUCK, {
                "lam": lam,
                "max_residual": max_residual,
                "iterations": iterations,
                "reason": "singular dual Hessian",
            }

        gd = gmat @ step
        neg = gd < 0
        if np.any(neg):
            s_max = float(np.min((u[neg] - floor) / (-gd[neg])))
        else:
            s_max = np.inf
        s = min(1.0, s_max)
        if s <= 0.0:
            return _STUCK, {
                "lam": lam,
                "max_residual": max_residual,
                "iterations": iterations,
                "reason": "line search pinned at the feasibility floor",
            }

        slope = float(r @ step)
        accepted = False
        while s > 1e-14:
            u_try = u + s * gd
            if u_try.min() >= floor * (1.0 - 1e-12):
                f_try = -np.sum(np.log(u_try))
                if f_try <= fval - 1e-4 * s * slope:
                    accepted = True
                    break
            s *= 0.5
        if not accepted:
            return _STUCK, {
                "lam": lam,
                "max_residual": max_residual,
                "iterations": iterations,
                "reason": "no acceptable step",
            }

        lam = lam + s * step
        u = u_try
        fval = f_try
        if on_iterate is not None:
            on_iterate(fval)

    r = gmat.T @ (1.0 / u)
    return _STUCK, {
        "lam": lam,
        "max_residual": float(np.abs(r).max()),
        "iterations": iterations,
        "reason": "iteration budget exhausted",
    }


def _one_dim_outside(gmat: np.ndarray) -> Optional[DomainStatus]:
    """Cheap exact domain test for q = 1; None when zero is interior."""
    col = gmat[:, 0]
    if col.min() >= 0.0:
        return DomainStatus(inside=False, separating_direction=np.array([1.0]))
    if col.max() <= 0.0:
        return DomainStatus(inside=False, separating_direction=np.array([-1.0]))
    return None


def solve_dual(
    model: EstimatingModel,
    sample: Sample,
    theta,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    warm_start: Optional[np.ndarray] = None,
    on_iterate: Optional[Callable[[float], None]] = None,
) -> DualSolution:
    """Solve the dual problem at theta.

    Returns a converged :class:`DualSolution` whose multiplier satisfies
    the moment equation to ``tol`` in infinity norm.  Raises
    :class:`DomainViolationError` (with a separating certificate) when
    theta is outside the likelihood domain and
    :class:`NonConvergenceError` when the iteration budget is exhausted
    on a feasible problem.
    """
    check_pairing(model, sample)
    theta = np.asarray(theta, dtype=float)
    gmat = model.g_values(sample.rows, theta)

    if model.q == 1:
        status = _one_dim_outside(gmat)
        if status is not None:
            raise DomainViolationError(
                f"theta={theta.tolist()} is outside the likelihood domain",
                certificate=status,
            )

    code, payload = _newton_dual(
        gmat, tol, max_iter, warm=warm_start, on_iterate=on_iterate
    )
    if code == _OK:
        return payload
    if code == _ESCAPED and payload is not None:
        raise DomainViolationError(
            f"theta={theta.tolist()} is outside the likelihood domain",
            certificate=DomainStatus(inside=False, separating_direction=payload),
        )

    status = _hull_status(gmat)
    if not status.inside:
        raise DomainViolationError(
            f"theta={theta.tolist()} is outside the likelihood domain",
            certificate=status,
        )
    diagnostics = payload if isinstance(payload, dict) else {}
    raise NonConvergenceError(
        f"dual solver did not converge at theta={theta.tolist()}",
        diagnostics=diagnostics,
    )


def oel_loglik(
    model: EstimatingModel,
    sample: Sample,
    theta,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Original empirical log-likelihood ratio l(theta).

    Returns +inf for theta outside the likelihood domain.  Solver
    non-convergence on a feasible theta propagates.
    """
    try:
        return solve_dual(model, sample, theta, tol, max_iter).loglik_ratio
    except DomainViolationError:
        return np.inf


def _gradient_from_solution(
    model: EstimatingModel, sample: Sample, theta, sol: DualSolution
) -> np.ndarray:
    jac = model.jacobian_values(sample.rows, theta)  # (n, q, p)
    u = 1.0 + model.g_values(sample.rows, theta) @ sol.lam
    contrib = np.einsum("nqp,q->np", jac, sol.lam) / u[:, None]
    return 2.0 * contrib.sum(axis=0)


def oel_gradient(
    model: EstimatingModel,
    sample: Sample,
    theta,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Gradient of l at an interior theta.

    Uses the envelope identity: the multiplier is stationary, so only the
    explicit theta dependence contributes,
    ``J(theta) = 2 sum_i G_i' lam / (1 + lam' g_i)``.
    Falls back to central differences of :func:`oel_loglik` when the model
    carries no analytic Jacobian.
    """
    theta = np.asarray(theta, dtype=float)
    sol = solve_dual(model, sample, theta, tol, max_iter)
    if model.dg_dtheta is not None or model.dg_batch is not None:
        return _gradient_from_solution(model, sample, theta, sol)
    grad = np.empty(model.p)
    for j in range(model.p):
        h = 1e-6 * (1.0 + abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (
            oel_loglik(model, sample, up, tol, max_iter)
            - oel_loglik(model, sample, dn, tol, max_iter)
        ) / (2.0 * h)
    return grad


class OelEvaluator:
    """Repeated l(theta) evaluation with multiplier warm starts.

    Callable as ``evaluator(theta, cap=None)``.  Returns l(theta), +inf
    when theta is outside the domain, and, when ``cap`` is given, any
    value >= cap as soon as the (monotonically growing) objective shows
    l(theta) >= cap.  Warm starts never change converged values, only the
    path taken to them; a fresh instance gives a deterministic sequence.
    """

    def __init__(
        self,
        model: EstimatingModel,
        sample: Sample,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
    ):
        check_pairing(model, sample)
        self.model = model
        self.sample = sample
        self.tol = tol
        self.max_iter = max_iter
        self._warm: Optional[np.ndarray] = None

    def __call__(self, theta, cap: Optional[float] = None) -> float:
        gmat = self.model.g_values(self.sample.rows, np.asarray(theta, dtype=float))
        if self.model.q == 1 and _one_dim_outside(gmat) is not None:
            return np.inf
        code, payload = _newton_dual(
            gmat, self.tol, self.max_iter, warm=self._warm, cap=cap
        )
        if code == _OK:
            self._warm = payload.lam
            return payload.loglik_ratio
        if code == _CAPPED:
            return float(payload)
        if code == _ESCAPED:
            return np.inf
        status = _hull_status(gmat)
        if not status.inside:
            return np.inf
        raise NonConvergenceError(
            "dual solver did not converge during a capped evaluation",
            diagnostics=payload if isinstance(payload, dict) else {},
        )
