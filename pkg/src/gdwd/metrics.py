"""KKT residuals, objectives, duality gap and classification error.

Everything here is evaluated on the scaled problem (``Ztilde``, ``w~``,
``u~``); objectives are invariant under the scaling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

STOP_TOL = 1e-5
STOP_LOOSE = 0.05


def kappa(q: float) -> float:
    return (q + 1.0) / q * q ** (1.0 / (q + 1.0))


@dataclass(frozen=True)
class Residuals:
    eta_C1: float
    eta_C2: float
    eta_C3: float
    eta_P1: float
    eta_P2: float
    eta_P3: float
    eta_D1: float
    eta_D2: float
    eta_gap: float
    primobj: float
    dualobj: float

    @property
    def eta_C(self) -> float:
        return max(self.eta_C1, self.eta_C2, self.eta_C3)

    @property
    def eta_P(self) -> float:
        return max(self.eta_P1, self.eta_P2, self.eta_P3)

    @property
    def eta_D(self) -> float:
        return max(self.eta_D1, self.eta_D2)

    def as_dict(self) -> dict:
        out = asdict(self)
        out.update(eta_C=self.eta_C, eta_P=self.eta_P, eta_D=self.eta_D)
        return out


def primal_objective(r, xi, sp) -> float:
    """``sum tau_i^q / r_i^q + C <e, xi>``."""
    return float(np.sum(sp.theta_weights / r ** sp.q) + sp.C * (sp.e @ xi))


def dual_objective(alpha, sp) -> float:
    """``kappa sum (tau_i^q)^{1/(q+1)} alpha_i^{q/(q+1)} - Z_scale ||Ztilde alpha||``.

    Negative entries of ``alpha`` are clamped to zero in the power term;
    they are accounted for by ``eta_D1``.
    """
    q = sp.q
    a = np.maximum(alpha, 0.0)
    power = np.sum(sp.theta_weights ** (1.0 / (q + 1.0)) * a ** (q / (q + 1.0)))
    return float(kappa(q) * power - sp.Z_scale * np.linalg.norm(sp.Ztilde @ alpha))


def duality_gap(primobj: float, dualobj: float) -> float:
    return abs(primobj - dualobj) / (1.0 + abs(primobj) + abs(dualobj))


def kkt_residuals(state, sp, Ztw=None) -> Residuals:
    """All relative KKT residuals of ``state`` for the scaled problem.

    ``state`` needs attributes ``r, w, beta, xi, u, alpha``.  ``Ztw`` may
    pass a precomputed ``Ztilde^T w``.
    """
    C = sp.C
    denom = 1.0 + C
    r, w, beta, xi, u, alpha = state.r, state.w, state.beta, state.xi, state.u, state.alpha
    if Ztw is None:
        Ztw = sp.Ztilde.T @ w
    s = sp.q * sp.theta_weights / r ** (sp.q + 1.0)
    Ce = C * sp.e
    primobj = primal_objective(r, xi, sp)
    dualobj = dual_objective(alpha, sp)
    return Residuals(
        eta_C1=abs(sp.y @ alpha) / denom,
        eta_C2=abs(xi @ (Ce - alpha)) / denom,
        eta_C3=float(np.sum((alpha - s) ** 2)) / denom,
        eta_P1=float(np.linalg.norm(Ztw + beta * sp.y + xi - r)) / denom,
        eta_P2=sp.D_mu * float(np.linalg.norm(w - u)) / denom,
        eta_P3=max(float(np.linalg.norm(w)) - sp.Z_scale, 0.0) / denom,
        eta_D1=float(np.linalg.norm(np.minimum(alpha, 0.0))) / denom,
        eta_D2=float(np.linalg.norm(np.maximum(alpha - Ce, 0.0))) / denom,
        eta_gap=duality_gap(primobj, dualobj),
        primobj=primobj,
        dualobj=dualobj,
    )


def should_stop(res: Residuals, tol: float = STOP_TOL) -> bool:
    """Three-part termination test on the relative residuals."""
    lo, hi = sorted((res.eta_C, res.eta_gap))
    return max(res.eta_P, res.eta_D) < tol and lo < math.sqrt(tol) and hi < STOP_LOOSE


def classification_error(w, beta: float, X, y) -> float:
    """Percentage of samples with ``y_i sgn(beta + x_i^T w) <= 0``.

    A sample exactly on the hyperplane counts as misclassified.
    """
    scores = np.asarray(X.T @ w).ravel() + beta
    wrong = np.asarray(y).ravel() * np.sign(scores) <= 0
    return 100.0 * float(np.count_nonzero(wrong)) / wrong.size


def project_dual_feasible(alpha, y, upper, iters: int = 200):
    """Euclidean projection onto ``{0 <= a <= upper, y^T a = 0}``.

    The projection is ``clip(alpha - lam y, 0, upper)`` for the scalar
    ``lam`` that zeroes ``y^T a``; ``y`` has +-1 entries so the map
    ``lam -> y^T a(lam)`` is monotone and bisection finds it.
    """
    alpha = np.asarray(alpha, dtype=float)

    def a_of(lam):
        return np.clip(alpha - lam * y, 0.0, upper)

    span = float(np.max(np.abs(alpha)) + np.max(upper)) + 1.0
    lo, hi = -span, span
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if y @ a_of(mid) > 0:
            lo = mid
        else:
            hi = mid
    return a_of(0.5 * (lo + hi))


def feasible_objectives(state, sp):
    """Objective values at feasibility-restored copies of an iterate.

    The primal point keeps ``beta``, projects ``w`` onto the ball and
    raises ``xi`` so that ``r >= state.r > 0``; the dual point is the
    projection of ``alpha`` onto the dual feasible set.  The first value
    bounds the optimum from above and the second from below.
    """
    from .subproblems import project_ball

    w = project_ball(state.w, sp.Z_scale)
    base = sp.Ztilde.T @ w + state.beta * sp.y
    xi = np.maximum(np.maximum(state.xi, 0.0), state.r - base)
    r = base + xi
    primobj = primal_objective(r, xi, sp) if np.all(r > 0) else math.inf
    alpha = project_dual_feasible(state.alpha, sp.y, sp.C * sp.e)
    return primobj, dual_objective(alpha, sp)
