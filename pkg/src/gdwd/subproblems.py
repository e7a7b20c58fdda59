"""Per-block subproblem solvers: the separable r-update and two projections.

The r-update minimizes, coordinatewise,

    phi(s) = w / s**q + sigma/2 * (s - a)**2,    s > 0,

where ``w = tau**q`` is the weight of the term.  Its optimality condition
``s - a = q w / (sigma s**(q+1))`` has a unique positive root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

NEWTON_MAX_ITER = 50
BISECTION_FLOOR = 1e-12
BISECTION_MAX_ITER = 400


@dataclass
class NewtonReport:
    iterations: int
    grad: float
    used_bisection_init: bool


def _grad(s, a, qw, q, sigma):
    return -qw / s ** (q + 1) + sigma * (s - a)


def phi(s, a, w, q, sigma):
    """Objective of the one-dimensional r-subproblem (``w = tau**q``)."""
    return w / s ** q + 0.5 * sigma * (s - a) ** 2


def _bisect(a, qw, q, sigma, s0, tol):
    """Vectorized bisection on the (increasing) derivative."""
    lo = np.minimum(s0, BISECTION_FLOOR)
    hi = np.maximum(a, 0.0) + (qw / sigma) ** (1.0 / (q + 2)) + 1.0
    # shrink lo until the derivative is negative there
    for _ in range(60):
        bad = _grad(lo, a, qw, q, sigma) >= 0
        if not bad.any():
            break
        lo = np.where(bad, lo * 1e-3, lo)
    s = 0.5 * (lo + hi)
    for _ in range(BISECTION_MAX_ITER):
        g = _grad(s, a, qw, q, sigma)
        done = (np.abs(g) <= tol) | (hi - lo <= 4 * np.finfo(float).eps * hi)
        if done.all():
            break
        neg = g < 0
        lo = np.where(neg & ~done, s, lo)
        hi = np.where(~neg & ~done, s, hi)
        s = np.where(done, s, 0.5 * (lo + hi))
    return s


def _newton_step(s, a, qw_over_sigma, q):
    p1 = s ** (q + 1)
    return s * ((q + 2) * qw_over_sigma + a * p1) / ((q + 1) * qw_over_sigma + s * p1)


def _grad_floor(s, a, qw, q, sigma):
    # rounding level of the derivative evaluation
    return 1e3 * np.finfo(float).eps * (qw / s ** (q + 1) + sigma * (np.abs(s) + np.abs(a)))


def _solve(a, qw, q, sigma, s0, tol):
    a = np.asarray(a, dtype=float)
    qw = np.broadcast_to(np.asarray(qw, dtype=float), a.shape)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), a.shape)
    s = np.array(np.broadcast_to(s0, a.shape), dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("initial point must be positive")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(s))):
        raise NumericalError("non-finite input to the r-subproblem")
    iters = np.zeros(a.shape, dtype=np.int64)
    active = np.abs(_grad(s, a, qw, q, sigma)) > tol
    failed = np.zeros(a.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        sa, aa, qwa = s[idx], a[idx], qw[idx]
        s_new = _newton_step(sa, aa, qwa / sigma, q)
        iters[idx] += 1
        bad = ~(np.isfinite(s_new) & (s_new > 0))
        s_new = np.where(bad, sa, s_new)
        s[idx] = s_new
        failed[idx[bad]] = True
        g = np.abs(_grad(s_new, aa, qwa, q, sigma))
        still = (g > tol[idx]) & (g > _grad_floor(s_new, aa, qwa, q, sigma))
        active[idx] = still & ~bad
    failed |= active
    if failed.any():
        idx = np.flatnonzero(failed)
        af, qwf, tf = a[idx], qw[idx], tol[idx]
        sb = _bisect(af, qwf, q, sigma, s[idx], tf)
        for _ in range(NEWTON_MAX_ITER):
            g = np.abs(_grad(sb, af, qwf, q, sigma))
            todo = (g > tf) & (g > _grad_floor(sb, af, qwf, q, sigma))
            if not todo.any():
                break
            cand = _newton_step(sb, af, qwf / sigma, q)
            ok = todo & np.isfinite(cand) & (cand > 0)
            if not ok.any():
                break
            sb = np.where(ok, cand, sb)
            iters[idx] += ok
        g = np.abs(_grad(sb, af, qwf, q, sigma))
        if np.any(~np.isfinite(sb)) or np.any((g > tf) & (g > _grad_floor(sb, af, qwf, q, sigma))):
            raise NumericalError("Newton/bisection failed on the r-subproblem")
        s[idx] = sb
    return s, iters, failed


def solve_theta_prox(a, qw, q: float, sigma: float, s0, tol):
    """Vectorized Newton for ``argmin_{s>0} w/s**q + sigma/2 (s-a)**2``.

    ``qw`` is ``q * w``, the numerator of the optimality curve.  Newton
    starts from ``s0``.  Coordinates whose iterate leaves ``(0, inf)`` or
    that hit the iteration cap restart from a bisection point.

    Returns ``(s, iterations)``, iterations counted per coordinate.
    """
    s, iters, _ = _solve(a, qw, q, sigma, s0, tol)
    return s, iters


def newton_theta_q(a: float, q: float, sigma: float, s0: float, tol: float,
                   weight: float = 1.0):
    """Scalar form of :func:`solve_theta_prox`; returns ``(s, NewtonReport)``.

    ``weight`` is ``tau**q`` for the weighted model.
    """
    qw = q * weight
    s, it, bis = _solve(np.array([float(a)]), qw, q, sigma, np.array([float(s0)]), tol)
    g = abs(float(_grad(s[0], a, qw, q, sigma)))
    return float(s[0]), NewtonReport(iterations=int(it[0]), grad=g,
                                     used_bisection_init=bool(bis[0]))


def solve_r_block(c, q: float, sigma: float, tau, r_prev, eps_k: float):
    """Step-1b update: per-coordinate prox of ``tau_i**q / r**q``.

    Warm-started from ``r_prev`` with per-coordinate tolerance
    ``eps_k / sqrt(n)``.  Returns ``(r, newton_iterations)``.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    qw = q * np.asarray(tau, dtype=float) ** q
    return solve_theta_prox(c, qw, q, sigma, r_prev, eps_k / np.sqrt(n))


def project_ball(g, radius: float):
    nrm = np.linalg.norm(g)
    if nrm <= radius:
        return np.array(g, dtype=float)
    return np.asarray(g, dtype=float) * (radius / nrm)


def project_nonneg(v):
    return np.maximum(np.asarray(v, dtype=float), 0.0)
