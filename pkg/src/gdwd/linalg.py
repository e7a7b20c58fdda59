"""Solvers for the ``(d+1) x (d+1)`` normal system of the ADMM ``(w, beta)`` step.

The coefficient matrix is

    A = [[Z Z^T + mu^2 I + T,  Z y],
         [(Z y)^T,             y^T y]]

where ``T`` is a positive semidefinite proximal term (zero unless the
iterative strategy has switched to its proximal form).  Which solver is
used depends on the problem shape:

* ``direct``     dense Cholesky of ``A`` (``d`` moderate, ``d <= n``)
* ``smw``        Sherman-Morrison-Woodbury with an ``n x n`` Cholesky
* ``iterative``  unpreconditioned PSQMR, switching permanently to a
                 closed-form proximal solve when PSQMR gets expensive

All solvers take the right-hand side *without* the ``T w_prev`` term and
add it themselves, so a mid-run switch of ``T`` stays consistent.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import BreakdownError, NumericalError

log = logging.getLogger(__name__)

D_MAX = 5000
N_MAX = 5000
PSQMR_SWITCH_ITERS = 50
PROXIMAL_RANK = 10
BREAKDOWN_RTOL = 1e-30


class Strategy(str, enum.Enum):
    DIRECT = "direct"
    SMW = "smw"
    ITERATIVE = "iterative"


def choose_strategy(n: int, d: int, d_max: int = D_MAX, n_max: int = N_MAX) -> Strategy:
    if d <= d_max and d <= n:
        return Strategy.DIRECT
    if n <= n_max and n < d:
        return Strategy.SMW
    return Strategy.ITERATIVE


def psqmr_maxit(d: int) -> int:
    return int(10 * math.sqrt(d + 1) + 100)


# --------------------------------------------------------------------------
# PSQMR

def psqmr(applyA: Callable[[np.ndarray], np.ndarray], b, x0=None, tol: float = 1e-8,
          maxit: int = 1000) -> Tuple[np.ndarray, int, float]:
    """Unpreconditioned symmetric QMR for ``A x = b`` with ``A`` symmetric.

    Stops when the residual ``||b - A x_k||`` drops to ``tol`` or after
    ``maxit`` steps.  The residual of ``x_k`` is carried by recurrence (no
    extra matvec) and confirmed with one true matvec before returning.

    Returns ``(x, iterations, residual_norm)``.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    res = b - applyA(x)
    res_norm = np.linalg.norm(res)
    if res_norm <= tol:
        return x, 0, float(res_norm)
    scale = max(np.linalg.norm(b), res_norm)
    tiny = BREAKDOWN_RTOL * scale * scale

    r = res.copy()
    q = r.copy()
    tau = res_norm
    theta = 0.0
    d = np.zeros_like(b)
    Ad = np.zeros_like(b)
    rho = r @ r
    k = 0
    while k < maxit:
        k += 1
        Aq = applyA(q)
        sig = q @ Aq
        if abs(sig) <= tiny:
            raise BreakdownError(f"q^T A q = {sig:.3e} at step {k}")
        alpha = rho / sig
        r = r - alpha * Aq
        theta_prev = theta
        theta = np.linalg.norm(r) / tau
        c = 1.0 / math.sqrt(1.0 + theta * theta)
        tau = tau * theta * c
        coef = c * c * theta_prev * theta_prev
        d = coef * d + (c * c * alpha) * q
        Ad = coef * Ad + (c * c * alpha) * Aq
        x = x + d
        res = res - Ad
        if np.linalg.norm(res) <= tol:
            res = b - applyA(x)
            if np.linalg.norm(res) <= tol:
                break
        rho_new = r @ r
        if rho_new == 0.0:
            # CG residual vanished; x_k equals the CG iterate up to rounding
            res = b - applyA(x)
            break
        if abs(rho) <= tiny:
            raise BreakdownError(f"r^T r = {rho:.3e} at step {k}")
        q = r + (rho_new / rho) * q
        rho = rho_new
    else:
        res = b - applyA(x)
    return x, k, float(np.linalg.norm(res))


# --------------------------------------------------------------------------
# Largest eigenpairs of Z Z^T

def _enforce_gap(lam, V, gap_rtol):
    ell = lam.size
    scale = max(1.0, abs(lam[0]))
    while ell > 1 and lam[ell - 2] - lam[ell - 1] <= gap_rtol * scale:
        ell -= 1
    return lam[:ell], V[:, :ell]


def _power_iteration(matvec, d, tol, maxit, rng):
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxit):
        w = matvec(v)
        lam = v @ w
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, v
        if np.linalg.norm(w - lam * v) <= tol * max(1.0, lam):
            break
        v = w / nrm
    return float(lam), v


def top_eigs(matvec: Callable[[np.ndarray], np.ndarray], d: int, ell: int,
             tol: float = 1e-10, seed: int = 0, dense_below: int = 200,
             gap_rtol: float = 1e-8):
    """Largest ``ell`` eigenpairs of the PSD operator ``v -> Z Z^T v``.

    Uses implicitly restarted Lanczos (ARPACK), or a dense eigensolver
    for ``d < dense_below``.  ``ell`` is reduced until the strict gap
    ``lam[ell-2] > lam[ell-1]`` holds.  If Lanczos fails to converge the
    result falls back to ``ell = 1`` from power iteration.

    Returns ``(lam, V)`` with ``lam`` descending and ``V`` of shape
    ``(d, ell)``.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    rng = np.random.default_rng(seed)
    ell = min(ell, d)
    if d < dense_below or ell >= d - 1:
        M = np.column_stack([matvec(col) for col in np.eye(d)])
        M = 0.5 * (M + M.T)
        lam, V = np.linalg.eigh(M)
        lam, V = lam[::-1][:ell], V[:, ::-1][:, :ell]
        return _enforce_gap(np.array(lam), np.array(V), gap_rtol)
    op = spla.LinearOperator((d, d), matvec=matvec, dtype=float)
    try:
        lam, V = spla.eigsh(op, k=ell, which="LA", tol=tol,
                            maxiter=5 * ell + 100, v0=rng.standard_normal(d))
        order = np.argsort(lam)[::-1]
        lam, V = lam[order], V[:, order]
        resid = np.linalg.norm(
            np.column_stack([matvec(V[:, i]) for i in range(ell)]) - V * lam, axis=0)
        if np.any(resid > 1e3 * tol * max(1.0, lam[0])):
            raise NumericalError("Lanczos Ritz residuals too large")
    except (spla.ArpackNoConvergence, spla.ArpackError, NumericalError) as exc:
        log.warning("Lanczos failed (%s); falling back to power iteration", exc)
        lam1, v1 = _power_iteration(matvec, d, tol, 20 * (5 * ell + 100), rng)
        return np.array([lam1]), v1[:, None]
    return _enforce_gap(lam, V, gap_rtol)


# --------------------------------------------------------------------------
# Proximal term

@dataclass(frozen=True)
class ProximalTerm:
    """``T = lam_l I + sum_{i<l} (lam_i - lam_l) v_i v_i^T - Z Z^T``.

    With this ``T`` the leading block ``Z Z^T + mu^2 I + T`` becomes a
    rank-``(l-1)`` correction of a multiple of the identity.
    """

    lam: np.ndarray
    V: np.ndarray
    mu: float

    @property
    def ell(self) -> int:
        return self.lam.size

    def apply(self, w, Z) -> np.ndarray:
        """``T w`` (``Z`` is needed for the ``- Z Z^T w`` part)."""
        lam_l = self.lam[-1]
        out = lam_l * w - Z @ (Z.T @ w)
        if self.ell > 1:
            Vh = self.V[:, :-1]
            out += Vh @ ((self.lam[:-1] - lam_l) * (Vh.T @ w))
        return out

    def inverse_apply(self, v) -> np.ndarray:
        """``(Z Z^T + mu^2 I + T)^{-1} v`` in closed form."""
        m2 = self.mu * self.mu
        base = 1.0 / (m2 + self.lam[-1])
        out = base * v
        if self.ell > 1:
            Vh = self.V[:, :-1]
            out += Vh @ ((1.0 / (m2 + self.lam[:-1]) - base) * (Vh.T @ v))
        return out

    def dense(self, Z) -> np.ndarray:
        d = self.V.shape[0]
        T = self.lam[-1] * np.eye(d) - _dense(Z @ Z.T)
        if self.ell > 1:
            Vh = self.V[:, :-1]
            T += (Vh * (self.lam[:-1] - self.lam[-1])) @ Vh.T
        return T


def build_proximal_term(Z, mu: float, ell: int = PROXIMAL_RANK, seed: int = 0,
                        tol: float = 1e-10) -> ProximalTerm:
    d = Z.shape[0]
    lam, V = top_eigs(lambda v: Z @ (Z.T @ v), d, max(1, min(ell, d)), tol=tol, seed=seed)
    return ProximalTerm(lam=np.maximum(lam, 0.0), V=V, mu=mu)


def solve_with_proximal(p: ProximalTerm, Z, y, h) -> np.ndarray:
    """Exact solve of the ``T``-augmented system via a scalar Schur complement."""
    d = Z.shape[0]
    h = np.asarray(h, dtype=float)
    zy = Z @ y
    Pzy = p.inverse_apply(zy)
    schur = y @ y - zy @ Pzy
    if not schur > 0:
        raise NumericalError(f"Schur complement {schur:.3e} is not positive")
    beta = (h[d] - Pzy @ h[:d]) / schur
    w = p.inverse_apply(h[:d] - zy * beta)
    return np.append(w, beta)


# --------------------------------------------------------------------------
# Normal-system solvers

def _dense(M) -> np.ndarray:
    return M.toarray() if hasattr(M, "toarray") else np.asarray(M)


class NormalSystemSolver:
    """Common matvec/residual machinery; subclasses implement ``_solve``."""

    strategy: Strategy

    def __init__(self, Z, y, mu: float):
        self.Z = Z
        self.y = np.asarray(y, dtype=float)
        self.mu = float(mu)
        self.d = Z.shape[0]
        self.zy = Z @ self.y
        self.yy = float(self.y @ self.y)
        self.psqmr_iters = 0
        fro2 = float(Z.multiply(Z).sum()) if hasattr(Z, "multiply") else float(np.sum(Z * Z))
        # cheap upper bound on ||A||, used only for rounding floors
        self._anorm = self.mu ** 2 + self.yy + float(np.abs(self.zy).sum()) + 2.0 * fro2

    @property
    def proximal(self) -> Optional[ProximalTerm]:
        return None

    def apply_T(self, w) -> np.ndarray:
        p = self.proximal
        return np.zeros(self.d) if p is None else p.apply(w, self.Z)

    def matvec(self, x) -> np.ndarray:
        """``A x`` including the current proximal term."""
        w, beta = x[:-1], x[-1]
        top = self.Z @ (self.Z.T @ w) + (self.mu * self.mu) * w + self.zy * beta
        if self.proximal is not None:
            top += self.proximal.apply(w, self.Z)
        return np.append(top, self.zy @ w + self.yy * beta)

    def full_rhs(self, h0, w_prev=None) -> np.ndarray:
        h = np.array(h0, dtype=float)
        if self.proximal is not None and w_prev is not None:
            h[:-1] += self.apply_T(w_prev)
        return h

    def residual(self, h0, x, w_prev=None) -> float:
        return float(np.linalg.norm(self.full_rhs(h0, w_prev) - self.matvec(x)))

    def dense_matrix(self) -> np.ndarray:
        d = self.d
        A = np.empty((d + 1, d + 1))
        A[:d, :d] = _dense(self.Z @ self.Z.T) + self.mu ** 2 * np.eye(d)
        if self.proximal is not None:
            A[:d, :d] += self.proximal.dense(self.Z)
        A[:d, d] = A[d, :d] = self.zy
        A[d, d] = self.yy
        return A

    def solve(self, h0, tol: float, x0=None, w_prev=None) -> Tuple[np.ndarray, int]:
        raise NotImplementedError

    def _refine(self, h, x, tol, solve_fn):
        """Direct solves: a few steps of iterative refinement, then check."""
        for _ in range(3):
            r = h - self.matvec(x)
            rn = np.linalg.norm(r)
            floor = 1e-13 * (np.linalg.norm(h) + self._anorm * np.linalg.norm(x))
            if rn <= max(tol, floor):
                return x
            x = x + solve_fn(r)
        rn = np.linalg.norm(h - self.matvec(x))
        floor = 1e-11 * (np.linalg.norm(h) + self._anorm * np.linalg.norm(x))
        if rn > max(tol, floor):
            raise NumericalError(f"direct solve residual {rn:.3e} exceeds tol {tol:.3e}")
        return x


class DirectCholesky(NormalSystemSolver):
    strategy = Strategy.DIRECT

    def __init__(self, Z, y, mu: float):
        super().__init__(Z, y, mu)
        A = self.dense_matrix()
        self._anorm = float(np.abs(A).sum(axis=0).max())
        try:
            self.factor = sla.cho_factor(A, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"Cholesky of A failed: {exc}") from exc

    def _apply_inv(self, h):
        return sla.cho_solve(self.factor, h, check_finite=False)

    def solve(self, h0, tol, x0=None, w_prev=None):
        h = self.full_rhs(h0, w_prev)
        return self._refine(h, self._apply_inv(h), tol, self._apply_inv), 0


class SMWSolver(NormalSystemSolver):
    """Woodbury form: only ``I_n + Z^T Z / mu^2`` is factorized."""

    strategy = Strategy.SMW

    def __init__(self, Z, y, mu: float):
        super().__init__(Z, y, mu)
        n = Z.shape[1]
        m2 = self.mu * self.mu
        G = np.eye(n) + _dense(Z.T @ Z) / m2
        try:
            self.factor = sla.cho_factor(G, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"Cholesky of I + Z^T Z failed: {exc}") from exc
        self.ynorm = math.sqrt(self.yy)
        ybar = np.append(self.y / self.ynorm, 1.0)
        self.Jinv_ybar = self._apply_Jinv(ybar)
        self.denom = 1.0 + ybar @ self.Jinv_ybar

    def _apply_Jinv(self, z):
        return np.append(sla.cho_solve(self.factor, z[:-1], check_finite=False), -z[-1])

    def _apply_inv(self, h):
        m2 = self.mu * self.mu
        Dh = np.append(h[:-1] / m2, h[-1] / self.yy)
        # U^T (D^-1 h)
        t = np.append(self.Z.T @ Dh[:-1] + self.y * Dh[-1], self.ynorm * Dh[-1])
        Ht = self._apply_Jinv(t)
        Ht -= self.Jinv_ybar * ((self.Jinv_ybar @ t) / self.denom)
        # U (H^-1 t)
        Ut = np.append(self.Z @ Ht[:-1], self.y @ Ht[:-1] + self.ynorm * Ht[-1])
        return Dh - np.append(Ut[:-1] / m2, Ut[-1] / self.yy)

    def solve(self, h0, tol, x0=None, w_prev=None):
        h = self.full_rhs(h0, w_prev)
        return self._refine(h, self._apply_inv(h), tol, self._apply_inv), 0


class IterativeSolver(NormalSystemSolver):
    """PSQMR on ``A`` with a one-way switch to the proximal closed form.

    The switch happens when a solve takes more than ``switch_iters``
    steps, fails to converge in ``maxit`` steps, or breaks down.
    """

    strategy = Strategy.ITERATIVE

    def __init__(self, Z, y, mu: float, switch_iters: int = PSQMR_SWITCH_ITERS,
                 ell: int = PROXIMAL_RANK, seed: int = 0, maxit: Optional[int] = None,
                 start_proximal: bool = False):
        super().__init__(Z, y, mu)
        self.switch_iters = switch_iters
        self.ell = ell
        self.seed = seed
        self.maxit = psqmr_maxit(self.d) if maxit is None else maxit
        self._prox: Optional[ProximalTerm] = None
        if start_proximal:
            self.switch_to_proximal()

    @property
    def proximal(self):
        return self._prox

    def switch_to_proximal(self):
        if self._prox is None:
            self._prox = build_proximal_term(self.Z, self.mu, self.ell, seed=self.seed)
            log.info("switched to proximal solve (ell=%d, lam_max=%.4g)",
                     self._prox.ell, self._prox.lam[0])

    def solve(self, h0, tol, x0=None, w_prev=None):
        if self._prox is None:
            h = self.full_rhs(h0, w_prev)
            try:
                x, it, res = psqmr(self.matvec, h, x0, tol, self.maxit)
            except BreakdownError as exc:
                log.info("PSQMR breakdown: %s", exc)
                x, it, res = None, 0, np.inf
            self.psqmr_iters += it
            if res <= tol and it <= self.switch_iters:
                return x, it
            # from here on the system includes T, so re-solve in closed form
            self.switch_to_proximal()
            spent = it
        else:
            spent = 0
        h = self.full_rhs(h0, w_prev)
        return solve_with_proximal(self._prox, self.Z, self.y, h), spent


def make_solver(strategy: Strategy | str, Z, y, mu: float, **kwargs) -> NormalSystemSolver:
    strategy = Strategy(strategy)
    if strategy is Strategy.DIRECT:
        return DirectCholesky(Z, y, mu)
    if strategy is Strategy.SMW:
        return SMWSolver(Z, y, mu)
    return IterativeSolver(Z, y, mu, **kwargs)


def solve_normal_system(s: NormalSystemSolver, h, tol: float, x0=None, w_prev=None):
    """Solve ``A x = h + [T w_prev; 0]`` to residual ``tol``.

    Returns ``(x, psqmr_iterations)``; direct paths report 0 iterations.
    The residual contract is checked on return.
    """
    x, it = s.solve(h, tol, x0=x0, w_prev=w_prev)
    res = s.residual(h, x, w_prev)
    if res > tol:
        floor = 1e-11 * (np.linalg.norm(h) + s._anorm * np.linalg.norm(x))
        if res > floor:
            raise NumericalError(f"normal-system residual {res:.3e} > tol {tol:.3e}")
    return x, it
