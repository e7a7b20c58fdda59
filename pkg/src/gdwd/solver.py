"""Inexact symmetric Gauss-Seidel ADMM for generalized DWD.

One iteration updates the blocks in the order ``(w, beta) -> r ->
(w, beta) -> (u, xi) -> multipliers``.  The second ``(w, beta)`` solve
is skipped whenever the first solution already meets the relaxed
accuracy bound for the updated right-hand side.  ``variant="direct"``
always skips it, which gives the directly extended 3-block ADMM.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import linalg
from .errors import NumericalError
from .linalg import NormalSystemSolver, Strategy, choose_strategy, make_solver
from .metrics import Residuals, classification_error, kkt_residuals, should_stop
from .model import ProblemData, ScaledProblem, TrainedModel, scale_problem
from .subproblems import project_ball, project_nonneg, solve_r_block

log = logging.getLogger(__name__)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
SIGMA_THETA = 5.0
SIGMA_PERIOD = 3
STEP1C_SLACK = 5.0

LOG_COLUMNS = ("k", "sigma", "etaP", "etaD", "etaC", "etaGap", "primObj", "dualObj",
               "psqmrIters", "double")


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    NUMERICAL_FAILURE = "NumericalFailure"


class Variant(str, enum.Enum):
    SGS = "sgs"
    DIRECT = "direct"


@dataclass
class SolverOptions:
    max_iter: int = 2000
    tol: float = 1e-5
    steplength: float = 1.618
    sigma0: Optional[float] = None
    variant: Variant = Variant.SGS
    strategy: str = "auto"
    d_max: int = linalg.D_MAX
    n_max: int = linalg.N_MAX
    eps_c: float = 1.0
    mu: float = 1.0
    seed: int = 0
    psqmr_switch: int = linalg.PSQMR_SWITCH_ITERS
    prox_rank: int = linalg.PROXIMAL_RANK
    sigma_clamp: float = 1e8
    sigma_period: int = SIGMA_PERIOD

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if not 0.0 < self.steplength < GOLDEN:
            raise ValueError(f"steplength must lie in (0, {GOLDEN:.6f})")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.sigma_period < 1:
            raise ValueError("sigma_period must be >= 1")


@dataclass
class SolverState:
    r: np.ndarray
    xi: np.ndarray
    alpha: np.ndarray
    w: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    beta: float
    sigma: float
    k: int = 0
    doubles: int = 0
    psqmr_iters: int = 0
    newton_iters: int = 0
    newton_coords: int = 0

    def copy(self) -> "SolverState":
        return dataclasses.replace(
            self, **{f: getattr(self, f).copy() for f in ("r", "xi", "alpha", "w", "u", "rho")})


@dataclass
class StepInfo:
    psqmr_iters: int
    double: bool
    newton_iters: np.ndarray


@dataclass
class SolveResult:
    model: TrainedModel
    status: Status
    log: List[dict] = field(default_factory=list)
    residuals: Optional[Residuals] = None
    state: Optional[SolverState] = None
    strategy: Optional[Strategy] = None
    solve_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.log)

    @property
    def doubles(self) -> int:
        return self.state.doubles if self.state is not None else 0

    @property
    def psqmr_iters(self) -> int:
        return self.state.psqmr_iters if self.state is not None else 0

    @property
    def mean_newton_iters(self) -> float:
        s = self.state
        return s.newton_iters / s.newton_coords if s is not None and s.newton_coords else 0.0


def initial_sigma(sp: ScaledProblem) -> float:
    return min(10.0 * sp.C, sp.n) ** sp.q


def initialize(sp: ScaledProblem, sigma0: Optional[float] = None) -> SolverState:
    """Primal-feasible start ``r = xi = 1``, everything else zero."""
    n, d = sp.n, sp.d
    return SolverState(
        r=np.ones(n), xi=np.ones(n), alpha=np.zeros(n),
        w=np.zeros(d), u=np.zeros(d), rho=np.zeros(d), beta=0.0,
        sigma=initial_sigma(sp) if sigma0 is None else float(sigma0),
    )


def epsilon_schedule(k: int, c: float, ztilde_fro: float) -> float:
    """Summable inexactness tolerances ``c' / (k+1)^1.5``."""
    return (c / max(1.0, ztilde_fro)) / (k + 1) ** 1.5


def update_sigma(sigma: float, eta_P: float, eta_D: float) -> float:
    """Rebalance primal and dual residuals by scaling the penalty."""
    if eta_P == 0.0 and eta_D == 0.0:
        return sigma
    chi = math.inf if eta_D == 0.0 else eta_P / eta_D
    ratio = max(chi, 1.0 / chi) if chi > 0 else math.inf
    if ratio > 500:
        zeta = 2.2
    elif ratio > 50:
        zeta = 1.65
    else:
        zeta = 1.1
    if chi > SIGMA_THETA:
        return sigma * zeta
    if chi == 0.0 or 1.0 / chi > SIGMA_THETA:
        return sigma / zeta
    return sigma


def dual_balance_measure(res: Residuals, state: SolverState, prev: SolverState,
                         sp: ScaledProblem) -> float:
    """Dual-side residual fed to :func:`update_sigma`.

    ``eta_D`` alone only measures the box violation of ``alpha`` and is
    exactly zero whenever the multipliers stay inside ``[0, Ce]``, which
    would push ``sigma`` up without bound.  It is combined with the usual
    ADMM dual residual, the change of the ``(u, xi)`` block mapped through
    the constraints of the ``(w, beta, r)`` block and scaled by ``sigma``:

        sigma * [Ztilde dxi - mu^2 du ; y^T dxi ; -dxi] / (1 + C)
    """
    dxi = state.xi - prev.xi
    du = state.u - prev.u
    mu = sp.D_mu
    top = sp.Ztilde @ dxi - (mu * mu) * du
    nrm = math.sqrt(float(top @ top) + float(sp.y @ dxi) ** 2 + float(dxi @ dxi))
    return max(res.eta_D, state.sigma * nrm / (1.0 + sp.C))


def _rhs(sp: ScaledProblem, state: SolverState, r) -> np.ndarray:
    """Right-hand side of the ``(w, beta)`` system without the ``T w`` term."""
    mu = sp.D_mu
    v = state.xi - r - state.alpha / state.sigma
    top = -(sp.Ztilde @ v) + (mu * mu) * state.u + (mu / state.sigma) * state.rho
    return np.append(top, -(sp.y @ v))


def iterate(state: SolverState, sp: ScaledProblem, linsys: NormalSystemSolver,
            options: SolverOptions, eps_k: float):
    """One full ADMM pass; returns ``(new_state, StepInfo)``."""
    Z, y, sigma, mu = sp.Ztilde, sp.y, state.sigma, sp.D_mu
    x0 = np.append(state.w, state.beta)

    # (w, beta) with the old r
    h_bar = _rhs(sp, state, state.r)
    xbar, it1 = linalg.solve_normal_system(linsys, h_bar, eps_k, x0=x0, w_prev=state.w)
    psqmr = it1

    # r
    c = Z.T @ xbar[:-1] + y * xbar[-1] + state.xi - state.alpha / sigma
    r, newton_it = solve_r_block(c, sp.q, sigma, sp.tau, state.r, eps_k)

    # (w, beta) again with the new r, unless the first solution is good enough
    double = False
    x = xbar
    if options.variant is Variant.SGS:
        h = _rhs(sp, state, r)
        if linsys.residual(h, xbar, state.w) > STEP1C_SLACK * eps_k:
            x, it2 = linalg.solve_normal_system(linsys, h, STEP1C_SLACK * eps_k, x0=xbar,
                                                w_prev=state.w)
            psqmr += it2
            double = True
    w, beta = x[:-1], float(x[-1])

    # (u, xi)
    Ztw = Z.T @ w
    u = project_ball(w - state.rho / (sigma * mu), sp.ball_radius)
    xi = project_nonneg(r - Ztw - y * beta + (state.alpha - sp.C * sp.e) / sigma)

    # multipliers
    step = options.steplength * sigma
    alpha = state.alpha - step * (Ztw + y * beta + xi - r)
    rho = state.rho - (step * mu) * (w - u)

    new = SolverState(
        r=r, xi=xi, alpha=alpha, w=w, u=u, rho=rho, beta=beta, sigma=sigma,
        k=state.k + 1, doubles=state.doubles + int(double),
        psqmr_iters=state.psqmr_iters + psqmr,
        newton_iters=state.newton_iters + int(newton_it.sum()),
        newton_coords=state.newton_coords + newton_it.size,
    )
    return new, StepInfo(psqmr_iters=psqmr, double=double, newton_iters=newton_it)


def _resolve_strategy(sp: ScaledProblem, options: SolverOptions) -> Strategy:
    if options.strategy in (None, "auto"):
        return choose_strategy(sp.n, sp.d, options.d_max, options.n_max)
    return Strategy(options.strategy)


def build_linear_solver(sp: ScaledProblem, options: SolverOptions) -> NormalSystemSolver:
    strategy = _resolve_strategy(sp, options)
    kwargs = {}
    if strategy is Strategy.ITERATIVE:
        kwargs = dict(switch_iters=options.psqmr_switch, ell=options.prox_rank,
                      seed=options.seed)
    return make_solver(strategy, sp.Ztilde, sp.y, sp.D_mu, **kwargs)


def _to_model(state: SolverState, sp: ScaledProblem) -> TrainedModel:
    # the ball projection only matters up to the primal residual tolerance
    w = project_ball(state.w, sp.ball_radius) / sp.Z_scale
    return TrainedModel(w=w, beta=float(state.beta), q=sp.q, C=sp.C, Z_scale=sp.Z_scale)


def solve(p: ProblemData, options: Optional[SolverOptions] = None) -> SolveResult:
    """Train a DWD classifier; see :class:`SolverOptions` for the knobs."""
    options = options or SolverOptions()
    t0 = time.perf_counter()
    sp = scale_problem(p, options.mu)
    state = initialize(sp, options.sigma0)
    sigma_lo, sigma_hi = state.sigma / options.sigma_clamp, state.sigma * options.sigma_clamp
    ztf = float(np.sqrt(sp.Ztilde.multiply(sp.Ztilde).sum()))
    rows: List[dict] = []
    res = None
    status = Status.MAX_ITER
    try:
        linsys = build_linear_solver(sp, options)
    except NumericalError as exc:
        log.error("linear solver setup failed: %s", exc)
        return SolveResult(model=_to_model(state, sp), status=Status.NUMERICAL_FAILURE,
                           state=state, solve_time=time.perf_counter() - t0)
    for k in range(options.max_iter):
        eps_k = epsilon_schedule(k, options.eps_c, ztf)
        prev = state
        try:
            state, info = iterate(state, sp, linsys, options, eps_k)
        except NumericalError as exc:
            log.error("iteration %d failed: %s", k + 1, exc)
            status = Status.NUMERICAL_FAILURE
            break
        res = kkt_residuals(state, sp)
        rows.append({
            "k": state.k, "sigma": state.sigma, "etaP": res.eta_P, "etaD": res.eta_D,
            "etaC": res.eta_C, "etaGap": res.eta_gap, "primObj": res.primobj,
            "dualObj": res.dualobj, "psqmrIters": info.psqmr_iters, "double": int(info.double),
        })
        if should_stop(res, options.tol):
            status = Status.CONVERGED
            break
        if state.k % options.sigma_period == 0:
            dual = dual_balance_measure(res, state, prev, sp)
            new_sigma = update_sigma(state.sigma, res.eta_P, dual)
            state.sigma = min(max(new_sigma, sigma_lo), sigma_hi)
    model = _to_model(state, sp)
    elapsed = time.perf_counter() - t0
    model.termination = {
        "status": status.value, "iterations": len(rows), "strategy": linsys.strategy.value,
        "psqmr": state.psqmr_iters, "double": state.doubles, "time": elapsed,
    }
    if res is not None:
        model.termination.update(etaP=res.eta_P, etaD=res.eta_D, etaC=res.eta_C,
                                 etaGap=res.eta_gap, primObj=res.primobj, dualObj=res.dualobj)
    return SolveResult(model=model, status=status, log=rows, residuals=res, state=state,
                       strategy=linsys.strategy, solve_time=elapsed)


def training_error(result: SolveResult, p: ProblemData) -> float:
    return classification_error(result.model.w, result.model.beta, p.X, p.y)
