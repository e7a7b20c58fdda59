"""Problem data, class weighting, penalty heuristic and data scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidInputError
from .ingest import build_Z

DEFAULT_DISTANCE_CAP = 1000
DEFAULT_DISTANCE_SEED = 0


def _as_csc(X) -> sp.csc_matrix:
    if sp.issparse(X):
        X = X.tocsc()
    else:
        X = sp.csc_matrix(np.atleast_2d(np.asarray(X, dtype=float)))
    X = X.astype(float)
    X.sort_indices()
    return X


@dataclass(frozen=True)
class ProblemData:
    """A training instance with samples stored as the columns of ``X``.

    ``tau`` holds the per-sample weights of the weighted objective
    ``sum tau_i**q / r_i**q``; all ones gives the plain model.
    """

    X: sp.csc_matrix
    y: np.ndarray
    q: float = 1.0
    C: float = 1.0
    e: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None

    def __post_init__(self):
        X = _as_csc(self.X)
        y = np.asarray(self.y, dtype=float).ravel()
        d, n = X.shape
        if d < 1 or n < 2:
            raise InvalidInputError(f"need d >= 1 and n >= 2, got d={d}, n={n}")
        if y.shape[0] != n:
            raise InvalidInputError(f"label length {y.shape[0]} != n = {n}")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise InvalidInputError("labels must be -1 or +1")
        if not (np.any(y > 0) and np.any(y < 0)):
            raise InvalidInputError("both classes must be present")
        if not (self.q > 0 and math.isfinite(self.q)):
            raise InvalidInputError(f"q must be positive, got {self.q}")
        if not (self.C > 0 and math.isfinite(self.C)):
            raise InvalidInputError(f"C must be positive, got {self.C}")
        e = np.ones(n) if self.e is None else np.asarray(self.e, dtype=float).ravel()
        if e.shape != (n,) or np.any(e <= 0) or not math.isclose(e.max(), 1.0):
            raise InvalidInputError("e must be positive with max entry 1")
        tau = np.ones(n) if self.tau is None else np.asarray(self.tau, dtype=float).ravel()
        if tau.shape != (n,) or np.any(tau <= 0) or np.any(tau > 1.0):
            raise InvalidInputError("tau must lie in (0, 1]")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "C", float(self.C))

    @property
    def d(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def Z(self) -> sp.csc_matrix:
        return build_Z(self.X, self.y)


@dataclass(frozen=True)
class ScaledProblem:
    """The internal form solved by the ADMM loop.

    ``Ztilde = Z / Z_scale`` with ``Z_scale = sqrt(||X||_F)``; the ball
    constraint on the scaled normal vector has radius ``Z_scale``.
    """

    Ztilde: sp.csc_matrix
    Z_scale: float
    y: np.ndarray
    e: np.ndarray
    tau: np.ndarray
    q: float
    C: float
    D_mu: float = 1.0

    @property
    def d(self) -> int:
        return self.Ztilde.shape[0]

    @property
    def n(self) -> int:
        return self.Ztilde.shape[1]

    @property
    def ball_radius(self) -> float:
        return self.Z_scale

    @property
    def theta_weights(self) -> np.ndarray:
        """``tau**q``, the coefficient of ``1/r_i**q`` in the objective."""
        return self.tau ** self.q

    def unscale(self, w_tilde):
        """Map a scaled normal vector (or ``u``) back to data coordinates."""
        return np.asarray(w_tilde) / self.Z_scale


@dataclass
class TrainedModel:
    w: np.ndarray
    beta: float
    q: float
    C: float
    Z_scale: float
    termination: dict = field(default_factory=dict)
    label_map: Optional[dict] = None

    def decision_function(self, X) -> np.ndarray:
        """Signed distances ``beta + x_i^T w`` for the columns of ``X``."""
        X = _as_csc(X)
        return np.asarray(X.T @ self.w).ravel() + self.beta


def median_interclass_distance(X, y, cap: int = DEFAULT_DISTANCE_CAP,
                               seed: int = DEFAULT_DISTANCE_SEED) -> float:
    """Median Euclidean distance between a positive and a negative sample.

    Each class is uniformly subsampled to at most ``cap`` columns with a
    fixed seed, which keeps the cost at ``O(cap**2 d)``.
    """
    X = _as_csc(X)
    y = np.asarray(y).ravel()
    if cap < 2:
        raise InvalidInputError("cap must be >= 2")
    pos = np.flatnonzero(y > 0)
    neg = np.flatnonzero(y < 0)
    if pos.size == 0 or neg.size == 0:
        raise InvalidInputError("both classes must be present")
    rng = np.random.default_rng(seed)
    if pos.size > cap:
        pos = np.sort(rng.choice(pos, cap, replace=False))
    if neg.size > cap:
        neg = np.sort(rng.choice(neg, cap, replace=False))
    A = X[:, pos]
    B = X[:, neg]
    sqa = np.asarray(A.multiply(A).sum(axis=0)).ravel()
    sqb = np.asarray(B.multiply(B).sum(axis=0)).ravel()
    cross = (A.T @ B).toarray()
    d2 = sqa[:, None] + sqb[None, :] - 2.0 * cross
    np.maximum(d2, 0.0, out=d2)
    return float(np.median(np.sqrt(d2)))


def compute_penalty_parameter(n: int, d: int, dist: float, q: float) -> float:
    """Empirical penalty ``C``, inversely proportional to ``dist**(q+1)``."""
    if not dist > 0:
        raise InvalidInputError(f"dist must be positive, got {dist}")
    inner = 10.0 ** (q - 1) * math.log(n) * max(1000, d) ** (1.0 / 3.0) / dist ** (q + 1)
    return 10.0 ** (q + 1) * max(1.0, inner)


def compute_class_weights(y, q: float) -> np.ndarray:
    """Per-sample weights that rebalance unequal class sizes.

    The minority class gets weight 1 and the majority class
    ``(n_min / n_maj) ** (1/(1+q))``.
    """
    y = np.asarray(y).ravel()
    n = y.size
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    if n < 2 or n_pos == 0 or n_neg == 0:
        raise InvalidInputError("both classes must be present")
    K = n / math.log(n)
    tau_pos = (n_pos / K) ** (1.0 / (1.0 + q))
    tau_neg = (n_neg / K) ** (1.0 / (1.0 + q))
    top = max(tau_pos, tau_neg)
    return np.where(y > 0, tau_neg / top, tau_pos / top)


def scale_problem(p: ProblemData, mu: float = 1.0) -> ScaledProblem:
    """Divide ``Z`` by ``sqrt(||X||_F)`` so the constraint blocks have
    comparable magnitude."""
    if not mu > 0:
        raise InvalidInputError(f"mu must be positive, got {mu}")
    fro = spla.norm(p.X, "fro")
    if not fro > 0:
        raise InvalidInputError("X is identically zero")
    z_scale = math.sqrt(fro)
    Zt = (p.Z / z_scale).tocsc()
    return ScaledProblem(Ztilde=Zt, Z_scale=z_scale, y=p.y, e=p.e, tau=p.tau,
                         q=p.q, C=p.C, D_mu=float(mu))
