"""Posterior Onsager-Machlup functional and its minimisation (MAP estimation).

For a Gaussian prior with KL standard deviations sigma and a potential Phi,
the posterior OM functional is ``I(u) = |u|_E^2 / 2 + Phi(u)``.  Its
minimiser is the MAP estimate; differences of I predict the limiting ratio
of small-ball masses, ``mu(B(x, r)) / mu(B(x2, r)) -> exp(I(x2) - I(x))``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._workers import derive_seed, ordered_map
from .exceptions import ContractError, NumericalWarning, PotentialEvaluationError
from .measure import SpectralGaussian, as_point, cm_norm_sq, sample
from .potential import Potential

ARMIJO = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 60
CM_NORM_CAP = 1e6
TIE_TOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Posterior:
    """Posterior with unnormalised density exp(-Phi) against a Gaussian prior."""

    prior: SpectralGaussian
    potential: Potential

    def __post_init__(self):
        pdim = self.potential.dim
        if pdim is not None and pdim != self.prior.dim:
            raise ContractError(
                f"potential acts on dimension {pdim}, prior has dimension {self.prior.dim}")

    @property
    def dim(self) -> int:
        return self.prior.dim

    @property
    def ambient_norm(self):
        return self.prior.ambient_norm


def om_value(post: Posterior, u) -> float:
    u = as_point(u, post.dim, "u")
    return 0.5 * float(cm_norm_sq(post.prior, u)) + post.potential(u)


def om_gradient(post: Posterior, u) -> np.ndarray:
    u = as_point(u, post.dim, "u")
    return u / post.prior.sigma ** 2 + post.potential.grad(u)


def om_ratio_prediction(post: Posterior, x, x2) -> float:
    """Predicted small-radius limit of mu(B(x, r)) / mu(B(x2, r))."""
    expo = om_value(post, x2) - om_value(post, x)
    if expo > math.log(np.finfo(float).max):
        warnings.warn("OM ratio prediction overflowed; value saturated",
                      NumericalWarning, stacklevel=2)
        return float(np.finfo(float).max)
    return math.exp(expo)


@dataclass
class OmResult:
    minimizer: np.ndarray
    value: float
    iterations: int
    grad_norm_final: float
    multistart_values: list
    converged: bool
    message: str
    history: list = field(default_factory=list, repr=False)


@dataclass
class _Run:
    u: np.ndarray
    value: float
    iterations: int
    grad_norm: float
    converged: bool
    message: str
    history: list


def _descend(post: Posterior, u0, tol_grad, max_iter) -> _Run:
    """Quasi-Newton descent with Armijo backtracking in whitened coordinates.

    The iterate is v = u / sigma, so the prior term is |v|^2 / 2 and the
    identity is the natural initial inverse Hessian.  Steepest descent is
    used whenever the BFGS direction fails to descend.
    """
    sigma = post.prior.sigma
    phi = post.potential

    def f(v):
        try:
            return 0.5 * float(v @ v) + phi(sigma * v)
        except PotentialEvaluationError:
            return math.inf

    def grad_u(v):
        return v / sigma + phi.grad(sigma * v)

    v = np.asarray(u0, dtype=float) / sigma
    fv = f(v)
    if not math.isfinite(fv):
        return _Run(sigma * v, fv, 0, math.inf, False, "non-finite objective at start", [fv])
    gu = grad_u(v)
    gv = sigma * gu
    H = np.eye(v.size)
    history = [fv]
    it = 0
    status = "max_iter reached"
    converged = False
    while True:
        gnorm = float(np.linalg.norm(gu))
        if gnorm <= tol_grad:
            converged = True
            status = "converged"
            break
        if it >= max_iter:
            break
        if float(np.linalg.norm(v)) > CM_NORM_CAP:
            status = "suspected non-coercive: Cameron-Martin norm of iterate exceeded 1e6"
            break
        d = -H @ gv
        slope = float(gv @ d)
        if not slope < 0:
            H = np.eye(v.size)
            d = -gv
            slope = -float(gv @ gv)
        t = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            v_new = v + t * d
            f_new = f(v_new)
            if f_new <= fv + ARMIJO * t * slope:
                gu_new = grad_u(v_new)
                accepted = True
                break
            noise = 64 * _EPS * (1.0 + abs(fv))
            if abs(t * slope) <= noise and math.isfinite(f_new):
                # f cannot resolve the decrease; the directional derivative still can,
                # so take its secant root and accept on gradient progress
                gu_new = grad_u(v_new)
                dd = float((sigma * gu_new) @ d)
                if dd > slope:
                    ts = t * slope / (slope - dd)
                    v_s = v + ts * d
                    f_s = f(v_s)
                    if f_s <= fv + noise:
                        gu_s = grad_u(v_s)
                        if np.linalg.norm(gu_s) < gnorm:
                            v_new, f_new, gu_new = v_s, f_s, gu_s
                            accepted = True
                            break
                if f_new <= fv and np.linalg.norm(gu_new) < gnorm:
                    accepted = True
                    break
            t *= SHRINK
        if not accepted:
            status = "line search failed"
            break
        gv_new = sigma * gu_new
        s = v_new - v
        yv = gv_new - gv
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            rho = 1.0 / sy
            Hy = H @ yv
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s))
        v, fv, gu, gv = v_new, f_new, gu_new, gv_new
        history.append(fv)
        it += 1
    return _Run(sigma * v, fv, it, float(np.linalg.norm(gu)), converged, status, history)


def minimize_om(post: Posterior, tol_grad: float = 1e-8, max_iter: int = 10_000,
                multistarts: int = 4, seed=0, starts=None) -> OmResult:
    """Multistart minimisation of the posterior OM functional.

    Starts are the origin followed by ``multistarts - 1`` prior draws (or the
    explicit ``starts``).  The lowest value wins; values within 1e-12 are
    broken by the smaller Cameron-Martin norm.  ``converged`` is False and
    ``message`` explains why when the winning run did not reach ``tol_grad``.
    """
    if starts is None:
        if multistarts < 1:
            raise ContractError("multistarts must be at least 1")
        starts = [np.zeros(post.dim)]
        if multistarts > 1:
            starts.extend(sample(post.prior, derive_seed(seed, 0), multistarts - 1))
    starts = [as_point(s, post.dim, "start") for s in starts]
    runs = ordered_map(lambda u0: _descend(post, u0, tol_grad, max_iter), starts)

    best = None
    for run in runs:
        if best is None:
            best = run
            continue
        if run.value < best.value - TIE_TOL:
            best = run
        elif abs(run.value - best.value) <= TIE_TOL:
            if cm_norm_sq(post.prior, run.u) < cm_norm_sq(post.prior, best.u):
                best = run
    return OmResult(
        minimizer=best.u, value=best.value, iterations=best.iterations,
        grad_norm_final=best.grad_norm, multistart_values=[r.value for r in runs],
        converged=best.converged, message=best.message, history=best.history)
