"""Potentials (negative log-likelihoods) and numerical checks of their hypotheses.

A :class:`Potential` wraps a scalar function of a coordinate vector, an
optional analytic gradient and an optional batched evaluator.  Shipped
potentials are additive-noise misfits ``|y - G(x)|^2 / (2 noise_sd^2)`` and
the negative norm ``-a |x|_X``, which is unbounded below yet satisfies the
quadratic lower bound ``Phi(x) >= K(eta) - eta |x|_X^2`` for every eta > 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import ContractError, PotentialEvaluationError
from .measure import SpectralGaussian, ambient_norm, as_point, cm_norm_sq, sample

FD_REL_STEP = 1e-6
PROBE_SCALES = (1.0, 2.0, 4.0, 8.0)


def fd_step(x):
    return np.maximum(FD_REL_STEP, FD_REL_STEP * np.abs(x))


def finite_difference_gradient(f: Callable, x) -> np.ndarray:
    """Central differences with step max(1e-6, 1e-6 |x_i|) per coordinate."""
    x = np.asarray(x, dtype=float)
    steps = fd_step(x)
    g = np.empty_like(x)
    for i, h in enumerate(steps):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g


def relative_error(a, b, floor=1e-12) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / scale)


@dataclass(frozen=True)
class Potential:
    """Evaluatable potential Phi with optional analytic gradient.

    ``evaluate`` maps a 1-D point to a float.  ``batch`` (optional) maps an
    ``(n, d)`` array to ``n`` values and is used by the Monte Carlo
    estimators; it must agree with ``evaluate`` row by row.  User-supplied
    callables must be pure.
    """

    evaluate: Callable
    gradient: Optional[Callable] = None
    label: str = "potential"
    batch: Optional[Callable] = field(default=None, repr=False)
    dim: Optional[int] = None

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        v = float(self.evaluate(x))
        if not np.isfinite(v):
            raise PotentialEvaluationError(
                f"{self.label}: non-finite value {v} at x={x.tolist()}", point=x.copy())
        return v

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.gradient is None:
            return finite_difference_gradient(self, x)
        g = np.asarray(self.gradient(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise PotentialEvaluationError(
                f"{self.label}: non-finite gradient at x={x.tolist()}", point=x.copy())
        return g

    @property
    def has_analytic_gradient(self) -> bool:
        return self.gradient is not None

    def evaluate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.batch is not None:
            vals = np.asarray(self.batch(xs), dtype=float)
        else:
            vals = np.array([self.evaluate(row) for row in xs], dtype=float)
        bad = ~np.isfinite(vals)
        if np.any(bad):
            point = xs[np.argmax(bad)]
            raise PotentialEvaluationError(
                f"{self.label}: non-finite value at x={point.tolist()}", point=point.copy())
        return vals


def zero_potential(dim: Optional[int] = None) -> Potential:
    return Potential(
        evaluate=lambda x: 0.0,
        gradient=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        label="zero",
        batch=lambda xs: np.zeros(np.asarray(xs).shape[0]),
        dim=dim,
    )


def constant_potential(value: float, dim: Optional[int] = None) -> Potential:
    value = float(value)
    return Potential(
        evaluate=lambda x: value,
        gradient=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        label=f"constant({value})",
        batch=lambda xs: np.full(np.asarray(xs).shape[0], value),
        dim=dim,
    )


def quadratic_misfit(G, y, noise_sd: float) -> Potential:
    """Phi(x) = |y - G x|^2 / (2 noise_sd^2) for a linear observation matrix G."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if G.ndim != 2:
        raise ContractError("G must be a matrix")
    if G.shape[0] != y.size:
        raise ContractError(
            f"G has {G.shape[0]} rows but the observation has length {y.size}")
    if not noise_sd > 0:
        raise ContractError("noise_sd must be positive")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(y))):
        raise ContractError("G and y must be finite")
    prec = 1.0 / noise_sd ** 2
    G.setflags(write=False)
    y.setflags(write=False)

    def evaluate(x):
        r = y - G @ x
        return 0.5 * prec * float(r @ r)

    def gradient(x):
        return prec * (G.T @ (G @ x - y))

    def batch(xs):
        r = y - xs @ G.T
        return 0.5 * prec * np.sum(r * r, axis=1)

    return Potential(evaluate, gradient, label="quadratic_misfit", batch=batch, dim=G.shape[1])


def nonlinear_misfit(G: Callable, y, noise_sd: float, jacobian: Optional[Callable] = None,
                     G_batch: Optional[Callable] = None, label="nonlinear_misfit",
                     dim: Optional[int] = None) -> Potential:
    """Phi(x) = |y - G(x)|^2 / (2 noise_sd^2) for a smooth forward map G.

    Without ``jacobian`` the gradient falls back to central differences.
    ``G_batch``, when given, maps ``(n, d)`` inputs to ``(n, m)`` outputs.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not noise_sd > 0:
        raise ContractError("noise_sd must be positive")
    prec = 1.0 / noise_sd ** 2

    def forward(x):
        gx = np.atleast_1d(np.asarray(G(x), dtype=float))
        if gx.shape != y.shape or not np.all(np.isfinite(gx)):
            raise PotentialEvaluationError(
                f"{label}: forward map returned {gx.tolist()} at x={np.asarray(x).tolist()}",
                point=np.array(x, dtype=float))
        return gx

    def evaluate(x):
        r = y - forward(x)
        return 0.5 * prec * float(r @ r)

    gradient = None
    if jacobian is not None:
        def gradient(x):
            J = np.atleast_2d(np.asarray(jacobian(x), dtype=float))
            return prec * (J.T @ (forward(x) - y))

    batch = None
    if G_batch is not None:
        def batch(xs):
            r = y - np.asarray(G_batch(xs), dtype=float)
            return 0.5 * prec * np.sum(r * r, axis=1)

    return Potential(evaluate, gradient, label=label, batch=batch, dim=dim)


def cubic_misfit(y, noise_sd: float = 1.0) -> Potential:
    """Misfit for the componentwise cubic forward map G(x) = x^3."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return nonlinear_misfit(
        lambda x: np.asarray(x, dtype=float) ** 3, y, noise_sd,
        jacobian=lambda x: np.diag(3.0 * np.asarray(x, dtype=float) ** 2),
        G_batch=lambda xs: xs ** 3,
        label="cubic_misfit", dim=y.size)


def unbounded_below_example(a: float, norm: str = "l2") -> Potential:
    """Phi(x) = -a |x|_X; satisfies Phi(x) >= -a^2/(4 eta) - eta |x|_X^2."""
    if not a > 0:
        raise ContractError("a must be positive")
    a = float(a)

    def evaluate(x):
        return -a * float(ambient_norm(x, norm))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        if norm == "l2":
            nx = np.sqrt(x @ x)
            if nx > 0:
                g = -a * x / nx
        else:
            k = int(np.argmax(np.abs(x)))
            g[k] = -a * np.sign(x[k])
        return g

    def batch(xs):
        return -a * ambient_norm(xs, norm)

    return Potential(evaluate, gradient, label=f"neg_norm(a={a}, {norm})", batch=batch)


def neg_norm_bound_constant(a: float, eta: float) -> float:
    """Best K(eta) for -a|x|: minimum of -a t + eta t^2 over t >= 0."""
    return -a * a / (4.0 * eta)


# ---------------------------------------------------------------------------
# sampled falsification of the growth hypotheses


def probe_points(m: SpectralGaussian, n: int, seed) -> np.ndarray:
    """Prior draws followed by the same draws scaled by 2, 4 and 8."""
    base = sample(m, seed, n)
    return np.concatenate([s * base for s in PROBE_SCALES], axis=0)


def _witness(n, seed):
    return (f"{n} prior draws at scales {', '.join(f'{s:g}' for s in PROBE_SCALES)}"
            f" (seed {seed})")


@dataclass
class PotentialBound:
    """Sampled evidence for Phi(x) >= K - eta |x|_X^2.

    ``violations`` holds the offending points sorted by margin, worst first;
    an empty array means the bound held on every probe.
    """

    eta: float
    K: float
    witnessed_on: str
    n_checked: int
    violations: np.ndarray
    margins: np.ndarray
    min_margin: float

    @property
    def holds(self) -> bool:
        return len(self.violations) == 0

    @property
    def worst(self):
        return self.violations[0] if len(self.violations) else None


def verify_bound(p: Potential, m: SpectralGaussian, eta: float, K: float, n: int, seed,
                 tol: float = 1e-12) -> PotentialBound:
    if n < 1:
        raise ContractError("n must be at least 1")
    if not eta > 0:
        raise ContractError("eta must be positive")
    xs = probe_points(m, n, seed)
    phi = p.evaluate_many(xs)
    quad = eta * m.norm(xs) ** 2
    margin = phi + quad - K
    bad = margin < -tol * (1.0 + np.abs(phi) + quad + abs(K))
    order = np.argsort(margin[bad], kind="stable")
    return PotentialBound(
        eta=float(eta), K=float(K), witnessed_on=_witness(n, seed), n_checked=len(xs),
        violations=xs[bad][order], margins=margin[bad][order],
        min_margin=float(margin.min()))


@dataclass
class CoercivityReport:
    """Sampled evidence for A + Phi(u) + |u|_E^2 / 2 >= c |u|_E^2."""

    A: float
    c: float
    witnessed_on: str
    n_checked: int
    violations: np.ndarray
    margins: np.ndarray
    min_margin: float

    @property
    def holds(self) -> bool:
        return len(self.violations) == 0


def verify_coercivity(p: Potential, m: SpectralGaussian, A: float, c: float, n: int, seed,
                      tol: float = 1e-12) -> CoercivityReport:
    if not c > 0:
        raise ContractError("c must be positive")
    if n < 1:
        raise ContractError("n must be at least 1")
    us = probe_points(m, n, seed)
    phi = p.evaluate_many(us)
    e2 = cm_norm_sq(m, us)
    margin = A + phi + 0.5 * e2 - c * e2
    bad = margin < -tol * (1.0 + abs(A) + np.abs(phi) + e2)
    order = np.argsort(margin[bad], kind="stable")
    return CoercivityReport(
        A=float(A), c=float(c), witnessed_on=_witness(n, seed), n_checked=len(us),
        violations=us[bad][order], margins=margin[bad][order],
        min_margin=float(margin.min()))


def gradient_check(p: Potential, points) -> float:
    """Largest relative error between ``p.grad`` and central differences."""
    worst = 0.0
    for x in np.atleast_2d(points):
        x = as_point(x)
        worst = max(worst, relative_error(p.grad(x), finite_difference_gradient(p, x)))
    return worst
