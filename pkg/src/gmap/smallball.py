"""Small-ball probabilities of Gaussian priors and posteriors.

Estimators
----------
All estimators work on a common-random-numbers (CRN) stream: a fixed sample
set, split into fixed-size chunks with seeds derived from the master seed,
is evaluated at every requested ball.  Ratios of masses at different
centres therefore share their noise, and results are identical however the
chunks are scheduled.

``direct``
    Plain draws from the prior; a posterior is handled by self-normalised
    weights exp(-Phi).
``importance_shift``
    Cameron-Martin change of measure to the minimal-norm point h* of the
    ball, which moves the ball next to the origin and turns the density
    ratio into exp(-<g*, u>) <= 1 on the shifted ball.  The shifted ball is
    then sampled exactly inside its bounding box (the prior restricted to a
    box is a product of truncated normals), so hits stay frequent at any
    radius and dimension.
``uniform_ball``
    Uniform draws in the ball weighted by the density; smooth in the centre
    and very accurate once the radius is small next to the prior scales.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from ._workers import derive_seed, ordered_map
from .exceptions import ContractError, NumericalWarning, UndefinedRatioError
from .measure import (Ball, SpectralGaussian, ambient_norm, as_generator, as_point,
                      check_ball, cm_inner, cm_norm_sq)

CHUNK = 1 << 16
LOW_HITS = 100
LOW_ESS = 50.0
KKT_TOL = 1e-8
VI_TOL = 1e-8
METHODS = ("direct", "importance_shift", "uniform_ball", "tilted")
_METHOD_KEY = {"direct": 1, "importance_shift": 2, "uniform_ball": 3, "normalizer": 4,
               "tilted": 5}


def _split(target):
    """(prior, potential-or-None) for a prior or a Posterior."""
    if isinstance(target, SpectralGaussian):
        return target, None
    prior = getattr(target, "prior", None)
    if isinstance(prior, SpectralGaussian):
        return prior, target.potential
    raise ContractError("expected a SpectralGaussian or a Posterior")


# ---------------------------------------------------------------------------
# minimal Cameron-Martin norm over a ball


@dataclass
class BallProjection:
    """Minimiser h* of |h|_E^2 / 2 over the ball, with its dual coefficients g* = h*/sigma^2."""

    minimizer: np.ndarray
    value: float
    dual_coefficients: np.ndarray
    active: bool
    kkt_residual: float
    multiplier: Optional[float] = None


def _l2_multiplier(x, s2, r):
    """Root of |x / (1 + lam s2)|_2 = r on lam >= 0 (requires |x|_2 > r)."""

    def resid(lam):
        return math.sqrt(float(np.sum((x / (1.0 + lam * s2)) ** 2))) - r

    lo, hi = 0.0, 1.0 / float(np.max(s2))
    while resid(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    for _ in range(3):
        q = 1.0 + lam * s2
        nrm = math.sqrt(float(np.sum((x / q) ** 2)))
        deriv = -float(np.sum(x * x * s2 / q ** 3)) / nrm
        step = (nrm - r) / deriv
        cand = lam - step
        if not (lo <= cand <= hi) or step == 0:
            break
        lam = cand
    return lam


def min_cm_in_ball(m: SpectralGaussian, b: Ball) -> BallProjection:
    """Minimise |h|_E^2 / 2 over the closed ball ``b`` in the measure's ambient norm.

    Sup-norm balls are boxes, so the minimiser clips each coordinate towards
    zero.  For Euclidean balls the KKT conditions give
    h_i = x_i lam sigma_i^2 / (1 + lam sigma_i^2) with the scalar lam >= 0
    fixed by |h - x|_2 = r; it is bracketed geometrically, bisected and then
    polished by Newton steps.
    """
    check_ball(m, b)
    x, r = b.center, b.radius
    s2 = m.sigma ** 2
    lam = None
    if m.ambient_norm == "sup":
        h = np.sign(x) * np.maximum(np.abs(x) - r, 0.0)
        active = bool(np.any(np.abs(x) > r))
        g = h / s2
        viol = max(0.0, float(np.max(np.abs(h - x))) - r)
        kkt = viol / (1.0 + r)
    else:
        if math.sqrt(float(x @ x)) <= r:
            h = np.zeros_like(x)
            active = False
            g = h.copy()
            kkt = 0.0
        else:
            active = True
            lam = _l2_multiplier(x, s2, r)
            q = 1.0 + lam * s2
            h = x * (lam * s2) / q
            g = h / s2
            dist = math.sqrt(float(np.sum((x / q) ** 2)))
            stat = float(np.max(np.abs(g - lam * (x - h))))
            kkt = max(abs(dist - r) / (1.0 + r), stat / (1.0 + float(np.max(np.abs(g)))))
    value = 0.5 * float(cm_norm_sq(m, h))
    return BallProjection(h, value, g, active, kkt, lam)


# ---------------------------------------------------------------------------
# CRN sample streams


def _unit_ball_draws(rng, shape_n, dim, norm):
    if norm == "sup":
        return rng.uniform(-1.0, 1.0, (shape_n, dim))
    z = rng.standard_normal((shape_n, dim))
    rad = rng.random(shape_n) ** (1.0 / dim)
    nz = np.sqrt(np.sum(z * z, axis=1))
    nz[nz == 0] = 1.0
    return z * (rad / nz)[:, None]


def log_ball_volume(dim: int, r: float, norm: str) -> float:
    if norm == "sup":
        return dim * math.log(2.0 * r)
    return 0.5 * dim * math.log(math.pi) + dim * math.log(r) - math.lgamma(0.5 * dim + 1.0)


@dataclass
class _ChunkStats:
    offset: np.ndarray   # per-column log scale
    s1: np.ndarray
    s2: np.ndarray
    hits: np.ndarray
    count: int


def _chunk_stats(logc: np.ndarray, hits: np.ndarray) -> _ChunkStats:
    off = np.max(logc, axis=0)
    off = np.where(np.isfinite(off), off, 0.0)
    with np.errstate(under="ignore"):
        a = np.exp(logc - off)
    return _ChunkStats(off, a.sum(axis=0), a.T @ a, hits, logc.shape[0])


def _merge(stats: Sequence[_ChunkStats]):
    off = np.max(np.stack([s.offset for s in stats]), axis=0)
    k = off.size
    s1 = np.zeros(k)
    s2 = np.zeros((k, k))
    hits = np.zeros(k, dtype=np.int64)
    n = 0
    for s in stats:
        scale = np.exp(s.offset - off)
        s1 += s.s1 * scale
        s2 += s.s2 * np.outer(scale, scale)
        hits += s.hits
        n += s.count
    return off, s1, s2, hits, n


@dataclass
class MassTable:
    """Mass estimates at several balls from one CRN sample set.

    ``log_mass`` is on the probability scale (posterior masses normalised).
    ``rel_cov[i, j]`` is the covariance of the relative errors of the
    unnormalised estimates i and j; the normaliser cancels in ratios.
    """

    log_mass: np.ndarray
    rel_se: np.ndarray
    rel_cov: np.ndarray
    hits: np.ndarray
    ess: np.ndarray
    n: int
    method: str
    weighted: bool = False

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_mass)

    @property
    def stderrs(self) -> np.ndarray:
        return self.values * self.rel_se

    def log_ratio(self, i, j) -> float:
        if not np.isfinite(self.log_mass[j]):
            raise UndefinedRatioError("denominator ball has no hits")
        return float(self.log_mass[i] - self.log_mass[j])

    def ratio(self, i, j) -> tuple[float, float]:
        """Ratio mass_i / mass_j and its delta-method standard error."""
        lr = self.log_ratio(i, j)
        if not np.isfinite(lr):
            return 0.0, 0.0
        rv = self.rel_cov[i, i] + self.rel_cov[j, j] - 2.0 * self.rel_cov[i, j]
        if self.method == "direct" and not self.weighted:
            value = float(self.hits[i]) / float(self.hits[j])
        else:
            value = math.exp(lr)
        return value, value * math.sqrt(max(rv, 0.0))


class CrnStream:
    """A reproducible sample set that can be evaluated at any list of balls."""

    def __init__(self, target, n: int, seed, method: str = "importance_shift", key=()):
        if method not in METHODS:
            raise ContractError(f"unknown estimator {method!r}; expected one of {METHODS}")
        if n < 1:
            raise ContractError("n must be at least 1")
        self.prior, self.potential = _split(target)
        self.n = int(n)
        self.seed = seed
        self.method = method
        self.key = tuple(key)
        self._log_norm = None

    @property
    def dim(self):
        return self.prior.dim

    def _chunks(self, tag):
        # the normaliser ignores the stream key, so every stream of one seed shares it
        key = () if tag == "normalizer" else self.key
        n_chunks = -(-self.n // CHUNK)
        for c in range(n_chunks):
            size = min(CHUNK, self.n - c * CHUNK)
            yield c, size, derive_seed(self.seed, *key, _METHOD_KEY[tag], c)

    def _phi(self, xs):
        if self.potential is None:
            return 0.0
        return self.potential.evaluate_many(xs)

    # per-method chunk evaluators return (log contributions, hit indicators)
    def _direct_chunk(self, args, centers, radii):
        _, size, ss = args
        xs = as_generator(ss).standard_normal((size, self.dim)) * self.prior.sigma
        if self.potential is None:
            # unit weights: the sums are integer counts, exactly as the general path gives
            ind = np.stack([ambient_norm(xs - c, self.prior.ambient_norm) <= r
                            for c, r in zip(centers, radii)], axis=1).astype(float)
            hits = ind.sum(axis=0)
            return _ChunkStats(np.zeros(len(centers)), hits, ind.T @ ind,
                               hits.astype(np.int64), size)
        cols, hits = [], []
        logw = -self._phi(xs)
        for c, r in zip(centers, radii):
            ind = ambient_norm(xs - c, self.prior.ambient_norm) <= r
            cols.append(np.where(ind, logw, -np.inf))
            hits.append(int(ind.sum()))
        if self.potential is not None:
            cols.append(logw)
            hits.append(size)
        return _chunk_stats(np.stack(cols, axis=1), np.array(hits))

    def _shift_setup(self, centers, radii):
        m = self.prior
        setups = []
        for c, r in zip(centers, radii):
            proj = min_cm_in_ball(m, Ball(c, r, m.ambient_norm))
            cp = c - proj.minimizer
            lo = (cp - r) / m.sigma
            hi = (cp + r) / m.sigma
            a = special.ndtr(lo)
            width = special.ndtr(hi) - a
            # the shifted box always contains the origin, so width is well resolved
            log_box = float(np.sum(np.log(width)))
            setups.append((proj, cp, r, a, width, lo, hi, log_box - proj.value))
        return setups

    def _shift_chunk(self, args, setups):
        _, size, ss = args
        m = self.prior
        U = as_generator(ss).random((size, self.dim))
        cols, hits = [], []
        for proj, cp, r, a, width, lo, hi, log_const in setups:
            z = special.ndtri(a + U * width)
            u = np.clip(z, lo, hi) * m.sigma
            ind = ambient_norm(u - cp, m.ambient_norm) <= r
            logc = np.full(size, -np.inf)
            if np.any(ind):
                ui = u[ind]
                lc = log_const - ui @ proj.dual_coefficients
                if self.potential is not None:
                    lc = lc - self.potential.evaluate_many(ui + proj.minimizer)
                logc[ind] = lc
            cols.append(logc)
            hits.append(int(ind.sum()))
        return _chunk_stats(np.stack(cols, axis=1), np.array(hits))

    def _tilt_setup(self, centers, radii):
        m = self.prior
        s2 = m.sigma ** 2
        d = self.dim
        setups = []
        for c, r in zip(centers, radii):
            # mean squared distance of a uniform point in the ball from its centre
            tau = r * r * (d / (d + 2.0) if m.ambient_norm == "l2" else d / 3.0)

            def second_moment(lam):
                q = 1.0 + lam * s2
                return float(np.sum(s2 / q + (c / q) ** 2))

            lam = 0.0
            if second_moment(0.0) > tau:
                lo, hi = 0.0, 1.0 / float(np.max(s2))
                while second_moment(hi) > tau:
                    lo, hi = hi, 2.0 * hi
                while hi - lo > 1e-10 * hi:
                    mid = 0.5 * (lo + hi)
                    lo, hi = (mid, hi) if second_moment(mid) > tau else (lo, mid)
                lam = 0.5 * (lo + hi)
            q = 1.0 + lam * s2
            log_z = float(np.sum(-0.5 * np.log(q) - lam * c * c / (2.0 * q)))
            setups.append((c, r, lam, lam * (s2 / q) * c, np.sqrt(s2 / q), log_z))
        return setups

    def _tilt_chunk(self, args, setups):
        _, size, ss = args
        m = self.prior
        z = as_generator(ss).standard_normal((size, self.dim))
        cols, hits = [], []
        for c, r, lam, mean, sd, log_z in setups:
            u = mean + z * sd
            dev = u - c
            ind = ambient_norm(dev, m.ambient_norm) <= r
            logc = np.full(size, -np.inf)
            if np.any(ind):
                lc = log_z + 0.5 * lam * np.sum(dev[ind] ** 2, axis=1)
                if self.potential is not None:
                    lc = lc - self.potential.evaluate_many(u[ind])
                logc[ind] = lc
            cols.append(logc)
            hits.append(int(ind.sum()))
        return _chunk_stats(np.stack(cols, axis=1), np.array(hits))

    def _uniform_chunk(self, args, centers, radii):
        _, size, ss = args
        m = self.prior
        w = _unit_ball_draws(as_generator(ss), size, self.dim, m.ambient_norm)
        cols = []
        for c, r in zip(centers, radii):
            xs = c + r * w
            lc = log_ball_volume(self.dim, r, m.ambient_norm) + m.log_density(xs)
            if self.potential is not None:
                lc = lc - self.potential.evaluate_many(xs)
            cols.append(lc)
        return _chunk_stats(np.stack(cols, axis=1), np.full(len(cols), size))

    def log_normalizer(self):
        """(log Z, relative variance) for Z = E_prior[exp(-Phi)], from its own stream."""
        if self.potential is None:
            return 0.0, 0.0
        if self._log_norm is None:
            def one(args):
                _, size, ss = args
                xs = as_generator(ss).standard_normal((size, self.dim)) * self.prior.sigma
                lw = -self.potential.evaluate_many(xs)
                return _chunk_stats(lw[:, None], np.array([size]))
            off, s1, s2, _, n = _merge(ordered_map(one, self._chunks("normalizer")))
            mean = s1[0] / n
            var = max(s2[0, 0] / n - mean * mean, 0.0)
            self._log_norm = (math.log(mean) + off[0], var / (n * mean * mean))
        return self._log_norm

    def evaluate(self, balls: Sequence[Ball]) -> MassTable:
        """Mass estimates at ``balls`` (all in the prior's ambient norm)."""
        centers, radii = [], []
        for b in balls:
            check_ball(self.prior, b)
            centers.append(b.center)
            radii.append(b.radius)
        k = len(centers)
        if self.method == "direct":
            fn = lambda a: self._direct_chunk(a, centers, radii)
        elif self.method == "importance_shift":
            setups = self._shift_setup(centers, radii)
            fn = lambda a: self._shift_chunk(a, setups)
        elif self.method == "tilted":
            setups = self._tilt_setup(centers, radii)
            fn = lambda a: self._tilt_chunk(a, setups)
        else:
            fn = lambda a: self._uniform_chunk(a, centers, radii)
        off, s1, s2, hits, n = _merge(ordered_map(fn, self._chunks(self.method)))
        mean = s1 / n
        cov = s2 / n - np.outer(mean, mean)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel_cov = cov / (n * np.outer(mean, mean))
            log_unnorm = np.log(mean) + off
            ess = np.where(np.diag(s2) > 0, s1 * s1 / np.diag(s2), 0.0)
        rel_cov = np.where(np.isfinite(rel_cov), rel_cov, np.inf)
        diag = np.maximum(np.diag(rel_cov), 0.0)

        if self.potential is None:
            log_mass = log_unnorm
            rel_var = diag
        elif self.method == "direct":
            t = k  # self-normalising total-weight column appended last
            log_mass = log_unnorm[:k] - log_unnorm[t]
            rel_var = diag[:k] + rel_cov[t, t] - 2.0 * rel_cov[:k, t]
        else:
            log_z, z_var = self.log_normalizer()
            log_mass = log_unnorm - log_z
            rel_var = diag + z_var
        return MassTable(
            log_mass=log_mass[:k], rel_se=np.sqrt(np.maximum(rel_var[:k], 0.0)),
            rel_cov=rel_cov[:k, :k], hits=hits[:k], ess=ess[:k], n=n, method=self.method,
            weighted=self.potential is not None)


# ---------------------------------------------------------------------------
# public estimators


@dataclass
class BallProbEstimate:
    value: float
    stderr: float
    n: int
    hits: int
    method: str
    seed: int
    ess: float
    low_confidence: bool


@dataclass
class RatioEstimate:
    value: float
    stderr: float
    n: int
    shared_seed: int
    method: str
    numerator: BallProbEstimate
    denominator: BallProbEstimate

    @property
    def rel_stderr(self) -> float:
        return self.stderr / self.value if self.value > 0 else math.inf

    @property
    def low_confidence(self) -> bool:
        return self.numerator.low_confidence or self.denominator.low_confidence


def _is_low(table: MassTable, i) -> bool:
    if table.method == "direct":
        return bool(table.hits[i] < LOW_HITS)
    return bool(table.hits[i] == 0 or table.ess[i] < LOW_ESS)


def _estimate(table: MassTable, i, seed) -> BallProbEstimate:
    hits = int(table.hits[i])
    if table.method == "direct" and not table.weighted:
        value = hits / table.n
        stderr = math.sqrt(value * (1.0 - value) / table.n)
    else:
        value = float(table.values[i])
        stderr = float(table.stderrs[i]) if value > 0 else 0.0
    return BallProbEstimate(
        value=value, stderr=stderr, n=table.n, hits=hits,
        method=table.method, seed=int(seed), ess=float(table.ess[i]),
        low_confidence=_is_low(table, i))


def estimate_ball_prob(target, b: Ball, n: int, seed, method: str = "direct") -> BallProbEstimate:
    table = CrnStream(target, n, seed, method).evaluate([b])
    return _estimate(table, 0, seed)


def ball_prob(target, b: Ball, n: int, seed) -> BallProbEstimate:
    """Direct Monte Carlo mass of ``b``; flagged low-confidence below 100 hits.

    For a prior the value is hits / n with binomial standard error; for a
    posterior the hits are weighted by exp(-Phi) and self-normalised.
    """
    return estimate_ball_prob(target, b, n, seed, "direct")


def importance_ball_prob(target, b: Ball, n: int, seed) -> BallProbEstimate:
    """Cameron-Martin-shift estimate of the mass of ``b`` (see module notes)."""
    return estimate_ball_prob(target, b, n, seed, "importance_shift")


def ratio_crn(target, b1: Ball, b2: Ball, n: int, seed, method: str = "auto") -> RatioEstimate:
    """mu(b1) / mu(b2) from one shared sample set.

    ``method="auto"`` runs the direct estimator, falls back to the
    Cameron-Martin shift when either ball has fewer than 100 hits, and to
    the tilted proposal when the shift is still low-confidence.
    Raises :class:`UndefinedRatioError` when the denominator has no mass.
    """
    chosen = "direct" if method == "auto" else method
    table = CrnStream(target, n, seed, chosen).evaluate([b1, b2])
    for fallback in ("importance_shift", "tilted"):
        if method != "auto" or not (_is_low(table, 0) or _is_low(table, 1)):
            break
        chosen = fallback
        table = CrnStream(target, n, seed, chosen).evaluate([b1, b2])
    if table.hits[1] == 0 or not np.isfinite(table.log_mass[1]):
        raise UndefinedRatioError(
            f"ratio undefined: denominator ball at {b2.center.tolist()}, r={b2.radius} has no hits")
    value, se = table.ratio(0, 1)
    return RatioEstimate(value, se, table.n, int(seed), chosen,
                         _estimate(table, 0, seed), _estimate(table, 1, seed))


# ---------------------------------------------------------------------------
# checks


@dataclass
class VariationalReport:
    min_slack: float
    n_probes: int
    passed: bool


def uniform_in_ball(b: Ball, n: int, rng_stream) -> np.ndarray:
    rng = as_generator(rng_stream)
    return b.center + b.radius * _unit_ball_draws(rng, n, b.dim, b.norm)


def check_variational_inequality(m: SpectralGaussian, b: Ball, proj: BallProjection,
                                 n_probes: int, seed) -> VariationalReport:
    """Probe <h, h*>_E >= |h*|_E^2 at uniform points h of the ball."""
    check_ball(m, b)
    hs = uniform_in_ball(b, n_probes, seed)
    slack = cm_inner(m, hs, proj.minimizer) - 2.0 * proj.value
    min_slack = float(np.min(slack))
    return VariationalReport(min_slack, int(n_probes), min_slack >= -VI_TOL)


@dataclass
class AndersonReport:
    x: np.ndarray
    r: float
    ratio: RatioEstimate
    bound: float
    passed: bool
    projection: Optional[BallProjection] = None

    @property
    def low_confidence(self) -> bool:
        return self.ratio.low_confidence


def anderson_check(m: SpectralGaussian, x, r: float, n: int, seed,
                   method: str = "auto") -> AndersonReport:
    """mu(B(x, r)) <= mu(B(0, r)) up to three standard errors."""
    x = as_point(x, m.dim, "x")
    est = ratio_crn(m, Ball(x, r, m.ambient_norm), Ball(np.zeros(m.dim), r, m.ambient_norm),
                    n, seed, method)
    return AndersonReport(x, float(r), est, 1.0, est.value <= 1.0 + 3.0 * est.stderr)


def explicit_anderson_check(m: SpectralGaussian, x, r: float, n: int, seed,
                            method: str = "auto") -> AndersonReport:
    """mu(B(x, r)) / mu(B(0, r)) <= exp(-min_{h in ball} |h|_E^2 / 2), within CI."""
    x = as_point(x, m.dim, "x")
    ball = Ball(x, r, m.ambient_norm)
    proj = min_cm_in_ball(m, ball)
    bound = math.exp(-proj.value)
    est = ratio_crn(m, ball, Ball(np.zeros(m.dim), r, m.ambient_norm), n, seed, method)
    passed = est.value <= bound * (1.0 + 3.0 * est.rel_stderr)
    return AndersonReport(x, float(r), est, bound, bool(passed), proj)
