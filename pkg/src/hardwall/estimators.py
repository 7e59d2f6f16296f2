"""Monte Carlo estimators for the hard-wall problem and closed-form bound evaluators.

Every estimator splits ``samples`` across ``shards`` independent streams
``RngStream(seed, shard)``; shard ``s`` gets ``samples // shards`` draws plus
one more for the first ``samples % shards`` shards. Per-sample outputs are
concatenated in shard order, so results depend on ``(seed, shards, samples)``
only, never on how shards are scheduled across workers.
"""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import brw, ssbrw
from .brw import Centering, m_n
from .gaussian import RngStream, log_normal_pdf, log_normal_tail_q
from .tree import TreeShape

MODELS = ("brw", "phi_tilde", "comparison")


class NoInteriorRoot(ValueError):
    pass


class DenominatorUnderflow(FloatingPointError):
    pass


@dataclass
class EstimateRecord:
    quantity: str
    value: float
    stderr: float
    samples: int
    estimator: str
    shape: TreeShape
    seed: int
    shards: int
    wall_clock: float = 0.0
    log_value: Optional[float] = None
    log_stderr: Optional[float] = None
    ess: Optional[float] = None
    params: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not math.isfinite(self.value):
            raise ValueError(f"estimate is not finite: {self.value}")

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "quantity": self.quantity,
            "estimator": self.estimator,
            "d": self.shape.d,
            "n": self.shape.n,
            "value": float(self.value),
            "stderr": float(self.stderr),
            "samples": int(self.samples),
            "seed": int(self.seed),
            "shards": int(self.shards),
        }
        if self.log_value is not None:
            out["log_value"] = float(self.log_value)
            out["log_stderr"] = float(self.log_stderr)
        if self.ess is not None:
            out["ess"] = float(self.ess)
        if self.params:
            out["params"] = dict(self.params)
        if self.warnings:
            out["warnings"] = list(self.warnings)
        if timing:
            out["wall_clock"] = float(self.wall_clock)
        return out


@dataclass
class TailCurve:
    thresholds: np.ndarray
    estimates: list

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.estimates])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([r.stderr for r in self.estimates])

    def is_monotone(self, k: float = 2.0) -> bool:
        v, se = self.values, self.stderrs
        drops = v[:-1] - v[1:]
        return bool(np.all(drops <= k * np.hypot(se[:-1], se[1:]) + 1e-15))


@dataclass(frozen=True)
class BoundParams:
    """Proof constants for the bound formulas; none are known numerically."""

    K1: float = 1.0
    K2: float = 1.0
    K3: float = 1.0
    Cp: float = 1.0
    Cpp: float = 1.0
    Kp: float = 1.0
    Kpp: float = 1.0
    c_star: float = 1.0
    p_bar: float = 0.5
    A_bar: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"bound parameter {name} must be > 0, got {value}")


# ---------------------------------------------------------------- shard plumbing


def shard_counts(samples: int, shards: int) -> list:
    if shards < 1:
        raise ValueError("shards must be >= 1")
    base, extra = divmod(int(samples), int(shards))
    return [base + (s < extra) for s in range(shards)]


def run_shards(fn: Callable, samples: int, seed: int, shards: int, workers: int = 1):
    """Call ``fn(stream, count)`` per shard and concatenate each returned array."""
    counts = shard_counts(samples, shards)
    jobs = [(RngStream(seed, s), c) for s, c in enumerate(counts) if c > 0]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(col) for col in zip(*parts))
    return np.concatenate(parts)


def _maxima_fn(shape: TreeShape, model: str, n_prime: Optional[int]):
    if model == "brw":
        return lambda st, c: brw.brw_maxima(shape, st, c)
    if model == "phi_tilde":
        return lambda st, c: ssbrw.phi_tilde_maxima(shape, st, c)[0]
    if model == "comparison":
        if n_prime is None:
            raise ValueError("model 'comparison' needs n_prime")
        return lambda st, c: brw.comparison_maxima(shape, n_prime, st, c)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def _check_samples(samples: int, minimum: int):
    if samples < minimum:
        raise ValueError(f"need at least {minimum} samples, got {samples}")


# ---------------------------------------------------------------- max CDF


def estimate_max_cdf(shape: TreeShape, model: str, thresholds: Sequence[float], samples: int,
                     seed: int = 0, shards: int = 1, n_prime: Optional[int] = None,
                     workers: int = 1) -> TailCurve:
    """Empirical ``P(max <= t)`` on a threshold grid, with binomial standard errors."""
    _check_samples(samples, 100)
    t = np.sort(np.asarray(thresholds, dtype=float))
    if not np.all(np.isfinite(t)):
        raise ValueError("thresholds must be finite")
    t0 = time.perf_counter()
    maxima = np.sort(run_shards(_maxima_fn(shape, model, n_prime), samples, seed, shards, workers))
    p = np.searchsorted(maxima, t, side="right") / samples
    se = np.sqrt(p * (1.0 - p) / samples)
    wall = time.perf_counter() - t0
    params = {"model": model}
    if n_prime is not None:
        params["n_prime"] = int(n_prime)
    records = [
        EstimateRecord("max_cdf", float(pi), float(si), samples, "naive", shape, seed, shards, wall,
                       params={**params, "threshold": float(ti)})
        for ti, pi, si in zip(t, p, se)
    ]
    return TailCurve(thresholds=t, estimates=records)


# ---------------------------------------------------------------- tilted left tail


def tilt_levels(shape: TreeShape, lam: float, centering: Optional[Centering] = None) -> int:
    cen = centering or Centering.for_d(shape.d)
    return min(shape.n, max(1, math.ceil(cen.c * lam)))


def _tilted_contributions(shape, lam, tilt, samples, seed, shards, centering, workers):
    level = m_n(shape, centering) - lam
    depth = tilt_levels(shape, lam, centering)

    def fn(stream, count):
        mx, logw = ssbrw.tilted_phi_tilde_maxima(shape, stream, count, tilt, depth)
        return mx, logw

    mx, logw = run_shards(fn, samples, seed, shards, workers)
    w = np.exp(logw)
    return np.where(mx <= level, w, 0.0), w, depth


def _kish_ess(w: np.ndarray) -> float:
    s2 = float(np.dot(w, w))
    return float(w.sum() ** 2 / s2) if s2 > 0 else 0.0


def tilted_left_tail(shape: TreeShape, lam: float, tilt: float, samples: int, seed: int = 0,
                     shards: int = 1, centering: Optional[Centering] = None,
                     workers: int = 1) -> EstimateRecord:
    """Importance-sampled ``P(max phi_tilde <= m_n - lam)``.

    The standard normals driving the top ``ceil(c * lam)`` levels are drawn
    from ``N(-tilt, 1)`` and each sample is reweighted by the exact likelihood
    ratio, so the estimate is unbiased for every ``tilt``. ``ess`` is the Kish
    effective sample size of all weights.
    """
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    if tilt < 0:
        raise ValueError("tilt must be >= 0")
    _check_samples(samples, 100)
    t0 = time.perf_counter()
    h, w, depth = _tilted_contributions(shape, lam, tilt, samples, seed, shards, centering, workers)
    value = float(h.mean())
    stderr = float(h.std() / math.sqrt(samples))
    ess = _kish_ess(w)
    flags = []
    if ess < 10:
        flags.append("low effective sample size")
        warnings.warn(f"tilted estimator ESS {ess:.1f} < 10", RuntimeWarning, stacklevel=2)
    log_value = math.log(value) if value > 0 else None
    return EstimateRecord(
        "left_tail", value, stderr, samples, "tilted", shape, seed, shards,
        time.perf_counter() - t0,
        log_value=log_value, log_stderr=stderr / value if value > 0 else None, ess=ess,
        params={"lambda": float(lam), "tilt": float(tilt), "tilt_levels": depth,
                "threshold": m_n(shape, centering) - lam},
        warnings=flags,
    )


@dataclass
class LeftTailProfile:
    lambdas: np.ndarray
    records: list
    log_values: np.ndarray
    log_cov: np.ndarray

    def second_differences(self):
        """Second differences of ``log P`` over consecutive lambdas and their standard errors."""
        k = len(self.lambdas)
        rows = []
        for i in range(1, k - 1):
            a = np.zeros(k)
            a[i - 1], a[i], a[i + 1] = 1.0, -2.0, 1.0
            rows.append(a)
        a = np.array(rows).reshape(-1, k)
        diffs = a @ self.log_values
        se = np.sqrt(np.einsum("ij,jk,ik->i", a, self.log_cov, a))
        return diffs, se


def left_tail_profile(shape: TreeShape, lambdas: Sequence[float], tilt: float, samples: int,
                      seed: int = 0, shards: int = 1, centering: Optional[Centering] = None,
                      workers: int = 1) -> LeftTailProfile:
    """Tilted left-tail estimates on a lambda grid with common random numbers.

    Every lambda reuses the same streams, so sample ``i`` shares its driving
    uniforms across the grid and the joint covariance of the log-estimates
    comes from the per-sample contributions by the delta method.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    contrib, records = [], []
    for lam in lambdas:
        t0 = time.perf_counter()
        h, w, depth = _tilted_contributions(shape, lam, tilt, samples, seed, shards, centering,
                                            workers)
        value = float(h.mean())
        stderr = float(h.std() / math.sqrt(samples))
        records.append(EstimateRecord(
            "left_tail", value, stderr, samples, "tilted", shape, seed, shards,
            time.perf_counter() - t0,
            log_value=math.log(value) if value > 0 else None,
            log_stderr=stderr / value if value > 0 else None, ess=_kish_ess(w),
            params={"lambda": float(lam), "tilt": float(tilt), "tilt_levels": depth,
                    "threshold": m_n(shape, centering) - lam},
        ))
        contrib.append(h)
    h = np.array(contrib)
    p = h.mean(axis=1)
    if np.any(p <= 0):
        raise DenominatorUnderflow("a left-tail estimate is zero; increase samples or tilt")
    cov = np.cov(h, ddof=0) / samples
    log_cov = cov / np.outer(p, p)
    return LeftTailProfile(lambdas, records, np.log(p), np.atleast_2d(log_cov))


# ---------------------------------------------------------------- positivity


def estimate_positivity(shape: TreeShape, samples: int, seed: int = 0, shards: int = 1,
                        method: str = "conditional", workers: int = 1) -> EstimateRecord:
    """Probability that every leaf of the BRW is nonnegative.

    ``naive`` counts BRW samples whose minimum leaf is >= 0. ``conditional``
    averages ``Q(M / sigma)`` over switching-field maxima ``M``, the exact
    conditional probability of ``M <= X`` given ``M``; it is computed in log
    space and also reported as a log-probability.
    """
    _check_samples(samples, 100)
    t0 = time.perf_counter()
    if method == "naive":
        def fn(stream, count):
            t = brw._brw_traverse(shape, stream, count)
            return t.min

        hits = (run_shards(fn, samples, seed, shards, workers) >= 0.0).astype(float)
        p = float(hits.mean())
        se = math.sqrt(p * (1.0 - p) / samples)
        log_p = math.log(p) if p > 0 else None
        return EstimateRecord("positivity", p, se, samples, "naive", shape, seed, shards,
                              time.perf_counter() - t0, log_value=log_p,
                              log_stderr=se / p if p > 0 else None)
    if method != "conditional":
        raise ValueError(f"method must be 'naive' or 'conditional', got {method!r}")
    sigma = math.sqrt(ssbrw.sigma2_dn(shape))
    mx = run_shards(lambda st, c: ssbrw.phi_tilde_maxima(shape, st, c)[0], samples, seed, shards,
                    workers)
    logq = log_normal_tail_q(mx / sigma)
    top = float(logq.max())
    scaled = np.exp(logq - top)
    mean = float(scaled.mean())
    rel = float(scaled.std(ddof=1) / (mean * math.sqrt(samples)))
    log_p = top + math.log(mean)
    p = math.exp(log_p)
    return EstimateRecord("positivity", p, p * rel, samples, "conditional", shape, seed, shards,
                          time.perf_counter() - t0, log_value=log_p, log_stderr=rel)


# ---------------------------------------------------------------- conditional mean


def conditional_mean_from_maxima(maxima: np.ndarray, sigma: float):
    """Ratio estimate of ``E[X | max <= X]`` for ``X ~ N(0, sigma^2)`` and its delta-method stderr.

    Per sample the numerator is ``E[X; X >= M] = sigma * pdf(M / sigma)`` and
    the denominator ``Q(M / sigma)``; both are handled in log space with a
    common shift.
    """
    a = np.asarray(maxima, dtype=float) / sigma
    log_num = math.log(sigma) + log_normal_pdf(a)
    log_den = log_normal_tail_q(a)
    if float(log_den.max()) < math.log(1e-300):
        raise DenominatorUnderflow(
            "all hard-wall weights are below 1e-300; use a smaller n or a tilted estimator"
        )
    shift = float(log_den.max())
    num = np.exp(log_num - shift)
    den = np.exp(log_den - shift)
    ratio = float(num.sum() / den.sum())
    resid = num - ratio * den
    count = a.size
    stderr = float(math.sqrt(resid.var(ddof=1) / count) / den.mean())
    ess = float(den.sum() ** 2 / np.dot(den, den))
    return ratio, stderr, ess, float(logsumexp(log_den) - math.log(count))


def estimate_conditional_mean(shape: TreeShape, samples: int, seed: int = 0, shards: int = 1,
                              workers: int = 1) -> EstimateRecord:
    """Expected height of a typical leaf given that all leaves are nonnegative."""
    _check_samples(samples, 1000)
    t0 = time.perf_counter()
    mx = run_shards(lambda st, c: ssbrw.phi_tilde_maxima(shape, st, c)[0], samples, seed, shards,
                    workers)
    ratio, stderr, ess, log_p = conditional_mean_from_maxima(mx, math.sqrt(ssbrw.sigma2_dn(shape)))
    return EstimateRecord("conditional_mean", ratio, stderr, samples, "conditional", shape, seed,
                          shards, time.perf_counter() - t0, ess=ess,
                          params={"log_positivity": log_p})


# ---------------------------------------------------------------- lambda prime


def _lambda_prime_residual(lam, mn, coef, d, c):
    return mn - lam - coef * d ** (c * lam)


def solve_lambda_prime(shape: TreeShape, Cpp: float, centering: Optional[Centering] = None,
                       max_iter: int = 200) -> float:
    """Root of ``m_n - lam = sigma^2 C'' c d**(c lam) log d`` on ``(0, m_n)`` by bisection."""
    if not Cpp > 0:
        raise ValueError("Cpp must be > 0")
    cen = centering or Centering.for_d(shape.d)
    mn = m_n(shape, cen)
    if not mn > 0:
        raise NoInteriorRoot(f"m_n = {mn} is not positive")
    coef = ssbrw.sigma2_dn(shape) * Cpp * cen.c * math.log(shape.d)
    f = lambda lam: _lambda_prime_residual(lam, mn, coef, shape.d, cen.c)  # noqa: E731
    lo, hi = 0.0, mn
    if f(lo) <= 0:
        raise NoInteriorRoot(f"f(0) = {f(lo):.4g} <= 0: no interior root for C''={Cpp}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def lambda_prime_residual(shape: TreeShape, lam: float, Cpp: float,
                          centering: Optional[Centering] = None) -> float:
    cen = centering or Centering.for_d(shape.d)
    coef = ssbrw.sigma2_dn(shape) * Cpp * cen.c * math.log(shape.d)
    return _lambda_prime_residual(lam, m_n(shape, cen), coef, shape.d, cen.c)


# ---------------------------------------------------------------- bound formulas


def eval_positivity_bounds(shape: TreeShape, params: BoundParams, lambda_prime: float,
                           centering: Optional[Centering] = None):
    """``(log lower, log upper)`` of the two-sided positivity bound at ``lambda_prime``."""
    cen = centering or Centering.for_d(shape.d)
    s2 = ssbrw.sigma2_dn(shape)
    gap = m_n(shape, cen) - lambda_prime
    quad = gap * gap / (2.0 * s2)
    lower = math.log(params.K1) - quad - params.K3 * gap
    upper = math.log(params.K2) - quad - gap / (cen.c * s2 * math.log(shape.d))
    return lower, upper


def eval_lefttail_bounds(shape: TreeShape, lam: float, params: BoundParams,
                         centering: Optional[Centering] = None):
    """``K' exp(-K'' d**(c lam))`` and ``C' exp(-C'' d**(c lam))``."""
    cen = centering or Centering.for_d(shape.d)
    growth = shape.d ** (cen.c * lam)
    return params.Kp * math.exp(-params.Kpp * growth), params.Cp * math.exp(-params.Cpp * growth)


# ---------------------------------------------------------------- log-sum lemma


@dataclass(frozen=True)
class LemmaSum:
    sum: float
    ratio: float
    paper_upper: float
    log_sum: float
    log_upper: float


def log_sum_lemma(n: int, d: int) -> LemmaSum:
    """``sum_{j=1..n} log(n + 1 - j) d**j``, its ratio to ``d**n`` and the closed-form upper bound.

    The ratio is accumulated as ``sum_k log(k) d**(1 - k)`` from the smallest
    terms upward, so nothing overflows; the raw sum and bound are also given
    in log space for shapes where ``d**n`` exceeds the float range.
    """
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    terms = [math.log(k) * float(d) ** (1 - k) for k in range(n, 0, -1)]
    ratio = math.fsum(terms)
    log_dn = n * math.log(d)
    log_sum = math.log(ratio) + log_dn if ratio > 0 else -math.inf
    # (d**(n+2) - (n+1) d**2 + n d) / (d-1)**2, factored through d**n
    scaled = float(d) ** 2 - ((n + 1) * float(d) ** 2 - n * d) * float(d) ** -n
    log_upper = math.log(scaled) + log_dn - 2.0 * math.log(d - 1)
    if log_upper < 709.0:
        upper = (d ** (n + 2) - (n + 1) * d * d + n * d) / (d - 1) ** 2
        total = math.fsum(math.log(n + 1 - j) * float(d) ** j for j in range(1, n + 1))
    else:
        upper = total = math.inf
    return LemmaSum(sum=total, ratio=ratio, paper_upper=upper, log_sum=log_sum,
                    log_upper=log_upper)


# ---------------------------------------------------------------- log-n gap regression


@dataclass
class SandwichFit:
    slope: float
    slope_ci: tuple
    intercept: float
    slope_se: float
    residuals: np.ndarray
    ci_excludes_zero: bool
    slope_positive: bool
    residuals_bounded: bool
    n_values: np.ndarray
    gaps: np.ndarray


def theorem2_sandwich(shapes: Sequence[TreeShape], records: Sequence[EstimateRecord],
                      centering: Optional[Centering] = None, level: float = 0.95,
                      residual_bound: float = 1.0) -> SandwichFit:
    """Regress ``m_n - E_n`` on ``log n`` with intercept.

    The slope standard error is the larger of the residual-based OLS error and
    the error propagated from the record standard errors, and the interval
    uses Student-t quantiles with ``k - 2`` degrees of freedom.
    """
    if len(shapes) != len(records):
        raise ValueError("one record per shape is required")
    if len(shapes) < 4:
        raise ValueError("need at least 4 shapes")
    if len({s.d for s in shapes}) != 1:
        raise ValueError("all shapes must share d")
    ns = np.array([s.n for s in shapes], dtype=float)
    if np.any(np.diff(ns) <= 0):
        raise ValueError("heights must be strictly increasing")
    cen = centering or Centering.for_d(shapes[0].d)
    gaps = np.array([m_n(s, cen) - r.value for s, r in zip(shapes, records)])
    se_rec = np.array([r.stderr for r in records])
    x = np.log(ns)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ gaps / sxx)
    intercept = float(gaps.mean() - slope * x.mean())
    resid = gaps - (intercept + slope * x)
    dof = len(ns) - 2
    se_ols = math.sqrt(float(resid @ resid) / dof / sxx)
    se_prop = math.sqrt(float((xc**2) @ (se_rec**2))) / sxx
    se = max(se_ols, se_prop)
    q = float(stats.t.ppf(0.5 + level / 2.0, dof))
    ci = (slope - q * se, slope + q * se)
    return SandwichFit(
        slope=slope, slope_ci=ci, intercept=intercept, slope_se=se, residuals=resid,
        ci_excludes_zero=bool(ci[0] > 0 or ci[1] < 0), slope_positive=bool(ci[0] > 0),
        residuals_bounded=bool(np.max(np.abs(resid)) <= residual_bound),
        n_values=ns, gaps=gaps,
    )
