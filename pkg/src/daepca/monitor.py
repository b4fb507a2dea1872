"""Monitoring statistics, thresholds, and Bayesian alarm fusion.

Scalar statistic contracts live here (Hotelling T2 against a feature
covariance, squared prediction error of a residual), together with the
kernel-density threshold rule, the two-statistic Bayesian fusion index,
and the per-sample detection sweep that ties them together.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import linalg
from .errors import (
    DegenerateSample,
    InvalidConfig,
    InvalidShape,
    NumericalFailure,
    SingularMatrix,
)

__all__ = [
    "Thresholds",
    "KdeConfig",
    "StatSeries",
    "hotelling_t2",
    "spe",
    "kde_threshold",
    "calibrate_thresholds",
    "bic",
    "bic_series",
    "detect",
    "inv_pd",
]

# relative clamp applied to each statistic before the likelihood ratio,
# so an exactly-zero statistic cannot divide by zero
_BIC_CLAMP = 1e-12


@dataclass(frozen=True)
class Thresholds:
    """Control limits for T2 and SPE at a shared confidence level."""

    j_t2: float
    j_spe: float
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InvalidConfig(f"alpha must be in (0, 1), got {self.alpha}")
        if self.j_t2 <= 0.0 or self.j_spe <= 0.0:
            raise InvalidConfig("thresholds must be positive")
        if not (np.isfinite(self.j_t2) and np.isfinite(self.j_spe)):
            raise InvalidConfig("thresholds must be finite")


@dataclass(frozen=True)
class KdeConfig:
    """Kernel density estimation settings for threshold calibration."""

    bandwidth_rule: str = "silverman"
    fixed_bandwidth: float | None = None
    grid_points: int = 256
    search_tolerance: float = 1e-8

    def __post_init__(self):
        if self.bandwidth_rule not in ("silverman", "fixed"):
            raise InvalidConfig(f"unknown bandwidth rule {self.bandwidth_rule!r}")
        if self.bandwidth_rule == "fixed":
            if self.fixed_bandwidth is None or self.fixed_bandwidth <= 0.0:
                raise InvalidConfig("fixed bandwidth rule needs fixed_bandwidth > 0")
        if self.grid_points < 64:
            raise InvalidConfig(f"grid_points must be >= 64, got {self.grid_points}")
        if self.search_tolerance <= 0.0:
            raise InvalidConfig("search_tolerance must be positive")


@dataclass(frozen=True)
class StatSeries:
    """Per-sample statistics and the fused alarm sequence."""

    t2: np.ndarray
    spe: np.ndarray
    bic: np.ndarray
    alarm: np.ndarray

    def __len__(self) -> int:
        return self.t2.shape[0]

    def to_csv(self, path) -> None:
        """Write index,t2,spe,bic,alarm rows with full float precision."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "t2", "spe", "bic", "alarm"])
            for i in range(len(self)):
                writer.writerow([
                    i,
                    format(self.t2[i], ".17g"),
                    format(self.spe[i], ".17g"),
                    format(self.bic[i], ".17g"),
                    int(self.alarm[i]),
                ])


def _as_vector(x, name: str) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidShape(f"{name} must be 1-D, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"{name} contains non-finite values")
    return v


def inv_pd(cov: np.ndarray) -> np.ndarray:
    """Invert a covariance, retrying once with a small diagonal jitter.

    Raises:
        SingularMatrix: Still not invertible after the jitter.
    """
    cov = linalg.ensure_matrix(cov, "cov")
    try:
        return linalg.invert(cov)
    except SingularMatrix:
        a = cov.shape[0]
        jitter = 1e-10 * float(np.trace(cov)) / max(a, 1)
        if jitter <= 0.0:
            raise
        return linalg.invert(cov + jitter * np.eye(a))


def hotelling_t2(t: np.ndarray, cov: np.ndarray) -> float:
    """T2 = t' inv(cov) t for one feature vector.

    Args:
        t: Feature vector, shape (a,).
        cov: Feature covariance, shape (a, a), symmetric positive
            definite (a one-shot diagonal jitter is applied if the
            inversion fails).

    Returns:
        The scalar statistic, >= 0 up to roundoff.
    """
    t = _as_vector(t, "t")
    cov = linalg.ensure_matrix(cov, "cov")
    if cov.shape != (t.shape[0], t.shape[0]):
        raise InvalidShape(f"cov shape {cov.shape} does not match t length {t.shape[0]}")
    inv = inv_pd(cov)
    return float(t @ inv @ t)


def spe(residual: np.ndarray) -> float:
    """Squared prediction error: the squared norm of a residual vector."""
    r = _as_vector(residual, "residual")
    return float(r @ r)


def _bandwidth(values: np.ndarray, config: KdeConfig) -> float:
    if config.bandwidth_rule == "fixed":
        return float(config.fixed_bandwidth)
    sd = float(values.std(ddof=1))
    return 1.06 * sd * values.size ** (-0.2)


def kde_threshold(values, alpha: float, config: KdeConfig | None = None) -> float:
    """Upper alpha-quantile of a Gaussian KDE fitted to the sample.

    The KDE cumulative distribution is the exact average of per-sample
    normal CDFs, so the quantile is found by bracketing on a coarse
    grid over [min, max + 5h] and bisecting to ``search_tolerance``.
    Silverman's rule (1.06 * sd * N^(-1/5), sample sd with ddof=1) sets
    the bandwidth unless the config fixes one.

    Args:
        values: 1-D calibration sample.
        alpha: Quantile level in (0, 1); monitoring uses values near 1.
        config: Optional KdeConfig; defaults are used when omitted.

    Returns:
        The estimated threshold.

    Raises:
        InvalidConfig: alpha outside (0, 1).
        DegenerateSample: Fewer than 2 samples or zero variance.
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidConfig(f"alpha must be in (0, 1), got {alpha}")
    if config is None:
        config = KdeConfig()
    v = _as_vector(values, "values")
    if v.size < 2:
        raise DegenerateSample(f"need at least 2 samples, got {v.size}")
    if float(v.std(ddof=1)) <= 0.0:
        raise DegenerateSample("sample has zero variance")
    h = _bandwidth(v, config)

    def cdf(x: float) -> float:
        return float(ndtr((x - v) / h).mean())

    lo = float(v.min())
    hi = float(v.max()) + 5.0 * h
    grid = np.linspace(lo, hi, config.grid_points)
    cg = ndtr((grid[:, None] - v[None, :]) / h).mean(axis=1)
    k = int(np.searchsorted(cg, alpha))
    if 0 < k < config.grid_points:
        a, b = float(grid[k - 1]), float(grid[k])
    else:
        a, b = lo, hi
    while b - a > config.search_tolerance:
        mid = 0.5 * (a + b)
        if cdf(mid) < alpha:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def calibrate_thresholds(t2_values, spe_values, alpha: float,
                         config: KdeConfig | None = None) -> Thresholds:
    """KDE thresholds for both statistics from fault-free calibration data."""
    return Thresholds(
        j_t2=kde_threshold(t2_values, alpha, config),
        j_spe=kde_threshold(spe_values, alpha, config),
        alpha=alpha,
    )


def _bic_terms(stat: float, limit: float, alpha: float) -> tuple[float, float]:
    s = max(stat, _BIC_CLAMP * limit)
    p_normal = np.exp(-s / limit)
    p_fault = np.exp(-limit / s)
    evidence = p_normal * alpha + p_fault * (1.0 - alpha)
    posterior = p_fault * (1.0 - alpha) / evidence if evidence > 0.0 else 0.0
    return float(p_fault), float(posterior)


def bic(t2_value: float, spe_value: float, thresholds: Thresholds) -> float:
    """Bayesian fusion of T2 and SPE into one index in [0, 1].

    Each statistic S with limit J contributes a fault likelihood
    exp(-J/S), a normal likelihood exp(-S/J), and a posterior fault
    probability under priors {alpha, 1 - alpha}; the index is the
    fault-likelihood-weighted average of the two posteriors. With both
    statistics at their limits the index equals 1 - alpha exactly. S is
    clamped to 1e-12 * J, and if both fault likelihoods underflow to
    zero the index is 0 (fault evidence vanishes).

    Args:
        t2_value: T2 statistic, >= 0.
        spe_value: SPE statistic, >= 0.
        thresholds: Control limits and confidence level.

    Returns:
        Fused index in [0, 1]; alarm when it exceeds 1 - alpha.
    """
    if t2_value < 0.0 or spe_value < 0.0:
        raise InvalidShape("statistics must be non-negative")
    if not (np.isfinite(t2_value) and np.isfinite(spe_value)):
        raise NumericalFailure("statistics must be finite")
    w1, post1 = _bic_terms(float(t2_value), thresholds.j_t2, thresholds.alpha)
    w2, post2 = _bic_terms(float(spe_value), thresholds.j_spe, thresholds.alpha)
    den = w1 + w2
    if den <= 0.0:
        return 0.0
    return (w1 * post1 + w2 * post2) / den


def bic_series(t2_values, spe_values, thresholds: Thresholds) -> np.ndarray:
    """Vectorized bic over aligned statistic series."""
    t2v = _as_vector(t2_values, "t2_values")
    spev = _as_vector(spe_values, "spe_values")
    if t2v.shape != spev.shape:
        raise InvalidShape("t2 and spe series must have equal length")
    if np.any(t2v < 0.0) or np.any(spev < 0.0):
        raise InvalidShape("statistics must be non-negative")
    out = np.empty(t2v.shape[0])
    alpha = thresholds.alpha
    with np.errstate(over="ignore"):
        for limit, vals, idx in ((thresholds.j_t2, t2v, 0), (thresholds.j_spe, spev, 1)):
            s = np.maximum(vals, _BIC_CLAMP * limit)
            p_n = np.exp(-s / limit)
            p_f = np.exp(-limit / s)
            ev = p_n * alpha + p_f * (1.0 - alpha)
            post = np.divide(p_f * (1.0 - alpha), ev, out=np.zeros_like(ev),
                             where=ev > 0.0)
            if idx == 0:
                w1, post1 = p_f, post
            else:
                w2, post2 = p_f, post
    den = w1 + w2
    num = w1 * post1 + w2 * post2
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
    return out


def detect(t2_values, spe_values, thresholds: Thresholds) -> StatSeries:
    """Per-sample fused detection sweep.

    The alarm fires when the fused index strictly exceeds 1 - alpha; a
    sample sitting exactly at both limits produces index 1 - alpha and
    therefore no alarm.
    """
    t2v = _as_vector(t2_values, "t2_values")
    spev = _as_vector(spe_values, "spe_values")
    if t2v.shape != spev.shape:
        raise InvalidShape("t2 and spe series must have equal length")
    b = bic_series(t2v, spev, thresholds)
    alarm = b > (1.0 - thresholds.alpha)
    return StatSeries(t2=t2v, spe=spev, bic=b, alarm=alarm)
