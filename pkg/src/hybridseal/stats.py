"""Timing statistics: outlier trim, summaries, Welch's t-test, Cohen's d, bootstrap CIs, CoV screening.

All durations are microseconds. Standard deviations are sample (n - 1)
deviations. Percentiles use linear interpolation between closest ranks
(numpy's default ``"linear"`` method).
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _sps

from hybridseal.errors import DegenerateVarianceError, InsufficientSamplesError, InvalidParameterError

__all__ = [
    "BootstrapConfig",
    "CovClass",
    "StatSummary",
    "TimingSampleSet",
    "WelchResult",
    "STABLE_MARGIN_PP",
    "DESIGN_VARIABLE_COV",
    "bootstrap_ci_median",
    "classify_cov",
    "clip_count",
    "summarize",
    "trim",
    "welch",
]

# timing_stable: within this many percentage points of the noise floor
STABLE_MARGIN_PP = 2.0
# design_variable: CoV above this (percent), e.g. rejection-sampling loops
DESIGN_VARIABLE_COV = 20.0


def clip_count(n: int, trim_pct: float) -> int:
    """Samples removed from each tail: ``max(1, floor(n * trim_pct))``."""
    # the epsilon keeps e.g. 700 * 0.01 == 7.000000000000001 and 0.29 * 100 from rounding the wrong way
    return max(1, math.floor(n * trim_pct + 1e-9))


def trim(samples: Sequence[float], trim_pct: float = 0.01) -> np.ndarray:
    """Sort ascending and drop ``clip_count`` values from each end."""
    arr = np.sort(np.asarray(samples, dtype=float))
    n = arr.size
    if n < 3:
        raise InsufficientSamplesError(f"trim needs at least 3 samples, got {n}")
    if not 0 <= trim_pct < 0.5:
        raise InvalidParameterError(f"trim_pct must be in [0, 0.5), got {trim_pct}")
    clip = clip_count(n, trim_pct)
    if n - 2 * clip < 1:
        raise InsufficientSamplesError(f"trimming {clip} per tail leaves nothing of {n} samples")
    return arr[clip:n - clip]


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 2000
    lo_pct: float = 2.5
    hi_pct: float = 97.5
    seed: int = 0

    def __post_init__(self):
        if self.B < 100:
            raise InvalidParameterError(f"bootstrap needs B >= 100 resamples, got {self.B}")
        if not 0 <= self.lo_pct < self.hi_pct <= 100:
            raise InvalidParameterError("bootstrap percentiles must satisfy 0 <= lo < hi <= 100")


@dataclass
class TimingSampleSet:
    """Raw per-iteration durations for one operation.

    ``trim_pct`` of 0 disables trimming; any positive value applies
    :func:`trim` (which always clips at least one sample per tail).
    """

    samples: np.ndarray
    op_name: str = ""
    warmup_discarded: int = 0
    trim_pct: float = 0.01

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InsufficientSamplesError("sample set is empty")
        if not np.all(np.isfinite(self.samples)) or np.any(self.samples <= 0):
            raise InvalidParameterError("durations must be finite and positive")

    def retained(self) -> np.ndarray:
        if self.trim_pct == 0:
            return np.sort(self.samples)
        return trim(self.samples, self.trim_pct)


@dataclass(frozen=True)
class StatSummary:
    n: int
    mean: float
    std: float
    median: float
    p95: float
    p99: float
    cov: float
    ci95_lo: float
    ci95_hi: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WelchResult:
    t: float
    nu: float
    d: float
    significant_at_001: bool


class CovClass(str, enum.Enum):
    TIMING_STABLE = "timing_stable"
    SCHEDULER_NOISE = "scheduler_noise"
    DESIGN_VARIABLE = "design_variable"


def _resample_medians(x: np.ndarray, cfg: BootstrapConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    n = x.size
    medians = np.empty(cfg.B)
    # bound the index matrix to ~4M entries per chunk
    chunk = max(1, 4_000_000 // n)
    for start in range(0, cfg.B, chunk):
        stop = min(cfg.B, start + chunk)
        idx = rng.integers(0, n, size=(stop - start, n))
        medians[start:stop] = np.median(x[idx], axis=1)
    return medians


def bootstrap_ci_median(samples: Sequence[float], cfg: BootstrapConfig = BootstrapConfig()) -> tuple[float, float]:
    """Percentile-bootstrap CI of the median, deterministic in ``cfg.seed``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InsufficientSamplesError("bootstrap needs at least one sample")
    medians = _resample_medians(x, cfg)
    lo, hi = np.percentile(medians, [cfg.lo_pct, cfg.hi_pct])
    return float(lo), float(hi)


def summarize(s: TimingSampleSet | Sequence[float], boot: BootstrapConfig = BootstrapConfig()) -> StatSummary:
    if not isinstance(s, TimingSampleSet):
        s = TimingSampleSet(np.asarray(s, dtype=float), trim_pct=0.0)
    x = s.retained()
    n = int(x.size)
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    p50, p95, p99 = (float(v) for v in np.percentile(x, [50, 95, 99]))
    lo, hi = bootstrap_ci_median(x, boot)
    return StatSummary(
        n=n,
        mean=mean,
        std=std,
        median=p50,
        p95=p95,
        p99=p99,
        cov=std / mean * 100.0,
        ci95_lo=lo,
        ci95_hi=hi,
    )


def _moments(x) -> tuple[int, float, float]:
    if isinstance(x, StatSummary):
        return x.n, x.mean, x.std ** 2
    arr = np.asarray(x, dtype=float)
    if arr.size < 2:
        raise InsufficientSamplesError(f"Welch's test needs n >= 2 per group, got {arr.size}")
    return int(arr.size), float(np.mean(arr)), float(np.var(arr, ddof=1))


def welch(a, b, alpha: float = 1e-3) -> WelchResult:
    """Welch's t (B minus A), Welch-Satterthwaite dof, and Cohen's d with pooled SD.

    ``a``/``b`` are raw samples or :class:`StatSummary` objects; only n, mean
    and variance are used. Significance is two-sided at ``alpha``.
    """
    n_a, m_a, v_a = _moments(a)
    n_b, m_b, v_b = _moments(b)
    if n_a < 2 or n_b < 2:
        raise InsufficientSamplesError("Welch's test needs n >= 2 per group")
    if v_a == 0 and v_b == 0:
        raise DegenerateVarianceError("both groups have zero variance")
    se_a, se_b = v_a / n_a, v_b / n_b
    diff = m_b - m_a
    t = diff / math.sqrt(se_a + se_b)
    nu = (se_a + se_b) ** 2 / (se_a ** 2 / (n_a - 1) + se_b ** 2 / (n_b - 1))
    s_p = math.sqrt(((n_a - 1) * v_a + (n_b - 1) * v_b) / (n_a + n_b - 2))
    d = diff / s_p
    critical = float(_sps.t.ppf(1 - alpha / 2, nu))
    return WelchResult(t=t, nu=nu, d=d, significant_at_001=abs(t) > critical)


def _cov_of(x) -> float:
    return float(x.cov) if isinstance(x, StatSummary) else float(x)


def classify_cov(op, baseline) -> CovClass:
    """Screen an operation's CoV against the constant-time noise floor.

    ``op`` and ``baseline`` are summaries (or bare CoV percentages) from the
    same environment.
    """
    op_cov, base_cov = _cov_of(op), _cov_of(baseline)
    if op_cov <= base_cov + STABLE_MARGIN_PP:
        return CovClass.TIMING_STABLE
    if op_cov > DESIGN_VARIABLE_COV:
        return CovClass.DESIGN_VARIABLE
    return CovClass.SCHEDULER_NOISE
