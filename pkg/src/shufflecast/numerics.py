"""Shared numerical kernels: seeded random streams, Hermitian solves and
Gaussianity statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import ndtr

__all__ = [
    "SingularSystemError",
    "InsufficientDataError",
    "DegenerateInputError",
    "GaussianityReport",
    "make_rng",
    "hermitian_solve",
    "draw_complex_gaussian",
    "ks_normal",
    "sample_autocov",
    "excess_kurtosis",
]

COND_LIMIT = 1e14
MIN_KS_SAMPLES = 100


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a Hermitian system is singular or not positive definite."""


class InsufficientDataError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianityReport:
    ks_statistic: float
    max_abs_autocov: float
    excess_kurtosis: float
    sample_count: int

    def as_dict(self) -> dict:
        return {
            "ks_statistic": self.ks_statistic,
            "max_abs_autocov": self.max_abs_autocov,
            "excess_kurtosis": self.excess_kurtosis,
            "sample_count": self.sample_count,
        }


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return an independent generator for the pair ``(seed, stream)``.

    The pair is fed to a ``SeedSequence`` as entropy plus spawn key, so
    distinct streams of the same seed are statistically independent and
    no stream depends on how many draws another stream consumed.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(int(stream) & 0xFFFFFFFFFFFFFFFF,))
    return np.random.Generator(np.random.PCG64(ss))


def hermitian_solve(A, b):
    """Solve ``A x = b`` for Hermitian positive-definite ``A`` via Cholesky.

    Raises
    ------
    SingularSystemError
        If ``A`` is not positive definite or its condition number exceeds
        1e14.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b is {b.shape}")
    if not np.all(np.isfinite(A)):
        raise SingularSystemError("system matrix has non-finite entries")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"matrix is not positive definite: {exc}") from None
    # systems here are N_t x N_t, so the exact 2-norm condition number is cheap
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(f"condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def draw_complex_gaussian(n, var_per_component, rng):
    """Complex vector whose real and imaginary parts are i.i.d.
    ``N(0, var_per_component)``."""
    if var_per_component <= 0:
        raise ValueError("var_per_component must be positive")
    std = np.sqrt(var_per_component)
    parts = rng.standard_normal((2,) + tuple(np.atleast_1d(n)))
    return std * (parts[0] + 1j * parts[1])


def ks_normal(samples) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF and N(0, 1).

    Exact supremum over the sorted samples; no p-value is computed.
    """
    x = np.sort(np.ravel(np.asarray(samples, dtype=float)))
    n = x.size
    if n < MIN_KS_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_KS_SAMPLES} samples, got {n}")
    cdf = ndtr(x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max(), 0.0))


def sample_autocov(x, max_lag: int):
    """Normalized autocovariance at lags ``1..max_lag``.

    A 2-D input is treated as independent rows of one stationary process
    and the lag products are pooled over rows.  Each lag is averaged over
    the pairs available at that lag and divided by the lag-0 variance.
    """
    x = np.asarray(x, dtype=float)
    rows = np.atleast_2d(x)
    length = rows.shape[1]
    if max_lag < 1 or max_lag >= length / 10:
        raise ValueError(f"max_lag must be in [1, {length / 10}), got {max_lag}")
    centered = rows - rows.mean()
    var = np.mean(centered ** 2)
    if var <= 1e-300:
        raise DegenerateInputError("input has zero variance")
    out = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        out[lag - 1] = np.mean(centered[:, :-lag] * centered[:, lag:]) / var
    return out


def excess_kurtosis(x) -> float:
    x = np.ravel(np.asarray(x, dtype=float))
    c = x - x.mean()
    m2 = np.mean(c ** 2)
    if m2 <= 0:
        raise DegenerateInputError("input has zero variance")
    return float(np.mean(c ** 4) / m2 ** 2 - 3.0)
