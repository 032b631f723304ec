"""Generalized-logistic model of reconstruction quality versus SINR and
its tangent minorizer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

__all__ = [
    "LogisticParams",
    "SurrogateCoeffs",
    "LogisticFitError",
    "AnchorSingularityError",
    "logistic_score",
    "logistic_score_db",
    "fit_logistic",
    "surrogate_coeffs",
    "zeta",
]

LN10_OVER_10 = math.log(10.0) / 10.0


class LogisticFitError(ValueError):
    pass


class AnchorSingularityError(ArithmeticError):
    """The e > 1 coefficients are singular at the requested anchor."""


@dataclass(frozen=True)
class LogisticParams:
    """``S(gamma) = a + b / (c + gamma**(-e))``.

    ``d`` is the equivalent slope of the dB-domain form
    ``a + b / (c + exp(-d * gamma_dB))``; ``e = 10 d / ln 10``.
    """

    a: float = 0.0
    b: float = 1.0
    c: float = 1.0
    e: float = 0.7

    def __post_init__(self):
        if not (self.b > 0 and self.c > 0 and self.e > 0):
            raise ValueError(f"need b, c, e > 0, got b={self.b}, c={self.c}, e={self.e}")

    @property
    def d(self) -> float:
        return self.e * LN10_OVER_10

    @classmethod
    def from_db_slope(cls, a: float, b: float, c: float, d: float) -> "LogisticParams":
        return cls(a, b, c, d / LN10_OVER_10)

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "e": self.e}


def logistic_score(gamma, p: LogisticParams):
    """Expected reconstruction quality at linear SINR ``gamma > 0``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0):
        raise ValueError("gamma must be positive")
    out = p.a + p.b / (p.c + g ** (-p.e))
    return float(out) if out.ndim == 0 else out


def logistic_score_db(gamma_db, p: LogisticParams):
    g = np.asarray(gamma_db, dtype=float)
    out = p.a + p.b / (p.c + np.exp(-p.d * g))
    return float(out) if out.ndim == 0 else out


def _score_nonneg(gamma, p: LogisticParams):
    # S extended continuously to gamma = 0 (limit value a)
    g = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        inv = np.where(g > 0, np.power(np.where(g > 0, g, 1.0), -p.e), np.inf)
    return p.a + p.b / (p.c + inv)


def fit_logistic(samples, full_output: bool = False):
    """Least-squares fit of :class:`LogisticParams` to ``(gamma_dB, score)``.

    A coarse grid over ``(c, e)`` with closed-form ``(a, b)`` seeds a local
    refinement.  With ``full_output`` the RMS residual is also returned.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise LogisticFitError("samples must be a sequence of (gamma_dB, score) pairs")
    x_db, y = arr[:, 0], arr[:, 1]
    if len(x_db) < 8:
        raise LogisticFitError(f"need at least 8 samples, got {len(x_db)}")
    if np.ptp(x_db) < 10:
        raise LogisticFitError(f"samples span {np.ptp(x_db):.2f} dB; need at least 10 dB")
    if np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        raise LogisticFitError("scores are constant; the curve is not identifiable")

    def design(c, e):
        return 1.0 / (c + np.exp(-e * LN10_OVER_10 * x_db))

    best = None
    ones = np.ones_like(y)
    for c in np.logspace(-2, 2, 41):
        for e in np.linspace(0.05, 3.0, 60):
            A = np.column_stack([ones, design(c, e)])
            coef, *_ = np.linalg.lstsq(A, y, rcond=None)
            res = float(np.sum((A @ coef - y) ** 2))
            if best is None or res < best[0]:
                best = (res, coef[0], coef[1], c, e)
    _, a0, b0, c0, e0 = best

    def resid(theta):
        a, b, logc, loge = theta
        return a + b * design(np.exp(logc), np.exp(loge)) - y

    sol = least_squares(resid, [a0, b0, np.log(c0), np.log(e0)], xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=20000)
    a, b, logc, loge = sol.x
    if b <= 0:
        raise LogisticFitError(f"fitted curve is decreasing (b = {b:.4g}); scores must increase with SNR")
    params = LogisticParams(float(a), float(b), float(np.exp(logc)), float(np.exp(loge)))
    if full_output:
        return params, float(np.sqrt(np.mean(sol.fun ** 2)))
    return params


@dataclass(frozen=True)
class SurrogateCoeffs:
    """Coefficients of ``zeta = D + E s / (F s + G q)`` anchored at ``gamma0``.

    Fields may be scalars or per-user arrays of equal shape.
    """

    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    gamma0: np.ndarray
    e: float

    def take(self, k) -> "SurrogateCoeffs":
        return SurrogateCoeffs(*(np.asarray(x)[k] for x in (self.D, self.E, self.F, self.G, self.gamma0)),
                               self.e)


def surrogate_coeffs(gamma0, p: LogisticParams, singular_tol: float = 1e-9) -> SurrogateCoeffs:
    g0 = np.asarray(gamma0, dtype=float)
    if np.any(g0 <= 0):
        raise ValueError("anchor gamma0 must be positive")
    a, b, c, e = p.a, p.b, p.c, p.e
    if e <= 1:
        D = np.full_like(g0, a)
        E = np.full_like(g0, b)
        F = c + (1 - e) * g0 ** (-e)
        G = e * g0 ** (1 - e)
    else:
        G = c * (1 - e) * g0 ** e + 1
        if np.any(np.abs(G) <= singular_tol):
            raise AnchorSingularityError("c (1 - e) gamma0^e + 1 vanishes at this anchor")
        D = a + b * (1 - e) * g0 ** e / G
        E = b * e * g0 ** (e - 1) / G
        F = c * e * g0 ** (e - 1)
    return SurrogateCoeffs(D, E, F, G, g0, e)


def zeta(signal, inplusnoise, coeffs: SurrogateCoeffs, p: LogisticParams):
    """Tangent minorizer of ``S(signal / inplusnoise)`` at ``coeffs.gamma0``.

    For ``e > 1`` the ratio form is only a valid lower bound where the
    linearization ``e g0^(e-1) Gamma + (1 - e) g0^e`` of ``Gamma^e`` is
    nonnegative; below that point the bound is continued by its value
    there, ``a``.
    """
    s = np.asarray(signal, dtype=float)
    q = np.asarray(inplusnoise, dtype=float)
    den = coeffs.F * s + coeffs.G * q
    if coeffs.e > 1:
        e, g0 = coeffs.e, coeffs.gamma0
        valid = e * g0 ** (e - 1) * s + (1 - e) * g0 ** e * q >= 0
    else:
        valid = np.ones(np.shape(den), dtype=bool)
    if np.any((den == 0) & valid):
        raise ZeroDivisionError("surrogate denominator vanishes")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(valid, coeffs.D + coeffs.E * s / np.where(valid, den, 1.0), p.a)
    return float(val) if np.ndim(val) == 0 else val
