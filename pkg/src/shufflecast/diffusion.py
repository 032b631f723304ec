"""Variance-preserving diffusion utilities for latent denoising.

The reverse pass is deterministic (DDIM-style) and driven by an
x0-predictor: any callable ``predictor(x_t, beta_bar_t) -> x0_hat``.  A
closed-form Gaussian-prior predictor is provided as the exact posterior
mean, which makes the whole denoiser analytically checkable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import EffectiveLink

__all__ = [
    "DiffusionSchedule",
    "Predictor",
    "GaussianMMSEPredictor",
    "make_schedule",
    "forward_diffuse",
    "forward_skip",
    "ddim_step",
    "step_match",
    "gaussian_mmse_predictor",
    "zero_predictor",
    "predictor_loss",
    "denoise",
]

Predictor = Callable[[np.ndarray, float], np.ndarray]

BETA_CAP = 0.999


@dataclass(frozen=True)
class DiffusionSchedule:
    """Cumulative noise variances on the grid ``t = i / T``, ``i = 1..T``.

    ``beta_bar[i - 1]`` belongs to grid index ``i``; index 0 stands for
    the clean latent (``beta_bar = 0``).
    """

    beta_bar: np.ndarray
    shape: str = "custom"

    def __post_init__(self):
        bb = np.asarray(self.beta_bar, dtype=float)
        if bb.ndim != 1 or bb.size < 1:
            raise ValueError("beta_bar must be a nonempty 1-D grid")
        if np.any(bb < 0) or np.any(bb >= 1):
            raise ValueError("beta_bar values must lie in [0, 1)")
        if np.any(np.diff(bb) <= 0):
            raise ValueError("beta_bar must be strictly increasing")
        bb.flags.writeable = False
        object.__setattr__(self, "beta_bar", bb)

    @property
    def T(self) -> int:
        return self.beta_bar.size

    def at(self, index: int) -> float:
        """``beta_bar`` at grid index ``index`` (0 maps to 0.0)."""
        if index <= 0:
            return 0.0
        return float(self.beta_bar[index - 1])

    def t(self, index: int) -> float:
        return index / self.T


def make_schedule(T: int = 1000, shape: str = "linear") -> DiffusionSchedule:
    if T < 2:
        raise ValueError("T must be >= 2")
    t = np.arange(1, T + 1) / T
    if shape == "linear":
        bb = BETA_CAP * t
    elif shape == "cosine":
        bb = np.sin(0.5 * np.pi * t) ** 2
        over = bb > BETA_CAP
        if over.any():
            # spread the capped tail evenly up to the cap to stay strictly increasing
            first = int(np.argmax(over))
            start = bb[first - 1] if first > 0 else 0.0
            bb[first:] = np.linspace(start, BETA_CAP, T - first + 1)[1:]
    else:
        raise ValueError(f"unknown schedule shape {shape!r}")
    return DiffusionSchedule(bb, shape)


def forward_diffuse(x0, beta_bar_t: float, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= beta_bar_t < 1:
        raise ValueError("beta_bar_t must lie in [0, 1)")
    x0 = np.asarray(x0, dtype=float)
    if beta_bar_t == 0:
        return x0.copy()
    return np.sqrt(1 - beta_bar_t) * x0 + np.sqrt(beta_bar_t) * rng.standard_normal(x0.shape)


def forward_skip(x_s, beta_bar_s: float, beta_bar_t: float, rng: np.random.Generator) -> np.ndarray:
    """Jump from noise level ``beta_bar_s`` to a higher level ``beta_bar_t``."""
    if not beta_bar_t > beta_bar_s:
        raise ValueError("forward_skip needs beta_bar_t > beta_bar_s")
    x_s = np.asarray(x_s, dtype=float)
    keep = (1 - beta_bar_t) / (1 - beta_bar_s)
    add = max(beta_bar_t - beta_bar_s * keep, 0.0)
    return np.sqrt(keep) * x_s + np.sqrt(add) * rng.standard_normal(x_s.shape)


def ddim_step(x_t, beta_bar_t: float, beta_bar_s: float, x0_hat) -> np.ndarray:
    """Deterministic reverse step from ``beta_bar_t`` down to ``beta_bar_s``."""
    if beta_bar_t <= 0:
        raise ValueError("beta_bar_t must be positive")
    if not 0 <= beta_bar_s <= beta_bar_t:
        raise ValueError("need 0 <= beta_bar_s <= beta_bar_t")
    ratio = beta_bar_s / beta_bar_t
    c_x = np.sqrt(ratio)
    c_0 = np.sqrt(1 - beta_bar_s) - np.sqrt(ratio * (1 - beta_bar_t))
    return c_x * np.asarray(x_t, dtype=float) + c_0 * np.asarray(x0_hat, dtype=float)


def step_match(alpha: float, tau: float, schedule: DiffusionSchedule) -> tuple[int, float]:
    """Grid index whose ``sqrt(beta_bar)`` is closest to the observed noise
    fraction ``tau / sqrt(alpha^2 + tau^2)``, and the input normalization
    ``1 / sqrt(alpha^2 + tau^2)``.

    Ties go to the smaller index.
    """
    if alpha < 0 or tau <= 0:
        raise ValueError("need alpha >= 0 and tau > 0")
    norm = np.hypot(alpha, tau)
    target = tau / norm
    idx = int(np.argmin(np.abs(target - np.sqrt(schedule.beta_bar)))) + 1
    return idx, 1.0 / norm


class GaussianMMSEPredictor:
    """Posterior mean of ``x0 ~ N(0, cov)`` given ``x_t``.

    ``x0_hat = sqrt(1 - bb) cov ((1 - bb) cov + bb I)^{-1} x_t``.  ``cov``
    may be None (identity), a scalar, a vector (diagonal) or a full PSD
    matrix.
    """

    def __init__(self, cov=None):
        if cov is None:
            cov = 1.0
        cov = np.asarray(cov, dtype=float)
        self._basis = None
        if cov.ndim == 0:
            if cov < 0:
                raise ValueError("prior variance must be nonnegative")
            self._eig = cov
        elif cov.ndim == 1:
            if np.any(cov < 0):
                raise ValueError("prior variances must be nonnegative")
            self._eig = cov
        elif cov.ndim == 2:
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("prior covariance must be symmetric")
            lam, U = np.linalg.eigh(cov)
            if lam[0] < -1e-10 * max(1.0, lam[-1]):
                raise ValueError("prior covariance must be positive semidefinite")
            self._eig = np.maximum(lam, 0.0)
            self._basis = U
        else:
            raise ValueError("cov must be a scalar, vector or matrix")
        self.cov = cov

    @property
    def is_isotropic(self) -> bool:
        return np.ndim(self._eig) == 0

    def gain(self, beta_bar: float):
        """Per-eigendirection shrinkage factor at noise level ``beta_bar``."""
        lam = self._eig
        keep = 1.0 - beta_bar
        den = keep * lam + beta_bar
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(den > 0, np.sqrt(keep) * lam / np.where(den > 0, den, 1.0), 0.0)
        return float(g) if np.ndim(g) == 0 else g

    def __call__(self, x_t, beta_bar: float) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=float)
        g = self.gain(beta_bar)
        if self._basis is None:
            return g * x_t
        U = self._basis
        return ((x_t @ U) * g) @ U.T

    def posterior_mse(self, beta_bar: float) -> float:
        """Expected per-element squared error of the posterior mean."""
        lam = np.broadcast_to(self._eig, np.shape(self._eig))
        keep = 1.0 - beta_bar
        den = keep * lam + beta_bar
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(den > 0, lam * beta_bar / np.where(den > 0, den, 1.0), 0.0)
        return float(np.mean(var))


def gaussian_mmse_predictor(prior_cov=None) -> GaussianMMSEPredictor:
    return GaussianMMSEPredictor(prior_cov)


def zero_predictor(x_t, beta_bar):
    return np.zeros_like(np.asarray(x_t, dtype=float))


def predictor_loss(predictor: Predictor, sampler, schedule: DiffusionSchedule, n_samples: int,
                   rng: np.random.Generator) -> float:
    """Monte Carlo estimate of ``E_x0 E_t ||predictor(x_t, bb_t) - x0||^2``.

    ``sampler(rng, n)`` must return an ``(n, dim)`` batch of clean latents;
    ``t`` is uniform over the schedule grid.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    x0 = np.atleast_2d(sampler(rng, n_samples))
    idx = rng.integers(1, schedule.T + 1, size=n_samples)
    total = 0.0
    for x, i in zip(x0, idx):
        bb = schedule.at(int(i))
        x_t = forward_diffuse(x, bb, rng)
        err = np.asarray(predictor(x_t, bb)) - x
        total += float(err @ err)
    return total / n_samples


def denoise(f_hat, link: EffectiveLink, schedule: DiffusionSchedule, predictor: Predictor,
            steps: int | None = None) -> np.ndarray:
    """Denoise a received latent ``alpha f + tau n``.

    The input is power-normalized, matched to a starting grid index, then
    walked down to the clean level with stride ``steps`` grid cells (the
    last jump lands exactly on 0).  ``steps`` defaults to ``T // 50``.
    """
    m = max(1, schedule.T // 50) if steps is None else int(steps)
    if m < 1:
        raise ValueError("steps must be >= 1")
    idx, scale = step_match(link.alpha, link.tau, schedule)
    x = np.asarray(f_hat, dtype=float) * scale
    while idx > 0:
        nxt = max(idx - m, 0)
        bb_t, bb_s = schedule.at(idx), schedule.at(nxt)
        x = ddim_step(x, bb_t, bb_s, predictor(x, bb_t))
        idx = nxt
    return x
