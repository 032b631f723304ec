"""Downlink MU-MISO link simulation and SINR bookkeeping.

Channels and beamformers are stored as ``(K, N_t)`` complex arrays whose
row ``k`` is ``h_k`` (resp. ``v_k``).  The gain matrix
``G[k, m] = h_k^H v_m`` is the building block for every SINR quantity.

Noise convention: the real and imaginary parts of the receiver noise each
have variance ``sigma2``, so every real latent element sees noise of
variance ``sigma2`` after demapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import draw_complex_gaussian
from .shuffle import ShufflePattern, demap_c

__all__ = [
    "ChannelSet",
    "BeamformerSet",
    "EffectiveLink",
    "DegenerateLinkError",
    "snr_db_to_sigma2",
    "gen_channels",
    "gain_matrix",
    "transmit",
    "receive",
    "compensate_demap",
    "effective_link",
    "sinr",
    "equivalent_sinr",
    "weighted_sinr",
]


class DegenerateLinkError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelSet:
    h: np.ndarray
    sigma2: float

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "h", h)

    @property
    def K(self) -> int:
        return self.h.shape[0]

    @property
    def Nt(self) -> int:
        return self.h.shape[1]


@dataclass(frozen=True)
class BeamformerSet:
    v: np.ndarray
    P_T: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "v", np.atleast_2d(np.asarray(self.v, dtype=complex)))
        if self.P_T <= 0:
            raise ValueError("P_T must be positive")

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.v) ** 2))

    def normalized(self) -> "BeamformerSet":
        return BeamformerSet(self.v * np.sqrt(self.P_T / self.power), self.P_T)


@dataclass(frozen=True)
class EffectiveLink:
    """Scalar surrogate ``f_hat = alpha * f + tau * n`` of a received latent."""

    alpha: float
    tau: float

    @property
    def beta_bar(self) -> float:
        return self.tau ** 2 / (self.alpha ** 2 + self.tau ** 2)


def _as_v(v) -> np.ndarray:
    if isinstance(v, BeamformerSet):
        return v.v
    return np.atleast_2d(np.asarray(v, dtype=complex))


def _as_h(h) -> np.ndarray:
    if isinstance(h, ChannelSet):
        return h.h
    return np.atleast_2d(np.asarray(h, dtype=complex))


def snr_db_to_sigma2(snr_db: float, P_T: float = 1.0) -> float:
    return P_T * 10.0 ** (-snr_db / 10.0)


def gen_channels(Nt: int, K: int, rng: np.random.Generator, sigma2: float = 1.0) -> ChannelSet:
    """Rayleigh channels ``h_k ~ CN(0, I / N_t)``."""
    if Nt < 1 or K < 1:
        raise ValueError("Nt and K must be >= 1")
    return ChannelSet(draw_complex_gaussian((K, Nt), 0.5 / Nt, rng), sigma2)


def gain_matrix(h, v) -> np.ndarray:
    """``G[k, m] = h_k^H v_m``."""
    return _as_h(h).conj() @ _as_v(v).T


def transmit(z, v) -> np.ndarray:
    """Precode and superpose: row ``n`` of the result is ``sum_k v_k z[k, n]``."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    V = _as_v(v)
    if z.shape[0] != V.shape[0]:
        raise ValueError(f"{z.shape[0]} symbol streams for {V.shape[0]} beamformers")
    return z.T @ V


def receive(x, h_k, sigma2: float, rng: np.random.Generator | None) -> np.ndarray:
    """``y_n = h_k^H x_n + noise``; ``rng=None`` gives the noiseless output."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    y = x @ np.conj(np.asarray(h_k, dtype=complex))
    if rng is not None and sigma2 > 0:
        y = y + draw_complex_gaussian(y.shape[0], sigma2, rng)
    return y


def compensate_demap(y, h_k, v_k, p: ShufflePattern) -> np.ndarray:
    """Undo the phase of the direct link and demap to a real latent."""
    g = np.vdot(np.asarray(h_k, dtype=complex), np.asarray(v_k, dtype=complex))
    if abs(g) < 1e-12:
        raise DegenerateLinkError(f"|h^H v| = {abs(g):.3e} is too small to compensate")
    return demap_c(np.asarray(y) * np.exp(-1j * np.angle(g)), p)


def _terms(h, v, sigma2, omega=None):
    G = gain_matrix(h, v)
    P = np.abs(G) ** 2
    signal = np.diag(P).copy()
    cross = P.copy()
    np.fill_diagonal(cross, 0.0)
    if omega is not None:
        W = np.asarray(omega, dtype=float)
        cross = cross * W
        np.fill_diagonal(cross, 0.0)
    return signal, cross.sum(axis=1)


def effective_link(h, v, sigma2: float, k: int) -> EffectiveLink:
    signal, interference = _terms(h, v, sigma2)
    return EffectiveLink(float(np.sqrt(signal[k])), float(np.sqrt(interference[k] + sigma2)))


def _pick(arr, k):
    return arr if k is None else float(arr[k])


def sinr(h, v, sigma2: float, k: int | None = None):
    """Per-user SINR; all users when ``k`` is None."""
    signal, interference = _terms(h, v, sigma2)
    return _pick(signal / (sigma2 + interference), k)


def equivalent_sinr(h, v, sigma2: float, P_T: float, k: int | None = None, omega=None):
    """SINR with the power budget folded into the noise term.

    Invariant under a common rescaling of all beamformers, and equal to
    :func:`sinr` when the total power is exactly ``P_T``.
    """
    V = _as_v(v)
    signal, interference = _terms(h, V, sigma2, omega)
    noise = sigma2 * np.sum(np.abs(V) ** 2) / P_T
    return _pick(signal / (noise + interference), k)


def weighted_sinr(h, v, sigma2: float, k: int | None, omega):
    """SINR with interference from user ``m`` at user ``k`` scaled by
    ``omega[k, m]`` (squared-magnitude reading)."""
    signal, interference = _terms(h, v, sigma2, omega)
    return _pick(signal / (sigma2 + interference), k)
