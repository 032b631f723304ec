"""Shuffle-and-combine symbol mapping between real latents and complex
channel symbols, and statistics of cross-demapped interference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .latent import LatentSourceConfig, generate_batch
from .numerics import GaussianityReport, excess_kurtosis, ks_normal, make_rng, sample_autocov

__all__ = [
    "ShufflePattern",
    "gen_pattern",
    "identity_pattern",
    "map_c",
    "demap_c",
    "quarter_rotation",
    "cross_demap_interference",
    "gaussianization_report",
]

# stream id reserved for key -> permutation derivation
PATTERN_STREAM = 0x5348_5546


@dataclass(frozen=True, eq=False)
class ShufflePattern:
    """A permutation of ``0..dim-1`` together with its inverse.

    ``perm[i]`` is the latent index placed in shuffled slot ``i``; the
    first half of the slots become real parts and the second half
    imaginary parts of the channel symbols.
    """

    perm: np.ndarray
    key: int | None = None
    inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.intp)
        n = perm.size
        if perm.ndim != 1 or n < 4 or n % 2:
            raise ValueError(f"pattern length must be even and >= 4, got {n}")
        if not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValueError("perm is not a permutation")
        perm = perm.copy()
        inv = np.empty(n, dtype=np.intp)
        inv[perm] = np.arange(n)
        perm.flags.writeable = False
        inv.flags.writeable = False
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "inv", inv)

    @property
    def dim(self) -> int:
        return self.perm.size

    def __eq__(self, other):
        if not isinstance(other, ShufflePattern):
            return NotImplemented
        return np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())


def gen_pattern(key: int, dim: int) -> ShufflePattern:
    """Derive a uniformly random permutation from a 64-bit key (Fisher-Yates)."""
    if dim % 2 or dim < 4:
        raise ValueError(f"dim must be even and >= 4, got {dim}")
    # Generator.permutation is an in-place Fisher-Yates shuffle
    perm = make_rng(key, PATTERN_STREAM).permutation(dim)
    return ShufflePattern(perm, key=int(key))


def identity_pattern(dim: int) -> ShufflePattern:
    return ShufflePattern(np.arange(dim))


def map_c(f, p: ShufflePattern) -> np.ndarray:
    """Pack a real latent of length 2N into N complex symbols.

    ``out[i] = f[perm[i]] + 1j * f[perm[i + N]]``.  Works row-wise on a
    2-D batch.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != p.dim:
        raise ValueError(f"latent length {f.shape[-1]} does not match pattern dim {p.dim}")
    half = p.dim // 2
    shuffled = f[..., p.perm]
    out = np.empty(f.shape[:-1] + (half,), dtype=complex)
    out.real = shuffled[..., :half]
    out.imag = shuffled[..., half:]
    return out


def demap_c(y, p: ShufflePattern) -> np.ndarray:
    """Inverse of :func:`map_c`: unpack real/imaginary parts and unshuffle."""
    y = np.asarray(y)
    half = p.dim // 2
    if y.shape[-1] != half:
        raise ValueError(f"symbol length {y.shape[-1]} does not match pattern dim {p.dim}")
    stacked = np.concatenate([np.real(y), np.imag(y)], axis=-1)
    return stacked[..., p.inv]


def quarter_rotation(f) -> np.ndarray:
    """Apply ``P = [[0, -I], [I, 0]]``: ``(f1, f2) -> (-f2, f1)``."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] % 2:
        raise ValueError("length must be even")
    half = f.shape[-1] // 2
    return np.concatenate([-f[..., half:], f[..., :half]], axis=-1)


def cross_demap_interference(f, p_src: ShufflePattern, p_dst: ShufflePattern) -> np.ndarray:
    """What a user holding ``p_dst`` sees when demapping a signal mapped with
    ``p_src``: a permuted copy of ``f``."""
    if p_src.dim != p_dst.dim:
        raise ValueError("patterns have different dimensions")
    return demap_c(map_c(f, p_src), p_dst)


def gaussianization_report(cfg: LatentSourceConfig, n_samples: int, rng: np.random.Generator,
                           max_lag: int = 10) -> GaussianityReport:
    """Pooled statistics of cross-demapped interference versus N(0, 1).

    Each sample pairs a fresh latent with a fresh pair of distinct
    patterns.  Values are standardized by ``sqrt(power_scale)`` before the
    KS comparison.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    batch = generate_batch(cfg, n_samples, rng)
    keys = rng.integers(0, 2 ** 63, size=(n_samples, 2), dtype=np.int64)
    out = np.empty_like(batch)
    for i in range(n_samples):
        k_src, k_dst = int(keys[i, 0]), int(keys[i, 1])
        if k_dst == k_src:
            k_dst += 1
        out[i] = cross_demap_interference(batch[i], gen_pattern(k_src, cfg.dim),
                                          gen_pattern(k_dst, cfg.dim))
    scale = np.sqrt(cfg.power_scale) if cfg.power_scale > 0 else 1.0
    z = out / scale
    return GaussianityReport(
        ks_statistic=ks_normal(z),
        max_abs_autocov=float(np.max(np.abs(sample_autocov(z, max_lag)))),
        excess_kurtosis=excess_kurtosis(z),
        sample_count=int(z.size),
    )
