"""Synthetic latent sources standing in for JSCC encoder outputs, plus the
SEMLAT1 container used to ingest externally produced latents."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import DegenerateInputError

__all__ = [
    "LatentSourceConfig",
    "LatentFormatError",
    "generate_latent",
    "generate_batch",
    "normalize_power",
    "parse_source_spec",
    "load_latent_file",
    "write_latent_file",
    "SEMLAT1_MAGIC",
    "source_covariance",
]

SEMLAT1_MAGIC = b"SEMLAT1\x00"
_HEADER = struct.Struct("<8sII")

STRUCTURES = ("iid-gaussian", "ar1", "block-correlated", "heavy-tail")


class LatentFormatError(ValueError):
    """Malformed SEMLAT1 file; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class LatentSourceConfig:
    """Description of a synthetic latent source.

    ``rho`` is used by ``ar1`` and ``block-correlated``; ``block_size`` by
    ``block-correlated``; ``dof`` by ``heavy-tail``.  Every structure has
    unit marginal variance before ``power_scale`` is applied.
    """

    dim: int = 512
    structure: str = "iid-gaussian"
    rho: float = 0.0
    block_size: int = 8
    dof: float = 5.0
    power_scale: float = 1.0

    def __post_init__(self):
        if self.dim < 4 or self.dim % 2:
            raise ValueError(f"dim must be even and >= 4, got {self.dim}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}; expected one of {STRUCTURES}")
        if self.structure in ("ar1", "block-correlated") and not -1 < self.rho < 1:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.structure == "block-correlated":
            if self.block_size < 2:
                raise ValueError("block_size must be >= 2")
            if self.rho < -1.0 / (self.block_size - 1):
                raise ValueError(
                    f"rho={self.rho} is not a valid equicorrelation for block size {self.block_size}")
        if self.structure == "heavy-tail" and self.dof <= 2:
            raise ValueError(f"dof must exceed 2, got {self.dof}")
        if self.power_scale < 0:
            raise ValueError("power_scale must be nonnegative")


def parse_source_spec(spec: str, dim: int = 512, power_scale: float = 1.0) -> LatentSourceConfig:
    """Parse compact source specs such as ``iid``, ``ar1:0.9``,
    ``block:8:0.5`` or ``t:3``."""
    head, *args = spec.strip().split(":")
    head = head.lower()
    try:
        if head in ("iid", "iid-gaussian", "gaussian"):
            return LatentSourceConfig(dim=dim, power_scale=power_scale)
        if head == "ar1":
            (rho,) = args
            return LatentSourceConfig(dim=dim, structure="ar1", rho=float(rho), power_scale=power_scale)
        if head in ("block", "block-correlated"):
            size, rho = args
            return LatentSourceConfig(dim=dim, structure="block-correlated", block_size=int(size),
                                      rho=float(rho), power_scale=power_scale)
        if head in ("t", "student", "heavy-tail"):
            (dof,) = args
            return LatentSourceConfig(dim=dim, structure="heavy-tail", dof=float(dof),
                                      power_scale=power_scale)
    except ValueError as exc:
        if "unpack" in str(exc):
            raise ValueError(f"wrong number of arguments in source spec {spec!r}") from None
        raise
    raise ValueError(f"unrecognized source spec {spec!r}")


def generate_batch(cfg: LatentSourceConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` latent vectors as a ``(count, dim)`` array."""
    n = cfg.dim
    if cfg.structure == "iid-gaussian":
        x = rng.standard_normal((count, n))
    elif cfg.structure == "ar1":
        rho = cfg.rho
        innov = rng.standard_normal((count, n))
        x = np.empty((count, n))
        x[:, 0] = innov[:, 0]
        scale = np.sqrt(1.0 - rho * rho)
        for i in range(1, n):
            x[:, i] = rho * x[:, i - 1] + scale * innov[:, i]
    elif cfg.structure == "block-correlated":
        b, rho = cfg.block_size, cfg.rho
        n_blocks = -(-n // b)
        indiv = rng.standard_normal((count, n_blocks * b))
        shared = rng.standard_normal((count, n_blocks))
        if rho >= 0:
            x = np.sqrt(rho) * np.repeat(shared, b, axis=1) + np.sqrt(1.0 - rho) * indiv
        else:
            # negative equicorrelation: project out part of the block mean
            blocks = indiv.reshape(count, n_blocks, b)
            mean = blocks.mean(axis=2, keepdims=True)
            # x = y - k*mean(y) has Var = 1 - 2k/b + k^2/b and Cov = -2k/b + k^2/b
            # solve Cov/Var = rho for k in (0, 1]
            k = _block_shrink(b, rho)
            var = 1.0 - 2.0 * k / b + k * k / b
            x = ((blocks - k * mean) / np.sqrt(var)).reshape(count, n_blocks * b)
        x = x[:, :n]
    else:
        nu = cfg.dof
        x = rng.standard_t(nu, size=(count, n)) * np.sqrt((nu - 2.0) / nu)
    return np.sqrt(cfg.power_scale) * x


def _block_shrink(b: int, rho: float) -> float:
    # roots of (k^2 - 2k)(1 - rho)/b = rho, picking the one in (0, 1]
    a = (1.0 - rho) / b
    disc = 4 * a * a + 4 * a * rho
    return float((2 * a - np.sqrt(disc)) / (2 * a))


def generate_latent(cfg: LatentSourceConfig, rng: np.random.Generator) -> np.ndarray:
    return generate_batch(cfg, 1, rng)[0]


def normalize_power(f, target: float) -> np.ndarray:
    """Rescale ``f`` so that its mean square equals ``target``."""
    f = np.asarray(f, dtype=float)
    ms = np.mean(f * f)
    if ms == 0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return f * np.sqrt(target / ms)


def write_latent_file(path, batch) -> None:
    batch = np.asarray(batch, dtype="<f4")
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2:
        raise ValueError("batch must be 1-D or 2-D")
    count, dim = batch.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SEMLAT1_MAGIC, count, dim))
        fh.write(np.ascontiguousarray(batch).tobytes())


def load_latent_file(path, expected_dim: int | None = None) -> np.ndarray:
    """Read a SEMLAT1 file into a ``(count, dim)`` float32 array."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise LatentFormatError("truncated header", len(data))
    magic, count, dim = _HEADER.unpack_from(data, 0)
    if magic != SEMLAT1_MAGIC:
        raise LatentFormatError(f"bad magic {magic!r}", 0)
    if expected_dim is not None and dim != expected_dim:
        raise LatentFormatError(f"dim {dim} does not match expected {expected_dim}", 12)
    need = _HEADER.size + 4 * count * dim
    if len(data) < need:
        usable = (len(data) - _HEADER.size) // 4 * 4
        raise LatentFormatError(
            f"truncated payload: expected {count * dim} floats, found {(len(data) - _HEADER.size) // 4}",
            _HEADER.size + usable)
    if len(data) > need:
        raise LatentFormatError(f"{len(data) - need} trailing bytes", need)
    values = np.frombuffer(data, dtype="<f4", count=count * dim, offset=_HEADER.size)
    return values.reshape(count, dim).copy()


def source_covariance(cfg: LatentSourceConfig) -> np.ndarray | float:
    """Covariance of one latent vector (a scalar for isotropic sources)."""
    n = cfg.dim
    if cfg.structure in ("iid-gaussian", "heavy-tail"):
        return float(cfg.power_scale)
    idx = np.arange(n)
    if cfg.structure == "ar1":
        cov = cfg.rho ** np.abs(idx[:, None] - idx[None, :])
    else:
        same = (idx[:, None] // cfg.block_size) == (idx[None, :] // cfg.block_size)
        cov = np.where(same, cfg.rho, 0.0)
        np.fill_diagonal(cov, 1.0)
    return cfg.power_scale * cov
