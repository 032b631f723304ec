"""Seeded end-to-end experiments at latent scale.

Every (seed, SNR) cell draws its own channels, latents, pattern keys and
noise from independent streams of ``make_rng(seed, stream)``.  Channels,
latents, keys and unit noise depend only on the seed, so every SNR point
of a seed sees the same realization (common random numbers).
"""

from __future__ import annotations

import csv
import importlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .beamforming import (LogisticParams, SolveOptions, mrt, objective, optimize_correlated,
                          optimize_uncorrelated, wmmse, zf)
from .channel import (DegenerateLinkError, EffectiveLink, compensate_demap, effective_link,
                      gain_matrix, gen_channels, receive, sinr, snr_db_to_sigma2, transmit)
from .diffusion import denoise, gaussian_mmse_predictor, make_schedule
from .grouping import (build_weights, group_index, group_users, load_similarity_csv,
                       similarity_matrix, validate_similarity)
from .latent import LatentSourceConfig, generate_batch, load_latent_file, source_covariance
from .numerics import make_rng, sample_autocov
from .shuffle import demap_c, gen_pattern, map_c

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "MetricsRow",
    "COLUMNS",
    "load_config",
    "run_uncorrelated",
    "run_correlated",
    "run_experiment",
    "emit",
    "read_table",
    "comp_link",
]

CHANNEL_STREAM, LATENT_STREAM, PATTERN_STREAM, NOISE_STREAM = 1, 2, 3, 4
AUTOCOV_LAGS = 10


class ConfigError(ValueError):
    """Invalid experiment configuration; the message lists field paths."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceSection(_Strict):
    structure: Literal["iid-gaussian", "ar1", "block-correlated", "heavy-tail"] = "iid-gaussian"
    rho: float = 0.0
    block_size: int = 8
    dof: float = 5.0
    power_scale: float = 1.0


class ScheduleSection(_Strict):
    T: int = Field(1000, ge=2)
    shape: Literal["linear", "cosine"] = "linear"
    stride: Optional[int] = Field(None, ge=1)


class DenoiserSection(_Strict):
    kind: Literal["oracle-gaussian", "none", "external"] = "oracle-gaussian"
    # prior covariance of the oracle: identity, or the covariance of the configured source
    prior: Literal["identity", "source"] = "identity"
    # "package.module:callable" returning a predictor, for kind == external
    external: Optional[str] = None


class LogisticSection(_Strict):
    a: float = 0.0
    b: float = Field(1.0, gt=0)
    c: float = Field(1.0, gt=0)
    e: float = Field(0.7, gt=0)


class GroupingSection(_Strict):
    th: float = Field(0.5, gt=-1, lt=1)
    similarity: Literal["duplicate", "latent-cosine", "csv", "embeddings"] = "duplicate"
    path: Optional[str] = None


class SolverSection(_Strict):
    tol: float = Field(1e-6, gt=0)
    max_iter: int = Field(100, ge=1)


class ExperimentConfig(_Strict):
    """Validated experiment description (a single JSON document)."""

    scenario: Literal["uncorrelated", "correlated"] = "uncorrelated"
    Nt: int = Field(8, ge=1)
    K: int = Field(8, ge=1)
    N: int = Field(256, ge=2)
    snr_db: list[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0], min_length=1)
    seeds: list[int] = Field(default_factory=lambda: list(range(50)), min_length=1)
    P_T: float = Field(1.0, gt=0)
    source: SourceSection = SourceSection()
    schedule: ScheduleSection = ScheduleSection()
    beamformer: Literal["proposed", "mrt", "zf", "wmmse"] = "proposed"
    mapping: Optional[Literal["per-user-shuffle", "same-mapping", "group-shared"]] = None
    denoiser: DenoiserSection = DenoiserSection()
    logistic: LogisticSection = LogisticSection()
    grouping: GroupingSection = GroupingSection()
    duplication: int = Field(1, ge=1)
    solver: SolverSection = SolverSection()

    @model_validator(mode="after")
    def _check(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.K % self.duplication:
            raise ValueError(f"duplication {self.duplication} must divide K = {self.K}")
        if self.scenario == "correlated" and self.mapping not in (None, "group-shared"):
            raise ValueError("the correlated scenario always uses group-shared mapping")
        if self.denoiser.kind == "external" and not self.denoiser.external:
            raise ValueError("denoiser.external must name a callable for kind 'external'")
        if self.grouping.similarity in ("csv", "embeddings") and not self.grouping.path:
            raise ValueError(f"grouping.path is required for similarity '{self.grouping.similarity}'")
        try:
            self.latent_config()
        except ValueError as exc:
            raise ValueError(f"source: {exc}") from None
        return self

    @property
    def dim(self) -> int:
        return 2 * self.N

    @property
    def mapping_mode(self) -> str:
        if self.mapping in (None, "group-shared"):
            return "per-user-shuffle"
        return self.mapping

    def latent_config(self) -> LatentSourceConfig:
        s = self.source
        return LatentSourceConfig(self.dim, s.structure, s.rho, s.block_size, s.dof, s.power_scale)

    def logistic_params(self) -> LogisticParams:
        return LogisticParams(**self.logistic.model_dump())

    def solve_options(self) -> SolveOptions:
        return SolveOptions(tol=self.solver.tol, max_iter=self.solver.max_iter)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def load_config(source) -> ExperimentConfig:
    """Build a config from a dict, a JSON string or a path to a JSON file."""
    if isinstance(source, ExperimentConfig):
        return source
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        source = text
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    try:
        return ExperimentConfig.model_validate(source)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


@dataclass(frozen=True)
class MetricsRow:
    seed: int
    snr_db: float
    user: int
    latent_mse_pre: float
    latent_mse_post: float
    alpha: float
    tau: float
    gamma: float
    objective: float
    group_id: int
    phase_residual: float
    interference_autocov: float
    scheme: str


COLUMNS = tuple(f.name for f in fields(MetricsRow))
_INT_COLUMNS = {"seed", "user", "group_id"}


# --- per-cell machinery -----------------------------------------------------

@lru_cache(maxsize=8)
def _predictor_for(cfg_json: str):
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    d = cfg.denoiser
    if d.kind == "none":
        return None
    if d.kind == "external":
        mod, _, name = d.external.partition(":")
        try:
            factory = getattr(importlib.import_module(mod), name)
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"denoiser.external: cannot import {d.external!r}: {exc}") from None
        # factories flagged with ``wants_config`` are called with the config
        return factory(cfg) if getattr(factory, "wants_config", False) else factory
    cov = None if d.prior == "identity" else source_covariance(cfg.latent_config())
    return gaussian_mmse_predictor(cov)


@lru_cache(maxsize=8)
def _schedule_for(T: int, shape: str):
    return make_schedule(T, shape)


def _beamform(cfg: ExperimentConfig, h, sigma2):
    p, opts = cfg.logistic_params(), cfg.solve_options()
    if cfg.beamformer == "proposed":
        bf, _ = optimize_uncorrelated(h, sigma2, cfg.P_T, p, opts)
        return bf
    if cfg.beamformer == "mrt":
        return mrt(h, cfg.P_T)
    if cfg.beamformer == "zf":
        return zf(h, cfg.P_T)
    return wmmse(h, sigma2, cfg.P_T)


def _draws(cfg: ExperimentConfig, seed: int, n_sources: int):
    K = cfg.K
    h = gen_channels(cfg.Nt, K, make_rng(seed, CHANNEL_STREAM)).h
    unique = generate_batch(cfg.latent_config(), n_sources, make_rng(seed, LATENT_STREAM))
    keys = make_rng(seed, PATTERN_STREAM).integers(0, 2 ** 63, size=K, dtype=np.int64)
    nrng = make_rng(seed, NOISE_STREAM)
    unit_noise = nrng.standard_normal((K, cfg.N)) + 1j * nrng.standard_normal((K, cfg.N))
    return h, unique, [int(k) for k in keys], unit_noise


def _residual_autocov(f_hat, f, alpha):
    e = f_hat - alpha * f
    # the estimator needs max_lag < len / 10
    lags = min(AUTOCOV_LAGS, -(-e.size // 10) - 1)
    if lags < 1:
        return math.nan
    return float(np.max(np.abs(sample_autocov(e, lags))))


def _post(cfg, f_hat, f, link, predictor, pre):
    if predictor is None:
        return pre
    sched = _schedule_for(cfg.schedule.T, cfg.schedule.shape)
    x = denoise(f_hat, link, sched, predictor, cfg.schedule.stride)
    return float(np.mean((x - f) ** 2))


def _rows_plain(cfg, seed, snr, h, f, patterns, unit_noise, v, predictor, scheme):
    """Per-user shuffle (or same-mapping) transmission with beams ``v``."""
    sigma2 = snr_db_to_sigma2(snr, cfg.P_T)
    V = v.v
    z = np.stack([map_c(f[k], patterns[k]) for k in range(cfg.K)])
    x = transmit(z, V)
    p = cfg.logistic_params()
    obj = objective(h, V, sigma2, cfg.P_T, p)
    rows = []
    for k in range(cfg.K):
        y = receive(x, h[k], sigma2, None) + np.sqrt(sigma2) * unit_noise[k]
        link = effective_link(h, V, sigma2, k)
        if link.alpha <= 1e-12:
            if cfg.beamformer != "wmmse":
                raise DegenerateLinkError(f"user {k} has no direct gain")
            # sum-rate allocation may switch a user off; record it as dropped
            rows.append(MetricsRow(seed, float(snr), k, math.nan, math.nan, 0.0, link.tau, 0.0, obj, k,
                                   math.nan, math.nan, scheme))
            continue
        f_hat = compensate_demap(y, h[k], V[k], patterns[k])
        pre = float(np.mean((f_hat / link.alpha - f[k]) ** 2))
        post = _post(cfg, f_hat, f[k], link, predictor, pre)
        rows.append(MetricsRow(seed, float(snr), k, pre, post, link.alpha, link.tau,
                               float(sinr(h, V, sigma2, k)), obj, k, math.nan,
                               _residual_autocov(f_hat, f[k], link.alpha), scheme))
    return rows


def _uncorrelated_cell(cfg: ExperimentConfig, seed: int, snr: float, predictor):
    h, f, keys, unit_noise = _draws(cfg, seed, cfg.K)
    sigma2 = snr_db_to_sigma2(snr, cfg.P_T)
    if cfg.mapping_mode == "same-mapping":
        patterns = [gen_pattern(keys[0], cfg.dim)] * cfg.K
    else:
        patterns = [gen_pattern(k, cfg.dim) for k in keys]
    v = _beamform(cfg, h, sigma2)
    return _rows_plain(cfg, seed, snr, h, f, patterns, unit_noise, v, predictor, "uncorrelated")


def _similarity(cfg: ExperimentConfig, f, source_of):
    g = cfg.grouping
    if g.similarity == "duplicate":
        R = (source_of[:, None] == source_of[None, :]).astype(float)
    elif g.similarity == "latent-cosine":
        R = similarity_matrix(f)
    elif g.similarity == "csv":
        R = load_similarity_csv(g.path)
    else:
        R = similarity_matrix(load_latent_file(g.path).astype(float))
    R = validate_similarity(R)
    if R.shape != (cfg.K, cfg.K):
        raise ConfigError(f"grouping.path: similarity is {R.shape[0]}x{R.shape[1]}, expected K = {cfg.K}")
    return R


def comp_link(G, psi, groups, R, sigma2: float, k: int) -> EffectiveLink:
    """Effective link of user ``k`` after receive rotation ``exp(1j psi_k)``.

    The partner's stream adds ``R_km`` coherent copies of the own latent
    (``R`` clamped to [0, 1]); the quadrature part of the combined gain and
    the uncorrelated share of the partner's latent count as noise, as does
    leakage from other groups (distinct patterns).
    """
    K = G.shape[0]
    partner = [m for g in groups if k in g for m in g if m != k]
    rot = np.exp(1j * psi[k])
    c = rot * G[k, k]
    extra = 0.0
    for m in partner:
        r = float(np.clip(R[k, m], 0.0, 1.0))
        c += rot * r * G[k, m]
        extra += (1.0 - r * r) * abs(G[k, m]) ** 2
    outside = sum(abs(G[k, m]) ** 2 for m in range(K) if m != k and m not in partner)
    alpha = float(np.real(c))
    if alpha <= 1e-12:
        raise DegenerateLinkError(f"user {k}: combined in-phase gain {alpha:.3e} is not positive")
    tau2 = sigma2 + outside + extra + float(np.imag(c)) ** 2
    return EffectiveLink(alpha, float(np.sqrt(tau2)))


def _correlated_cell(cfg: ExperimentConfig, seed: int, snr: float, predictor):
    SN = cfg.duplication
    h, unique, keys, unit_noise = _draws(cfg, seed, cfg.K // SN)
    source_of = np.repeat(np.arange(cfg.K // SN), SN)
    f = unique[source_of]
    sigma2 = snr_db_to_sigma2(snr, cfg.P_T)
    p, opts = cfg.logistic_params(), cfg.solve_options()

    # non-COMP baseline: per-user patterns; its MM solve is also the grouping pre-pass
    v_pre, _ = optimize_uncorrelated(h, sigma2, cfg.P_T, p, opts)
    v_base = v_pre if cfg.beamformer == "proposed" else _beamform(cfg, h, sigma2)
    base = _rows_plain(cfg, seed, snr, h, f, [gen_pattern(k, cfg.dim) for k in keys], unit_noise,
                       v_base, predictor, "non-comp")

    R = _similarity(cfg, f, source_of)
    groups = group_users(R, cfg.grouping.th, h, sigma2, cfg.P_T, p, opts, v=v_pre)
    omega = build_weights(groups, R)
    res, _ = optimize_correlated(h, sigma2, cfg.P_T, p, omega, groups, opts)
    gid = group_index(groups, cfg.K)
    patterns = [gen_pattern(keys[groups[gid[k]][0]], cfg.dim) for k in range(cfg.K)]
    V = res.beamformers.v
    G = gain_matrix(h, V)
    z = np.stack([map_c(f[k], patterns[k]) for k in range(cfg.K)])
    x = transmit(z, V)
    obj = objective(h, V, sigma2, cfg.P_T, p, omega)
    rows = []
    for k in range(cfg.K):
        y = receive(x, h[k], sigma2, None) + np.sqrt(sigma2) * unit_noise[k]
        f_hat = demap_c(y * np.exp(1j * res.psi[k]), patterns[k])
        link = comp_link(G, res.psi, groups, R, sigma2, k)
        pre = float(np.mean((f_hat / link.alpha - f[k]) ** 2))
        post = _post(cfg, f_hat, f[k], link, predictor, pre)
        g = groups[gid[k]]
        resid = res.phase_residual[g] if len(g) == 2 else math.nan
        rows.append(MetricsRow(seed, float(snr), k, pre, post, link.alpha, link.tau,
                               link.alpha ** 2 / link.tau ** 2, obj, int(gid[k]), resid,
                               _residual_autocov(f_hat, f[k], link.alpha), "comp"))
    return rows + base


def _run_cell(args):
    cfg_json, seed, snr, scenario, predictor = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    if predictor is None:
        predictor = _predictor_for(cfg_json)
    elif predictor == "none":
        predictor = None
    cell = _correlated_cell if scenario == "correlated" else _uncorrelated_cell
    return cell(cfg, seed, snr, predictor)


def _run(cfg, scenario, predictor, workers):
    cfg = load_config(cfg)
    cfg_json = cfg.model_dump_json()
    _predictor_for(cfg_json)  # fail fast on a bad external denoiser
    jobs = [(cfg_json, seed, snr, scenario, predictor) for seed in cfg.seeds for snr in cfg.snr_db]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    return [row for cell in results for row in cell]


def run_uncorrelated(cfg, predictor=None, workers: int = 1) -> list[MetricsRow]:
    """One row per (seed, SNR, user), in that order.

    ``predictor`` overrides the configured denoiser (must be picklable when
    ``workers > 1``).
    """
    return _run(cfg, "uncorrelated", predictor, workers)


def run_correlated(cfg, predictor=None, workers: int = 1) -> list[MetricsRow]:
    """COMP rows (scheme ``comp``) followed by the non-COMP baseline rows
    (scheme ``non-comp``) for every (seed, SNR) cell."""
    return _run(cfg, "correlated", predictor, workers)


def run_experiment(cfg, predictor=None, workers: int = 1) -> list[MetricsRow]:
    cfg = load_config(cfg)
    run = run_correlated if cfg.scenario == "correlated" else run_uncorrelated
    return run(cfg, predictor, workers)


# --- serialization ----------------------------------------------------------

def _fmt(name, value):
    if name in _INT_COLUMNS:
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


COMP_LINK_MODEL = ("alpha = Re(exp(j psi_k) (G_kk + R_km G_km)); tau^2 = sigma^2 + out-of-group power"
                   " + (1 - R_km^2) |G_km|^2 + Im(.)^2")


def emit(table, format: str = "csv", path=None) -> str:
    """Serialize rows in :data:`COLUMNS` order; floats keep 17 significant
    digits.  Writes to ``path`` when given and returns the text.

    JSON output carries a ``metadata`` block naming the COMP link model
    whenever COMP rows are present.
    """
    rows = [astuple(r) if isinstance(r, MetricsRow) else tuple(r) for r in table]
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(n, v) for n, v in zip(COLUMNS, r)])
        text = buf.getvalue()
    elif format == "json":
        recs = [{n: (int(v) if n in _INT_COLUMNS else v) for n, v in zip(COLUMNS, r)} for r in rows]
        doc = {"columns": list(COLUMNS), "rows": recs}
        if any(rec["scheme"] == "comp" for rec in recs):
            doc["metadata"] = {"comp_link_model": COMP_LINK_MODEL}
        text = json.dumps(doc, indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {format!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_table(text: str, format: str = "csv") -> list[MetricsRow]:
    """Parse the output of :func:`emit`."""
    out = []
    if format == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError("unexpected CSV header")
        for rec in reader:
            out.append(MetricsRow(*(_parse(n, v) for n, v in zip(COLUMNS, rec))))
    elif format == "json":
        data = json.loads(text)
        for rec in data["rows"]:
            out.append(MetricsRow(*(rec[n] for n in COLUMNS)))
    else:
        raise ValueError(f"unknown format {format!r}")
    return out


def _parse(name, value):
    if name in _INT_COLUMNS:
        return int(value)
    if name == "scheme":
        return value
    return float(value)
