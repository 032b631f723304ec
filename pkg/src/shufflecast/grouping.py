"""Semantic similarity, similarity- and channel-aware user grouping, and
the interference weights used by cooperative beamforming."""

from __future__ import annotations

import csv
from functools import lru_cache

import numpy as np

from .beamforming import LogisticParams, SolveOptions, optimize_uncorrelated
from .channel import gain_matrix

__all__ = [
    "MAX_REFINE_SIZE",
    "cosine_similarity",
    "similarity_matrix",
    "validate_similarity",
    "load_similarity_csv",
    "semantic_group",
    "refine_pairs",
    "pair_partitions",
    "group_users",
    "build_weights",
    "group_index",
]

MAX_REFINE_SIZE = 10


def cosine_similarity(e_i, e_j) -> float:
    a = np.asarray(e_i, dtype=float).ravel()
    b = np.asarray(e_j, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("embeddings must have equal length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def similarity_matrix(embeddings) -> np.ndarray:
    """Pairwise cosine similarities of the rows of ``embeddings``."""
    E = np.atleast_2d(np.asarray(embeddings, dtype=float))
    norms = np.linalg.norm(E, axis=1)
    if np.any(norms == 0):
        raise ValueError("cosine similarity is undefined for a zero vector")
    U = E / norms[:, None]
    R = np.clip(U @ U.T, -1.0, 1.0)
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return R


def validate_similarity(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("similarity matrix must be square")
    if not np.allclose(R, R.T, atol=1e-9, rtol=0):
        raise ValueError("similarity matrix must be symmetric")
    if not np.allclose(np.diag(R), 1.0, atol=1e-9, rtol=0):
        raise ValueError("similarity matrix must have a unit diagonal")
    if np.any(np.abs(R) > 1 + 1e-9):
        raise ValueError("similarities must lie in [-1, 1]")
    return R


def load_similarity_csv(path) -> np.ndarray:
    """Read a headerless K x K CSV similarity matrix."""
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    return validate_similarity(np.array(rows))


def semantic_group(R, th: float) -> list[list[int]]:
    """Sequential threshold clustering of users ``0..K-1``.

    User ``k`` joins the existing group with the highest mean similarity to
    it when that mean reaches ``th``; otherwise it opens a new group.
    """
    R = np.asarray(R, dtype=float)
    if not -1 < th < 1:
        raise ValueError("th must lie in (-1, 1)")
    groups = [[0]]
    for k in range(1, R.shape[0]):
        means = [float(np.mean(R[k, g])) for g in groups]
        best = int(np.argmax(means))
        if means[best] >= th:
            groups[best].append(k)
        else:
            groups.append([k])
    return groups


@lru_cache(maxsize=None)
def _partitions(n: int) -> tuple:
    # all partitions of range(n) into blocks of size 1 or 2, in lexicographic order
    if n == 0:
        return ((),)
    out = [((0,),) + tuple(tuple(x + 1 for x in blk) for blk in rest) for rest in _partitions(n - 1)]
    for j in range(1, n):
        remaining = [x for x in range(1, n) if x != j]
        for rest in _partitions(n - 2):
            out.append(((0, j),) + tuple(tuple(remaining[x] for x in blk) for blk in rest))
    return tuple(sorted(out, key=_pairing_key))


def _pairing_key(partition):
    return tuple(sorted(partition))


def pair_partitions(members) -> list[list[tuple]]:
    """Every partition of ``members`` into parts of size at most two."""
    members = list(members)
    return [[tuple(members[i] for i in blk) for blk in part] for part in _partitions(len(members))]


def _partition_value(part, C) -> float:
    return float(sum(C[blk[0], blk[1]] + C[blk[1], blk[0]] for blk in part if len(blk) == 2))


def refine_pairs(group, C) -> list[tuple]:
    """Split a coarse group into parts of size <= 2 maximizing the total
    cross gain ``C[i, j] + C[j, i]`` inside pairs.

    Groups of size <= 2 pass through.  Exact ties keep the lexicographically
    smallest pairing (first in enumeration order).
    """
    group = [int(u) for u in group]
    if len(group) <= 2:
        return [tuple(group)]
    if len(group) > MAX_REFINE_SIZE:
        raise ValueError(f"exhaustive pairing is limited to {MAX_REFINE_SIZE} users, got {len(group)}")
    C = np.asarray(C, dtype=float)
    best, best_val = None, -np.inf
    for part in pair_partitions(sorted(group)):
        val = _partition_value(part, C)
        if val > best_val:
            best, best_val = part, val
    return best


def group_users(R, th: float, h, sigma2: float, P_T: float, p: LogisticParams,
                opts: SolveOptions = SolveOptions(), v=None) -> list[tuple]:
    """Threshold grouping followed by channel-aware pair refinement.

    The gain matrix comes from the uncorrelated MM beamformer unless
    precomputed beamformers ``v`` are supplied.
    """
    R = validate_similarity(R)
    if v is None:
        v, _ = optimize_uncorrelated(h, sigma2, P_T, p, opts)
    C = np.abs(gain_matrix(h, v)) ** 2
    final = []
    for g in semantic_group(R, th):
        final.extend(refine_pairs(g, C))
    return sorted((tuple(sorted(g)) for g in final), key=lambda g: g[0])


def build_weights(groups, R) -> np.ndarray:
    """``omega[i, j] = 1 - R[i, j]`` for co-grouped users, 1 otherwise,
    clamped to [0, 1]."""
    R = np.asarray(R, dtype=float)
    K = R.shape[0]
    W = np.ones((K, K))
    for g in groups:
        for i in g:
            for j in g:
                if i != j:
                    W[i, j] = 1.0 - R[i, j]
    return np.clip(W, 0.0, 1.0)


def group_index(groups, K: int) -> np.ndarray:
    """Map each user to the position of its group in ``groups``."""
    out = np.full(K, -1, dtype=int)
    for gid, g in enumerate(groups):
        out[list(g)] = gid
    return out
