"""Reference precoders: matched filter, zero forcing and sum-rate WMMSE."""

from __future__ import annotations

import numpy as np

from ..channel import BeamformerSet, gain_matrix

__all__ = ["mrt", "zf", "wmmse", "sum_rate", "RankDeficientError"]


class RankDeficientError(np.linalg.LinAlgError):
    pass


def _h(h):
    return np.atleast_2d(np.asarray(getattr(h, "h", h), dtype=complex))


def mrt(h, P_T: float = 1.0) -> BeamformerSet:
    H = _h(h)
    K = H.shape[0]
    V = H / np.linalg.norm(H, axis=1, keepdims=True)
    return BeamformerSet(np.sqrt(P_T / K) * V, P_T)


def zf(h, P_T: float = 1.0) -> BeamformerSet:
    """Zero-forcing directions (pseudo-inverse) with equal per-user power."""
    H = _h(h)
    K, Nt = H.shape
    if K > Nt or np.linalg.matrix_rank(H) < K:
        raise RankDeficientError(f"zero forcing needs K <= N_t and full row rank (K={K}, N_t={Nt})")
    # columns of pinv(conj(H)) satisfy h_k^H w_m = delta_km
    Vt = np.linalg.pinv(H.conj())
    V = Vt.T
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    return BeamformerSet(np.sqrt(P_T / K) * V, P_T)


def sum_rate(h, v, sigma2: float) -> float:
    P = np.abs(gain_matrix(h, v)) ** 2
    signal = np.diag(P)
    interference = P.sum(axis=1) - signal
    return float(np.sum(np.log2(1.0 + signal / (sigma2 + interference))))


def _power_limited(A, rhs, P_T):
    """Solve ``(A + mu I) V = rhs`` with the smallest ``mu >= 0`` meeting the
    power budget; ``A`` Hermitian PSD, ``rhs`` one column per user."""
    lam, U = np.linalg.eigh(A)
    lam = np.maximum(lam, 0.0)
    proj = np.abs(U.conj().T @ rhs) ** 2
    weight = proj.sum(axis=1)

    def power(mu):
        return float(np.sum(weight / (lam + mu) ** 2))

    if lam.min() > 1e-12 * max(lam.max(), 1.0) and power(0.0) <= P_T:
        mu = 0.0
    else:
        lo, hi = 0.0, max(np.sqrt(weight.sum() / P_T), 1e-12)
        while power(hi) > P_T:
            hi *= 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if power(mid) > P_T:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        mu = hi
    return U @ ((U.conj().T @ rhs) / (lam + mu)[:, None])


def wmmse(h, sigma2: float, P_T: float = 1.0, weights=None, tol: float = 1e-6,
          max_iter: int = 500, return_trace: bool = False):
    """Weighted sum-rate maximization by the WMMSE block-coordinate scheme,
    initialized at MRT.  The sum-rate trace is nondecreasing."""
    H = _h(h)
    K, Nt = H.shape
    alpha = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
    V = mrt(H, P_T).v
    trace = [sum_rate(H, V, sigma2)]
    for _ in range(max_iter):
        G = gain_matrix(H, V)
        total = np.sum(np.abs(G) ** 2, axis=1) + sigma2
        direct = np.diag(G)
        u = direct / total
        w = 1.0 / np.real(1.0 - np.conj(u) * direct)
        c = alpha * w * np.abs(u) ** 2
        A = (H.T * c) @ H.conj()  # sum_m c_m h_m h_m^H
        rhs = (H * (alpha * w * u)[:, None]).T
        V = _power_limited(A, rhs, P_T).T
        trace.append(sum_rate(H, V, sigma2))
        if abs(trace[-1] - trace[-2]) < tol:
            break
    bf = BeamformerSet(V, P_T)
    return (bf, np.array(trace)) if return_trace else bf
