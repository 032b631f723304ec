"""Utility-maximizing beamforming by minorization-maximization.

Each outer iteration anchors the logistic minorizer at the current
equivalent SINRs, solves the resulting multiple-ratio problem with one
quadratic-transform pass (auxiliary ``r`` in closed form, then the
beamformers from a Hermitian linear system per user), and repeats until
the objective stalls.  An optional weight matrix ``omega`` discounts
interference between co-grouped users; ``omega[k, m]`` scales the power
that user ``m``'s beam leaks into user ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import BeamformerSet, equivalent_sinr, gain_matrix
from ..numerics import SingularSystemError, hermitian_solve
from .logistic import (AnchorSingularityError, LogisticParams, SurrogateCoeffs, _score_nonneg,
                       surrogate_coeffs)

__all__ = [
    "SolveReport",
    "SolveOptions",
    "CompResult",
    "IndefiniteSystemError",
    "objective",
    "anchor_coeffs",
    "update_r",
    "update_v",
    "optimize_uncorrelated",
    "optimize_correlated",
    "phase_normalize",
    "wrap_phase",
]


class IndefiniteSystemError(SingularSystemError):
    """The beamformer update system is not positive definite."""


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-6
    max_iter: int = 100
    anchor_retries: int = 5
    anchor_step: float = 1.01
    max_backtracks: int = 30


@dataclass
class SolveReport:
    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    final_objective: float = float("nan")
    # iterations whose linear system needed diagonal loading
    indefinite_steps: int = 0
    # iterations where the full update lowered the objective and a shorter step was taken
    backtracked_steps: int = 0
    anchor_retries: int = 0
    # stopped because no ascent step could be found
    stalled: bool = False

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "objective_trace": [float(x) for x in self.objective_trace],
            "converged": self.converged,
            "final_objective": float(self.final_objective),
            "indefinite_steps": self.indefinite_steps,
            "backtracked_steps": self.backtracked_steps,
            "anchor_retries": self.anchor_retries,
            "stalled": self.stalled,
        }


def _h(h) -> np.ndarray:
    return getattr(h, "h", h)


def _v(v) -> np.ndarray:
    return getattr(v, "v", v)


def _omega(omega, K):
    if omega is None:
        return np.ones((K, K))
    W = np.asarray(omega, dtype=float)
    if W.shape != (K, K):
        raise ValueError(f"omega must be {K}x{K}, got {W.shape}")
    return W


def _ratio_terms(h, V, sigma2, P_T, W):
    """Per-user signal power, weighted interference plus scaled noise, and
    the complex direct gains."""
    G = gain_matrix(h, V)
    P = np.abs(G) ** 2
    cross = P * W
    np.fill_diagonal(cross, 0.0)
    noise = sigma2 * np.sum(np.abs(V) ** 2) / P_T
    return np.diag(P).copy(), cross.sum(axis=1) + noise, np.diag(G).copy()


def objective(h, v, sigma2: float, P_T: float, p: LogisticParams, omega=None) -> float:
    """Sum of logistic scores of the (weighted) equivalent SINRs."""
    gam = equivalent_sinr(h, v, sigma2, P_T, omega=omega)
    return float(np.sum(_score_nonneg(gam, p)))


def anchor_coeffs(gamma0, p: LogisticParams, opts: SolveOptions = SolveOptions()):
    """Surrogate coefficients at ``gamma0``, nudging singular anchors.

    Returns the coefficients and the number of nudges applied.
    """
    g0 = np.maximum(np.asarray(gamma0, dtype=float), 1e-300)
    for attempt in range(opts.anchor_retries + 1):
        try:
            return surrogate_coeffs(g0, p), attempt
        except AnchorSingularityError:
            if attempt == opts.anchor_retries:
                raise
            G = p.c * (1 - p.e) * g0 ** p.e + 1
            g0 = np.where(np.abs(G) <= 1e-9, g0 * opts.anchor_step, g0)
    raise AssertionError("unreachable")


def update_r(h, v, sigma2: float, P_T: float, coeffs: SurrogateCoeffs, omega=None) -> np.ndarray:
    """Optimal quadratic-transform auxiliaries for fixed beamformers.

    ``r_k = Re(h_k^H v_k) / (F_k |h_k^H v_k|^2 + G_k q_k)`` where ``q_k`` is
    the weighted interference plus power-scaled noise.
    """
    H, V = _h(h), _v(v)
    W = _omega(omega, H.shape[0])
    signal, q, direct = _ratio_terms(H, V, sigma2, P_T, W)
    den = coeffs.F * signal + coeffs.G * q
    if np.any(den == 0):
        raise ZeroDivisionError("r-update denominator vanishes")
    return np.real(direct) / den


def _system_matrices(r, H, sigma2, P_T, coeffs, W):
    K, Nt = H.shape
    w_int = r ** 2 * coeffs.E * coeffs.G  # interference weight contributed by each victim m
    outer = H[:, :, None] * H[:, None, :].conj()  # h_m h_m^H
    noise = np.sum(w_int) * sigma2 / P_T
    mats = []
    for k in range(K):
        # sum over m != k of r_m^2 omega[m, k] E_m G_m h_m h_m^H
        coef = w_int * W[:, k]
        coef[k] = r[k] ** 2 * coeffs.E[k] * coeffs.F[k]
        A = np.tensordot(coef, outer, axes=1) + noise * np.eye(Nt)
        mats.append(0.5 * (A + A.conj().T))
    return mats


def update_v(r, h, sigma2: float, P_T: float, coeffs: SurrogateCoeffs, omega=None,
             loading: bool = False) -> BeamformerSet:
    """Maximize the quadratic-transform objective over the beamformers.

    With ``omega`` the interference weights enter as ``omega[m, k]`` on the
    ``h_m h_m^H`` term of user ``k``'s system.  If a system matrix is
    indefinite, :class:`IndefiniteSystemError` is raised unless
    ``loading`` is set, in which case the matrix is shifted to be positive
    definite (diagonal loading of ``1e-9 trace / N_t`` beyond its most
    negative eigenvalue).
    """
    H = _h(h)
    K, Nt = H.shape
    W = _omega(omega, K)
    r = np.asarray(r, dtype=float)
    out = np.empty((K, Nt), dtype=complex)
    for k, A in enumerate(_system_matrices(r, H, sigma2, P_T, coeffs, W)):
        rhs = r[k] * coeffs.E[k] * H[k]
        try:
            out[k] = hermitian_solve(A, rhs)
        except SingularSystemError:
            if not loading:
                raise IndefiniteSystemError(f"system matrix of user {k} is not positive definite") from None
            lam_min = np.linalg.eigvalsh(A)[0]
            shift = max(0.0, -lam_min) + 1e-9 * abs(np.trace(A).real) / Nt + 1e-300
            out[k] = np.linalg.solve(A + shift * np.eye(Nt), rhs)
    return BeamformerSet(out, P_T)


def _mm(H, sigma2, P_T, p, W, opts: SolveOptions):
    report = SolveReport()
    V = H.copy()
    obj = objective(H, V, sigma2, P_T, p, W)
    report.objective_trace.append(obj)
    for _ in range(opts.max_iter):
        signal, q, _ = _ratio_terms(H, V, sigma2, P_T, W)
        coeffs, nudges = anchor_coeffs(signal / q, p, opts)
        report.anchor_retries += nudges
        r = update_r(H, V, sigma2, P_T, coeffs, W)
        try:
            V_new = update_v(r, H, sigma2, P_T, coeffs, W).v
        except IndefiniteSystemError:
            V_new = update_v(r, H, sigma2, P_T, coeffs, W, loading=True).v
            report.indefinite_steps += 1
        obj_new = objective(H, V_new, sigma2, P_T, p, W) if np.all(np.isfinite(V_new)) else -np.inf
        if obj_new < obj and obj - obj_new < opts.tol:
            # rounding-level decrease at a fixed point: keep the current iterate
            report.converged = True
            break
        if not obj_new >= obj:
            # The minorizer only guarantees ascent when the update is the exact
            # maximizer of a valid bound; otherwise shorten the step between the
            # power-normalized old and new points.
            V_new, obj_new = _backtrack(H, V, V_new, obj, sigma2, P_T, p, W, opts)
            if V_new is None:
                report.stalled = True
                break
            report.backtracked_steps += 1
        report.iterations += 1
        report.objective_trace.append(obj_new)
        V, delta, obj = V_new, obj_new - obj, obj_new
        if abs(delta) < opts.tol:
            report.converged = True
            break
    report.final_objective = obj
    return V, report


def _backtrack(H, V, V_new, obj, sigma2, P_T, p, W, opts):
    if not np.all(np.isfinite(V_new)):
        return None, obj
    a = V / np.linalg.norm(V)
    b = V_new / np.linalg.norm(V_new)
    step = 1.0
    for _ in range(opts.max_backtracks):
        step *= 0.5
        cand = (1 - step) * a + step * b
        val = objective(H, cand, sigma2, P_T, p, W)
        if val > obj:
            return cand, val
    return None, obj


def phase_normalize(H, V) -> np.ndarray:
    """Rotate each beam so that ``h_k^H v_k`` is real and nonnegative."""
    direct = np.einsum("kn,kn->k", H.conj(), V)
    return V * np.exp(-1j * np.angle(direct))[:, None]


def _finish(H, V, P_T):
    V = V * np.sqrt(P_T / np.sum(np.abs(V) ** 2))
    return phase_normalize(H, V)


def optimize_uncorrelated(h, sigma2: float, P_T: float, p: LogisticParams,
                          opts: SolveOptions = SolveOptions()):
    """Run the MM beamforming loop from ``v_k = h_k``.

    Returns power-normalized beamformers (total power ``P_T``, direct gains
    real and nonnegative) and a :class:`SolveReport`.
    """
    H = np.atleast_2d(np.asarray(_h(h), dtype=complex))
    V, report = _mm(H, sigma2, P_T, p, np.ones((H.shape[0],) * 2), opts)
    return BeamformerSet(_finish(H, V, P_T), P_T), report


def wrap_phase(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class CompResult:
    """Output of the cooperative (COMP) beamformer design.

    ``beamformers`` are the phase-aligned beams, ``v_bar`` the normalized
    beams before the pair rotations, ``psi`` the receive-side phase
    multipliers (user ``k`` multiplies its samples by ``exp(1j psi[k])``)
    and ``phase_residual`` maps each pair ``(i, j)`` to
    ``angle(h_i^H v_bar_j) + angle(h_j^H v_bar_i)`` wrapped to ``(-pi, pi]``.
    """

    beamformers: BeamformerSet
    v_bar: np.ndarray
    psi: np.ndarray
    groups: tuple
    phase_residual: dict


def optimize_correlated(h, sigma2: float, P_T: float, p: LogisticParams, omega, groups,
                        opts: SolveOptions = SolveOptions()):
    """Weighted MM beamforming followed by in-pair phase alignment.

    For each pair ``(i, j)`` (in the order given) the second beam is rotated
    by ``angle(h_j^H v_bar_i)`` and user ``j`` gets receive phase
    ``psi_j = angle(h_i^H v_bar_j)``; singletons are left untouched.
    """
    H = np.atleast_2d(np.asarray(_h(h), dtype=complex))
    K = H.shape[0]
    groups = tuple(tuple(int(u) for u in g) for g in groups)
    seen = sorted(u for g in groups for u in g)
    if seen != list(range(K)):
        raise ValueError("groups must partition the users")
    if any(len(g) > 2 for g in groups):
        raise ValueError("COMP groups may contain at most two users")
    W = _omega(omega, K)
    V, report = _mm(H, sigma2, P_T, p, W, opts)
    v_bar = _finish(H, V, P_T)
    v_star = v_bar.copy()
    psi = np.zeros(K)
    residual = {}
    G = gain_matrix(H, v_bar)
    for g in groups:
        if len(g) != 2:
            continue
        i, j = g
        theta_j = np.angle(G[j, i])
        v_star[j] = np.exp(1j * theta_j) * v_bar[j]
        psi[j] = np.angle(G[i, j])
        residual[(i, j)] = float(wrap_phase(np.angle(G[i, j]) + np.angle(G[j, i])))
    result = CompResult(BeamformerSet(v_star, P_T), v_bar, psi, groups, residual)
    return result, report
