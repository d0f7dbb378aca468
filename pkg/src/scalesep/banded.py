"""Nearest banded positive semi-definite matrix.

The default solver minimises the dual function phi(Z) = 0.5 ||(M + Z)_+||_F^2
over Z supported off the band. Its gradient is the off-band part of
(M + Z)_+ and is semismooth, so generalised Newton steps (solved by conjugate
gradients) converge fast.
Plain Dykstra alternating projections are kept as ``method="dykstra"``; they
reach the same point but converge sublinearly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .covmodel import DimensionError, ScaleSepError, as_symcov, band_indicator, symmetrize

log = logging.getLogger(__name__)


@dataclass
class DykstraState:
    """Solver record; ``multiplier`` is the dual variable Z (dual method) or the
    band correction term (Dykstra), ``psd_correction`` is only used by Dykstra."""
    iterate: np.ndarray = field(repr=False)
    multiplier: np.ndarray = field(repr=False)
    psd_correction: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0
    last_change: float = np.inf
    converged: bool = False
    method: str = "dual"


def project_banded(M, w: int) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if w >= M.shape[0]:
        raise ScaleSepError(f"half-band {w} must be below K={M.shape[0]}")
    return M * band_indicator(M.shape[0], w)


def project_psd(M) -> np.ndarray:
    """Clip negative eigenvalues to zero."""
    try:
        vals, vecs = np.linalg.eigh(symmetrize(np.asarray(M, dtype=float)))
    except np.linalg.LinAlgError as exc:
        raise ScaleSepError(f"eigensolver failed: {exc}") from exc
    out = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return symmetrize(out)


def dykstra_project(M, w: int, tol: float = 1e-10, max_iter: int = 1000,
                    return_state: bool = False, method: str = "dual"):
    """Frobenius projection of M onto {banded with half-band w} intersected with the PSD cone.

    Both solvers stop once their residual falls below ``tol * (1 + ||M||_F)``:
    the off-band mass of the PSD iterate for ``"dual"``, the change of the
    iterate over one sweep for ``"dykstra"``. A final band sweep makes the
    result banded exactly; it is PSD up to the stopping residual.
    """
    M = as_symcov(M)
    K = M.shape[0]
    if w >= K:
        raise ScaleSepError(f"half-band {w} must be below K={K}")
    band = band_indicator(K, w)
    stop = tol * (1.0 + np.linalg.norm(M))
    if method == "dual":
        state = _dual(M, band, stop, max_iter)
    elif method == "dykstra":
        state = _dykstra(M, band, stop, max_iter)
    else:
        raise ScaleSepError(f"unknown projection method {method!r}")
    if not state.converged:
        log.warning("banded PSD projection stopped at %d iterations (residual %.3g)",
                    state.iterations, state.last_change)
    state.iterate = symmetrize(state.iterate * band)
    return (state.iterate, state) if return_state else state.iterate


def _dykstra(M, band, stop, max_iter) -> DykstraState:
    x = M.copy()
    p = np.zeros_like(M)
    q = np.zeros_like(M)
    state = DykstraState(x, p, q, method="dykstra")
    for it in range(1, max_iter + 1):
        y = (x + p) * band
        p = x + p - y
        x_new = project_psd(y + q)
        q = y + q - x_new
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        state.iterations, state.last_change = it, change
        if change < stop:
            state.converged = True
            break
    state.iterate, state.multiplier, state.psd_correction = x, p, q
    return state


def _eig_psd(A):
    try:
        lam, Q = np.linalg.eigh(symmetrize(A))
    except np.linalg.LinAlgError as exc:
        raise ScaleSepError(f"eigensolver failed: {exc}") from exc
    X = symmetrize((Q * np.clip(lam, 0.0, None)) @ Q.T)
    return lam, Q, X


def _jacobian_weights(lam):
    """Divided differences of max(x, 0) at the eigenvalues."""
    pos = lam > 0
    li, lj = lam[:, None], lam[None, :]
    num = np.clip(li, 0, None) - np.clip(lj, 0, None)
    den = li - lj
    with np.errstate(divide="ignore", invalid="ignore"):
        W = np.where(np.abs(den) > 0, num / den, 0.0)
    both = pos[:, None] & pos[None, :]
    W[both] = 1.0
    W[~pos[:, None] & ~pos[None, :]] = 0.0
    return W


def _cg(apply, b, tol, max_iter):
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(np.sum(r * r))
    for _ in range(max_iter):
        if np.sqrt(rr) <= tol:
            break
        Ap = apply(p)
        alpha = rr / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(np.sum(r * r))
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def _dual(M, band, stop, max_iter) -> DykstraState:
    """Semismooth Newton on phi(Z) = 0.5 ||(M + Z)_+||^2, Z supported off the band."""
    off = 1.0 - band
    Z = np.zeros_like(M)
    lam, Q, X = _eig_psd(M)
    f = 0.5 * float(np.sum(X * X))
    G = off * X
    state = DykstraState(X, Z)
    for it in range(1, max_iter + 1):
        res = float(np.linalg.norm(G))
        state.last_change = res
        if res < stop:
            state.converged = True
            break
        Om = _jacobian_weights(lam)
        mu = min(1e-2, res)

        def apply(H):
            return off * (Q @ (Om * (Q.T @ H @ Q)) @ Q.T) + mu * H

        d = _cg(apply, -G, min(0.1, res) * res, 200)
        slope = float(np.sum(G * d))
        if slope >= 0:
            d, slope = -G, -res * res
        t = 1.0
        for _ in range(50):
            lam_n, Q_n, X_n = _eig_psd(M + Z + t * d)
            f_n = 0.5 * float(np.sum(X_n * X_n))
            # slack of a few ulps: near the solution the predicted decrease
            # drops below the rounding error of f
            if f_n <= f + 1e-4 * t * slope + 8 * np.spacing(f):
                break
            t *= 0.5
        else:
            break
        Z = Z + t * d
        lam, Q, X, f = lam_n, Q_n, X_n, f_n
        G = off * X
        state.iterations = it
    else:
        state.last_change = float(np.linalg.norm(G))
        state.converged = state.last_change < stop
    state.iterate, state.multiplier = X, Z
    return state


def estimate_banded(Rn, Lhat, w: int, tol: float = 1e-10, max_iter: int = 1000):
    """Plug-in banded estimate: project Rn - Lhat; returns (Bhat, raw difference, state)."""
    Rn = as_symcov(Rn)
    Lhat = np.asarray(Lhat, dtype=float)
    if Lhat.shape != Rn.shape:
        raise DimensionError(f"Rn {Rn.shape} vs Lhat {Lhat.shape}")
    delta = symmetrize(Rn - Lhat)
    Bhat, state = dykstra_project(delta, w, tol, max_iter, return_state=True)
    return Bhat, delta, state
