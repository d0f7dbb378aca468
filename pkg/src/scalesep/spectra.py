"""Spectra of K-resolution operators.

A K x K matrix M of kernel values defines an integral operator with a step
kernel; on step functions it acts as M / K. Operator eigenvalues are therefore
matrix eigenvalues divided by K, and eigenfunctions are eigenvectors scaled to
unit L^2 norm, i.e. (1/K) sum_k v(k)^2 = 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .covmodel import ScaleSepError, as_symcov, symmetrize

DEFAULT_CUTOFF = 1e-10


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    effective_rank: int
    cutoff: float = DEFAULT_CUTOFF

    @property
    def K(self) -> int:
        return self.eigenvectors.shape[0]

    def leading(self, m: int | None = None) -> Spectrum:
        m = self.effective_rank if m is None else m
        return Spectrum(self.eigenvalues[:m], self.eigenvectors[:, :m],
                        min(m, self.effective_rank), self.cutoff)

    def matrix(self) -> np.ndarray:
        """Rebuild the K x K matrix: sum_j lambda_j v_j v_j^T."""
        V = self.eigenvectors
        return symmetrize((V * self.eigenvalues) @ V.T)

    def gaps(self) -> np.ndarray:
        """Eigen-gaps lambda_j - lambda_{j+1}; diagnostic only."""
        return -np.diff(self.eigenvalues)


def spectrum(M, cutoff: float = DEFAULT_CUTOFF) -> Spectrum:
    M = as_symcov(M)
    K = M.shape[0]
    try:
        vals, vecs = np.linalg.eigh(symmetrize(M))
    except np.linalg.LinAlgError as exc:
        raise ScaleSepError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    # deterministic sign: largest-magnitude entry positive
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(K)])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    lam = vals / K
    top = lam[0] if K else 0.0
    eff = int(np.sum(lam > cutoff * top)) if top > 0 else 0
    return Spectrum(lam, np.sqrt(K) * vecs, eff, cutoff)


def pseudo_inverse_apply(spec: Spectrum, x, rank_cutoff: float | None = None) -> np.ndarray:
    """M^+ x, dropping eigenvalues at or below rank_cutoff * lambda_1."""
    x = np.asarray(x, dtype=float)
    cutoff = spec.cutoff if rank_cutoff is None else rank_cutoff
    lam = spec.eigenvalues
    K = spec.K
    if lam.size == 0 or lam[0] <= 0:
        warnings.warn("no eigenvalue above the cutoff; pseudo-inverse is zero", RuntimeWarning)
        return np.zeros_like(x)
    keep = lam > cutoff * lam[0]
    V = spec.eigenvectors[:, keep]
    # v v^T = K u u^T and the matrix eigenvalue is K lambda
    coef = (V.T @ x) / (K * K * lam[keep]).reshape((-1,) + (1,) * (x.ndim - 1))
    return V @ coef
