"""Separation of each curve into smooth and rough parts by best linear prediction.

The smooth part's scores are predicted as

    xi_j = lambda_j * eta_j^T R^+ X

with R the K x K covariance matrix of the observed vector, (lambda_j, eta_j)
the operator eigenpairs of the smooth covariance, eta_j scaled to unit L^2
norm. This is Cov(<Y, eta_j>, X) Cov(X)^+ X written in the step-function
normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covmodel import DimensionError, as_samples, as_symcov
from .spectra import Spectrum, pseudo_inverse_apply


@dataclass
class CurveSeparation:
    Yhat: np.ndarray = field(repr=False)
    What: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)
    rhat: int


def blp_scores(X, Lspec: Spectrum, Rspec: Spectrum) -> np.ndarray:
    """Predicted smooth scores for one curve (K-vector) or many (n x K rows)."""
    X = np.asarray(X, dtype=float)
    if Lspec.K != Rspec.K or X.shape[-1] != Lspec.K:
        raise DimensionError("spectra and curve must share K")
    r = Lspec.effective_rank
    if r == 0:
        return np.zeros(X.shape[:-1] + (0,))
    eta = Lspec.eigenvectors[:, :r]
    lam = Lspec.eigenvalues[:r]
    Z = pseudo_inverse_apply(Rspec, X.T)
    return (eta.T @ Z).T * lam


def separate(samples, decomp, mean=None) -> CurveSeparation:
    """Smooth predictions, rough residuals and scores for every row of ``samples``.

    ``mean`` is subtracted before prediction and added back to the smooth part.
    """
    X = as_samples(samples) if np.size(samples) else np.zeros((0, decomp.L_spectrum.K))
    K = decomp.L_spectrum.K
    if X.shape[1] != K:
        raise DimensionError(f"samples have K={X.shape[1]}, decomposition has K={K}")
    m = np.zeros(K) if mean is None else np.asarray(mean, dtype=float)
    scores = blp_scores(X - m, decomp.L_spectrum, decomp.R_spectrum)
    r = scores.shape[1]
    Yhat = scores @ decomp.L_spectrum.eigenvectors[:, :r].T + m
    # residual definition; Yhat + What reproduces X up to one rounding
    What = X - Yhat
    return CurveSeparation(Yhat, What, scores, r)


def oracle_blp(X, Ltrue, Rtrue, rcond: float = 1e-10) -> np.ndarray:
    """Best linear predictor L R^+ X from population matrices (rows of X or a vector)."""
    L = as_symcov(Ltrue)
    R = as_symcov(Rtrue)
    X = np.asarray(X, dtype=float)
    Rp = np.linalg.pinv(R, rcond=rcond, hermitian=True)
    return (L @ Rp @ X.T).T
