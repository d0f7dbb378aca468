"""Grids, covariance matrices, band masks and the resolution/rank/scale budget.

Matrices are plain float64 numpy arrays; the helpers here validate them at the
boundaries so the numerical modules can stay free of shape bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SYM_RTOL = 1e-12


class ScaleSepError(ValueError):
    """Base class for invalid-input errors raised by this package."""


class InvalidBandError(ScaleSepError):
    pass


class InsufficientDataError(ScaleSepError):
    pass


class UnidentifiableError(ScaleSepError):
    pass


class DimensionError(ScaleSepError):
    pass


@dataclass(frozen=True)
class Grid:
    """K observation points, the j-th one lying in [(j-1)/K, j/K]."""

    K: int
    points: np.ndarray = field(repr=False)
    placement: str = "midpoint"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if self.K < 1 or pts.shape != (self.K,):
            raise DimensionError(f"grid needs {self.K} points, got shape {pts.shape}")
        j = np.arange(self.K)
        if np.any(pts < j / self.K) or np.any(pts > (j + 1) / self.K):
            raise ScaleSepError("grid point outside its partition interval")
        if np.any(np.diff(pts) <= 0):
            raise ScaleSepError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def midpoint(cls, K: int) -> Grid:
        return cls(K, (np.arange(K) + 0.5) / K, "midpoint")

    @classmethod
    def uniform_random(cls, K: int, seed: int) -> Grid:
        rng = np.random.default_rng(seed)
        # keep away from the interval edges so points stay strictly increasing
        u = rng.uniform(1e-9, 1 - 1e-9, size=K)
        return cls(K, (np.arange(K) + u) / K, f"uniform-random({seed})")


@dataclass(frozen=True)
class BandMask:
    """Indicator of the entries strictly outside the band |i - j| <= half_band."""

    K: int
    half_band: int

    @property
    def matrix(self) -> np.ndarray:
        idx = np.arange(self.K)
        return (np.abs(idx[:, None] - idx[None, :]) > self.half_band).astype(float)

    @property
    def n_ones(self) -> int:
        w = self.half_band
        band = self.K + 2 * sum(self.K - d for d in range(1, min(w, self.K - 1) + 1))
        return self.K * self.K - band


def build_band_mask(K: int, half_band: int | None = None) -> BandMask:
    """Mask of off-band entries; the default half-band is ceil(K/4)."""
    if K < 1:
        raise DimensionError("K must be positive")
    if half_band is None:
        half_band = math.ceil(K / 4)
    if half_band < 0:
        raise InvalidBandError("half-band must be nonnegative")
    if half_band >= K:
        raise InvalidBandError(f"half-band {half_band} >= K={K} leaves no off-band entries")
    return BandMask(K, int(half_band))


def band_indicator(K: int, half_band: int) -> np.ndarray:
    """Complement of the mask: 1 on |i - j| <= half_band."""
    idx = np.arange(K)
    return (np.abs(idx[:, None] - idx[None, :]) <= half_band).astype(float)


def as_samples(values) -> np.ndarray:
    X = np.asarray(values, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"sample matrix must be 2-d, got {X.ndim}-d")
    if not np.all(np.isfinite(X)):
        raise ScaleSepError("sample matrix has non-finite entries")
    return X


def as_symcov(values) -> np.ndarray:
    M = np.asarray(values, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"covariance must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ScaleSepError("covariance has non-finite entries")
    scale = max(np.max(np.abs(M), initial=0.0), 1.0)
    if np.max(np.abs(M - M.T), initial=0.0) > SYM_RTOL * scale:
        raise ScaleSepError("covariance is not symmetric")
    return M


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def empirical_covariance(samples, center: bool = True) -> np.ndarray:
    """Second-moment matrix (1/n) sum_i (X_i - m)(X_i - m)^T."""
    X = as_samples(samples)
    n = X.shape[0]
    if n < (2 if center else 1):
        raise InsufficientDataError(f"need at least {2 if center else 1} curves, got {n}")
    if center:
        X = X - X.mean(axis=0)
    return symmetrize(X.T @ X / n)


@dataclass(frozen=True)
class ResolutionBudget:
    r: int
    delta: float
    Kstar: int

    @property
    def estimation_Kstar(self) -> int:
        # critical resolution for the band-masked estimator
        return 4 * (self.r + 1)

    @property
    def estimable(self) -> bool:
        return self.delta < 0.25

    def identifiable(self, K: int) -> bool:
        return K >= self.Kstar


def critical_resolution(r: int, delta: float) -> ResolutionBudget:
    if r < 1:
        raise ScaleSepError("rank must be at least 1")
    if not 0 < delta < 0.5:
        raise UnidentifiableError(f"band scale {delta} outside (0, 1/2)")
    kstar = max((2 * r + 2) / (1 - 2 * delta), 4 * r + 4)
    # guard against 8.000000000000002 style round-up
    kstar = math.ceil(kstar - 1e-9)
    return ResolutionBudget(r, float(delta), kstar)
