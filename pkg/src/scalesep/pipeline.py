"""End-to-end covariance decomposition: completion, rank choice, banded projection, spectra."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .banded import DykstraState, estimate_banded
from .completion import (RankRule, RankSelection, ScreeResult, SolverConfig, complete_at_rank,
                         default_max_rank, scree, select_rank)
from .covmodel import ScaleSepError, as_symcov, build_band_mask, symmetrize
from .spectra import DEFAULT_CUTOFF, Spectrum, spectrum

log = logging.getLogger(__name__)


@dataclass
class Decomposition:
    Rn: np.ndarray = field(repr=False)
    Lhat: np.ndarray = field(repr=False)
    Bhat: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    half_band: int
    selection: RankSelection
    scree: ScreeResult = field(repr=False)
    dykstra: DykstraState = field(repr=False)
    L_spectrum: Spectrum = field(repr=False)
    B_spectrum: Spectrum = field(repr=False)
    R_spectrum: Spectrum = field(repr=False)

    @property
    def Rhat(self) -> np.ndarray:
        return self.Lhat + self.Bhat

    @property
    def rank(self) -> int:
        return self.selection.selected_rank

    @property
    def converged(self) -> bool:
        return self.scree.at(self.rank).converged and self.dykstra.converged


def decompose(Rn, half_band: int | None = None, rule: RankRule | None = None,
              max_rank: int | None = None, cfg: SolverConfig | None = None,
              cutoff: float = DEFAULT_CUTOFF, dykstra_tol: float = 1e-10,
              dykstra_max_iter: int = 1000) -> Decomposition:
    """Split a covariance matrix into a low-rank part and a banded PSD part.

    ``half_band`` sets both the completion mask and the bandwidth of the
    banded estimate; it defaults to ceil(K/4). With a fixed rank rule the
    scree is only computed up to that rank.
    """
    Rn = as_symcov(Rn)
    K = Rn.shape[0]
    mask = build_band_mask(K, half_band)
    rule = rule or RankRule.threshold()
    if rule.kind == "fixed":
        top = int(rule.value)
        if top > K - 1:
            raise ScaleSepError(f"fixed rank {top} must be below K={K}")
    else:
        top = max_rank or default_max_rank(K)
    result = scree(Rn, mask, top, cfg)
    selection = select_rank(result, rule)
    fit = result.at(selection.selected_rank)
    if K < 4 * (selection.selected_rank + 1):
        log.warning("K=%d is below the critical resolution 4(r+1)=%d for rank %d",
                    K, 4 * (selection.selected_rank + 1), selection.selected_rank)
    Lhat = symmetrize(fit.C @ fit.C.T)
    Bhat, delta, state = estimate_banded(Rn, Lhat, mask.half_band, dykstra_tol, dykstra_max_iter)
    return Decomposition(
        Rn=Rn, Lhat=Lhat, Bhat=Bhat, delta=delta, half_band=mask.half_band,
        selection=selection, scree=result, dykstra=state,
        L_spectrum=spectrum(Lhat, cutoff).leading(selection.selected_rank),
        B_spectrum=spectrum(Bhat, cutoff),
        R_spectrum=spectrum(Lhat + Bhat, cutoff),
    )


def estimate_smooth(Rn, rank: int, half_band: int | None = None,
                    cfg: SolverConfig | None = None) -> np.ndarray:
    """Low-rank completion at a single rank from the spectral start."""
    Rn = as_symcov(Rn)
    mask = build_band_mask(Rn.shape[0], half_band)
    fit = complete_at_rank(Rn, rank, mask, cfg)
    return symmetrize(fit.C @ fit.C.T)


def default_half_band(K: int) -> int:
    return math.ceil(K / 4)
