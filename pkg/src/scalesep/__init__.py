"""Separate smooth (low-rank) and rough (banded) covariance structure in functional data."""

from .banded import dykstra_project, estimate_banded, project_banded, project_psd
from .blp import CurveSeparation, blp_scores, oracle_blp, separate
from .completion import (RankRule, RankSelection, ScreeResult, SolverConfig, complete_at_rank,
                         masked_gradient, masked_objective, scree, select_rank)
from .covmodel import (BandMask, Grid, ResolutionBudget, ScaleSepError, build_band_mask,
                       critical_resolution, empirical_covariance)
from .pipeline import Decomposition, decompose
from .simgen import ScenarioConfig, err, generate, kl_truncate, rel_mise
from .spectra import Spectrum, pseudo_inverse_apply, spectrum

__version__ = "0.1.0"
