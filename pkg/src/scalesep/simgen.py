"""Synthetic smooth-plus-rough functional data and the evaluation metrics.

Smooth curves are Y_i = sum_a c_ia sqrt(lambda_a) eta_a with c_ia ~ N(0, 1);
rough curves come from a moving average (MA), locally supported triangular
(TRI) or reflected Brownian bridge (RBB) eigenfunctions, or white noise.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .covmodel import Grid, ScaleSepError, as_symcov, symmetrize

log = logging.getLogger(__name__)

SCENARIOS = {
    "A": ("FB", "MA"), "B": ("AC", "MA"), "C": ("LP", "MA"),
    "D": ("FB", "TRI"), "E": ("AC", "TRI"), "F": ("LP", "TRI"),
    "G": ("FB", "RBB"), "H": ("AC", "RBB"), "I": ("LP", "RBB"),
    "WHITE": ("FB", "WHITE"),
}
COMBOS = {1: (1, 0.05), 2: (1, 0.1), 3: (3, 0.05), 4: (3, 0.1), 5: (5, 0.05), 6: (5, 0.1)}
WHITE_VARIANCE = 0.09

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

_AC = [
    lambda t: 5 * t * np.sin(2 * np.pi * t),
    lambda t: t * np.cos(2 * np.pi * t) - 3,
    lambda t: 5 * t + np.sin(2 * np.pi * t) - 2,
    lambda t: np.cos(4 * np.pi * t) + (t / 2) ** 2,
    lambda t: 6 * t * (1 - t),  # Gamma(4) / (Gamma(2) Gamma(2)) = 6
]
_LP = [
    lambda t: 6 * t**2 - 6 * t + 1,
    lambda t: 2 * t - 1,
    lambda t: np.ones_like(t),
    lambda t: 20 * t**3 - 30 * t**2 + 12 * t - 1,
    lambda t: 70 * t**4 - 140 * t**3 + 90 * t**2 - 20 * t + 1,
]


@dataclass(frozen=True)
class ScenarioConfig:
    smooth_basis: str = "FB"
    rough_kind: str = "MA"
    r: int = 3
    delta: float = 0.05
    regime: int = 1
    n: int = 300
    K: int = 100
    seed: int = 0
    smooth_scale: float = 1.0
    rough_scale: float = 1.0

    def __post_init__(self):
        if self.smooth_basis not in ("FB", "AC", "LP"):
            raise ScaleSepError(f"unknown smooth basis {self.smooth_basis!r}")
        if self.rough_kind not in ("MA", "TRI", "RBB", "WHITE"):
            raise ScaleSepError(f"unknown rough kind {self.rough_kind!r}")
        if self.r < 1 or self.n < 1 or self.K < 2:
            raise ScaleSepError("r, n must be positive and K at least 2")
        if not 0 < self.delta < 0.5:
            raise ScaleSepError(f"delta {self.delta} outside (0, 1/2)")
        if self.regime not in (1, 2):
            raise ScaleSepError("regime must be 1 or 2")
        if self.regime == 2 and self.r == 1:
            raise ScaleSepError("regime 2 needs r > 1")
        if self.smooth_basis != "FB" and self.r > 5:
            raise ScaleSepError(f"{self.smooth_basis} basis has only 5 functions")

    @classmethod
    def from_scenario(cls, scenario: str, combo: int = 3, regime: int = 1, n: int = 300,
                      K: int = 100, seed: int = 0, **overrides) -> ScenarioConfig:
        try:
            smooth, rough = SCENARIOS[scenario.upper()]
        except KeyError:
            raise ScaleSepError(f"unknown scenario {scenario!r}; expected one of {sorted(SCENARIOS)}") from None
        if combo not in COMBOS:
            raise ScaleSepError(f"combination must be in 1..6, got {combo}")
        r, delta = COMBOS[combo]
        kw = dict(smooth_basis=smooth, rough_kind=rough, r=r, delta=delta, regime=regime,
                  n=n, K=K, seed=seed)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ScenarioConfig:
        return cls(**json.loads(text))


@dataclass
class PopulationTruth:
    config: ScenarioConfig
    grid: Grid
    eta: np.ndarray = field(repr=False)
    lambdas: np.ndarray = field(repr=False)
    betas: np.ndarray = field(repr=False)
    ma_weights: np.ndarray = field(repr=False)
    Ltrue: np.ndarray = field(repr=False)
    Btrue: np.ndarray = field(repr=False)
    Lsample: np.ndarray = field(repr=False)
    Bsample: np.ndarray = field(repr=False)
    Ysample: np.ndarray = field(repr=False)
    Wsample: np.ndarray = field(repr=False)

    @property
    def Rtrue(self) -> np.ndarray:
        return self.Ltrue + self.Btrue

    @property
    def Rsample(self) -> np.ndarray:
        return self.Lsample + self.Bsample

    @property
    def samples(self) -> np.ndarray:
        return self.Ysample + self.Wsample

    def metadata(self) -> dict:
        return {
            "config": asdict(self.config),
            "grid": [float(t) for t in self.grid.points],
            "lambdas": self.lambdas.tolist(),
            "betas": self.betas.tolist(),
            "ma_weights": self.ma_weights.tolist(),
        }


def _orthonormalize(F: np.ndarray) -> np.ndarray:
    """Gram-Schmidt of the columns of F under <u, v> = (1/K) u.v, in column order."""
    K = F.shape[0]
    Q, Rf = np.linalg.qr(F)
    Q = Q * np.sign(np.diag(Rf))
    return np.sqrt(K) * Q


def smooth_basis(kind: str, r: int, grid: Grid) -> np.ndarray:
    """K x r matrix whose columns are the smooth eigenfunctions on the grid."""
    t = grid.points
    if kind == "FB":
        if r == 1:
            return (np.sqrt(2) * np.sin(2 * np.pi * t))[:, None]
        cols = [np.ones_like(t)]
        k = 1
        while len(cols) < r:
            cols.append(np.sqrt(2) * np.sin(2 * np.pi * k * t))
            if len(cols) < r:
                cols.append(np.sqrt(2) * np.cos(2 * np.pi * k * t))
            k += 1
        return np.column_stack(cols)
    funcs = {"AC": _AC, "LP": _LP}.get(kind)
    if funcs is None:
        raise ScaleSepError(f"unknown smooth basis {kind!r}")
    if r > len(funcs):
        raise ScaleSepError(f"{kind} has {len(funcs)} functions, asked for {r}")
    return _orthonormalize(np.column_stack([f(t) for f in funcs[:r]]))


def eigenvalues(regime: int, r: int, d: int = 0):
    """Smooth eigenvalues and the first d rough ones."""
    if regime == 1:
        lam = np.array([0.25]) if r == 1 else np.linspace(1.45, 0.25, r)
    elif regime == 2:
        if r == 1:
            raise ScaleSepError("regime 2 is defined for r > 1 only")
        lam = np.linspace(1.0, 0.04, r)
    else:
        raise ScaleSepError(f"unknown regime {regime}")
    beta = np.array([0.09] + [0.04 * 2.0 ** -(a - 1) for a in range(2, d + 1)])[:d]
    return lam, beta


def n_rough_components(delta: float) -> int:
    return max(1, int(math.floor(1.0 / delta + 1e-9)))


def triangle_basis(delta: float, grid: Grid) -> np.ndarray:
    """Unit-L^2 triangular bumps on [(a-1) delta, a delta], a = 1..floor(1/delta)."""
    t = grid.points
    d = n_rough_components(delta)
    height = np.sqrt(3.0 / delta)
    cols = []
    for a in range(1, d + 1):
        lo, mid = (a - 1) * delta, (a - 0.5) * delta
        cols.append(height * np.clip(1.0 - np.abs(t - mid) / (mid - lo), 0.0, None))
    return np.column_stack(cols)


def rbb_basis(delta: float, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Fixed reflected Brownian bridge shapes, one per support interval, unit L^2 norm."""
    t = grid.points
    d = n_rough_components(delta)
    m = max(10 * math.ceil(delta * grid.K), 20)
    cols = []
    for a in range(1, d + 1):
        lo, hi = (a - 1) * delta, a * delta
        s = np.linspace(lo, hi, m + 1)
        steps = rng.standard_normal(m) * np.sqrt(delta / m)
        walk = np.concatenate([[0.0], np.cumsum(steps)])
        bridge = np.abs(walk - (s - lo) / delta * walk[-1])
        norm = np.sqrt(_trapezoid(bridge**2, s))
        inside = (t >= lo) & (t <= hi)
        col = np.zeros_like(t)
        col[inside] = np.interp(t[inside], s, bridge / norm)
        cols.append(col)
    return np.column_stack(cols)


def ma_operator(K: int, weights: np.ndarray) -> np.ndarray:
    """Lower-banded Theta with W = Theta eps, indices before the grid start zero-padded."""
    Theta = np.zeros((K, K))
    for a, w in enumerate(weights):
        Theta += w * np.eye(K, k=-a)
    return Theta


def generate(cfg: ScenarioConfig, grid: Grid | None = None) -> PopulationTruth:
    grid = grid or Grid.midpoint(cfg.K)
    if grid.K != cfg.K:
        raise ScaleSepError("grid resolution differs from the configuration")
    K, n = cfg.K, cfg.n
    structure_ss, y_ss, w_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    structure_rng = np.random.default_rng(structure_ss)

    eta = smooth_basis(cfg.smooth_basis, cfg.r, grid)
    lam = cfg.smooth_scale * eigenvalues(cfg.regime, cfg.r)[0]
    coef = np.random.default_rng(y_ss).standard_normal((n, cfg.r))
    Y = (coef * np.sqrt(lam)) @ eta.T
    Ltrue = symmetrize((eta * lam) @ eta.T)

    w_rng = np.random.default_rng(w_ss)
    ma_weights = np.zeros(0)
    betas = np.zeros(0)
    if cfg.rough_kind == "MA":
        q = math.ceil(K * cfg.delta / 2 - 1e-9)
        ma_weights = np.concatenate([[1.0], structure_rng.uniform(-1.0, 1.0, size=q)])
        Theta = np.sqrt(cfg.rough_scale) * ma_operator(K, ma_weights)
        W = w_rng.standard_normal((n, K)) @ Theta.T
        Btrue = symmetrize(Theta @ Theta.T)
    elif cfg.rough_kind == "WHITE":
        sigma2 = cfg.rough_scale * WHITE_VARIANCE
        W = np.sqrt(sigma2) * w_rng.standard_normal((n, K))
        Btrue = sigma2 * np.eye(K)
    else:
        psi = triangle_basis(cfg.delta, grid) if cfg.rough_kind == "TRI" else rbb_basis(cfg.delta, grid, structure_rng)
        betas = cfg.rough_scale * eigenvalues(cfg.regime, cfg.r, psi.shape[1])[1]
        W = (w_rng.standard_normal((n, psi.shape[1])) * np.sqrt(betas)) @ psi.T
        Btrue = symmetrize((psi * betas) @ psi.T)

    return PopulationTruth(
        config=cfg, grid=grid, eta=eta, lambdas=lam, betas=betas, ma_weights=ma_weights,
        Ltrue=Ltrue, Btrue=Btrue,
        Lsample=symmetrize(Y.T @ Y / n), Bsample=symmetrize(W.T @ W / n),
        Ysample=Y, Wsample=W,
    )


def err(u, ref) -> float:
    """Relative Frobenius error ||u - ref|| / ||ref||."""
    u = np.asarray(u, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if u.shape != ref.shape:
        raise ScaleSepError(f"shape mismatch {u.shape} vs {ref.shape}")
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise ScaleSepError("reference matrix is zero")
    return float(np.linalg.norm(u - ref) / denom)


def rel_mise(Yhat, Ypi) -> float:
    """Mean over curves of ||Yhat_i - Pi_i||^2 / ||Pi_i||^2; zero-norm references are skipped."""
    Yhat = np.atleast_2d(np.asarray(Yhat, dtype=float))
    Ypi = np.atleast_2d(np.asarray(Ypi, dtype=float))
    if Yhat.shape != Ypi.shape:
        raise ScaleSepError(f"shape mismatch {Yhat.shape} vs {Ypi.shape}")
    den = np.sum(Ypi**2, axis=1)
    ok = den > 0
    if not np.all(ok):
        log.warning("relMISE: %d curve(s) with zero reference norm excluded", int(np.sum(~ok)))
    if not np.any(ok):
        raise ScaleSepError("all reference curves are zero")
    num = np.sum((Yhat - Ypi) ** 2, axis=1)
    return float(np.mean(num[ok] / den[ok]))


def kl_truncate(Rn, variance_target: float = 0.95) -> np.ndarray:
    """Leading eigenblock of Rn explaining at least ``variance_target`` of the trace."""
    if not 0 < variance_target <= 1:
        raise ScaleSepError("variance target must be in (0, 1]")
    R = as_symcov(Rn)
    vals, vecs = np.linalg.eigh(symmetrize(R))
    order = np.argsort(vals)[::-1]
    vals, vecs = np.clip(vals[order], 0.0, None), vecs[:, order]
    total = vals.sum()
    if total <= 0:
        return np.zeros_like(R)
    ratio = np.cumsum(vals) / total
    m = min(int(np.searchsorted(ratio, variance_target * (1 - 1e-12))) + 1, len(vals))
    return symmetrize((vecs[:, :m] * vals[:m]) @ vecs[:, :m].T)
